#include "gmap/potential.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "gmap/rng.hpp"

namespace gmap {

Vec finite_diff_gradient(const std::function<double(const Vec&)>& f, const Vec& x) {
  Vec g(x.size());
  Vec xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double h = std::max(1e-6, 1e-6 * std::abs(x[i]));
    const double xi = x[i];
    xp[i] = xi + h;
    const double fp = f(xp);
    xp[i] = xi - h;
    const double fm = f(xp);
    xp[i] = xi;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

Vec potential_gradient(const Potential& p, const Vec& x) {
  if (p.has_gradient()) return p.gradient(x);
  return finite_diff_gradient(p.evaluate, x);
}

Vec Matrix::apply(const Vec& x) const {
  if (x.size() != cols) throw std::invalid_argument("Matrix::apply: dimension mismatch");
  Vec out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += data[r * cols + c] * x[c];
    out[r] = s;
  }
  return out;
}

Vec Matrix::apply_transpose(const Vec& v) const {
  if (v.size() != rows) throw std::invalid_argument("Matrix::apply_transpose: dimension mismatch");
  Vec out(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c] += data[r * cols + c] * v[r];
  return out;
}

Potential quadratic_misfit(Matrix G, Vec y, double noise_sd) {
  if (!(noise_sd > 0.0)) throw std::invalid_argument("quadratic_misfit: noise_sd must be positive");
  if (G.rows != y.size()) throw std::invalid_argument("quadratic_misfit: G rows must match y length");
  if (G.data.size() != G.rows * G.cols)
    throw std::invalid_argument("quadratic_misfit: matrix data size mismatch");
  const double inv_var = 1.0 / (noise_sd * noise_sd);
  auto Gp = std::make_shared<Matrix>(std::move(G));
  auto yp = std::make_shared<Vec>(std::move(y));

  Potential p;
  p.label = "quadratic_misfit";
  p.evaluate = [Gp, yp, inv_var](const Vec& x) {
    const Vec gx = Gp->apply(x);
    double s = 0.0;
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const double d = (*yp)[i] - gx[i];
      s += d * d;
    }
    return 0.5 * s * inv_var;
  };
  p.gradient = [Gp, yp, inv_var](const Vec& x) {
    Vec res = Gp->apply(x);
    for (std::size_t i = 0; i < res.size(); ++i) res[i] -= (*yp)[i];
    Vec g = Gp->apply_transpose(res);
    for (auto& v : g) v *= inv_var;
    return g;
  };
  return p;
}

Potential nonlinear_misfit(std::function<Vec(const Vec&)> G, Vec y, double noise_sd,
                           std::function<Vec(const Vec&)> gradient) {
  if (!(noise_sd > 0.0)) throw std::invalid_argument("nonlinear_misfit: noise_sd must be positive");
  const double inv_var = 1.0 / (noise_sd * noise_sd);
  auto yp = std::make_shared<Vec>(std::move(y));
  auto Gp = std::make_shared<std::function<Vec(const Vec&)>>(std::move(G));

  Potential p;
  p.label = "nonlinear_misfit";
  p.evaluate = [Gp, yp, inv_var](const Vec& x) {
    const Vec gx = (*Gp)(x);
    if (gx.size() != yp->size())
      throw EvaluationError("nonlinear_misfit: forward map output length mismatch", x);
    double s = 0.0;
    for (std::size_t i = 0; i < gx.size(); ++i) {
      if (!std::isfinite(gx[i]))
        throw EvaluationError("nonlinear_misfit: forward map returned non-finite value", x);
      const double d = (*yp)[i] - gx[i];
      s += d * d;
    }
    return 0.5 * s * inv_var;
  };
  p.gradient = std::move(gradient);
  return p;
}

Potential cubic_misfit(Vec y, double noise_sd) {
  if (!(noise_sd > 0.0)) throw std::invalid_argument("cubic_misfit: noise_sd must be positive");
  const double inv_var = 1.0 / (noise_sd * noise_sd);
  auto yp = std::make_shared<Vec>(std::move(y));

  Potential p;
  p.label = "cubic_misfit";
  p.evaluate = [yp, inv_var](const Vec& x) {
    if (x.size() != yp->size())
      throw EvaluationError("cubic_misfit: dimension mismatch", x);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = (*yp)[i] - x[i] * x[i] * x[i];
      s += d * d;
    }
    return 0.5 * s * inv_var;
  };
  p.gradient = [yp, inv_var](const Vec& x) {
    Vec g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
      g[i] = -3.0 * x[i] * x[i] * ((*yp)[i] - x[i] * x[i] * x[i]) * inv_var;
    return g;
  };
  return p;
}

Potential unbounded_below_example(double a, AmbientNorm norm) {
  if (!(a > 0.0)) throw std::invalid_argument("unbounded_below_example: a must be positive");
  Potential p;
  p.label = "neg_norm";
  p.evaluate = [a, norm](const Vec& x) { return -a * ambient_norm(norm, x); };
  if (norm == AmbientNorm::TwoNorm) {
    p.gradient = [a](const Vec& x) {
      const double nx = two_norm(x);
      Vec g(x.size(), 0.0);
      if (nx > 0.0)
        for (std::size_t i = 0; i < x.size(); ++i) g[i] = -a * x[i] / nx;
      return g;
    };
  }
  return p;
}

namespace {

// Prior samples plus scaled variants probing the tails.
std::vector<Vec> probe_samples(const SpectralGaussian& m, std::size_t n, std::uint64_t seed) {
  const auto base = sample(m, seed, n);
  std::vector<Vec> out;
  out.reserve(4 * n);
  for (double scale : {1.0, 2.0, 4.0, 8.0}) {
    for (const auto& x : base) {
      Vec v = x;
      for (auto& c : v) c *= scale;
      out.push_back(std::move(v));
    }
  }
  return out;
}

}  // namespace

BoundCheckResult verify_bound(const Potential& p, const SpectralGaussian& m, double eta,
                              double K, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("verify_bound: n must be >= 1");
  BoundCheckResult res;
  for (const auto& x : probe_samples(m, n, seed)) {
    const double nx = ambient_norm(m.ambient(), x);
    const double deficit = K - eta * nx * nx - p.evaluate(x);
    if (deficit > 0.0) res.violations.push_back({x, deficit});
  }
  std::sort(res.violations.begin(), res.violations.end(),
            [](const BoundViolation& a, const BoundViolation& b) { return a.deficit > b.deficit; });
  res.ok = res.violations.empty();
  res.bound = {eta, K, std::to_string(4 * n) + " prior samples, scales {1,2,4,8}"};
  return res;
}

CoercivityReport verify_coercivity(const Potential& p, const SpectralGaussian& m, double A,
                                   double c, std::size_t n, std::uint64_t seed) {
  if (!(c > 0.0)) throw std::invalid_argument("verify_coercivity: c must be positive");
  CoercivityReport rep;
  rep.A = A;
  rep.c = c;
  for (const auto& u : probe_samples(m, n, seed)) {
    const double e2 = cm_norm_sq(m, u);
    if (A + p.evaluate(u) + 0.5 * e2 < c * e2) rep.violations.push_back(u);
  }
  rep.ok = rep.violations.empty();
  return rep;
}

GradientCheckReport check_gradient(const Potential& p, std::size_t dim, std::size_t n_points,
                                   std::uint64_t seed) {
  if (!p.has_gradient())
    throw std::invalid_argument("check_gradient: potential has no analytic gradient");
  RngStream rng(seed);
  GradientCheckReport rep;
  for (std::size_t k = 0; k < n_points; ++k) {
    Vec x(dim);
    for (auto& v : x) v = rng.normal();
    const Vec ga = p.gradient(x);
    const Vec gf = finite_diff_gradient(p.evaluate, x);
    double diff = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      diff += (ga[i] - gf[i]) * (ga[i] - gf[i]);
      ref += gf[i] * gf[i];
    }
    const double rel = std::sqrt(diff) / std::max(1.0, std::sqrt(ref));
    if (rel > rep.max_rel_err) {
      rep.max_rel_err = rel;
      rep.worst_point = x;
    }
  }
  rep.ok = rep.max_rel_err <= 1e-4;
  return rep;
}

}  // namespace gmap
