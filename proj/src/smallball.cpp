#include "gmap/smallball.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

#include "gmap/rng.hpp"

namespace gmap {

std::size_t worker_count() {
  if (const char* env = std::getenv("GMAP_THREADS")) {
    const long v = std::atol(env);
    if (v >= 1) return static_cast<std::size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

namespace {

constexpr std::size_t kBlock = 1 << 15;

// Runs fn(block_index, count) over fixed-size blocks, possibly on several
// threads. Callers reduce per-block results in index order afterwards, so the
// merged value does not depend on scheduling.
template <class Fn>
void run_blocks(std::size_t n, Fn&& fn) {
  const std::size_t nblocks = (n + kBlock - 1) / kBlock;
  const std::size_t workers = std::min(worker_count(), nblocks);
  auto block_count = [n, nblocks](std::size_t i) {
    return i + 1 < nblocks ? kBlock : n - (nblocks - 1) * kBlock;
  };
  if (workers <= 1) {
    for (std::size_t i = 0; i < nblocks; ++i) fn(i, block_count(i));
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= nblocks) break;
        fn(i, block_count(i));
      }
    });
  }
  for (auto& t : pool) t.join();
}

std::size_t n_blocks(std::size_t n) { return (n + kBlock - 1) / kBlock; }

void draw_prior(const SpectralGaussian& m, RngStream& rng, Vec& x) {
  for (std::size_t i = 0; i < m.dim(); ++i) x[i] = m.sigma()[i] * rng.normal();
}

// Sums accumulated against a local exponent shift, mergeable across blocks.
struct ShiftedSums {
  double shift = -std::numeric_limits<double>::infinity();
  double s1 = 0.0;   // sum exp(l - shift)
  double s2 = 0.0;   // sum exp(2(l - shift))
};

ShiftedSums merge(const ShiftedSums& a, const ShiftedSums& b) {
  if (b.shift == -std::numeric_limits<double>::infinity()) return a;
  if (a.shift == -std::numeric_limits<double>::infinity()) return b;
  ShiftedSums out;
  out.shift = std::max(a.shift, b.shift);
  const double fa = std::exp(a.shift - out.shift);
  const double fb = std::exp(b.shift - out.shift);
  out.s1 = a.s1 * fa + b.s1 * fb;
  out.s2 = a.s2 * fa * fa + b.s2 * fb * fb;
  return out;
}

void accumulate(ShiftedSums& s, double logv) {
  if (logv == -std::numeric_limits<double>::infinity()) return;
  if (logv > s.shift) {
    const double f = std::exp(s.shift - logv);
    s.s1 *= f;
    s.s2 *= f * f;
    s.shift = logv;
  }
  const double e = std::exp(logv - s.shift);
  s.s1 += e;
  s.s2 += e * e;
}

}  // namespace

BallProbEstimate ball_prob(const SpectralGaussian& m, const Ball& b, std::size_t n,
                           std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("ball_prob: n must be >= 1");
  if (b.center.size() != m.dim()) throw std::invalid_argument("ball_prob: dimension mismatch");
  std::vector<std::size_t> hits(n_blocks(n), 0);
  run_blocks(n, [&](std::size_t bi, std::size_t count) {
    RngStream rng(derive_seed(seed, bi));
    Vec x(m.dim());
    std::size_t h = 0;
    for (std::size_t k = 0; k < count; ++k) {
      draw_prior(m, rng, x);
      if (ball_contains(b, x)) ++h;
    }
    hits[bi] = h;
  });
  std::size_t total = 0;
  for (auto h : hits) total += h;

  BallProbEstimate est;
  est.n = n;
  est.hits = total;
  est.seed = seed;
  est.method = EstimatorMethod::Direct;
  est.value = static_cast<double>(total) / static_cast<double>(n);
  est.stderr_ = std::sqrt(est.value * (1.0 - est.value) / static_cast<double>(n));
  est.low_confidence = total < 100;
  est.ess = static_cast<double>(n);
  return est;
}

BallProbEstimate ball_prob(const Posterior& post, const Ball& b, std::size_t n,
                           std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("ball_prob: n must be >= 1");
  const SpectralGaussian& m = post.prior;
  if (b.center.size() != m.dim()) throw std::invalid_argument("ball_prob: dimension mismatch");

  struct Block {
    ShiftedSums all, in;
    std::size_t hits = 0;
  };
  std::vector<Block> blocks(n_blocks(n));
  run_blocks(n, [&](std::size_t bi, std::size_t count) {
    RngStream rng(derive_seed(seed, bi));
    Vec x(m.dim());
    Block blk;
    for (std::size_t k = 0; k < count; ++k) {
      draw_prior(m, rng, x);
      const double lw = -post.potential.evaluate(x);
      accumulate(blk.all, lw);
      if (ball_contains(b, x)) {
        accumulate(blk.in, lw);
        ++blk.hits;
      }
    }
    blocks[bi] = blk;
  });
  ShiftedSums all, in;
  std::size_t hits = 0;
  for (const auto& blk : blocks) {
    all = merge(all, blk.all);
    in = merge(in, blk.in);
    hits += blk.hits;
  }

  BallProbEstimate est;
  est.n = n;
  est.hits = hits;
  est.seed = seed;
  est.method = EstimatorMethod::Direct;
  if (all.s1 <= 0.0) throw UndefinedRatioError("ball_prob: total posterior weight is zero");
  const double rescale = std::exp(in.shift - all.shift);
  const double p = in.s1 * rescale / all.s1;
  est.value = p;
  // delta method for the self-normalized ratio
  const double nn = static_cast<double>(n);
  const double mw = all.s1 / nn;                        // mean weight / exp(all.shift)
  const double mw2 = all.s2 / nn;                       // mean weight^2 / exp(2 all.shift)
  const double mw2b = in.s2 * rescale * rescale / nn;   // mean w^2 1B, same scale
  const double var_num = std::max(0.0, (1.0 - 2.0 * p) * mw2b + p * p * mw2);
  est.stderr_ = std::sqrt(var_num / nn) / mw;
  est.low_confidence = hits < 100;
  const double ess_den = all.s2;
  est.ess = ess_den > 0.0 ? all.s1 * all.s1 / ess_den : 0.0;
  return est;
}

namespace {

struct IsEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  std::size_t hits = 0;
  double ess = 0.0;
};

// Importance estimate of gamma(B) with proposal N(mean, diag(sd^2)).
// Weight = gamma density / proposal density.
IsEstimate is_ball_prob(const SpectralGaussian& m, const Ball& b, std::size_t n,
                        std::uint64_t seed, const Vec& mean, const Vec& sd) {
  double log_det = 0.0;  // log prod(sd_i / sigma_i)
  for (std::size_t i = 0; i < m.dim(); ++i) log_det += std::log(sd[i] / m.sigma()[i]);

  struct Block {
    ShiftedSums y;   // w * 1B
    ShiftedSums w;   // all weights, for ESS
    std::size_t hits = 0;
  };
  std::vector<Block> blocks(n_blocks(n));
  run_blocks(n, [&](std::size_t bi, std::size_t count) {
    RngStream rng(derive_seed(seed, bi));
    Vec x(m.dim());
    Block blk;
    for (std::size_t k = 0; k < count; ++k) {
      double lw = log_det;
      for (std::size_t i = 0; i < m.dim(); ++i) {
        const double z = rng.normal();
        x[i] = mean[i] + sd[i] * z;
        const double q = x[i] / m.sigma()[i];
        lw += 0.5 * (z * z - q * q);
      }
      accumulate(blk.w, lw);
      if (ball_contains(b, x)) {
        accumulate(blk.y, lw);
        ++blk.hits;
      }
    }
    blocks[bi] = blk;
  });
  ShiftedSums y, w;
  std::size_t hits = 0;
  for (const auto& blk : blocks) {
    y = merge(y, blk.y);
    w = merge(w, blk.w);
    hits += blk.hits;
  }

  IsEstimate est;
  est.hits = hits;
  const double nn = static_cast<double>(n);
  if (hits == 0) return est;
  const double scale = std::exp(y.shift);
  const double mean_y = y.s1 / nn * scale;
  const double mean_y2 = y.s2 / nn * scale * scale;
  est.value = mean_y;
  est.stderr_ = std::sqrt(std::max(0.0, mean_y2 - mean_y * mean_y) / nn);
  est.ess = w.s2 > 0.0 ? w.s1 * w.s1 / w.s2 : 0.0;
  return est;
}

Vec scaled_proposal_sd(const SpectralGaussian& m, double cap) {
  Vec sd(m.dim());
  for (std::size_t i = 0; i < m.dim(); ++i) sd[i] = std::min(m.sigma()[i], cap);
  return sd;
}

}  // namespace

BallProbEstimate importance_ball_prob(const SpectralGaussian& m, const Ball& b, std::size_t n,
                                      std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("importance_ball_prob: n must be >= 1");
  if (b.center.size() != m.dim())
    throw std::invalid_argument("importance_ball_prob: dimension mismatch");
  const BallProjection proj = min_cm_in_ball(m, b);
  const IsEstimate is = is_ball_prob(m, b, n, seed, proj.minimizer, Vec(m.sigma()));

  BallProbEstimate est;
  est.n = n;
  est.hits = is.hits;
  est.seed = seed;
  est.method = EstimatorMethod::ImportanceShift;
  est.value = is.value;
  est.stderr_ = is.stderr_;
  est.ess = is.ess;
  est.low_confidence = is.ess < 50.0;
  return est;
}

namespace {

// Scaled-and-shifted importance estimate for balls too small for direct
// counting: proposal centred at the minimal-CM-norm point with per-coordinate
// standard deviation capped near the ball radius.
IsEstimate is_ball_prob_small(const SpectralGaussian& m, const Ball& b, std::size_t n,
                              std::uint64_t seed) {
  const BallProjection proj = min_cm_in_ball(m, b);
  const double cap = 2.0 * b.radius / std::sqrt(static_cast<double>(m.dim()));
  return is_ball_prob(m, b, n, seed, proj.minimizer, scaled_proposal_sd(m, cap));
}

RatioEstimate ratio_from_independent(const IsEstimate& num, const IsEstimate& den, std::size_t n,
                                     std::uint64_t seed) {
  if (den.value <= 0.0)
    throw UndefinedRatioError("ratio_crn: denominator ball has zero estimated mass");
  RatioEstimate est;
  est.n = n;
  est.shared_seed = seed;
  est.method = EstimatorMethod::ImportanceShift;
  est.hits_num = num.hits;
  est.hits_den = den.hits;
  est.value = num.value / den.value;
  const double rel_num = num.value > 0.0 ? num.stderr_ / num.value : 0.0;
  const double rel_den = den.stderr_ / den.value;
  est.stderr_ = est.value * std::sqrt(rel_num * rel_num + rel_den * rel_den);
  if (num.value == 0.0) est.stderr_ = den.stderr_ / den.value;  // degenerate numerator
  est.low_confidence = num.ess < 50.0 || den.ess < 50.0;
  return est;
}

}  // namespace

RatioEstimate ratio_crn(const SpectralGaussian& m, const Ball& b1, const Ball& b2, std::size_t n,
                        std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("ratio_crn: n must be >= 1");
  if (b1.center.size() != m.dim() || b2.center.size() != m.dim())
    throw std::invalid_argument("ratio_crn: dimension mismatch");

  struct Block {
    std::size_t h1 = 0, h2 = 0, h12 = 0;
  };
  std::vector<Block> blocks(n_blocks(n));
  run_blocks(n, [&](std::size_t bi, std::size_t count) {
    RngStream rng(derive_seed(seed, bi));
    Vec x(m.dim());
    Block blk;
    for (std::size_t k = 0; k < count; ++k) {
      draw_prior(m, rng, x);
      const bool i1 = ball_contains(b1, x);
      const bool i2 = ball_contains(b2, x);
      if (i1) ++blk.h1;
      if (i2) ++blk.h2;
      if (i1 && i2) ++blk.h12;
    }
    blocks[bi] = blk;
  });
  std::size_t h1 = 0, h2 = 0, h12 = 0;
  for (const auto& blk : blocks) {
    h1 += blk.h1;
    h2 += blk.h2;
    h12 += blk.h12;
  }

  if (h1 < 100 || h2 < 100) {
    // too few direct hits for a usable confidence interval: per-ball
    // importance estimates with derived seeds
    const IsEstimate num = is_ball_prob_small(m, b1, n, derive_seed(seed, 0x15a));
    const IsEstimate den = is_ball_prob_small(m, b2, n, derive_seed(seed, 0x15b));
    return ratio_from_independent(num, den, n, seed);
  }

  RatioEstimate est;
  est.n = n;
  est.shared_seed = seed;
  est.method = EstimatorMethod::Direct;
  est.hits_num = h1;
  est.hits_den = h2;
  const double nn = static_cast<double>(n);
  const double p1 = static_cast<double>(h1) / nn;
  const double p2 = static_cast<double>(h2) / nn;
  const double p12 = static_cast<double>(h12) / nn;
  est.value = static_cast<double>(h1) / static_cast<double>(h2);
  const double var = est.value * est.value *
                     std::max(0.0, (1.0 - p1) / (nn * p1) + (1.0 - p2) / (nn * p2) -
                                       2.0 * (p12 - p1 * p2) / (nn * p1 * p2));
  est.stderr_ = std::sqrt(var);
  return est;
}

RatioEstimate ratio_crn(const Posterior& post, const Ball& b1, const Ball& b2, std::size_t n,
                        std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("ratio_crn: n must be >= 1");
  const SpectralGaussian& m = post.prior;
  if (b1.center.size() != m.dim() || b2.center.size() != m.dim())
    throw std::invalid_argument("ratio_crn: dimension mismatch");

  struct Block {
    ShiftedSums a, b, a2, b2s, ab;
    std::size_t h1 = 0, h2 = 0;
  };
  std::vector<Block> blocks(n_blocks(n));
  run_blocks(n, [&](std::size_t bi, std::size_t count) {
    RngStream rng(derive_seed(seed, bi));
    Vec x(m.dim());
    Block blk;
    for (std::size_t k = 0; k < count; ++k) {
      draw_prior(m, rng, x);
      const double lw = -post.potential.evaluate(x);
      const bool i1 = ball_contains(b1, x);
      const bool i2 = ball_contains(b2, x);
      if (i1) {
        accumulate(blk.a, lw);
        ++blk.h1;
      }
      if (i2) {
        accumulate(blk.b, lw);
        ++blk.h2;
      }
      if (i1 && i2) accumulate(blk.ab, lw);
    }
    blocks[bi] = blk;
  });
  ShiftedSums a, b, ab;
  std::size_t h1 = 0, h2 = 0;
  for (const auto& blk : blocks) {
    a = merge(a, blk.a);
    b = merge(b, blk.b);
    ab = merge(ab, blk.ab);
    h1 += blk.h1;
    h2 += blk.h2;
  }
  if (h2 == 0 || b.s1 <= 0.0)
    throw UndefinedRatioError("ratio_crn: denominator ball has zero weighted mass");

  RatioEstimate est;
  est.n = n;
  est.shared_seed = seed;
  est.method = EstimatorMethod::Direct;
  est.hits_num = h1;
  est.hits_den = h2;
  const double nn = static_cast<double>(n);
  // work at the common scale exp(shift)
  const double shift = std::max(a.shift, b.shift);
  const double fa = std::exp(a.shift - shift);
  const double fb = std::exp(b.shift - shift);
  const double fab = std::exp(ab.shift - shift);
  const double ma = a.s1 * fa / nn, mb = b.s1 * fb / nn;
  const double ma2 = a.s2 * fa * fa / nn, mb2 = b.s2 * fb * fb / nn;
  const double mab = ab.s2 * fab * fab / nn;  // mean of a_i * b_i = w^2 on the overlap
  est.value = ma / mb;
  const double va = std::max(0.0, ma2 - ma * ma);
  const double vb = std::max(0.0, mb2 - mb * mb);
  const double cab = mab - ma * mb;
  const double var = (va / (mb * mb) + ma * ma * vb / (mb * mb * mb * mb) -
                      2.0 * ma * cab / (mb * mb * mb)) / nn;
  est.stderr_ = std::sqrt(std::max(0.0, var));
  est.low_confidence = h1 < 100 || h2 < 100;
  return est;
}

BallProjection min_cm_in_ball(const SpectralGaussian& m, const Ball& b) {
  if (!(b.radius > 0.0)) throw std::invalid_argument("min_cm_in_ball: radius must be positive");
  if (b.center.size() != m.dim()) throw std::invalid_argument("min_cm_in_ball: dimension mismatch");
  const Vec& x = b.center;
  const std::size_t d = m.dim();
  BallProjection out;
  out.minimizer.assign(d, 0.0);

  if (b.norm == AmbientNorm::SupNorm) {
    // separable: clip each coordinate toward zero by at most r
    bool active = false;
    for (std::size_t i = 0; i < d; ++i) {
      const double mag = std::abs(x[i]) - b.radius;
      if (mag > 0.0) {
        out.minimizer[i] = (x[i] > 0.0 ? mag : -mag);
        active = true;
      }
    }
    out.active = active;
    out.value = 0.5 * cm_norm_sq(m, out.minimizer);
    out.dual_coefficients = rkhs_coefficients(m, out.minimizer);
    out.kkt_residual = std::max(0.0, ambient_dist(b.norm, out.minimizer, x) - b.radius);
    return out;
  }

  // TwoNorm: h_i(lam) = x_i lam sigma_i^2 / (1 + lam sigma_i^2);
  // ||h(lam) - x||_2 is strictly decreasing in lam >= 0.
  const double nx = two_norm(x);
  if (nx <= b.radius) {
    out.active = (nx == b.radius);
    out.value = 0.0;
    out.dual_coefficients.assign(d, 0.0);
    out.kkt_residual = 0.0;
    return out;
  }
  auto dist = [&](double lam) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double den = 1.0 + lam * m.sigma()[i] * m.sigma()[i];
      s += (x[i] / den) * (x[i] / den);
    }
    return std::sqrt(s);
  };
  auto dist_deriv = [&](double lam) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double s2 = m.sigma()[i] * m.sigma()[i];
      const double den = 1.0 + lam * s2;
      s += -2.0 * x[i] * x[i] * s2 / (den * den * den);
    }
    return s / (2.0 * dist(lam));
  };

  double lo = 0.0, hi = 1.0;
  int grow = 0;
  while (dist(hi) > b.radius && grow++ < 400) {
    lo = hi;
    hi *= 4.0;
  }
  for (int it = 0; it < 200 && (hi - lo) > 1e-12 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (dist(mid) > b.radius ? lo : hi) = mid;
  }
  double lam = 0.5 * (lo + hi);
  for (int it = 0; it < 8; ++it) {  // Newton polish on dist(lam) - r
    const double f = dist(lam) - b.radius;
    const double df = dist_deriv(lam);
    if (df == 0.0) break;
    const double next = lam - f / df;
    if (!(next > 0.0)) break;
    lam = next;
  }

  for (std::size_t i = 0; i < d; ++i) {
    const double s2 = m.sigma()[i] * m.sigma()[i];
    out.minimizer[i] = x[i] * lam * s2 / (1.0 + lam * s2);
  }
  out.active = true;
  out.value = 0.5 * cm_norm_sq(m, out.minimizer);
  out.dual_coefficients = rkhs_coefficients(m, out.minimizer);
  out.kkt_residual = std::abs(ambient_dist(b.norm, out.minimizer, x) - b.radius);
  return out;
}

Vec uniform_in_ball(const Ball& b, RngStream& rng) {
  const std::size_t d = b.center.size();
  Vec h(d);
  if (b.norm == AmbientNorm::SupNorm) {
    for (std::size_t i = 0; i < d; ++i)
      h[i] = b.center[i] + b.radius * (2.0 * rng.uniform01() - 1.0);
    return h;
  }
  double norm = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    h[i] = rng.normal();
    norm += h[i] * h[i];
  }
  norm = std::sqrt(norm);
  const double rad = b.radius * std::pow(rng.uniform01(), 1.0 / static_cast<double>(d));
  for (std::size_t i = 0; i < d; ++i) h[i] = b.center[i] + rad * h[i] / norm;
  return h;
}

VariationalInequalityReport check_variational_inequality(const SpectralGaussian& m, const Ball& b,
                                                         const BallProjection& proj,
                                                         std::size_t n_probes,
                                                         std::uint64_t seed) {
  VariationalInequalityReport rep;
  rep.n_probes = n_probes;
  rep.min_slack = std::numeric_limits<double>::infinity();
  const double hstar_sq = cm_norm_sq(m, proj.minimizer);
  RngStream rng(seed);
  for (std::size_t k = 0; k < n_probes; ++k) {
    const Vec h = uniform_in_ball(b, rng);
    const double slack = cm_inner(m, h, proj.minimizer) - hstar_sq;
    rep.min_slack = std::min(rep.min_slack, slack);
    if (slack < -1e-8) ++rep.violations;
  }
  if (n_probes == 0) rep.min_slack = 0.0;
  rep.ok = rep.violations == 0;
  return rep;
}

AndersonReport anderson_check(const SpectralGaussian& m, const Vec& x, double r, std::size_t n,
                              std::uint64_t seed) {
  AndersonReport rep;
  const Ball bx{x, r, m.ambient()};
  const Ball b0{Vec(m.dim(), 0.0), r, m.ambient()};
  rep.ratio = ratio_crn(m, bx, b0, n, seed);
  rep.bound = 1.0;
  rep.pass = rep.ratio.value <= 1.0 + 3.0 * rep.ratio.stderr_;
  rep.low_confidence = rep.ratio.low_confidence;
  return rep;
}

AndersonReport explicit_anderson_check(const SpectralGaussian& m, const Vec& x, double r,
                                       std::size_t n, std::uint64_t seed) {
  AndersonReport rep;
  const Ball bx{x, r, m.ambient()};
  const Ball b0{Vec(m.dim(), 0.0), r, m.ambient()};
  rep.ratio = ratio_crn(m, bx, b0, n, seed);
  const BallProjection proj = min_cm_in_ball(m, bx);
  rep.projection_value = proj.value;
  rep.bound = std::exp(-proj.value);
  const double rel = rep.ratio.value > 0.0 ? rep.ratio.stderr_ / rep.ratio.value : 0.0;
  rep.pass = rep.ratio.value <= rep.bound * (1.0 + 3.0 * rel);
  rep.low_confidence = rep.ratio.low_confidence;
  return rep;
}

}  // namespace gmap
