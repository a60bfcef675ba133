#include "gmap/measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "gmap/rng.hpp"

namespace gmap {

double two_norm(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double sup_norm(const Vec& v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

double ambient_norm(AmbientNorm norm, const Vec& v) {
  return norm == AmbientNorm::TwoNorm ? two_norm(v) : sup_norm(v);
}

double ambient_dist(AmbientNorm norm, const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("ambient_dist: dimension mismatch");
  if (norm == AmbientNorm::TwoNorm) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a[i] - b[i];
      s += d * d;
    }
    return std::sqrt(s);
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::abs(a[i] - b[i]));
  return s;
}

SpectralGaussian::SpectralGaussian(Vec sigma, AmbientNorm ambient)
    : sigma_(std::move(sigma)), ambient_(ambient) {
  if (sigma_.empty()) throw std::invalid_argument("SpectralGaussian: empty sigma");
  double c = 0.0;
  for (double s : sigma_) {
    if (!(s > 0.0) || !std::isfinite(s))
      throw std::invalid_argument("SpectralGaussian: all sigma_i must be strictly positive (nondegeneracy)");
    c = std::max(c, s);
  }
  embedding_constant_ = c;
}

SpectralGaussian SpectralGaussian::power_law(std::size_t dim, double s, AmbientNorm ambient) {
  Vec sigma(dim);
  for (std::size_t n = 1; n <= dim; ++n)
    sigma[n - 1] = std::pow(static_cast<double>(n), -s);
  return SpectralGaussian(std::move(sigma), ambient);
}

bool ball_contains(const Ball& b, const Vec& x) {
  return ambient_dist(b.norm, b.center, x) <= b.radius;
}

double cm_norm_sq(const SpectralGaussian& m, const Vec& h) {
  if (h.size() != m.dim()) throw std::invalid_argument("cm_norm_sq: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double g = h[i] / m.sigma()[i];
    s += g * g;
  }
  return s;
}

double cm_inner(const SpectralGaussian& m, const Vec& a, const Vec& b) {
  if (a.size() != m.dim() || b.size() != m.dim())
    throw std::invalid_argument("cm_inner: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i] / (m.sigma()[i] * m.sigma()[i]);
  return s;
}

Vec rkhs_coefficients(const SpectralGaussian& m, const Vec& h) {
  if (h.size() != m.dim()) throw std::invalid_argument("rkhs_coefficients: dimension mismatch");
  Vec g(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) g[i] = h[i] / (m.sigma()[i] * m.sigma()[i]);
  return g;
}

ShiftDensity cm_shift_density(const SpectralGaussian& m, const Vec& h, const Vec& x) {
  if (h.size() != m.dim() || x.size() != m.dim())
    throw std::invalid_argument("cm_shift_density: dimension mismatch");
  double lin = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) lin += h[i] * x[i] / (m.sigma()[i] * m.sigma()[i]);
  const double log_value = lin - 0.5 * cm_norm_sq(m, h);

  ShiftDensity out;
  out.log_value = log_value;
  // exp overflows around 709.78 for doubles
  if (log_value > 709.0) {
    out.value = std::numeric_limits<double>::max();
    out.overflowed = true;
  } else {
    out.value = std::exp(log_value);
  }
  return out;
}

std::vector<Vec> sample(const SpectralGaussian& m, std::uint64_t seed, std::size_t n) {
  if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
  RngStream rng(seed);
  std::vector<Vec> out(n, Vec(m.dim()));
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < m.dim(); ++i) out[k][i] = m.sigma()[i] * rng.normal();
  return out;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

AnalyticMeasure1D AnalyticMeasure1D::gaussian(double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("AnalyticMeasure1D: sigma must be positive");
  return AnalyticMeasure1D(Kind::StandardGaussian, sigma);
}

AnalyticMeasure1D AnalyticMeasure1D::uniform_unit() {
  return AnalyticMeasure1D(Kind::UniformUnit, 0.0);
}

double AnalyticMeasure1D::ball_prob(double center, double radius) const {
  if (!(radius > 0.0)) throw std::invalid_argument("ball_prob: radius must be positive");
  if (kind_ == Kind::StandardGaussian)
    return normal_cdf((center + radius) / sigma_) - normal_cdf((center - radius) / sigma_);
  const double lo = std::max(center - radius, 0.0);
  const double hi = std::min(center + radius, 1.0);
  return std::max(hi - lo, 0.0);
}

std::vector<double> AnalyticMeasure1D::sample(std::uint64_t seed, std::size_t n) const {
  RngStream rng(seed);
  std::vector<double> out(n);
  if (kind_ == Kind::StandardGaussian)
    for (auto& v : out) v = sigma_ * rng.normal();
  else
    for (auto& v : out) v = rng.uniform01();
  return out;
}

double exact_ball_prob_1d(const AnalyticMeasure1D& m, const Ball& b) {
  if (b.center.size() != 1) throw std::invalid_argument("exact_ball_prob_1d: ball must be 1-D");
  return m.ball_prob(b.center[0], b.radius);
}

}  // namespace gmap
