#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gmap/measure.hpp"

namespace gmap {

/// Thrown when a user-supplied forward map produces a non-finite value.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(std::string what, Vec point)
      : std::runtime_error(std::move(what)), point(std::move(point)) {}
  Vec point;
};

/// Evaluatable potential with optional analytic gradient. Callables must be
/// pure: potentials are shared across threads and invoked concurrently.
struct Potential {
  std::function<double(const Vec&)> evaluate;
  std::function<Vec(const Vec&)> gradient;  // empty: finite differences are used
  std::string label;

  bool has_gradient() const { return static_cast<bool>(gradient); }
};

/// Central differences with step h_i = max(1e-6, 1e-6 |x_i|).
Vec finite_diff_gradient(const std::function<double(const Vec&)>& f, const Vec& x);

/// Analytic gradient when present, finite differences otherwise.
Vec potential_gradient(const Potential& p, const Vec& x);

/// Dense row-major matrix, just enough for the shipped forward maps.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // rows * cols

  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  Vec apply(const Vec& x) const;
  Vec apply_transpose(const Vec& v) const;
};

/// Phi(x) = ||y - G x||^2 / (2 noise_sd^2), with analytic gradient
/// G^T (G x - y) / noise_sd^2.
Potential quadratic_misfit(Matrix G, Vec y, double noise_sd);

/// Phi(x) = ||y - G(x)||^2 / (2 noise_sd^2) for a user-supplied smooth map.
/// Gradient by finite differences unless `gradient` is supplied.
Potential nonlinear_misfit(std::function<Vec(const Vec&)> G, Vec y, double noise_sd,
                           std::function<Vec(const Vec&)> gradient = {});

/// Componentwise cubic forward map G(x)_i = x_i^3, with analytic gradient.
Potential cubic_misfit(Vec y, double noise_sd);

/// Phi(x) = -a ||x||_X: no global lower bound, but for every eta > 0 the
/// bound Phi(x) >= K(eta) - eta ||x||_X^2 holds with K(eta) = -a^2/(4 eta).
/// Analytic gradient shipped for the two-norm only (the sup-norm variant is
/// non-smooth and falls back to finite differences).
Potential unbounded_below_example(double a, AmbientNorm norm = AmbientNorm::TwoNorm);

struct PotentialBound {
  double eta = 0.0;
  double K = 0.0;
  std::string witnessed_on;
};

struct BoundViolation {
  Vec point;
  double deficit = 0.0;  // K - eta ||x||^2 - Phi(x) > 0 at a violation
};

struct BoundCheckResult {
  bool ok = false;
  PotentialBound bound;
  std::vector<BoundViolation> violations;  // sorted by decreasing deficit
};

/// Samples n prior draws plus scaled variants (scales 2, 4, 8) and checks
/// Phi(x) >= K - eta ||x||_X^2 on each. Violations are data, not errors.
BoundCheckResult verify_bound(const Potential& p, const SpectralGaussian& m, double eta,
                              double K, std::size_t n, std::uint64_t seed);

struct CoercivityReport {
  double A = 0.0;
  double c = 0.0;
  bool ok = false;
  std::vector<Vec> violations;
};

/// Checks A + Phi(u) + 0.5 ||u||_E^2 >= c ||u||_E^2 on sampled u.
CoercivityReport verify_coercivity(const Potential& p, const SpectralGaussian& m, double A,
                                   double c, std::size_t n, std::uint64_t seed);

struct GradientCheckReport {
  double max_rel_err = 0.0;
  Vec worst_point;
  bool ok = false;  // max_rel_err <= 1e-4
};

/// Compares the analytic gradient against central differences at n_points
/// random points with coordinates ~ N(0,1).
GradientCheckReport check_gradient(const Potential& p, std::size_t dim, std::size_t n_points,
                                   std::uint64_t seed);

}  // namespace gmap
