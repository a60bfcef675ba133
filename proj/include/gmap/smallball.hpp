#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "gmap/measure.hpp"
#include "gmap/om_solver.hpp"
#include "gmap/rng.hpp"

namespace gmap {

/// Thrown when a ratio estimate has an empty denominator.
class UndefinedRatioError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class EstimatorMethod { Direct, ImportanceShift };

struct BallProbEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
  std::size_t hits = 0;
  EstimatorMethod method = EstimatorMethod::Direct;
  std::uint64_t seed = 0;
  bool low_confidence = false;  // Direct: hits < 100; Importance: ESS < 50
  double ess = 0.0;             // effective sample size of the weights
};

struct RatioEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
  std::uint64_t shared_seed = 0;
  std::size_t hits_num = 0;
  std::size_t hits_den = 0;
  EstimatorMethod method = EstimatorMethod::Direct;
  bool low_confidence = false;
};

/// Direct Monte Carlo estimate of the prior mass of b. Deterministic given
/// the seed; n is split into fixed-size blocks with derived per-block seeds,
/// so the result is identical whether blocks run serially or in parallel.
BallProbEstimate ball_prob(const SpectralGaussian& m, const Ball& b, std::size_t n,
                           std::uint64_t seed);

/// Posterior ball mass by self-normalized weighting of prior samples with
/// exp(-Phi); the normalization constant cancels.
BallProbEstimate ball_prob(const Posterior& post, const Ball& b, std::size_t n,
                           std::uint64_t seed);

/// Unbiased importance estimate: samples from the prior shifted to the
/// minimal-CM-norm point of the ball and reweights by the reciprocal shift
/// density.
BallProbEstimate importance_ball_prob(const SpectralGaussian& m, const Ball& b, std::size_t n,
                                      std::uint64_t seed);

/// Common-random-numbers ratio mass(b1)/mass(b2): one sample set evaluates
/// both indicators, so ratio(a,b) * ratio(b,c) == ratio(a,c) exactly for a
/// shared seed and n. Falls back to per-ball importance estimates (derived
/// seeds) when either direct hit count is below 100.
RatioEstimate ratio_crn(const SpectralGaussian& m, const Ball& b1, const Ball& b2, std::size_t n,
                        std::uint64_t seed);

/// CRN ratio of posterior ball masses (self-normalized weights cancel).
RatioEstimate ratio_crn(const Posterior& post, const Ball& b1, const Ball& b2, std::size_t n,
                        std::uint64_t seed);

struct BallProjection {
  Vec minimizer;         // h*
  double value = 0.0;    // 0.5 ||h*||_E^2
  Vec dual_coefficients; // g* = R^{-1} h*
  bool active = false;   // constraint active at the solution
  double kkt_residual = 0.0;
};

/// min over h in B(x,r) of 0.5 ||h||_E^2. SupNorm: coordinatewise clipping,
/// closed form. TwoNorm: scalar KKT equation in the multiplier, solved by
/// safeguarded bisection plus Newton polish to residual <= 1e-10.
BallProjection min_cm_in_ball(const SpectralGaussian& m, const Ball& b);

struct VariationalInequalityReport {
  double min_slack = 0.0;  // min over probes of <h, h*>_E - ||h*||_E^2
  std::size_t n_probes = 0;
  std::size_t violations = 0;  // slack below -1e-8
  bool ok = false;
};

/// Probes the optimality condition <h, h*>_E >= ||h*||_E^2 with h sampled
/// uniformly in the ball. A violation signals a projection solver bug.
VariationalInequalityReport check_variational_inequality(const SpectralGaussian& m, const Ball& b,
                                                         const BallProjection& proj,
                                                         std::size_t n_probes,
                                                         std::uint64_t seed);

struct AndersonReport {
  RatioEstimate ratio;   // mass(B(x,r)) / mass(B(0,r))
  double bound = 1.0;    // 1 for the plain check, exp(-min 0.5||h||_E^2) for the explicit one
  double projection_value = 0.0;
  bool pass = false;
  bool low_confidence = false;
};

/// Checks mass(B(x,r)) <= mass(B(0,r)): passes if the CRN ratio is <= 1 up to
/// 3 standard errors.
AndersonReport anderson_check(const SpectralGaussian& m, const Vec& x, double r, std::size_t n,
                              std::uint64_t seed);

/// Quantitative version: ratio <= exp(-min_cm_in_ball.value) up to 3 relative
/// standard errors.
AndersonReport explicit_anderson_check(const SpectralGaussian& m, const Vec& x, double r,
                                       std::size_t n, std::uint64_t seed);

/// Uniform draw from a ball (per-coordinate for SupNorm; direction times
/// scaled radius for TwoNorm).
Vec uniform_in_ball(const Ball& b, RngStream& rng);

/// Worker cap used by the block-parallel estimators: GMAP_THREADS when set,
/// hardware concurrency otherwise.
std::size_t worker_count();

}  // namespace gmap
