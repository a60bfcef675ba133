#pragma once

#include <cstdint>
#include <vector>

#include "gmap/measure.hpp"
#include "gmap/potential.hpp"

namespace gmap {

/// Prior + potential pair representing the posterior with unnormalized
/// density exp(-Phi) against the prior. The normalization constant is never
/// computed; every downstream quantity is a ratio where it cancels.
struct Posterior {
  SpectralGaussian prior;
  Potential potential;
};

/// I^y(u) = 0.5 ||u||_E^2 + Phi(u).
double om_value(const Posterior& post, const Vec& u);

/// Gradient of the OM functional: u_i / sigma_i^2 + (grad Phi(u))_i.
Vec om_gradient(const Posterior& post, const Vec& u);

struct RatioPrediction {
  double value = 0.0;
  double log_value = 0.0;
  bool overflowed = false;
};

/// Predicted small-ball ratio lim_{r->0} mass(B(x,r))/mass(B(x2,r))
/// = exp(I^y(x2) - I^y(x)).
RatioPrediction om_ratio_prediction(const Posterior& post, const Vec& x, const Vec& x2);

struct MinimizeOptions {
  // Convergence: gradient 2-norm <= tol_grad * (1 + |objective value|).
  double tol_grad = 1e-8;
  std::size_t max_iter = 10000;
  std::size_t multistarts = 8;
  std::uint64_t seed = 0;
  double cm_norm_cap = 1e6;  // iterates past this trigger the non-coercive diagnostic
};

struct OmResult {
  Vec minimizer;
  double value = 0.0;
  std::size_t iterations = 0;
  // Gradient norm in the whitened (Cameron-Martin) metric: the 2-norm of
  // sigma_i * dI/dx_i, the natural measure of stationarity under the prior.
  double grad_norm_final = 0.0;
  std::vector<double> multistart_values;
  bool converged = false;
  bool suspected_noncoercive = false;
};

/// Multistart minimization of the OM functional in KL coordinates (L-BFGS
/// with Armijo backtracking). Starts: origin plus prior samples. Best value
/// wins; ties within 1e-12 are broken by lowest Cameron-Martin norm.
OmResult minimize_om(const Posterior& post, const MinimizeOptions& opts = {});

/// Unnormalized posterior mass of [center - r, center + r] for a 1-D
/// posterior, by adaptive Simpson quadrature. Ratios of these are exact
/// posterior ball-mass ratios (the normalization cancels).
double posterior_ball_mass_1d(const Posterior& post, double center, double r);

}  // namespace gmap
