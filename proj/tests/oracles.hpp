#pragma once

// Independent oracles for the test suite. Everything here is deliberately
// dumb and slow: direct quadrature, dense grids, and textbook linear algebra,
// sharing no code with the library paths under test.

#include <cstdint>

#include "gmap/measure.hpp"
#include "gmap/potential.hpp"

namespace gmap::oracle {

// Standard normal CDF by adaptive Simpson quadrature of the density.
// Absolute error below 1e-13 for |z| <= 12.
double normal_cdf_quadrature(double z);

// Mass of [lo, hi] under N(0, sigma^2), via the quadrature CDF.
double gaussian_interval_mass(double sigma, double lo, double hi);

// min over h in B(x,r) of 0.5 ||h||_E^2 by coarse-to-fine dense grid search.
// The objective and the ball are convex, so refining around the incumbent is
// safe. Final grid step <= step_frac * r (default matches the 1e-3 * r
// acceptance requirement). Practical for dim <= 3.
double grid_min_cm_in_ball(const SpectralGaussian& m, const Ball& b,
                           double step_frac = 1e-3);

// MAP of a linear-Gaussian problem by the normal equations
// (Sigma^{-1} + G^T G / sd^2) x = G^T y / sd^2, solved with a dense Cholesky
// factorization.
Vec linear_gaussian_map(const SpectralGaussian& prior, const Matrix& G, const Vec& y,
                        double noise_sd);

}  // namespace gmap::oracle
