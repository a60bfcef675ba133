#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "gmap/smallball.hpp"
#include "oracles.hpp"

using namespace gmap;

TEST_CASE("ball_prob: 1-D Gaussian mass with binomial stderr") {
  const SpectralGaussian m(Vec{1.0});
  const auto est = ball_prob(m, Ball{{0.0}, 1.0}, 200000, 42);
  const double truth = oracle::gaussian_interval_mass(1.0, -1.0, 1.0);
  CHECK(std::abs(est.value - truth) <= 3.0 * est.stderr_);
  CHECK(est.stderr_ ==
        doctest::Approx(std::sqrt(est.value * (1.0 - est.value) / est.n)).epsilon(1e-9));
  CHECK(est.value == doctest::Approx(static_cast<double>(est.hits) / est.n));
  CHECK_FALSE(est.low_confidence);

  CHECK(ball_prob(m, Ball{{0.0}, 50.0}, 10000, 1).value == doctest::Approx(1.0));
  CHECK(ball_prob(m, Ball{{8.0}, 0.1}, 1000, 1).low_confidence);
}

TEST_CASE("ball_prob is deterministic and scheduling-independent") {
  const auto m = SpectralGaussian::power_law(3, 1.0);
  const Ball b{{0.1, -0.2, 0.05}, 0.4};
  const auto a = ball_prob(m, b, 300000, 9);

  setenv("GMAP_THREADS", "1", 1);
  const auto serial = ball_prob(m, b, 300000, 9);
  setenv("GMAP_THREADS", "4", 1);
  const auto parallel = ball_prob(m, b, 300000, 9);
  unsetenv("GMAP_THREADS");

  CHECK(a.value == serial.value);
  CHECK(serial.value == parallel.value);
  CHECK(serial.stderr_ == parallel.stderr_);
}

TEST_CASE("posterior ball_prob: constant potential cancels") {
  const SpectralGaussian m(Vec{1.0});
  const Posterior post{m, Potential{[](const Vec&) { return 1.7; }, {}, "const"}};
  const Ball b{{0.3}, 0.5};
  const auto direct = ball_prob(m, b, 200000, 5);
  const auto weighted = ball_prob(post, b, 200000, 5);
  const double se = std::sqrt(direct.stderr_ * direct.stderr_ +
                              weighted.stderr_ * weighted.stderr_);
  CHECK(std::abs(direct.value - weighted.value) <= 3.0 * se);
}

TEST_CASE("importance_ball_prob: far ball agrees with quadrature") {
  const SpectralGaussian m(Vec{1.0});
  const Ball far{{3.0}, 0.5};
  const auto is = importance_ball_prob(m, far, 100000, 8);
  const double truth = oracle::gaussian_interval_mass(1.0, 2.5, 3.5);
  CHECK(truth == doctest::Approx(0.005977).epsilon(1e-3));
  CHECK(std::abs(is.value - truth) <= 3.0 * is.stderr_);
  CHECK_FALSE(is.low_confidence);

  // direct estimator has very few hits here, but both should agree
  const auto direct = ball_prob(m, far, 100000, 8);
  const double se = std::sqrt(is.stderr_ * is.stderr_ + direct.stderr_ * direct.stderr_);
  CHECK(std::abs(is.value - direct.value) <= 3.0 * se);

  // zero-shift ball at the origin reduces to the direct estimate
  const Ball origin{{0.0}, 1.0};
  const auto is0 = importance_ball_prob(m, origin, 100000, 8);
  const auto d0 = ball_prob(m, origin, 100000, 8);
  const double se0 = std::sqrt(is0.stderr_ * is0.stderr_ + d0.stderr_ * d0.stderr_);
  CHECK(std::abs(is0.value - d0.value) <= 3.0 * se0);
}

TEST_CASE("ratio_crn: identity, quadrature value, exact transitivity") {
  const SpectralGaussian m(Vec{1.0});
  const Ball b{{0.7}, 0.5};
  CHECK(ratio_crn(m, b, b, 50000, 4).value == 1.0);

  const auto est = ratio_crn(m, Ball{{2.0}, 0.5}, Ball{{0.0}, 0.5}, 1000000, 4);
  const double truth = oracle::gaussian_interval_mass(1.0, 1.5, 2.5) /
                       oracle::gaussian_interval_mass(1.0, -0.5, 0.5);
  CHECK(truth == doctest::Approx(0.1583).epsilon(1e-3));
  CHECK(std::abs(est.value - truth) <= 3.0 * est.stderr_);

  const Ball a{{0.5}, 0.6}, c{{-0.3}, 0.6}, e{{1.0}, 0.6};
  const double r_ac = ratio_crn(m, a, c, 100000, 12).value;
  const double r_ce = ratio_crn(m, c, e, 100000, 12).value;
  const double r_ae = ratio_crn(m, a, e, 100000, 12).value;
  CHECK(r_ac * r_ce == doctest::Approx(r_ae).epsilon(1e-12));

  CHECK_THROWS_AS((void)ratio_crn(m, b, Ball{{60.0}, 0.1}, 1000, 4), UndefinedRatioError);
}

TEST_CASE("min_cm_in_ball: closed forms and the grid oracle") {
  const SpectralGaussian m1(Vec{1.0});
  const auto inside = min_cm_in_ball(m1, Ball{{0.5}, 1.0});
  CHECK(inside.value == 0.0);
  CHECK_FALSE(inside.active);

  const auto p1 = min_cm_in_ball(m1, Ball{{3.0}, 1.0});
  CHECK(p1.minimizer[0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(p1.value == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(p1.active);
  CHECK(std::abs(p1.kkt_residual) <= 1e-8);
  CHECK(p1.value == doctest::Approx(oracle::grid_min_cm_in_ball(m1, Ball{{3.0}, 1.0})).epsilon(1e-3));

  const SpectralGaussian m2(Vec{1.0, 1.0}, AmbientNorm::SupNorm);
  const auto psup = min_cm_in_ball(m2, Ball{{3.0, 4.0}, 1.0, AmbientNorm::SupNorm});
  CHECK(psup.minimizer[0] == doctest::Approx(2.0));
  CHECK(psup.minimizer[1] == doctest::Approx(3.0));
  CHECK(psup.value == doctest::Approx(6.5));

  const SpectralGaussian m21(Vec{2.0, 1.0});
  const Ball b2{{2.0, 2.0}, 1.0};
  const auto p2 = min_cm_in_ball(m21, b2);
  CHECK(std::abs(p2.value - oracle::grid_min_cm_in_ball(m21, b2)) <= 1e-3);
  CHECK(two_norm(Vec{p2.minimizer[0] - 2.0, p2.minimizer[1] - 2.0}) <= 1.0 + 1e-9);
}

TEST_CASE("min_cm_in_ball: value non-increasing in r; dual round trip") {
  const auto m = SpectralGaussian::power_law(4, 0.5);
  const Vec x{1.0, -0.5, 0.3, 0.7};
  double prev = 1e300;
  for (double r = 0.05; r <= 2.0; r *= 1.5) {
    const auto p = min_cm_in_ball(m, Ball{x, r});
    CHECK(p.value <= prev + 1e-12);
    CHECK(p.value == doctest::Approx(0.5 * cm_norm_sq(m, p.minimizer)).epsilon(1e-10));
    for (std::size_t i = 0; i < 4; ++i)
      CHECK(p.dual_coefficients[i] ==
            doctest::Approx(p.minimizer[i] / (m.sigma()[i] * m.sigma()[i])));
    prev = p.value;
  }
}

TEST_CASE("variational inequality holds at the projection") {
  // hand probe: 1-D x=3, r=1, h*=2; h=2.5 gives <2.5, 2> = 5 >= 4
  const SpectralGaussian m1(Vec{1.0});
  const auto p1 = min_cm_in_ball(m1, Ball{{3.0}, 1.0});
  CHECK(cm_inner(m1, Vec{2.5}, p1.minimizer) >= cm_norm_sq(m1, p1.minimizer) - 1e-8);

  RngStream rng(33);
  for (int t = 0; t < 10; ++t) {
    const auto m = SpectralGaussian::power_law(5, 1.0,
                                               t % 2 ? AmbientNorm::SupNorm : AmbientNorm::TwoNorm);
    Vec x(5);
    for (auto& v : x) v = 1.5 * rng.normal();
    const Ball b{x, 0.3, m.ambient()};
    const auto proj = min_cm_in_ball(m, b);
    const auto rep = check_variational_inequality(m, b, proj, 1000, 100 + t);
    CHECK(rep.ok);
    CHECK(rep.min_slack >= -1e-8);
  }
}

TEST_CASE("anderson_check and explicit_anderson_check") {
  const SpectralGaussian m(Vec{1.0});
  const auto same = anderson_check(m, Vec{0.0}, 0.5, 50000, 2);
  CHECK(same.ratio.value == 1.0);
  CHECK(same.pass);

  const auto rep = anderson_check(m, Vec{2.0}, 0.5, 1000000, 2);
  CHECK(rep.pass);
  CHECK(rep.ratio.value == doctest::Approx(0.1583).epsilon(0.05));

  const auto ex = explicit_anderson_check(m, Vec{2.0}, 0.5, 1000000, 2);
  CHECK(ex.bound == doctest::Approx(std::exp(-1.125)).epsilon(1e-9));
  CHECK(ex.pass);

  // d=5 power-law spot check (the full sweep lives in the acceptance suite)
  const auto m5 = SpectralGaussian::power_law(5, 1.0);
  RngStream rng(55);
  for (int t = 0; t < 5; ++t) {
    Vec x(5);
    for (std::size_t i = 0; i < 5; ++i) x[i] = m5.sigma()[i] * rng.normal();
    CHECK(explicit_anderson_check(m5, x, 0.3, 200000, 300 + t).pass);
  }
}

TEST_CASE("projection value approaches the CM cost of the limit point") {
  // x_n = x* + 1/n, r_n = 1/(2n): min-in-ball value -> 0.5 ||x*||_E^2
  const SpectralGaussian m(Vec{1.0});
  const double xstar = 1.0;
  double prev_gap = 1e300;
  for (const double n : {2.0, 4.0, 8.0, 16.0, 32.0}) {
    const auto p = min_cm_in_ball(m, Ball{{xstar + 1.0 / n}, 1.0 / (2.0 * n)});
    const double gap = std::abs(p.value - 0.5 * xstar * xstar);
    CHECK(gap <= prev_gap + 1e-12);
    prev_gap = gap;
  }
  CHECK(prev_gap <= 0.05);
}
