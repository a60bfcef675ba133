#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gmap/measure.hpp"
#include "gmap/om_solver.hpp"
#include "gmap/smallball.hpp"

namespace gmap {

/// Measures the mode classifiers operate on.
using Target = std::variant<SpectralGaussian, Posterior, AnalyticMeasure1D>;

std::size_t target_dim(const Target& t);
AmbientNorm target_norm(const Target& t);

/// Geometric radius net r_k = r0 * factor^k, k = 0..count-1.
struct RadiusSchedule {
  double r0 = 0.5;
  double factor = 0.5;
  std::size_t count = 8;

  std::vector<double> radii() const;
};

/// Ball-mass evaluations sharing one weighted common-random-numbers sample
/// set, or exact closed-form/quadrature masses where available. Sampled
/// models draw from an importance proposal N(shift, diag(min(sigma, cap)^2))
/// so that masses of small balls near the shift are estimated with plenty of
/// effective samples; estimates are unbiased for the unnormalized mass, so
/// masses from differently shifted models are directly comparable.
class MassModel {
 public:
  struct Options {
    std::size_t n = 50000;
    std::uint64_t seed = 0;
    Vec shift;                // empty: origin
    double scale_cap = 1e300; // proposal sd_i = min(sigma_i, scale_cap)
    bool quadrature_1d = false;  // exact quadrature masses for 1-D posteriors
  };

  MassModel(const Target& t, Options opts);

  /// Unnormalized ball mass, reported as scaled * exp(log_scale).
  struct Mass {
    double scaled = 0.0;
    double stderr_scaled = 0.0;
    double log_scale = 0.0;
    std::size_t hits = 0;
    double value() const;
  };

  Mass mass(const Vec& center, double r) const;

  struct Ratio {
    double value = 0.0;
    double stderr_ = 0.0;
  };

  /// mass(c1,r1) / mass(c2,r2) with shared-sample (CRN) covariance.
  Ratio ratio(const Vec& c1, double r1, const Vec& c2, double r2) const;

  /// Estimate of the total unnormalized mass (1 for a prior, the evidence
  /// for a posterior); exact models return 1 or the quadrature total.
  double total_mass() const;

  bool exact() const { return exact_; }
  std::size_t dim() const { return dim_; }
  AmbientNorm norm() const { return norm_; }

 private:
  bool exact_ = false;
  std::size_t dim_ = 0;
  AmbientNorm norm_ = AmbientNorm::TwoNorm;
  std::optional<AnalyticMeasure1D> analytic_;
  std::optional<Posterior> quad_posterior_;
  std::size_t n_ = 0;
  std::vector<double> samples_;  // n x dim, row-major
  std::vector<double> weights_;  // scaled by exp(-log_scale_)
  double log_scale_ = 0.0;
};

/// Ratio of masses from independent models (their samples do not overlap).
MassModel::Ratio ratio_independent(const MassModel::Mass& num, const MassModel::Mass& den);

struct MrOptions {
  std::size_t n = 50000;
  std::uint64_t seed = 0;
  std::size_t prior_starts = 4;          // additional starts drawn from the prior
  std::vector<Vec> extra_starts;         // candidate centers, OM minimizer, ...
  double scale_cap = 1e300;
  bool quadrature_1d = false;
};

struct MrEstimate {
  double r = 0.0;
  double value = 0.0;  // in [0,1]
  Vec argbest;
  double stderr_ = 0.0;
  std::size_t starts = 0;
  bool low_confidence = false;
};

/// Near-maximizer of the radius-r ball mass over centers: one local pattern
/// search per start, each in its own sample model shifted at that start;
/// best unnormalized mass wins. A maximizer need not exist in general, so
/// this is explicitly a near-maximizer, not an attained supremum.
MrEstimate estimate_Mr(const Target& t, double r, const MrOptions& opts);

enum class ModeClass { Strong, WeakOnly, GeneralizedOnly, NotAMode, Inconclusive };

std::string to_string(ModeClass c);

/// One row of a per-radius evidence curve.
struct EvidencePoint {
  double r = 0.0;
  std::string kind;   // "weak", "strong", "generalized"
  double ratio = 0.0;
  double stderr_ = 0.0;
  double threshold = 1.0;
  bool pass = false;
  Vec center;  // challenger or located center the row refers to
};

struct ModeVerdict {
  Vec point;
  ModeClass classification = ModeClass::Inconclusive;
  std::vector<EvidencePoint> evidence;
  double tolerance = 0.05;
  bool weak_pass = false;
  bool strong_pass = false;
  bool strong_fail = false;  // decisively below 1 - tol - 3 stderr at the last radii
  bool generalized_pass = false;
  bool in_support = true;
  std::vector<Vec> generalized_centers;  // located centers, one per radius
  std::string note;
};

struct ClassifyOptions {
  double tol = 0.05;
  std::size_t n = 50000;
  std::uint64_t seed = 0;
  std::size_t last_m = 3;  // verdicts use the last m schedule radii
  std::vector<Vec> challengers;
  bool quadrature_1d = false;
};

/// Weak-mode evidence: challenger-over-x mass ratios per radius.
ModeVerdict classify_weak(const Target& t, const Vec& x, const RadiusSchedule& sched,
                          const ClassifyOptions& opts);

/// Strong-mode evidence: mass(x)/M_r per radius; also runs the weak check
/// and enforces the strong-implies-weak consistency invariant.
ModeVerdict classify_strong(const Target& t, const Vec& x, const RadiusSchedule& sched,
                            const ClassifyOptions& opts);

/// Generalized-strong evidence: per radius r_k, the best mass found within
/// distance delta_k = max(2 r_k, tol) of x, against M_r.
ModeVerdict classify_generalized(const Target& t, const Vec& x, const RadiusSchedule& sched,
                                 const ClassifyOptions& opts);

/// All three checks on one evidence pass; the classification combines them.
ModeVerdict classify_full(const Target& t, const Vec& x, const RadiusSchedule& sched,
                          const ClassifyOptions& opts);

struct AmfEntry {
  double r = 0.0;
  Vec center;
  double mass = 0.0;        // normalized, in [0,1]
  double deficiency = 0.0;  // 1 - mass(center)/M_r, re-estimated on fresh samples
};

struct AmfTrace {
  std::vector<AmfEntry> entries;
  std::optional<Vec> limit_point;
  double dist_to_om_minimizer = 0.0;  // when a limit point exists
  Vec om_minimizer;
  std::string note;
};

struct AmfOptions {
  std::size_t n = 50000;
  std::uint64_t seed = 0;
  double tol = 0.05;
  std::size_t last_m = 3;
  bool quadrature_1d = false;
};

/// Tracks near-maximizing centers across the schedule and declares a limit
/// point when the trailing centers are Cauchy within tol.
AmfTrace amf_track(const Posterior& post, const RadiusSchedule& sched, const AmfOptions& opts);

struct DichotomyReport {
  std::vector<ModeVerdict> verdicts;
  std::vector<std::pair<std::size_t, std::size_t>> contradictions;  // (strong idx, weak-only idx)
  bool consistent = true;
};

/// Strong-weak dichotomy falsification: with any Strong candidate present,
/// no other candidate may be weak-passing while decisively failing the
/// strong test. Contradictions indicate estimator error at the current n.
DichotomyReport dichotomy_check(const Target& t, const std::vector<Vec>& candidates,
                                const RadiusSchedule& sched, const ClassifyOptions& opts);

struct MPropertyRow {
  double r = 0.0;
  double ratio = 0.0;
  double stderr_ = 0.0;
  double bound = 0.0;  // exp(-min_cm_in_ball.value)
  double projection_value = 0.0;
  bool pass = false;
};

struct MPropertyReport {
  std::vector<MPropertyRow> rows;
  bool values_increasing = true;  // projection values grow as r shrinks
  bool all_pass = true;
};

/// Quantitative M-property evidence: per radius, the CRN ratio of
/// mass(B(x,r)) to mass(B(0,r)) against the explicit Anderson bound.
MPropertyReport m_property_decay(const SpectralGaussian& m, const Vec& x,
                                 const RadiusSchedule& sched, std::size_t n, std::uint64_t seed);

}  // namespace gmap
