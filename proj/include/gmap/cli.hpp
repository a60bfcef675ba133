#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gmap/modes.hpp"

namespace gmap {

inline constexpr const char* kVersion = "0.1.0";

/// Config rejected by the schema; message names the offending field.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical failure: non-convergence, undefined ratios, overflow.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string operation;
  Target target = AnalyticMeasure1D::uniform_unit();  // replaced during parsing
  std::optional<Posterior> posterior; // set iff a potential spec was present
  RadiusSchedule schedule;
  std::size_t mc_n = 50000;
  std::uint64_t seed = 0;
  std::string out_path;
  std::string out_format = "json";    // "json" or "csv"

  // operation-specific knobs
  Vec point;
  std::optional<Ball> ball;
  std::string method = "direct";      // ball-prob: "direct" or "importance"
  std::vector<Vec> challengers;
  double tol = 0.05;
  double bound_eta = 0.0;             // verify-potential
  double bound_K = 0.0;
  bool run_gradient_check = true;

  nlohmann::ordered_json effective;   // config after CLI overrides; hashed
};

struct RunRecord {
  std::uint64_t config_hash = 0;
  std::string version = kVersion;
  std::uint64_t seed = 0;
  double wall_time_s = 0.0;           // informational; never serialized
  nlohmann::ordered_json payload;

  struct CurveRow {
    double r = 0.0;
    double estimate = 0.0;
    double stderr_ = 0.0;
    double bound = 1.0;
    bool pass = true;
  };
  std::vector<CurveRow> curve;

  bool inconclusive = false;          // --strict turns this into exit 4
  std::string note;
};

std::uint64_t fnv1a_hash(const std::string& s);

ExperimentConfig parse_config(const nlohmann::ordered_json& j);
ExperimentConfig load_config(const std::string& path);

/// Dispatches the configured operation. Throws ValidationError (exit 2) or
/// NumericalError (exit 3); inconclusive verdicts are flagged, not thrown.
RunRecord run(const ExperimentConfig& cfg);

/// CSV `r,estimate,stderr,bound,pass`, LF endings, shortest round-trip
/// doubles. Header-only when the record carries no curve.
void emit_curve(const RunRecord& rec, const std::string& path);

/// Writes the payload (JSON) or curve (CSV) to cfg.out_path when set.
void write_outputs(const RunRecord& rec, const ExperimentConfig& cfg);

std::string format_double(double v);

}  // namespace gmap
