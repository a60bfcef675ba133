#include "gmap/cli.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gmap/potential.hpp"
#include "gmap/rng.hpp"

namespace gmap {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& field, const std::string& msg) {
  throw ValidationError(field + ": " + msg);
}

const json& require(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) fail(path + key, "missing required field");
  return j.at(key);
}

double get_double(const json& j, const std::string& key, const std::string& path) {
  const json& v = require(j, key, path);
  if (!v.is_number()) fail(path + key, "must be a number");
  return v.get<double>();
}

double get_double_or(const json& j, const std::string& key, const std::string& path, double dflt) {
  if (!j.contains(key)) return dflt;
  if (!j.at(key).is_number()) fail(path + key, "must be a number");
  return j.at(key).get<double>();
}

std::size_t get_size(const json& j, const std::string& key, const std::string& path) {
  const json& v = require(j, key, path);
  if (!v.is_number_integer() || v.get<long long>() < 0) fail(path + key, "must be a non-negative integer");
  return v.get<std::size_t>();
}

std::string get_string(const json& j, const std::string& key, const std::string& path) {
  const json& v = require(j, key, path);
  if (!v.is_string()) fail(path + key, "must be a string");
  return v.get<std::string>();
}

Vec get_vec(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "must be an array of numbers");
  Vec out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) fail(path + "[" + std::to_string(i) + "]", "must be a number");
    out.push_back(v[i].get<double>());
  }
  return out;
}

AmbientNorm parse_norm(const json& j, const std::string& path) {
  const std::string s = j.contains("norm") ? get_string(j, "norm", path) : "two";
  if (s == "two") return AmbientNorm::TwoNorm;
  if (s == "sup") return AmbientNorm::SupNorm;
  fail(path + "norm", "must be \"two\" or \"sup\", got \"" + s + "\"");
}

Target parse_measure(const json& j, const std::string& path) {
  const std::string type = get_string(j, "type", path);
  if (type == "spectral") {
    const Vec sigma = get_vec(require(j, "sigma", path), path + "sigma");
    if (sigma.empty()) fail(path + "sigma", "must be non-empty");
    for (std::size_t i = 0; i < sigma.size(); ++i)
      if (!(sigma[i] > 0.0) || !std::isfinite(sigma[i]))
        fail(path + "sigma[" + std::to_string(i) + "]",
             "entries must be positive and finite (nondegeneracy)");
    return SpectralGaussian(sigma, parse_norm(j, path));
  }
  if (type == "power_law") {
    const std::size_t dim = get_size(j, "dim", path);
    if (dim == 0) fail(path + "dim", "must be >= 1");
    const double s = get_double(j, "exponent", path);
    if (!(s > 0.0)) fail(path + "exponent", "must be positive");
    return SpectralGaussian::power_law(dim, s, parse_norm(j, path));
  }
  if (type == "analytic") {
    const std::string family = get_string(j, "family", path);
    if (family == "uniform") return AnalyticMeasure1D::uniform_unit();
    if (family == "gaussian") {
      const double sigma = get_double_or(j, "sigma", path, 1.0);
      if (!(sigma > 0.0) || !std::isfinite(sigma)) fail(path + "sigma", "must be positive and finite");
      return AnalyticMeasure1D::gaussian(sigma);
    }
    fail(path + "family", "must be \"uniform\" or \"gaussian\", got \"" + family + "\"");
  }
  fail(path + "type", "must be \"spectral\", \"power_law\", or \"analytic\", got \"" + type + "\"");
}

Potential parse_potential(const json& j, std::size_t dim, const std::string& path) {
  const std::string type = get_string(j, "type", path);
  if (type == "quadratic") {
    const Vec y = get_vec(require(j, "y", path), path + "y");
    const double sd = get_double_or(j, "noise_sd", path, 1.0);
    if (!(sd > 0.0)) fail(path + "noise_sd", "must be positive");
    Matrix G;
    const json& gj = require(j, "G", path);
    if (gj.is_string() && gj.get<std::string>() == "identity") {
      if (y.size() != dim) fail(path + "y", "length must match measure dim for identity G");
      G.rows = G.cols = dim;
      G.data.assign(dim * dim, 0.0);
      for (std::size_t i = 0; i < dim; ++i) G.data[i * dim + i] = 1.0;
    } else if (gj.is_array()) {
      G.rows = gj.size();
      for (std::size_t r = 0; r < gj.size(); ++r) {
        const Vec row = get_vec(gj[r], path + "G[" + std::to_string(r) + "]");
        if (r == 0) G.cols = row.size();
        if (row.size() != G.cols) fail(path + "G", "rows must have equal length");
        G.data.insert(G.data.end(), row.begin(), row.end());
      }
      if (G.cols != dim) fail(path + "G", "column count must match measure dim");
      if (G.rows != y.size()) fail(path + "y", "length must match G row count");
    } else {
      fail(path + "G", "must be \"identity\" or a matrix");
    }
    return quadratic_misfit(std::move(G), y, sd);
  }
  if (type == "cubic") {
    const Vec y = get_vec(require(j, "y", path), path + "y");
    if (y.size() != dim) fail(path + "y", "length must match measure dim");
    const double sd = get_double_or(j, "noise_sd", path, 1.0);
    if (!(sd > 0.0)) fail(path + "noise_sd", "must be positive");
    return cubic_misfit(y, sd);
  }
  if (type == "unbounded_below") {
    const double a = get_double_or(j, "a", path, 1.0);
    if (!(a > 0.0)) fail(path + "a", "must be positive");
    return unbounded_below_example(a);
  }
  fail(path + "type",
       "must be \"quadratic\", \"cubic\", or \"unbounded_below\", got \"" + type + "\"");
}

const std::vector<std::string> kOperations = {
    "estimate-map", "ball-prob",  "verify-anderson", "classify-mode",
    "amf-track",    "m-property", "verify-potential"};

}  // namespace

std::uint64_t fnv1a_hash(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

ExperimentConfig parse_config(const nlohmann::ordered_json& j) {
  ExperimentConfig cfg;
  cfg.effective = j;

  cfg.operation = get_string(j, "operation", "");
  bool known = false;
  for (const auto& op : kOperations) known = known || op == cfg.operation;
  if (!known) fail("operation", "unknown operation \"" + cfg.operation + "\"");

  cfg.target = parse_measure(require(j, "measure", ""), "measure.");
  const std::size_t dim = target_dim(cfg.target);

  if (j.contains("potential") && !j.at("potential").is_null()) {
    if (std::holds_alternative<AnalyticMeasure1D>(cfg.target))
      fail("potential", "analytic measures do not take a potential");
    const auto& prior = std::get<SpectralGaussian>(cfg.target);
    Posterior post{prior, parse_potential(j.at("potential"), dim, "potential.")};
    cfg.posterior = post;
    cfg.target = Target{std::move(post)};
  }

  if (j.contains("schedule")) {
    const json& s = j.at("schedule");
    cfg.schedule.r0 = get_double_or(s, "r0", "schedule.", cfg.schedule.r0);
    cfg.schedule.factor = get_double_or(s, "factor", "schedule.", cfg.schedule.factor);
    if (s.contains("count")) cfg.schedule.count = get_size(s, "count", "schedule.");
    if (!(cfg.schedule.r0 > 0.0)) fail("schedule.r0", "must be positive");
    if (!(cfg.schedule.factor > 0.0 && cfg.schedule.factor < 1.0))
      fail("schedule.factor", "must lie in (0,1)");
    if (cfg.schedule.count < 1) fail("schedule.count", "must be >= 1");
  }

  const json& mc = require(j, "mc", "");
  cfg.mc_n = get_size(mc, "n", "mc.");
  if (cfg.mc_n == 0) fail("mc.n", "must be >= 1");
  if (!mc.contains("seed")) fail("mc.seed", "missing required field (no wall-clock default)");
  cfg.seed = get_size(mc, "seed", "mc.");

  if (j.contains("point")) {
    cfg.point = get_vec(j.at("point"), "point");
    if (cfg.point.size() != dim) fail("point", "dimension must match measure dim");
  }
  if (j.contains("ball")) {
    const json& b = j.at("ball");
    Ball ball;
    ball.center = get_vec(require(b, "center", "ball."), "ball.center");
    if (ball.center.size() != dim) fail("ball.center", "dimension must match measure dim");
    ball.radius = get_double(b, "radius", "ball.");
    if (!(ball.radius > 0.0)) fail("ball.radius", "must be positive");
    ball.norm = target_norm(cfg.target);
    cfg.ball = ball;
  }
  if (j.contains("method")) {
    cfg.method = get_string(j, "method", "");
    if (cfg.method != "direct" && cfg.method != "importance")
      fail("method", "must be \"direct\" or \"importance\", got \"" + cfg.method + "\"");
  }
  if (j.contains("challengers")) {
    const json& cs = j.at("challengers");
    if (!cs.is_array()) fail("challengers", "must be an array of points");
    for (std::size_t i = 0; i < cs.size(); ++i) {
      Vec c = get_vec(cs[i], "challengers[" + std::to_string(i) + "]");
      if (c.size() != dim)
        fail("challengers[" + std::to_string(i) + "]", "dimension must match measure dim");
      cfg.challengers.push_back(std::move(c));
    }
  }
  cfg.tol = get_double_or(j, "tol", "", cfg.tol);
  if (!(cfg.tol > 0.0)) fail("tol", "must be positive");
  if (j.contains("bound")) {
    const json& b = j.at("bound");
    cfg.bound_eta = get_double(b, "eta", "bound.");
    cfg.bound_K = get_double(b, "K", "bound.");
    if (!(cfg.bound_eta > 0.0)) fail("bound.eta", "must be positive");
  }
  if (j.contains("gradient_check")) {
    if (!j.at("gradient_check").is_boolean()) fail("gradient_check", "must be a boolean");
    cfg.run_gradient_check = j.at("gradient_check").get<bool>();
  }

  if (j.contains("output")) {
    const json& o = j.at("output");
    if (o.contains("path")) cfg.out_path = get_string(o, "path", "output.");
    if (o.contains("format")) {
      cfg.out_format = get_string(o, "format", "output.");
      if (cfg.out_format != "json" && cfg.out_format != "csv")
        fail("output.format", "must be \"json\" or \"csv\", got \"" + cfg.out_format + "\"");
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open \"" + path + "\"");
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ValidationError(std::string("config: invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

namespace {

json vec_json(const Vec& v) { return json(v); }

const SpectralGaussian& prior_of(const ExperimentConfig& cfg, const char* op) {
  if (cfg.posterior) return cfg.posterior->prior;
  if (const auto* g = std::get_if<SpectralGaussian>(&cfg.target)) return *g;
  fail("measure.type", std::string(op) + " requires a spectral or power_law measure");
}

void run_estimate_map(const ExperimentConfig& cfg, RunRecord& rec) {
  if (!cfg.posterior) fail("potential", "estimate-map requires a potential");
  MinimizeOptions opts;
  opts.seed = cfg.seed;
  const OmResult res = minimize_om(*cfg.posterior, opts);
  if (!res.converged && !res.suspected_noncoercive)
    throw NumericalError("estimate-map: optimizer did not converge (final gradient norm " +
                         format_double(res.grad_norm_final) + ")");
  json out;
  out["minimizer"] = vec_json(res.minimizer);
  out["value"] = res.value;
  out["iterations"] = res.iterations;
  out["grad_norm_final"] = res.grad_norm_final;
  out["multistart_values"] = res.multistart_values;
  out["converged"] = res.converged;
  out["suspected_noncoercive"] = res.suspected_noncoercive;
  if (res.suspected_noncoercive) {
    rec.inconclusive = true;
    rec.note = "suspected non-coercive objective: iterates left the trust region";
  }
  rec.payload["results"] = std::move(out);
}

void run_ball_prob(const ExperimentConfig& cfg, RunRecord& rec) {
  if (!cfg.ball) fail("ball", "ball-prob requires a ball");
  json out;
  if (const auto* a = std::get_if<AnalyticMeasure1D>(&cfg.target)) {
    out["value"] = exact_ball_prob_1d(*a, *cfg.ball);
    out["stderr"] = 0.0;
    out["method"] = "exact";
  } else if (cfg.posterior) {
    if (cfg.method == "importance")
      fail("method", "importance is supported for prior measures only");
    const BallProbEstimate est = ball_prob(*cfg.posterior, *cfg.ball, cfg.mc_n, cfg.seed);
    out["value"] = est.value;
    out["stderr"] = est.stderr_;
    out["hits"] = est.hits;
    out["ess"] = est.ess;
    out["low_confidence"] = est.low_confidence;
    out["method"] = "direct";
    rec.inconclusive = est.low_confidence;
  } else {
    const auto& m = std::get<SpectralGaussian>(cfg.target);
    const BallProbEstimate est = cfg.method == "importance"
                                     ? importance_ball_prob(m, *cfg.ball, cfg.mc_n, cfg.seed)
                                     : ball_prob(m, *cfg.ball, cfg.mc_n, cfg.seed);
    out["value"] = est.value;
    out["stderr"] = est.stderr_;
    out["hits"] = est.hits;
    out["ess"] = est.ess;
    out["low_confidence"] = est.low_confidence;
    out["method"] = cfg.method;
    rec.inconclusive = est.low_confidence;
  }
  if (rec.inconclusive) rec.note = "low-confidence estimate (too few hits or low ESS)";
  rec.payload["results"] = std::move(out);
}

void run_verify_anderson(const ExperimentConfig& cfg, RunRecord& rec) {
  if (cfg.posterior) fail("potential", "verify-anderson applies to the prior, not a posterior");
  const auto& m = prior_of(cfg, "verify-anderson");
  if (cfg.point.empty()) fail("point", "verify-anderson requires a point");
  json rows = json::array();
  bool all_pass = true;
  bool low = false;
  std::size_t k = 0;
  for (const double r : cfg.schedule.radii()) {
    AndersonReport rep;
    try {
      rep = explicit_anderson_check(m, cfg.point, r, cfg.mc_n, derive_seed(cfg.seed, k));
    } catch (const UndefinedRatioError& e) {
      throw NumericalError(std::string("verify-anderson: ") + e.what() + " at r=" +
                           format_double(r));
    }
    json row;
    row["r"] = r;
    row["ratio"] = rep.ratio.value;
    row["stderr"] = rep.ratio.stderr_;
    row["bound"] = rep.bound;
    row["projection_value"] = rep.projection_value;
    row["pass"] = rep.pass;
    rows.push_back(std::move(row));
    rec.curve.push_back({r, rep.ratio.value, rep.ratio.stderr_, rep.bound, rep.pass});
    all_pass = all_pass && rep.pass;
    low = low || rep.low_confidence;
    ++k;
  }
  json out;
  out["rows"] = std::move(rows);
  out["all_pass"] = all_pass;
  out["low_confidence"] = low;
  rec.inconclusive = low;
  if (low) rec.note = "some radii had low-confidence ratio estimates";
  rec.payload["results"] = std::move(out);
}

void run_classify_mode(const ExperimentConfig& cfg, RunRecord& rec) {
  if (cfg.point.empty()) fail("point", "classify-mode requires a point");
  ClassifyOptions opts;
  opts.tol = cfg.tol;
  opts.n = cfg.mc_n;
  opts.seed = cfg.seed;
  opts.challengers = cfg.challengers;
  opts.quadrature_1d = target_dim(cfg.target) == 1;
  const ModeVerdict v = classify_full(cfg.target, cfg.point, cfg.schedule, opts);
  json out;
  out["classification"] = to_string(v.classification);
  out["weak_pass"] = v.weak_pass;
  out["strong_pass"] = v.strong_pass;
  out["generalized_pass"] = v.generalized_pass;
  out["in_support"] = v.in_support;
  out["note"] = v.note;
  json ev = json::array();
  for (const auto& e : v.evidence) {
    json row;
    row["r"] = e.r;
    row["kind"] = e.kind;
    row["ratio"] = e.ratio;
    row["stderr"] = e.stderr_;
    row["threshold"] = e.threshold;
    row["pass"] = e.pass;
    row["center"] = vec_json(e.center);
    ev.push_back(std::move(row));
    if (e.kind == "strong")
      rec.curve.push_back({e.r, e.ratio, e.stderr_, e.threshold, e.pass});
  }
  out["evidence"] = std::move(ev);
  json centers = json::array();
  for (const auto& c : v.generalized_centers) centers.push_back(vec_json(c));
  out["generalized_centers"] = std::move(centers);
  rec.inconclusive = v.classification == ModeClass::Inconclusive;
  if (rec.inconclusive) rec.note = "classifier verdict inconclusive at the configured n";
  rec.payload["results"] = std::move(out);
}

void run_amf_track(const ExperimentConfig& cfg, RunRecord& rec) {
  if (!cfg.posterior) fail("potential", "amf-track requires a potential");
  AmfOptions opts;
  opts.n = cfg.mc_n;
  opts.seed = cfg.seed;
  opts.tol = cfg.tol;
  opts.quadrature_1d = cfg.posterior->prior.dim() == 1;
  const AmfTrace trace = amf_track(*cfg.posterior, cfg.schedule, opts);
  json out;
  json rows = json::array();
  for (const auto& e : trace.entries) {
    json row;
    row["r"] = e.r;
    row["center"] = vec_json(e.center);
    row["mass"] = e.mass;
    row["deficiency"] = e.deficiency;
    rows.push_back(std::move(row));
    rec.curve.push_back({e.r, e.deficiency, 0.0, cfg.tol, e.deficiency <= cfg.tol});
  }
  out["entries"] = std::move(rows);
  out["om_minimizer"] = vec_json(trace.om_minimizer);
  if (trace.limit_point) {
    out["limit_point"] = vec_json(*trace.limit_point);
    out["dist_to_om_minimizer"] = trace.dist_to_om_minimizer;
  } else {
    out["limit_point"] = nullptr;
  }
  out["note"] = trace.note;
  rec.inconclusive = !trace.limit_point.has_value();
  if (rec.inconclusive) rec.note = "tracked centers did not settle within tol";
  rec.payload["results"] = std::move(out);
}

void run_m_property(const ExperimentConfig& cfg, RunRecord& rec) {
  if (cfg.posterior) fail("potential", "m-property applies to the prior, not a posterior");
  const auto& m = prior_of(cfg, "m-property");
  if (cfg.point.empty()) fail("point", "m-property requires a point");
  MPropertyReport rep;
  try {
    rep = m_property_decay(m, cfg.point, cfg.schedule, cfg.mc_n, cfg.seed);
  } catch (const UndefinedRatioError& e) {
    throw NumericalError(std::string("m-property: ") + e.what());
  }
  json rows = json::array();
  for (const auto& row : rep.rows) {
    json r;
    r["r"] = row.r;
    r["ratio"] = row.ratio;
    r["stderr"] = row.stderr_;
    r["bound"] = row.bound;
    r["projection_value"] = row.projection_value;
    r["pass"] = row.pass;
    rows.push_back(std::move(r));
    rec.curve.push_back({row.r, row.ratio, row.stderr_, row.bound, row.pass});
  }
  json out;
  out["rows"] = std::move(rows);
  out["values_increasing"] = rep.values_increasing;
  out["all_pass"] = rep.all_pass;
  rec.payload["results"] = std::move(out);
}

void run_verify_potential(const ExperimentConfig& cfg, RunRecord& rec) {
  if (!cfg.posterior) fail("potential", "verify-potential requires a potential");
  if (!(cfg.bound_eta > 0.0)) fail("bound.eta", "verify-potential requires a bound spec");
  const auto& post = *cfg.posterior;
  const BoundCheckResult res =
      verify_bound(post.potential, post.prior, cfg.bound_eta, cfg.bound_K, cfg.mc_n, cfg.seed);
  json out;
  out["ok"] = res.ok;
  out["eta"] = res.bound.eta;
  out["K"] = res.bound.K;
  json viols = json::array();
  for (std::size_t i = 0; i < res.violations.size() && i < 5; ++i) {
    const auto& v = res.violations[i];
    json row;
    row["point"] = vec_json(v.point);
    row["norm"] = ambient_norm(post.prior.ambient(), v.point);
    row["deficit"] = v.deficit;
    viols.push_back(std::move(row));
  }
  out["violations"] = std::move(viols);
  out["violation_count"] = res.violations.size();
  if (cfg.run_gradient_check && post.potential.has_gradient()) {
    const GradientCheckReport g =
        check_gradient(post.potential, post.prior.dim(), 100, derive_seed(cfg.seed, 0x9c));
    json gj;
    gj["max_rel_err"] = g.max_rel_err;
    gj["ok"] = g.ok;
    out["gradient"] = std::move(gj);
  }
  rec.payload["results"] = std::move(out);
}

}  // namespace

RunRecord run(const ExperimentConfig& cfg) {
  RunRecord rec;
  rec.seed = cfg.seed;
  // The output destination is not part of the experiment identity: the same
  // config written to two different paths must hash (and serialize) the same.
  nlohmann::ordered_json canonical = cfg.effective;
  if (canonical.contains("output") && canonical["output"].is_object())
    canonical["output"].erase("path");
  rec.config_hash = fnv1a_hash(canonical.dump());
  char hash_hex[19];
  std::snprintf(hash_hex, sizeof(hash_hex), "0x%016llx",
                static_cast<unsigned long long>(rec.config_hash));
  rec.payload["version"] = rec.version;
  rec.payload["operation"] = cfg.operation;
  rec.payload["seed"] = rec.seed;
  rec.payload["config_hash"] = std::string(hash_hex);

  try {
    if (cfg.operation == "estimate-map") run_estimate_map(cfg, rec);
    else if (cfg.operation == "ball-prob") run_ball_prob(cfg, rec);
    else if (cfg.operation == "verify-anderson") run_verify_anderson(cfg, rec);
    else if (cfg.operation == "classify-mode") run_classify_mode(cfg, rec);
    else if (cfg.operation == "amf-track") run_amf_track(cfg, rec);
    else if (cfg.operation == "m-property") run_m_property(cfg, rec);
    else if (cfg.operation == "verify-potential") run_verify_potential(cfg, rec);
    else fail("operation", "unknown operation \"" + cfg.operation + "\"");
  } catch (const UndefinedRatioError& e) {
    throw NumericalError(e.what());
  } catch (const EvaluationError& e) {
    throw NumericalError(e.what());
  }
  return rec;
}

void emit_curve(const RunRecord& rec, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("emit_curve: cannot open \"" + path + "\" for writing");
  out << "r,estimate,stderr,bound,pass\n";
  for (const auto& row : rec.curve) {
    out << format_double(row.r) << ',' << format_double(row.estimate) << ','
        << format_double(row.stderr_) << ',' << format_double(row.bound) << ','
        << (row.pass ? '1' : '0') << '\n';
  }
  if (!out) throw std::runtime_error("emit_curve: write to \"" + path + "\" failed");
}

void write_outputs(const RunRecord& rec, const ExperimentConfig& cfg) {
  if (cfg.out_path.empty()) return;
  if (cfg.out_format == "csv") {
    emit_curve(rec, cfg.out_path);
    return;
  }
  std::ofstream out(cfg.out_path, std::ios::binary);
  if (!out) throw std::runtime_error("write_outputs: cannot open \"" + cfg.out_path + "\"");
  out << rec.payload.dump(2) << '\n';
  if (!out) throw std::runtime_error("write_outputs: write to \"" + cfg.out_path + "\" failed");
}

}  // namespace gmap
