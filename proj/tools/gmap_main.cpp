#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "gmap/cli.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitInconclusive = 4;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gmap: MAP estimation and small-ball diagnostics for Gaussian priors"};
  app.set_version_flag("--version", std::string("gmap ") + gmap::kVersion);
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::uint64_t seed_override = 0;
  bool seed_given = false;
  bool strict = false;

  const std::vector<std::string> ops = {"estimate-map",  "ball-prob", "verify-anderson",
                                        "classify-mode", "amf-track", "m-property",
                                        "verify-potential"};
  for (const auto& op : ops) {
    CLI::App* sub = app.add_subcommand(op);
    sub->add_option("--config", config_path, "JSON experiment config")->required();
    sub->add_option("--out", out_path, "output path (overrides output.path)");
    sub->add_option("--seed", seed_override, "seed override (overrides mc.seed)")
        ->each([&](const std::string&) { seed_given = true; });
    sub->add_flag("--strict", strict, "exit 4 on inconclusive verdicts");
  }

  CLI11_PARSE(app, argc, argv);
  const std::string subcommand = app.get_subcommands().front()->get_name();

  try {
    std::ifstream in(config_path);
    if (!in) throw gmap::ValidationError("config: cannot open \"" + config_path + "\"");
    nlohmann::ordered_json j;
    try {
      in >> j;
    } catch (const std::exception& e) {
      throw gmap::ValidationError(std::string("config: invalid JSON: ") + e.what());
    }

    if (!j.contains("operation")) j["operation"] = subcommand;
    if (j.at("operation") != subcommand)
      throw gmap::ValidationError("operation: config says \"" +
                                  j.at("operation").get<std::string>() +
                                  "\" but the subcommand is \"" + subcommand + "\"");
    if (seed_given) {
      if (!j.contains("mc") || !j.at("mc").is_object()) j["mc"] = nlohmann::ordered_json::object();
      j["mc"]["seed"] = seed_override;
    }
    if (!out_path.empty()) {
      if (!j.contains("output") || !j.at("output").is_object())
        j["output"] = nlohmann::ordered_json::object();
      j["output"]["path"] = out_path;
    }

    gmap::ExperimentConfig cfg = gmap::parse_config(j);

    const auto t0 = std::chrono::steady_clock::now();
    gmap::RunRecord rec = gmap::run(cfg);
    rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    gmap::write_outputs(rec, cfg);
    if (cfg.out_path.empty()) std::cout << rec.payload.dump(2) << '\n';
    std::fprintf(stderr, "gmap: %s done in %.3fs%s\n", cfg.operation.c_str(), rec.wall_time_s,
                 rec.inconclusive ? " (inconclusive)" : "");
    if (!rec.note.empty()) std::fprintf(stderr, "gmap: note: %s\n", rec.note.c_str());

    if (strict && rec.inconclusive) return kExitInconclusive;
    return kExitOk;
  } catch (const gmap::ValidationError& e) {
    std::fprintf(stderr, "gmap: config error: %s\n", e.what());
    return kExitValidation;
  } catch (const gmap::NumericalError& e) {
    std::fprintf(stderr, "gmap: numerical failure: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "gmap: error: %s\n", e.what());
    return kExitNumerical;
  }
}
