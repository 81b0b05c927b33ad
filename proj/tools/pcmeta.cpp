// pcmeta: few-shot point cloud segmentation runs from the command line.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "pcmeta/gradcheck.hpp"
#include "pcmeta/run.hpp"

namespace fs = std::filesystem;
using namespace pcmeta;

namespace {

struct EvalFlags {
  std::size_t ways = 2, shots = 6, queries = 1;
  std::string mode = "room_type";
  std::size_t episodes = 20;
  double beta = 1e-3;
  std::size_t inner_steps = 1;
  std::size_t threads = 1;

  void attach(CLI::App* app) {
    app->add_option("--ways", ways, "categories per episode (N)")->capture_default_str();
    app->add_option("--shots", shots, "support blocks per category (K)")->capture_default_str();
    app->add_option("--queries", queries, "query multiplier t: t*K query blocks per category")->capture_default_str();
    app->add_option("--category-mode", mode, "room_type or semantic_composition")->capture_default_str();
    app->add_option("--episodes", episodes, "target episodes")->capture_default_str();
    app->add_option("--beta", beta, "inner learning rate")->capture_default_str();
    app->add_option("--inner-steps", inner_steps, "support gradient steps")->capture_default_str();
    app->add_option("--threads", threads, "worker threads over episodes")->capture_default_str();
  }

  [[nodiscard]] EpisodeSpec spec() const { return {ways, shots, queries, parse_category_mode(mode)}; }

  void apply(AdaptEvalOptions& o) const {
    o.spec = spec();
    o.episodes = episodes;
    o.beta = beta;
    o.inner_steps = inner_steps;
    o.threads = threads;
  }
};

// Flags given on the command line override the config file.
void override_run_config(RunConfig& cfg, const CLI::App& app, std::uint64_t seed, const std::string& out,
                         const std::string& data) {
  if (app.count("--seed")) cfg.seed = seed;
  if (app.count("--out")) cfg.out = out;
  if (app.count("--data")) cfg.data.root = data;
}

int run_gradcheck_command(const GradcheckConfig& cfg, const std::string& out) {
  const auto report = run_gradcheck(cfg);
  std::size_t failing = 0;
  for (const auto& c : report.checks) {
    if (c.rel_error > report.tolerance) {
      if (++failing <= 10)
        fmt::print("  FAIL {}[{}] analytic {:.10e} numeric {:.10e} rel {:.3e}\n", c.param, c.index, c.analytic,
                   c.numeric, c.rel_error);
    }
  }
  fmt::print("gradcheck {}: {} coordinates, max rel error {:.3e}, tolerance {:.0e}, {} failing -> {}\n",
             to_string(cfg.precision), report.checks.size(), report.max_rel_error, report.tolerance, failing,
             report.passed ? "PASS" : "FAIL");
  if (!out.empty()) {
    ensure_directory(out);
    nlohmann::json j{{"precision", to_string(cfg.precision)},
                     {"tolerance", report.tolerance},
                     {"max_rel_error", report.max_rel_error},
                     {"passed", report.passed},
                     {"checks", nlohmann::json::array()}};
    for (const auto& c : report.checks)
      j["checks"].push_back(
          {{"param", c.param}, {"index", c.index}, {"analytic", c.analytic}, {"numeric", c.numeric}, {"rel_error", c.rel_error}});
    std::ofstream(fs::path(out) / "gradcheck.json") << j.dump(2) << '\n';
  }
  return report.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meta-learned few-shot semantic segmentation of indoor point clouds"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  std::uint64_t seed = 0;
  std::string config_path, out, data;
  double block_size = 1.0;
  int status = 0;

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset from a spec file");
  synth->add_option("--config,--spec", config_path, "synthetic dataset spec (JSON)")->required()->check(CLI::ExistingFile);
  synth->add_option("--seed", seed, "generator seed")->capture_default_str();
  synth->add_option("--out", out, "output dataset root")->required();
  synth->add_option("--block-size", block_size, "block edge for the printed counts (m)")->capture_default_str();
  synth->callback([&] { run_synth(config_path, seed, out, block_size, std::cout); });

  // ingest
  auto* ingest = app.add_subcommand("ingest", "validate a dataset and report rooms, blocks and points");
  ingest->add_option("--data", data, "dataset root (Area_*/<room>.txt, optional classes.txt)")->required();
  ingest->add_option("--out", out, "report directory")->required();
  ingest->add_option("--block-size", block_size, "block edge (m)")->capture_default_str();
  ingest->callback([&] { run_ingest(data, out, block_size, std::cout); });

  // pretrain
  auto* pretrain_cmd = app.add_subcommand("pretrain", "meta-train an initialization");
  pretrain_cmd->add_option("--config", config_path, "run config (JSON)")->required();
  pretrain_cmd->add_option("--seed", seed, "overrides the config seed");
  pretrain_cmd->add_option("--out", out, "overrides the config output directory");
  pretrain_cmd->add_option("--data", data, "overrides data.root");
  pretrain_cmd->callback([&] {
    auto cfg = load_run_config(config_path);
    override_run_config(cfg, *pretrain_cmd, seed, out, data);
    for (const auto& o : run_pretrain(cfg, std::cout)) {
      const double tail = o.losses.empty() ? 0.0 : o.losses.back();
      fmt::print("{}: {} steps, final query loss {:.5f}\n", o.dir.generic_string(), o.losses.size(), tail);
    }
  });

  // adapt-eval
  AdaptEvalOptions eval;
  EvalFlags eval_flags;
  std::vector<std::string> eval_areas;
  auto* adapt = app.add_subcommand("adapt-eval", "adapt a checkpoint on target episodes and score the queries");
  adapt->add_option("--checkpoint", eval.checkpoint, "checkpoint file")->required();
  adapt->add_option("--data", data, "dataset root")->required();
  adapt->add_option("--areas", eval_areas, "target areas (default: all)");
  adapt->add_option("--seed", seed, "episode seed")->capture_default_str();
  adapt->add_option("--out", out, "output directory")->required();
  adapt->add_option("--block-size", block_size, "block edge (m)")->capture_default_str();
  eval_flags.attach(adapt);
  adapt->callback([&] {
    eval_flags.apply(eval);
    eval.data_root = data;
    eval.areas = eval_areas;
    eval.seed = seed;
    eval.out = out;
    eval.block_size = block_size;
    run_adapt_eval(eval, std::cout);
  });

  // cross-validate
  EvalFlags cv_flags;
  std::vector<std::string> cv_areas;
  std::uint64_t eval_seed = 0;
  auto* cv = app.add_subcommand("cross-validate", "pretrain on each area, adapt-eval on every other area");
  cv->add_option("--config", config_path, "run config used for every pretraining (JSON)")->required();
  cv->add_option("--areas", cv_areas, "areas to cross (default: all)");
  cv->add_option("--seed", seed, "overrides the pretraining seed");
  cv->add_option("--eval-seed", eval_seed, "episode seed for adapt-eval")->capture_default_str();
  cv->add_option("--out", out, "output directory");
  cv->add_option("--data", data, "overrides data.root");
  cv_flags.attach(cv);
  cv->callback([&] {
    CrossValidateOptions o;
    o.pretrain = load_run_config(config_path);
    override_run_config(o.pretrain, *cv, seed, out, data);
    cv_flags.apply(o.eval);
    o.eval.seed = eval_seed;
    o.areas = cv_areas;
    o.out = o.pretrain.out;
    const auto table = run_cross_validate(o, std::cout);
    fmt::print("cross-validate: {} area pairs -> {}\n", table.size(), (o.out / "cv_oacc.csv").generic_string());
  });

  // export-ply
  ExportPlyOptions ply;
  std::string palette, classes;
  auto* export_cmd = app.add_subcommand("export-ply", "write predicted and ground-truth PLY files per block");
  export_cmd->add_option("--checkpoint", ply.checkpoint, "checkpoint file")->required();
  export_cmd->add_option("--room", ply.room, "room file (x y z r g b label per line)")->required();
  export_cmd->add_option("--out", out, "output directory")->required();
  export_cmd->add_option("--palette", palette, "palette file: 'class r g b' per line");
  export_cmd->add_option("--classes", classes, "class vocabulary (default: classes.txt next to the area, else S3DIS)");
  export_cmd->add_option("--resample", ply.resample, "points per block (0 keeps all points)")->capture_default_str();
  export_cmd->add_option("--seed", seed, "resampling seed")->capture_default_str();
  export_cmd->add_option("--block-size", block_size, "block edge (m)")->capture_default_str();
  export_cmd->callback([&] {
    ply.out = out;
    ply.seed = seed;
    ply.block_size = block_size;
    if (!palette.empty()) ply.palette = palette;
    if (!classes.empty()) ply.classes = classes;
    run_export_ply(ply, std::cout);
  });

  // gradcheck
  std::string precision = "float64";
  bool inject_error = false;
  std::size_t coordinates = 100;
  auto* gradcheck = app.add_subcommand("gradcheck", "compare reverse-mode gradients with finite differences");
  gradcheck->add_option("--config", config_path, "gradcheck config (JSON)");
  gradcheck->add_option("--seed", seed, "model and data seed")->capture_default_str();
  gradcheck->add_option("--precision", precision, "float64 or float32")->capture_default_str();
  gradcheck->add_option("--coordinates", coordinates, "sampled parameter coordinates")->capture_default_str();
  gradcheck->add_flag("--inject-error", inject_error, "perturb the analytic gradients (negative control)");
  gradcheck->add_option("--out", out, "write gradcheck.json here");
  gradcheck->callback([&] {
    GradcheckConfig cfg;
    if (!config_path.empty()) {
      try {
        cfg = load_json_file(config_path).get<GradcheckConfig>();
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed gradcheck config: ") + e.what());
      }
    }
    if (gradcheck->count("--seed") || config_path.empty()) cfg.seed = seed;
    if (gradcheck->count("--precision") || config_path.empty()) cfg.precision = parse_precision(precision);
    if (gradcheck->count("--coordinates") || config_path.empty()) cfg.coordinates = coordinates;
    cfg.inject_error = cfg.inject_error || inject_error;
    status = run_gradcheck_command(cfg, out);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const Error& e) {
    fmt::print(std::cerr, "error: {}\n", e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    fmt::print(std::cerr, "error: {}\n", e.what());
    return 1;
  }
  return status;
}
