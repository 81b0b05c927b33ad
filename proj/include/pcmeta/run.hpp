#pragma once

// Reproducible runs: configuration files, manifests and the end-to-end
// commands behind the command-line tool.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/os.h>
#include <fmt/ostream.h>
#include <nlohmann/json.hpp>

#include "pcmeta/checkpoint.hpp"
#include "pcmeta/data.hpp"
#include "pcmeta/error.hpp"
#include "pcmeta/meta.hpp"
#include "pcmeta/metrics.hpp"
#include "pcmeta/ply.hpp"
#include "pcmeta/pointnet.hpp"
#include "pcmeta/rng.hpp"
#include "pcmeta/sampler.hpp"
#include "pcmeta/synthetic.hpp"

namespace pcmeta {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Process exit status for a library error: 2 usage or configuration
/// (including malformed input files), 3 divergence, 4 not enough data,
/// 5 I/O. Internal contract violations give 1.
inline int exit_code(Error::Kind kind) {
  switch (kind) {
    case Error::Kind::config:
    case Error::Kind::validation:
    case Error::Kind::parse:
    case Error::Kind::capability: return 2;
    case Error::Kind::divergence: return 3;
    case Error::Kind::capacity:
    case Error::Kind::empty_input: return 4;
    case Error::Kind::io: return 5;
    case Error::Kind::dimension:
    case Error::Kind::contract: return 1;
  }
  return 1;
}

// ---------------------------------------------------------------------------
// Hashing

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string file_fingerprint(const std::filesystem::path& path) { return hex64(fnv1a64(read_file(path))); }

/// Hash of every regular file under `root` (relative path and contents, in
/// path order), skipping manifest.json.
inline std::string tree_fingerprint(const std::filesystem::path& root) {
  if (std::filesystem::is_regular_file(root)) return file_fingerprint(root);
  if (!std::filesystem::is_directory(root)) throw IoError("cannot fingerprint missing path " + root.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& f : files) {
    h = fnv1a64(std::filesystem::relative(f, root).generic_string(), h);
    h = fnv1a64(read_file(f), h);
  }
  return hex64(h);
}

// ---------------------------------------------------------------------------
// Manifest

/// Records what produced a directory of outputs. Contains no timestamps or
/// host details, so identical runs write identical manifests.
struct Manifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json seeds = nlohmann::json::object();
  nlohmann::json inputs = nlohmann::json::object();
  std::vector<std::filesystem::path> outputs;

  void write(const std::filesystem::path& dir) const {
    nlohmann::json out_hashes = nlohmann::json::object();
    for (const auto& o : outputs) {
      out_hashes[std::filesystem::relative(o, dir).generic_string()] = file_fingerprint(o);
    }
    const nlohmann::json j{{"tool", "pcmeta"},
                           {"version", kToolVersion},
                           {"command", command},
                           {"config_hash", hex64(fnv1a64(config.dump()))},
                           {"config", config},
                           {"seeds", seeds},
                           {"inputs", inputs},
                           {"outputs", out_hashes}};
    std::ofstream f(dir / "manifest.json", std::ios::trunc);
    if (!f) throw IoError("cannot write " + (dir / "manifest.json").string());
    f << j.dump(2) << '\n';
  }
};

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// Run configuration

struct DataConfig {
  std::string root;
  std::vector<std::string> areas;  ///< empty means every area under root
  double block_size = 1.0;
};

struct RunConfig {
  DataConfig data;
  PointNetConfig model;
  EpisodeSpec episodes;
  MetaConfig meta;
  /// Non-empty: one independent pretraining run per beta.
  std::vector<double> sweep_betas;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> init_seed;
  Precision precision = Precision::float64;
  std::string out = "run";

  [[nodiscard]] std::uint64_t episode_seed() const { return derive_seed(seed, {1}); }
  [[nodiscard]] std::uint64_t parameter_seed() const { return init_seed.value_or(derive_seed(seed, {2})); }
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = {{"data", {{"root", c.data.root}, {"areas", c.data.areas}, {"block_size", c.data.block_size}}},
       {"model", c.model},
       {"episodes", c.episodes},
       {"meta", c.meta},
       {"sweep_betas", c.sweep_betas},
       {"seed", c.seed},
       {"precision", to_string(c.precision)},
       {"out", c.out}};
  if (c.init_seed) j["init_seed"] = *c.init_seed;
}

/// The config as recorded in checkpoints and manifests. The output directory
/// is left out so a run's outputs do not depend on where they are written.
inline nlohmann::json recorded_config(const RunConfig& c) {
  nlohmann::json j = c;
  j.erase("out");
  return j;
}

inline RunConfig parse_run_config(const nlohmann::json& j) {
  RunConfig c;
  try {
    if (j.contains("data")) {
      const auto& d = j["data"];
      c.data.root = d.value("root", c.data.root);
      c.data.areas = d.value("areas", c.data.areas);
      c.data.block_size = d.value("block_size", c.data.block_size);
    }
    if (j.contains("model")) c.model = j["model"].get<PointNetConfig>();
    if (j.contains("episodes")) c.episodes = j["episodes"].get<EpisodeSpec>();
    if (j.contains("meta")) c.meta = j["meta"].get<MetaConfig>();
    c.sweep_betas = j.value("sweep_betas", c.sweep_betas);
    c.seed = j.value("seed", c.seed);
    if (j.contains("init_seed")) c.init_seed = j["init_seed"].get<std::uint64_t>();
    c.precision = parse_precision(j.value("precision", to_string(c.precision)));
    c.out = j.value("out", c.out);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed run config: ") + e.what());
  }
  c.model.validate();
  c.episodes.validate();
  c.meta.validate();
  for (double b : c.sweep_betas)
    if (!(b >= 0.0)) throw ConfigError("sweep_betas entries must be >= 0");
  if (!(c.data.block_size > 0.0)) throw ConfigError("data.block_size must be > 0");
  return c;
}

inline nlohmann::json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
}

inline RunConfig load_run_config(const std::filesystem::path& path) { return parse_run_config(load_json_file(path)); }

// ---------------------------------------------------------------------------
// Shared pieces

inline std::vector<Area> load_training_data(const DataConfig& data) {
  if (data.root.empty()) throw ConfigError("no data root given");
  if (!std::filesystem::is_directory(data.root)) throw ConfigError("data root not found: " + data.root);
  return load_dataset(data.root, data.areas);
}

inline void require_vocabulary_fits(const std::vector<Area>& areas, const PointNetConfig& model) {
  for (const auto& a : areas) {
    if (a.vocabulary.size() != model.num_classes) {
      throw ConfigError(fmt::format("dataset has {} classes but the model predicts {}", a.vocabulary.size(),
                                    model.num_classes));
    }
  }
}

inline std::string format_beta(double beta) { return fmt::format("{}", beta); }

// ---------------------------------------------------------------------------
// synth

struct SynthSummary {
  struct AreaCounts {
    std::string name;
    std::size_t rooms = 0, blocks = 0, points = 0;
  };
  std::vector<AreaCounts> areas;
};

/// Generates the areas of `spec_path`, writes them under `out`, then reloads
/// them from disk and counts blocks with the same partitioning the other
/// commands use.
inline SynthSummary run_synth(const std::filesystem::path& spec_path, std::uint64_t seed,
                              const std::filesystem::path& out, double block_size, std::ostream& log) {
  const auto spec = load_synthetic_spec(spec_path);
  const auto areas = generate_synthetic_dataset(spec, seed);
  ensure_directory(out);
  write_dataset(out, areas);

  SynthSummary summary;
  for (const auto& area : load_dataset(out)) {
    SynthSummary::AreaCounts c{area.name, area.rooms.size(), 0, 0};
    for (const auto& room : area.rooms) {
      c.blocks += partition_blocks(room, block_size).size();
      c.points += room.size();
    }
    fmt::print(log, "{}: {} rooms, {} blocks, {} points\n", c.name, c.rooms, c.blocks, c.points);
    summary.areas.push_back(c);
  }

  Manifest m{"synth", load_json_file(spec_path), {{"seed", seed}}, {{"spec", file_fingerprint(spec_path)}}, {}};
  m.config["block_size"] = block_size;
  m.inputs["dataset"] = tree_fingerprint(out);
  m.write(out);
  return summary;
}

// ---------------------------------------------------------------------------
// ingest

inline nlohmann::json run_ingest(const std::filesystem::path& root, const std::filesystem::path& out,
                                 double block_size, std::ostream& log) {
  const auto areas = load_dataset(root);
  nlohmann::json report{{"areas", nlohmann::json::array()}, {"classes", areas.front().vocabulary.names}};
  for (const auto& area : areas) {
    std::size_t blocks = 0, points = 0;
    std::map<std::string, std::size_t> per_type;
    for (const auto& room : area.rooms) {
      const auto n = partition_blocks(room, block_size).size();
      blocks += n;
      points += room.size();
      per_type[room.room_type] += n;
    }
    report["areas"].push_back(
        {{"name", area.name}, {"rooms", area.rooms.size()}, {"blocks", blocks}, {"points", points}, {"blocks_per_room_type", per_type}});
    fmt::print(log, "{}: {} rooms, {} blocks, {} points\n", area.name, area.rooms.size(), blocks, points);
  }
  ensure_directory(out);
  const auto report_path = out / "ingest.json";
  std::ofstream(report_path) << report.dump(2) << '\n';
  Manifest m{"ingest", {{"root", root.generic_string()}, {"block_size", block_size}}, {}, {{"dataset", tree_fingerprint(root)}},
             {report_path}};
  m.write(out);
  return report;
}

// ---------------------------------------------------------------------------
// pretrain

struct PretrainOutcome {
  std::filesystem::path dir;
  double beta = 0.0;
  std::filesystem::path final_checkpoint;
  std::filesystem::path loss_csv;
  std::vector<double> losses;
};

namespace detail {

template <std::floating_point T>
PretrainOutcome pretrain_once(const RunConfig& cfg, const CategoryIndex& index, const std::filesystem::path& dir,
                              std::ostream& log) {
  ensure_directory(dir);
  const PointNetLearner<T> learner(cfg.model);
  const MetaConfig& mc = cfg.meta;
  const TaskDistribution dist(index, cfg.episodes, mc.total_steps() * mc.tasks_per_batch, cfg.episode_seed());

  PretrainOutcome outcome{dir, mc.beta, dir / "ckpt_final.ckpt", dir / "losses.csv", {}};
  Manifest manifest{"pretrain", recorded_config(cfg), {{"seed", cfg.seed}, {"episode_seed", cfg.episode_seed()}, {"init_seed", cfg.parameter_seed()}},
                    {{"dataset", tree_fingerprint(cfg.data.root)}}, {}};
  auto checkpoint = [&](const std::filesystem::path& path, const TrainState<T>& st, nlohmann::json extra) {
    extra["step"] = st.step;
    extra["seed"] = cfg.seed;
    extra["config_hash"] = hex64(fnv1a64(recorded_config(cfg).dump()));
    save_checkpoint(path, Checkpoint<T>{cfg.model, st.theta, extra});
    manifest.outputs.push_back(path);
  };

  auto csv = fmt::output_file(outcome.loss_csv.string());
  csv.print("step,query_loss,beta,alpha\n");
  TrainState<T> init{init_params<T>(cfg.model, cfg.parameter_seed()), 0, {}};
  checkpoint(dir / "ckpt_init.ckpt", init, {{"epoch", 0}});

  TrainObserver<T> observer;
  observer.on_step = [&](const StepRecord& r) {
    csv.print("{},{},{},{}\n", r.step, r.query_loss, r.beta, r.alpha);
    outcome.losses.push_back(r.query_loss);
    if ((r.step + 1) % 50 == 0) fmt::print(log, "  step {:>6}  query loss {:.5f}\n", r.step + 1, r.query_loss);
  };
  observer.on_epoch = [&](std::size_t epoch, const TrainState<T>& st) {
    csv.flush();
    checkpoint(dir / fmt::format("ckpt_epoch{}.ckpt", epoch), st, {{"epoch", epoch}});
  };
  auto batch_at = [&](std::size_t step) {
    return batch_from<T>(dist, step, mc.tasks_per_batch, cfg.model.points_per_block);
  };

  try {
    const auto final_state = pretrain<PointNetLearner<T>>(learner, init.theta, batch_at, mc, observer);
    checkpoint(outcome.final_checkpoint, final_state, {{"epoch", mc.epochs}});
  } catch (const DivergenceError&) {
    csv.close();
    manifest.outputs.push_back(outcome.loss_csv);
    manifest.write(dir);
    throw;
  }
  csv.close();
  manifest.outputs.push_back(outcome.loss_csv);
  manifest.write(dir);
  return outcome;
}

}  // namespace detail

/// Trains on the configured areas. With `sweep_betas`, one run per beta is
/// written to `<out>/beta_<value>/`; otherwise the run goes to `out`.
inline std::vector<PretrainOutcome> run_pretrain(const RunConfig& cfg, std::ostream& log) {
  const auto areas = load_training_data(cfg.data);
  require_vocabulary_fits(areas, cfg.model);
  const auto index = index_categories(areas, cfg.episodes.mode, cfg.data.block_size);
  std::vector<PretrainOutcome> outcomes;
  auto once = [&](const RunConfig& c, const std::filesystem::path& dir) {
    fmt::print(log, "pretrain: beta {} alpha {} -> {}\n", c.meta.beta, c.meta.alpha, dir.generic_string());
    outcomes.push_back(c.precision == Precision::float64 ? detail::pretrain_once<double>(c, index, dir, log)
                                                         : detail::pretrain_once<float>(c, index, dir, log));
  };
  if (cfg.sweep_betas.empty()) {
    once(cfg, cfg.out);
  } else {
    for (double beta : cfg.sweep_betas) {
      RunConfig c = cfg;
      c.meta.beta = beta;
      c.meta.beta_phases.clear();
      c.sweep_betas.clear();
      once(c, std::filesystem::path(cfg.out) / ("beta_" + format_beta(beta)));
    }
  }
  return outcomes;
}

// ---------------------------------------------------------------------------
// adapt-eval

struct AdaptEvalOptions {
  std::filesystem::path checkpoint;
  std::string data_root;
  std::vector<std::string> areas;
  EpisodeSpec spec;
  std::size_t episodes = 20;
  double beta = 1e-3;
  std::size_t inner_steps = 1;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  double block_size = 1.0;
  std::filesystem::path out = "eval";
};

inline nlohmann::json to_json(const AdaptEvalOptions& o) {
  return {{"checkpoint", o.checkpoint.generic_string()},
          {"data_root", o.data_root},
          {"areas", o.areas},
          {"episodes_spec", o.spec},
          {"episodes", o.episodes},
          {"beta", o.beta},
          {"inner_steps", o.inner_steps},
          {"block_size", o.block_size}};
}

namespace detail {

template <std::floating_point T>
EvalSummary adapt_eval_with(const AdaptEvalOptions& o, const CategoryIndex& index, std::vector<std::string>& class_names,
                            std::vector<std::filesystem::path>& outputs) {
  const auto ckpt = load_checkpoint<T>(o.checkpoint);
  const PointNetLearner<T> learner(ckpt.config);
  if (class_names.size() != ckpt.config.num_classes) {
    throw ConfigError(fmt::format("dataset has {} classes but the checkpoint predicts {}", class_names.size(),
                                  ckpt.config.num_classes));
  }
  const TaskDistribution target(index, o.spec, o.episodes, o.seed);
  const auto summary = adapt_and_eval(learner, ckpt.params, target, o.beta, o.inner_steps, o.threads);

  const auto manifest_path = o.out / "episode_manifest.json";
  std::ofstream(manifest_path) << episode_manifest(target).dump() << '\n';
  outputs.push_back(manifest_path);
  return summary;
}

}  // namespace detail

/// Adapts the checkpoint on `episodes` target tasks and scores each query set.
inline EvalSummary run_adapt_eval(const AdaptEvalOptions& o, std::ostream& log) {
  if (o.episodes == 0) throw ConfigError("--episodes must be at least 1");
  if (!(o.beta >= 0.0)) throw ConfigError("--beta must be >= 0");
  if (o.inner_steps < 1) throw ConfigError("--inner-steps must be at least 1");
  o.spec.validate();
  if (!std::filesystem::is_directory(o.data_root)) throw ConfigError("data root not found: " + o.data_root);
  const auto header = read_checkpoint_header(o.checkpoint);
  const auto areas = load_dataset(o.data_root, o.areas);
  const auto index = index_categories(areas, o.spec.mode, o.block_size);
  ensure_directory(o.out);

  auto class_names = areas.front().vocabulary.names;
  std::vector<std::filesystem::path> outputs;
  const auto precision = parse_precision(header.at("precision").get<std::string>());
  const auto summary = precision == Precision::float64
                           ? detail::adapt_eval_with<double>(o, index, class_names, outputs)
                           : detail::adapt_eval_with<float>(o, index, class_names, outputs);

  const auto metrics_path = o.out / "metrics.csv";
  {
    std::ofstream f(metrics_path);
    write_metrics_csv(f, summary.confusion, summary.overall, class_names);
  }
  const auto episodes_path = o.out / "episodes.csv";
  {
    auto f = fmt::output_file(episodes_path.string());
    f.print("episode,oAcc,mAcc,mIoU\n");
    for (std::size_t e = 0; e < summary.per_episode.size(); ++e) {
      const auto& m = summary.per_episode[e];
      f.print("{},{:.6f},{:.6f},{:.6f}\n", e, m.oacc, m.macc, m.miou);
    }
    f.print("mean,{:.6f},{:.6f},{:.6f}\n", summary.mean_oacc, summary.mean_macc, summary.mean_miou);
  }
  outputs.push_back(metrics_path);
  outputs.push_back(episodes_path);

  fmt::print(log, "adapt-eval: {} episodes, oAcc {:.4f}  mAcc {:.4f}  mIoU {:.4f}", o.episodes, summary.overall.oacc,
             summary.overall.macc, summary.overall.miou);
  if (!summary.overall.excluded.empty()) {
    fmt::print(log, "  (classes absent from truth and predictions, excluded: {})", summary.overall.excluded.size());
  }
  fmt::print(log, "\n");

  Manifest m{"adapt-eval", to_json(o), {{"seed", o.seed}},
             {{"checkpoint", file_fingerprint(o.checkpoint)}, {"dataset", tree_fingerprint(o.data_root)}}, outputs};
  m.write(o.out);
  return summary;
}

// ---------------------------------------------------------------------------
// cross-validate

struct CrossValidateOptions {
  RunConfig pretrain;               ///< data.root and schedule; areas are filled per row
  AdaptEvalOptions eval;            ///< spec, episodes, beta, inner steps, seed
  std::vector<std::string> areas;   ///< empty means every area under the root
  std::filesystem::path out = "cv";
};

/// Pretrains on each area in turn and runs adapt-eval on every other area.
/// Writes `cv_oacc.csv`: rows are pretraining areas, columns test areas, the
/// diagonal left empty.
inline std::map<std::pair<std::string, std::string>, double> run_cross_validate(const CrossValidateOptions& o,
                                                                               std::ostream& log) {
  auto names = o.areas;
  if (names.empty()) {
    for (const auto& a : load_dataset(o.pretrain.data.root)) names.push_back(a.name);
  }
  if (names.size() < 2) throw ConfigError("cross-validation needs at least two areas");
  ensure_directory(o.out);
  std::map<std::pair<std::string, std::string>, double> table;
  std::vector<std::filesystem::path> outputs;
  for (const auto& train : names) {
    RunConfig rc = o.pretrain;
    rc.data.areas = {train};
    rc.sweep_betas.clear();
    rc.out = (o.out / ("pretrain_" + train)).string();
    const auto outcome = run_pretrain(rc, log).front();
    outputs.push_back(outcome.final_checkpoint);
    for (const auto& test : names) {
      if (test == train) continue;
      AdaptEvalOptions e = o.eval;
      e.checkpoint = outcome.final_checkpoint;
      e.data_root = o.pretrain.data.root;
      e.areas = {test};
      e.block_size = o.pretrain.data.block_size;
      e.out = o.out / ("eval_" + train + "_to_" + test);
      fmt::print(log, "{} -> {}: ", train, test);
      table[{train, test}] = run_adapt_eval(e, log).overall.oacc;
      outputs.push_back(e.out / "metrics.csv");
    }
  }
  const auto path = o.out / "cv_oacc.csv";
  {
    auto f = fmt::output_file(path.string());
    f.print("pretrain\\test");
    for (const auto& n : names) f.print(",{}", n);
    f.print("\n");
    for (const auto& train : names) {
      f.print("{}", train);
      for (const auto& test : names) {
        if (test == train) f.print(",");
        else f.print(",{:.4f}", table.at({train, test}));
      }
      f.print("\n");
    }
  }
  outputs.push_back(path);
  nlohmann::json config{{"pretrain", recorded_config(o.pretrain)}, {"eval", to_json(o.eval)}, {"areas", names}};
  Manifest m{"cross-validate", config, {{"pretrain_seed", o.pretrain.seed}, {"eval_seed", o.eval.seed}},
             {{"dataset", tree_fingerprint(o.pretrain.data.root)}}, outputs};
  m.write(o.out);
  return table;
}

// ---------------------------------------------------------------------------
// export-ply

struct ExportPlyOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path room;
  std::filesystem::path out = "ply";
  std::optional<std::filesystem::path> palette;
  std::optional<std::filesystem::path> classes;
  std::size_t resample = 0;  ///< 0 keeps every point of each block
  std::uint64_t seed = 0;
  double block_size = 1.0;
};

namespace detail {

template <std::floating_point T>
std::vector<std::vector<int>> predict_blocks(const std::filesystem::path& checkpoint, const std::vector<Block>& blocks,
                                             const Bounds& bounds, std::size_t classes) {
  const auto ckpt = load_checkpoint<T>(checkpoint);
  if (ckpt.config.num_classes != classes) {
    throw ConfigError(fmt::format("vocabulary has {} classes but the checkpoint predicts {}", classes,
                                  ckpt.config.num_classes));
  }
  std::vector<std::vector<int>> out;
  for (const auto& b : blocks)
    out.push_back(predict_labels(forward(ckpt.params, ckpt.config, featurize<T>(b, bounds))));
  return out;
}

}  // namespace detail

/// Writes `<room>_<i>_<j>_pred.ply` and `<room>_<i>_<j>_truth.ply` per block.
/// Returns the written paths.
inline std::vector<std::filesystem::path> run_export_ply(const ExportPlyOptions& o, std::ostream& log) {
  std::filesystem::path vocab_path;
  if (o.classes) vocab_path = *o.classes;
  else if (std::filesystem::exists(o.room.parent_path().parent_path() / "classes.txt"))
    vocab_path = o.room.parent_path().parent_path() / "classes.txt";
  const auto vocab = vocab_path.empty() ? ClassVocabulary::s3dis() : load_vocabulary(vocab_path);
  const auto palette = o.palette ? load_palette(*o.palette) : default_palette(vocab);
  for (std::size_t c = 0; c < vocab.size(); ++c) {
    if (!palette.contains(static_cast<int>(c)))
      throw ConfigError(fmt::format("palette has no colour for class {} ({})", c, vocab.names[c]));
  }

  const auto header = read_checkpoint_header(o.checkpoint);
  const auto room = load_room(o.room, vocab);
  const auto bounds = bounds_of(room.points);
  auto blocks = partition_blocks(room, o.block_size);
  if (o.resample > 0) {
    for (std::size_t b = 0; b < blocks.size(); ++b)
      blocks[b] = resample_block(blocks[b], o.resample, derive_seed(o.seed, {b}));
  }
  const auto predictions = parse_precision(header.at("precision").get<std::string>()) == Precision::float64
                               ? detail::predict_blocks<double>(o.checkpoint, blocks, bounds, vocab.size())
                               : detail::predict_blocks<float>(o.checkpoint, blocks, bounds, vocab.size());
  ensure_directory(o.out);
  std::vector<std::filesystem::path> written;
  std::size_t vertices = 0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto stem = fmt::format("{}_{}_{}", room.name, blocks[b].i, blocks[b].j);
    written.push_back(o.out / (stem + "_pred.ply"));
    export_ply(blocks[b], predictions[b], palette, written.back());
    written.push_back(o.out / (stem + "_truth.ply"));
    export_ply(blocks[b], blocks[b].labels, palette, written.back());
    vertices += blocks[b].point_count();
  }
  fmt::print(log, "export-ply: {} blocks, {} files, {} vertices per labelling\n", blocks.size(), written.size(), vertices);

  nlohmann::json config{{"room", o.room.generic_string()}, {"resample", o.resample}, {"block_size", o.block_size}};
  nlohmann::json inputs{{"checkpoint", file_fingerprint(o.checkpoint)}, {"room", file_fingerprint(o.room)}};
  if (o.palette) inputs["palette"] = file_fingerprint(*o.palette);
  Manifest m{"export-ply", config, {{"seed", o.seed}}, inputs, written};
  m.write(o.out);
  return written;
}

}  // namespace pcmeta
