#include <gtest/gtest.h>

#include <fstream>
#include <regex>
#include <set>

#include "pcmeta/run.hpp"
#include "support/cli.hpp"
#include "support/temp_dir.hpp"

namespace fs = std::filesystem;
using namespace pcmeta;
using pcmeta::testing::quote;

namespace {

const char* kSpec = R"({
  "density": 12,
  "color_noise": 6,
  "areas": [
    {"name": "Area_A", "rooms": {"office": 2, "hallway": 2}},
    {"name": "Area_B", "rooms": {"office": 2, "hallway": 2}, "color_shift": [8, 0, -8]},
    {"name": "Area_C", "rooms": {"office": 2, "hallway": 2, "conferenceRoom": 1}}
  ]
})";

nlohmann::json tiny_run_config(const fs::path& data, const fs::path& out) {
  auto j = nlohmann::json::parse(R"({
    "data": {"areas": ["Area_A", "Area_B"]},
    "model": {"mlp1_widths": [8, 8], "mlp2_widths": [8, 16], "seg_head_widths": [8],
              "num_classes": 13, "points_per_block": 16},
    "episodes": {"ways": 2, "shots": 6, "query_multiplier": 1},
    "meta": {"alpha": 1e-3, "beta": 1e-3, "tasks_per_batch": 1, "epochs": 2, "steps_per_epoch": 3},
    "seed": 5
  })");
  j["out"] = out.string();
  j["data"]["root"] = data.string();
  return j;
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }
void write_json(const fs::path& p, const nlohmann::json& j) { std::ofstream(p) << j.dump(2); }

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new pcmeta::testing::TempDir("pcmeta-cli");
    write_text(*dir_ / "spec.json", kSpec);
    const auto r = pcmeta::testing::run_cli(
        PCMETA_CLI, "synth --spec " + quote(*dir_ / "spec.json") + " --seed 3 --out " + quote(*dir_ / "data"),
        *dir_ / "synth.log");
    ASSERT_EQ(r.code, 0) << r.output;
    synth_output_ = new std::string(r.output);
  }
  static void TearDownTestSuite() {
    delete dir_;
    delete synth_output_;
  }

  static pcmeta::testing::CliResult cli(const std::string& args) {
    return pcmeta::testing::run_cli(PCMETA_CLI, args, *dir_ / "last.log");
  }
  static fs::path tmp(const std::string& name) { return *dir_ / name; }
  static fs::path data() { return *dir_ / "data"; }

  static pcmeta::testing::TempDir* dir_;
  static std::string* synth_output_;
};

pcmeta::testing::TempDir* CliTest::dir_ = nullptr;
std::string* CliTest::synth_output_ = nullptr;

TEST_F(CliTest, SynthWritesOneDirectoryPerArea) {
  std::set<std::string> dirs;
  for (const auto& e : fs::directory_iterator(data()))
    if (e.is_directory()) dirs.insert(e.path().filename().string());
  EXPECT_EQ(dirs, (std::set<std::string>{"Area_A", "Area_B", "Area_C"}));
  EXPECT_TRUE(fs::exists(data() / "classes.txt"));
  EXPECT_TRUE(fs::exists(data() / "manifest.json"));
}

TEST_F(CliTest, SynthSameSeedSameFiles) {
  ASSERT_EQ(cli("synth --spec " + quote(tmp("spec.json")) + " --seed 3 --out " + quote(tmp("data_again"))).code, 0);
  EXPECT_EQ(tree_fingerprint(data()), tree_fingerprint(tmp("data_again")));
  ASSERT_EQ(cli("synth --spec " + quote(tmp("spec.json")) + " --seed 4 --out " + quote(tmp("data_other"))).code, 0);
  EXPECT_NE(tree_fingerprint(data()), tree_fingerprint(tmp("data_other")));
}

TEST_F(CliTest, SynthPrintedBlockCountsMatchPartition) {
  const std::regex line(R"((Area_\w+): (\d+) rooms, (\d+) blocks, (\d+) points)");
  std::map<std::string, std::size_t> printed;
  for (std::sregex_iterator it(synth_output_->begin(), synth_output_->end(), line), end; it != end; ++it)
    printed[(*it)[1]] = std::stoul((*it)[3]);
  ASSERT_EQ(printed.size(), 3u);
  for (const auto& area : load_dataset(data())) {
    std::size_t blocks = 0;
    for (const auto& room : area.rooms) blocks += partition_blocks(room, 1.0).size();
    EXPECT_EQ(printed.at(area.name), blocks) << area.name;
  }
}

TEST_F(CliTest, SynthInvalidSpecIsUsageError) {
  write_text(tmp("bad_spec.json"), R"({"density": -1, "areas": [{"name": "X", "rooms": {"office": 1}}]})");
  const auto r = cli("synth --spec " + quote(tmp("bad_spec.json")) + " --out " + quote(tmp("bad_out")));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("density"), std::string::npos) << r.output;
}

TEST_F(CliTest, UnknownSubcommandIsUsageError) { EXPECT_EQ(cli("frobnicate").code, 2); }

TEST_F(CliTest, IngestReportsDataset) {
  ASSERT_EQ(cli("ingest --data " + quote(data()) + " --out " + quote(tmp("ingest"))).code, 0);
  const auto report = load_json_file(tmp("ingest") / "ingest.json");
  EXPECT_EQ(report["areas"].size(), 3u);
  EXPECT_EQ(report["classes"].size(), 13u);
}

TEST_F(CliTest, ZeroStepScheduleCheckpointEqualsInit) {
  auto cfg = tiny_run_config(data(), tmp("zero"));
  cfg["meta"]["steps_per_epoch"] = 0;
  write_json(tmp("zero.json"), cfg);
  ASSERT_EQ(cli("pretrain --config " + quote(tmp("zero.json"))).code, 0);
  const auto init = load_checkpoint<double>(tmp("zero") / "ckpt_init.ckpt");
  const auto final_ = load_checkpoint<double>(tmp("zero") / "ckpt_final.ckpt");
  EXPECT_EQ(init.params, final_.params);
}

TEST_F(CliTest, PretrainWritesLossCsvAndIsDeterministic) {
  write_json(tmp("run.json"), tiny_run_config(data(), tmp("run1")));
  ASSERT_EQ(cli("pretrain --config " + quote(tmp("run.json"))).code, 0);
  ASSERT_EQ(cli("pretrain --config " + quote(tmp("run.json")) + " --out " + quote(tmp("run2"))).code, 0);
  for (const auto* f : {"losses.csv", "ckpt_init.ckpt", "ckpt_epoch1.ckpt", "ckpt_epoch2.ckpt", "ckpt_final.ckpt",
                        "manifest.json"}) {
    EXPECT_EQ(file_fingerprint(tmp("run1") / f), file_fingerprint(tmp("run2") / f)) << f;
  }
  std::ifstream csv(tmp("run1") / "losses.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "step,query_loss,beta,alpha");
  std::size_t rows = 0;
  for (std::string l; std::getline(csv, l);) ++rows;
  EXPECT_EQ(rows, 6u);
}

TEST_F(CliTest, BetaSweepWritesOneRunPerBeta) {
  auto cfg = tiny_run_config(data(), tmp("sweep"));
  cfg["sweep_betas"] = {1e-2, 1e-3, 1e-4};
  write_json(tmp("sweep.json"), cfg);
  ASSERT_EQ(cli("pretrain --config " + quote(tmp("sweep.json"))).code, 0);
  for (const auto* d : {"beta_0.01", "beta_0.001", "beta_0.0001"}) {
    EXPECT_TRUE(fs::exists(tmp("sweep") / d / "losses.csv")) << d;
  }
  // Same seed, so the sweep differs only through beta.
  EXPECT_NE(file_fingerprint(tmp("sweep") / "beta_0.01" / "losses.csv"),
            file_fingerprint(tmp("sweep") / "beta_0.0001" / "losses.csv"));
}

TEST_F(CliTest, PretrainMissingDataIsUsageError) {
  write_json(tmp("nodata.json"), tiny_run_config(tmp("does_not_exist"), tmp("nodata")));
  EXPECT_EQ(cli("pretrain --config " + quote(tmp("nodata.json"))).code, 2);
  EXPECT_EQ(cli("pretrain --config " + quote(tmp("no_such_config.json"))).code, 2);
}

TEST_F(CliTest, PretrainDivergenceExitsThreeAndKeepsLosses) {
  auto cfg = tiny_run_config(data(), tmp("diverge"));
  cfg["meta"]["alpha"] = 1e4;
  write_json(tmp("diverge.json"), cfg);
  EXPECT_EQ(cli("pretrain --config " + quote(tmp("diverge.json"))).code, 3);
  EXPECT_TRUE(fs::exists(tmp("diverge") / "losses.csv"));
}

TEST_F(CliTest, AdaptEvalOutputsAndErrors) {
  write_json(tmp("eval_run.json"), tiny_run_config(data(), tmp("eval_run")));
  ASSERT_EQ(cli("pretrain --config " + quote(tmp("eval_run.json"))).code, 0);
  const auto ckpt = quote(tmp("eval_run") / "ckpt_final.ckpt");
  const std::string base = "adapt-eval --checkpoint " + ckpt + " --data " + quote(data()) + " --areas Area_C ";

  const auto r = cli(base + "--episodes 3 --inner-steps 2 --out " + quote(tmp("eval1")));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("oAcc"), std::string::npos);
  for (const auto* f : {"metrics.csv", "episodes.csv", "episode_manifest.json", "manifest.json"})
    EXPECT_TRUE(fs::exists(tmp("eval1") / f)) << f;
  EXPECT_EQ(load_json_file(tmp("eval1") / "episode_manifest.json")["episodes"].size(), 3u);

  ASSERT_EQ(cli(base + "--episodes 3 --inner-steps 2 --out " + quote(tmp("eval2"))).code, 0);
  EXPECT_EQ(file_fingerprint(tmp("eval1") / "metrics.csv"), file_fingerprint(tmp("eval2") / "metrics.csv"));

  EXPECT_EQ(cli(base + "--episodes 0 --out " + quote(tmp("eval0"))).code, 2);
  EXPECT_EQ(cli(base + "--ways 5 --out " + quote(tmp("eval_cap"))).code, 4);
  EXPECT_EQ(cli(base + "--shots 40 --out " + quote(tmp("eval_cap2"))).code, 4);
  EXPECT_EQ(cli("adapt-eval --checkpoint " + quote(tmp("nope.ckpt")) + " --data " + quote(data()) + " --out " +
                quote(tmp("eval_io")))
                .code,
            5);
}

// Every point of the target carries class 0 and the checkpoint always
// predicts class 0, before and after adaptation.
TEST_F(CliTest, PerfectCheckpointOnTrivialTargetScoresOne) {
  const auto root = tmp("trivial");
  fs::create_directories(root / "Area_T");
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  for (const auto* name : {"office_1", "hallway_1"}) {
    Room room{name, parse_room_name(name).first, {}, {}};
    for (int i = 0; i < 1600; ++i) {
      room.points.push_back({u(rng), u(rng), 0.5 * u(rng), 100, 100, 100});
      room.labels.push_back(0);
    }
    write_room(root / "Area_T" / (std::string(name) + ".txt"), room);
  }
  PointNetConfig model;
  model.mlp1_widths = {4};
  model.mlp2_widths = {4};
  model.seg_head_widths = {4};
  model.points_per_block = 8;
  auto params = init_params<double>(model, 0);
  for (auto& v : params.at("head.out.weight").values()) v = 0.0;
  params.at("head.out.bias")[0] = 50.0;
  save_checkpoint(root / "perfect.ckpt", Checkpoint<double>{model, params, {}});

  const auto r = cli("adapt-eval --checkpoint " + quote(root / "perfect.ckpt") + " --data " + quote(root) +
                     " --episodes 4 --inner-steps 5 --out " + quote(root / "eval"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("oAcc 1.0000"), std::string::npos) << r.output;
}

TEST_F(CliTest, CrossValidateTableHasEmptyDiagonal) {
  auto cfg = tiny_run_config(data(), tmp("cv"));
  cfg["meta"]["epochs"] = 1;
  cfg["meta"]["steps_per_epoch"] = 2;
  write_json(tmp("cv.json"), cfg);
  const auto r = cli("cross-validate --config " + quote(tmp("cv.json")) + " --episodes 2");
  ASSERT_EQ(r.code, 0) << r.output;
  std::ifstream in(tmp("cv") / "cv_oacc.csv");
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    if (line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"pretrain\\test", "Area_A", "Area_B", "Area_C"}));
  for (std::size_t i = 1; i <= 3; ++i) {
    ASSERT_EQ(rows[i].size(), 4u);
    EXPECT_EQ(rows[i][0], rows[0][i]);
    for (std::size_t j = 1; j <= 3; ++j) {
      if (i == j) {
        EXPECT_TRUE(rows[i][j].empty());
      } else {
        const double v = std::stod(rows[i][j]);
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
    }
  }
}

TEST_F(CliTest, ExportPlyPerBlockFiles) {
  write_json(tmp("ply_run.json"), tiny_run_config(data(), tmp("ply_run")));
  ASSERT_EQ(cli("pretrain --config " + quote(tmp("ply_run.json"))).code, 0);
  const auto ckpt = quote(tmp("ply_run") / "ckpt_init.ckpt");

  // 3 x 2 m floor, so six blocks.
  const auto room_dir = tmp("ply_area") / "Area_P";
  fs::create_directories(room_dir);
  Room room{"office_9", "office", {}, {}};
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> x(0.0, 3.0), y(0.0, 2.0);
  for (int i = 0; i < 500; ++i) {
    room.points.push_back({x(rng), y(rng), 1.0, 10, 20, 30});
    room.labels.push_back(i % 13);
  }
  write_room(room_dir / "office_9.txt", room);
  ASSERT_EQ(partition_blocks(load_room(room_dir / "office_9.txt", ClassVocabulary::s3dis())).size(), 6u);

  const std::string base = "export-ply --checkpoint " + ckpt + " --room " + quote(room_dir / "office_9.txt");
  ASSERT_EQ(cli(base + " --out " + quote(tmp("ply1"))).code, 0);
  std::size_t files = 0, pred_vertices = 0, truth_vertices = 0;
  for (const auto& e : fs::directory_iterator(tmp("ply1"))) {
    if (e.path().extension() != ".ply") continue;
    ++files;
    const auto n = ply_vertex_count(e.path());
    (e.path().stem().string().ends_with("_pred") ? pred_vertices : truth_vertices) += n;
  }
  EXPECT_EQ(files, 12u);
  EXPECT_EQ(pred_vertices, 500u);
  EXPECT_EQ(truth_vertices, 500u);

  ASSERT_EQ(cli(base + " --resample 64 --seed 1 --out " + quote(tmp("ply2"))).code, 0);
  std::size_t resampled = 0;
  for (const auto& e : fs::directory_iterator(tmp("ply2")))
    if (e.path().stem().string().ends_with("_pred")) resampled += ply_vertex_count(e.path());
  EXPECT_EQ(resampled, 6u * 64u);

  ASSERT_EQ(cli(base + " --resample 64 --seed 1 --out " + quote(tmp("ply3"))).code, 0);
  EXPECT_EQ(tree_fingerprint(tmp("ply2")), tree_fingerprint(tmp("ply3")));

  write_text(tmp("short_palette.txt"), "0 255 0 0\n1 0 255 0\n");
  EXPECT_EQ(cli(base + " --palette " + quote(tmp("short_palette.txt")) + " --out " + quote(tmp("ply4"))).code, 2);
  EXPECT_EQ(cli(base + " --out /proc/pcmeta-cannot-write").code, 5);
}

TEST_F(CliTest, GradcheckExitStatus) {
  const auto pass = cli("gradcheck --out " + quote(tmp("gc")));
  EXPECT_EQ(pass.code, 0) << pass.output;
  EXPECT_NE(pass.output.find("PASS"), std::string::npos);
  const auto report = load_json_file(tmp("gc") / "gradcheck.json");
  EXPECT_EQ(report["checks"].size(), 100u);
  EXPECT_TRUE(report["passed"].get<bool>());

  const auto fail = cli("gradcheck --inject-error");
  EXPECT_NE(fail.code, 0);
  EXPECT_NE(fail.output.find("FAIL"), std::string::npos);

  EXPECT_EQ(cli("gradcheck --precision float32").code, 0);
  EXPECT_EQ(cli("gradcheck --precision float16").code, 2);
}

}  // namespace
