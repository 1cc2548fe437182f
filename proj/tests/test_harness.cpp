#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "roijscc/harness/ablate.hpp"
#include "roijscc/harness/evaluate.hpp"
#include "roijscc/harness/flops.hpp"
#include "roijscc/harness/train.hpp"

using namespace roijscc;
using namespace roijscc::harness;
using json = nlohmann::json;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  const auto d = std::filesystem::temp_directory_path() / ("roijscc_h_" + name);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small, fast model on 32x32 toy images.
json tiny_json(const std::string& out) {
  return json{{"variant", "roi-jscc"},
              {"seed", 3},
              {"output_dir", out},
              {"model", {{"channels", {8, 16}}, {"blocks", {1, 1}}, {"symbol_width", 4}, {"window", 2}}},
              {"image", {{"height", 32}, {"width", 32}}},
              {"bandwidth", {{"k", 128}}},
              {"dataset", {{"count", 8}}},
              {"eval_dataset", {{"count", 3}}},
              {"optimizer", {{"learning_rate", 2e-3}}},
              {"train", {{"steps", 6}, {"batch", 2}, {"checkpoint_every", 3}, {"log_every", 1}}}};
}

}  // namespace

TEST(Config, ParsesAndRoundTrips) {
  const RunConfig c = config_from_json(tiny_json("/tmp/x"));
  EXPECT_EQ(c.system.stages.channels, (std::vector<int>{8, 16}));
  EXPECT_EQ(c.system.image_h, 32);
  EXPECT_EQ(c.schedule.batch, 2);
  EXPECT_TRUE(c.train_data.toy);
  const RunConfig d = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(c), config_to_json(d));
}

TEST(Config, CppDeterminesBandwidth) {
  json j = tiny_json("/tmp/x");
  j["bandwidth"] = {{"cpp", "1/24"}};
  EXPECT_EQ(config_from_json(j).system.k, 32 * 32 * 3 / 24);
}

TEST(Config, RejectsBadInput) {
  json j = tiny_json("/tmp/x");
  j["model"]["chanels"] = {8, 16};
  EXPECT_THROW(config_from_json(j), ConfigError);

  j = tiny_json("/tmp/x");
  j["bogus"] = 1;
  EXPECT_THROW(config_from_json(j), ConfigError);

  j = tiny_json("/tmp/x");
  j["bandwidth"]["tau"] = 1.5;
  EXPECT_THROW(config_from_json(j), ConfigError);

  j = tiny_json("/tmp/x");
  j["bandwidth"] = {{"k", 130}};  // not a multiple of B
  EXPECT_THROW(config_from_json(j), ConfigError);

  j = tiny_json("/tmp/x");
  j["variant"] = "no-such-variant";
  EXPECT_THROW(config_from_json(j), ConfigError);

  j = tiny_json("/tmp/x");
  j["loss"] = {{"alpha", 0.2}, {"beta", 0.9}};
  EXPECT_THROW(config_from_json(j), ConfigError);

  const auto dir = temp_dir("badjson");
  { std::ofstream(dir / "c.json") << "{ not json"; }
  EXPECT_THROW(load_config((dir / "c.json").string()), ConfigError);
  EXPECT_THROW(load_config((dir / "missing.json").string()), IoError);
  std::filesystem::remove_all(dir);
}

TEST(Config, ParseRatio) {
  EXPECT_DOUBLE_EQ(parse_ratio("1/12"), 1.0 / 12);
  EXPECT_DOUBLE_EQ(parse_ratio("0.25"), 0.25);
  EXPECT_THROW(parse_ratio("1/0"), ConfigError);
  EXPECT_THROW(parse_ratio("abc"), ConfigError);
}

TEST(Variants, AllOffFlagsMatchBaselineParameterCount) {
  SystemConfig a;
  a.variant = parse_variant("flags:");
  SystemConfig b;
  b.variant = Variant::uniform_baseline();
  const JsccSystem<float> x(a, 1), y(b, 1);
  EXPECT_EQ(nn::parameter_count(x.params()), nn::parameter_count(y.params()));
  SystemConfig c;
  c.variant = Variant::roi_jscc();
  EXPECT_EQ(nn::parameter_count(JsccSystem<float>(c, 1).params()), nn::parameter_count(y.params()));
}

TEST(Checkpoint, RoundTripsParametersAndOptimizer) {
  const auto dir = temp_dir("ckpt");
  RunConfig cfg = config_from_json(tiny_json(dir.string()));
  Trainer t(cfg);
  t.run(2, nullptr, false);
  const std::string path = (dir / "a.bin").string();
  t.save(path);

  const CheckpointHeader h = read_checkpoint_header(path);
  EXPECT_EQ(h.step, 2);
  EXPECT_EQ(config_to_json(h.config), config_to_json(t.config()));

  auto sys = load_system(path);
  const auto& p = t.system().params();
  const auto& q = sys->params();
  ASSERT_EQ(p.size(), q.size());
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[i]->value, q[i]->value) << p[i]->name;
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, CorruptOrMismatchedFilesAreRejected) {
  const auto dir = temp_dir("ckpt_bad");
  RunConfig cfg = config_from_json(tiny_json(dir.string()));
  Trainer t(cfg);
  const std::string path = (dir / "a.bin").string();
  t.save(path);
  {
    std::string bytes = slurp(path);
    bytes[0] = 'X';
    std::ofstream(dir / "bad.bin", std::ios::binary) << bytes;
  }
  EXPECT_THROW(read_checkpoint_header((dir / "bad.bin").string()), IoError);
  {
    const std::string bytes = slurp(path);
    std::ofstream(dir / "short.bin", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  }
  EXPECT_THROW(load_system((dir / "short.bin").string()), IoError);

  RunConfig other = cfg;
  other.system.stages.channels = {8, 24};
  validate(other);
  JsccSystem<float> wrong(other.system, 0);
  EXPECT_THROW(load_checkpoint<float>(path, wrong.params(), nullptr), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST(Training, ResumeReproducesUninterruptedRun) {
  const auto dir = temp_dir("resume");
  RunConfig cfg = config_from_json(tiny_json(dir.string()));
  cfg.schedule.lr_schedule = "cosine";
  Trainer straight(cfg);
  straight.run(6, nullptr, false);

  Trainer first(cfg);
  first.run(3, nullptr, false);
  const std::string path = (dir / "mid.bin").string();
  first.save(path);
  Trainer second(cfg);
  second.resume(path);
  EXPECT_EQ(second.step(), 3);
  second.run(6, nullptr, false);

  const auto& a = straight.system().params();
  const auto& b = second.system().params();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i]->value, b[i]->value) << a[i]->name;
  std::filesystem::remove_all(dir);
}

TEST(Training, WritesLogAndCheckpoints) {
  const auto dir = temp_dir("files");
  Trainer t(config_from_json(tiny_json(dir.string())));
  t.run();
  EXPECT_TRUE(std::filesystem::exists(dir / "checkpoint_3.bin"));
  EXPECT_TRUE(std::filesystem::exists(dir / "checkpoint_6.bin"));
  EXPECT_TRUE(std::filesystem::exists(dir / "checkpoint_last.bin"));
  std::ifstream log(dir / "train_log.csv");
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) ++lines;
  EXPECT_EQ(lines, 7);
  std::filesystem::remove_all(dir);
}

TEST(Training, CosineScheduleDecaysToFloor) {
  RunConfig cfg = config_from_json(tiny_json("/tmp/unused"));
  cfg.schedule.lr_schedule = "cosine";
  cfg.schedule.steps = 100;
  Trainer t(cfg);
  EXPECT_DOUBLE_EQ(t.learning_rate_at(0), cfg.adam.learning_rate);
  EXPECT_NEAR(t.learning_rate_at(100), cfg.adam.learning_rate * cfg.schedule.lr_floor, 1e-12);
  EXPECT_GT(t.learning_rate_at(30), t.learning_rate_at(60));
}

TEST(Training, LossDecreasesOnToyCorpus) {
  json j = tiny_json("/tmp/unused");
  j["train"]["steps"] = 300;
  j["train"]["log_every"] = 25;
  Trainer t(config_from_json(j));
  t.run(-1, nullptr, false);
  ASSERT_GE(t.log().size(), 2u);
  EXPECT_LT(t.log().back().loss, 0.5 * t.log().front().loss);
}

TEST(Training, DivergenceIsReported) {
  json j = tiny_json("/tmp/unused");
  j["optimizer"]["learning_rate"] = 1e30;
  Trainer t(config_from_json(j));
  EXPECT_THROW(
      {
        for (int i = 0; i < 20; ++i) t.train_step();
      },
      DivergenceError);
}

class EvaluateFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = temp_dir("eval");
    cfg = config_from_json(tiny_json(dir.string()));
    sys = std::make_unique<JsccSystem<float>>(cfg.system, cfg.seed);
  }
  void TearDown() override { std::filesystem::remove_all(dir); }

  std::filesystem::path dir;
  RunConfig cfg;
  std::unique_ptr<JsccSystem<float>> sys;
};

TEST_F(EvaluateFixture, DeterministicUnderSeed) {
  const data::Dataset d(cfg.eval_data);
  EvalOptions opt;
  opt.snrs = {1, 10};
  opt.cpps = {"1/24", "1/48"};
  opt.seed = 4;
  opt.gamma_draws = 2;
  ResultsTable a, b;
  a.rows = evaluate_system(*sys, "x", d, opt);
  b.rows = evaluate_system(*sys, "x", d, opt);
  EXPECT_EQ(a.rows.size(), 2u * 2u * 3u * 2u);
  write_results(a, (dir / "a").string());
  write_results(b, (dir / "b").string());
  EXPECT_EQ(slurp(dir / "a" / "results.csv"), slurp(dir / "b" / "results.csv"));
  EXPECT_EQ(slurp(dir / "a" / "summary.csv"), slurp(dir / "b" / "summary.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "a" / "psnr_vs_snr.png"));
  EXPECT_EQ(sys->config().k, cfg.system.k);  // restored after the sweep
}

TEST_F(EvaluateFixture, SingleImageSingleCellGivesOneRow) {
  data::DatasetSpec s = cfg.eval_data;
  s.toy_count = 1;
  const data::Dataset d(s);
  EvalOptions opt;
  opt.cpps = {"1/24"};
  const auto rows = evaluate_system(*sys, "x", d, opt);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].k, 128);
  EXPECT_TRUE(std::isfinite(rows[0].report.psnr_roi));
}

TEST_F(EvaluateFixture, InvalidCppIsSkippedWithWarning) {
  const data::Dataset d(cfg.eval_data);
  EvalOptions opt;
  opt.cpps = {"1/7", "1/24"};
  std::ostringstream warn;
  const auto rows = evaluate_system(*sys, "x", d, opt, warn);
  EXPECT_EQ(rows.size(), 3u);
  EXPECT_NE(warn.str().find("1/7"), std::string::npos);
}

TEST_F(EvaluateFixture, NoiselessIsAtLeastAsGoodAsNoisy) {
  Trainer t(cfg);
  t.run(60, nullptr, false);
  const data::Dataset d(cfg.eval_data);
  EvalOptions opt;
  opt.snrs = {std::numeric_limits<double>::infinity(), 1.0};
  opt.cpps = {"1/24"};
  ResultsTable table;
  table.rows = evaluate_system(t.system(), "x", d, opt);
  const auto s = table.summary();
  ASSERT_EQ(s.size(), 2u);
  EXPECT_GE(s[0].psnr_avg, s[1].psnr_avg);
  EXPECT_GE(s[0].psnr_roi, s[1].psnr_roi);
}

TEST_F(EvaluateFixture, MismatchedImageSizeIsConfigError) {
  data::DatasetSpec s = cfg.eval_data;
  s.toy_size = 64;
  const data::Dataset d(s);
  EXPECT_THROW(evaluate_system(*sys, "x", d, EvalOptions{}), ConfigError);
}

TEST(Evaluate, PairedDrawsAcrossModels) {
  RunConfig cfg = config_from_json(tiny_json("/tmp/unused"));
  RunConfig other = cfg;
  other.variant = "uniform-baseline";
  validate(other);
  JsccSystem<float> a(cfg.system, 1), b(other.system, 2);
  const data::Dataset d(cfg.eval_data);
  EvalOptions opt;
  opt.cpps = {"1/24"};
  opt.gamma_draws = 3;
  const auto ra = evaluate_system(a, "a", d, opt);
  const auto rb = evaluate_system(b, "b", d, opt);
  ASSERT_EQ(ra.size(), rb.size());
  for (std::size_t i = 0; i < ra.size(); ++i) {
    EXPECT_EQ(ra[i].report.image_id, rb[i].report.image_id);
    EXPECT_EQ(ra[i].report.gamma, rb[i].report.gamma);
  }
}

TEST(Parsing, SnrAndLists) {
  const auto v = parse_snr_list("1,4.5,inf");
  ASSERT_EQ(v.size(), 3u);
  EXPECT_DOUBLE_EQ(v[1], 4.5);
  EXPECT_TRUE(std::isinf(v[2]));
  EXPECT_THROW(parse_snr_list("1,x"), ConfigError);
  EXPECT_THROW(parse_snr_list("3dB"), ConfigError);
  EXPECT_EQ(split_list("a,b"), (std::vector<std::string>{"a", "b"}));
  EXPECT_THROW(split_list("a,,b"), ConfigError);
}

TEST(Ablation, WritesPairedReport) {
  const auto dir = temp_dir("ablate");
  json j = tiny_json(dir.string());
  j["train"]["steps"] = 2;
  AblationOptions opt;
  opt.variants = {"wo-rb"};
  opt.seeds = {1, 2};
  opt.eval.cpps = {"1/24"};
  const AblationReport r = ablate(config_from_json(j), opt);
  EXPECT_EQ(r.runs.size(), 6u);
  const auto s = r.summary();
  ASSERT_EQ(s.size(), 3u);
  for (const auto& v : s) {
    EXPECT_EQ(v.runs, 2);
    if (v.variant == "roi-jscc") EXPECT_DOUBLE_EQ(v.roi_vs_full, 0.0);
    if (v.variant == "uniform-baseline") EXPECT_DOUBLE_EQ(v.roi_vs_baseline, 0.0);
  }
  EXPECT_TRUE(std::filesystem::exists(dir / "ablation.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "wo-rb" / "seed_2" / "checkpoint_last.bin"));
  std::filesystem::remove_all(dir);
}

TEST(Flops, RoutedBlockCheaperForEveryGamma) {
  SystemConfig all;
  all.variant.split_processing = false;
  for (int h = 1; h <= 4; ++h) {
    for (int w = 1; w <= 4; ++w) {
      const RoiPosition g{h, w};
      EXPECT_LT(codec_macs(SystemConfig{}, g), codec_macs(all, g));
    }
  }
}

TEST(Flops, BlockCountMatchesHandTally) {
  // 8x8 stage, 4x4 grid of 2x2 blocks, gamma (2,2): 6 heavy blocks of 4
  // tokens (window 2), 10 light blocks.
  model::StageConfig sc;
  sc.channels = {8};
  sc.blocks = {1};
  sc.window = 2;
  sc.heads = 2;
  const model::Geometry geo = model::make_geometry(16, 16, sc, GridSpec{});
  const auto lay = model::build_layouts(geo, classify_regions({2, 2}, GridSpec{}), sc, {true, true});
  model::BlockOptions opt{false, false};
  const BlockMacs m = roi_block_macs(lay[0], 8, 3, opt);
  const long long Nh = 24, Nl = 40, C = 8, T = 4;
  EXPECT_EQ(m.heavy, Nh * 3 * C * C + 2 * Nh * T * C + Nh * C * C);
  EXPECT_EQ(m.light, Nl * C + Nl * 9 * 2 + Nl * C + Nl * C * C);
  EXPECT_EQ(m.tail, 0);
}

#ifdef ROIJSCC_CLI_PATH
TEST(Cli, ExitCodes) {
  const auto dir = temp_dir("cli");
  const std::string cli = ROIJSCC_CLI_PATH;
  auto run = [&](const std::string& args) {
    const int rc = std::system((cli + " " + args + " > " + (dir / "out.txt").string() + " 2>&1").c_str());
    return WEXITSTATUS(rc);
  };
  json j = tiny_json((dir / "run").string());
  j["train"]["steps"] = 2;
  { std::ofstream(dir / "ok.json") << j.dump(); }
  j["model"]["bogus"] = 1;
  { std::ofstream(dir / "bad.json") << j.dump(); }

  EXPECT_EQ(run("train --config " + (dir / "ok.json").string()), 0);
  const std::string ckpt = (dir / "run" / "checkpoint_last.bin").string();
  EXPECT_TRUE(std::filesystem::exists(ckpt));
  EXPECT_EQ(run("train --config " + (dir / "bad.json").string()), 2);
  EXPECT_EQ(run("train --config " + (dir / "none.json").string()), 6);
  EXPECT_EQ(run("evaluate --checkpoint " + ckpt + " --snr 1,10 --cpp 1/24 --out " + (dir / "ev").string()), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "ev" / "summary.csv"));
  EXPECT_EQ(run("evaluate --checkpoint " + ckpt + " --snr x --out " + (dir / "ev").string()), 2);
  EXPECT_EQ(run("evaluate --checkpoint " + (dir / "ok.json").string() + " --out " + (dir / "ev").string()), 6);

  data::save_png((dir / "img.png").string(), data::make_toy_image(1, 40));
  EXPECT_EQ(run("render --checkpoint " + ckpt + " --image " + (dir / "img.png").string() + " --gamma 2,2 --out " +
                (dir / "p.png").string()),
            0);
  EXPECT_TRUE(std::filesystem::exists(dir / "p.png"));
  EXPECT_EQ(run("render --checkpoint " + ckpt + " --image " + (dir / "img.png").string() + " --gamma 5,1"), 3);
  EXPECT_EQ(run("flops --config " + (dir / "ok.json").string()), 0);
  EXPECT_NE(run("frobnicate"), 0);
  std::filesystem::remove_all(dir);
}
#endif
