#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "a2net/cli/commands.hpp"
#include "a2net/cli/inference.hpp"
#include "a2net/cli/run_config.hpp"
#include "a2net/data/dataset.hpp"
#include "a2net/data/png_codec.hpp"
#include "a2net/errors.hpp"
#include "a2net/objective/objective.hpp"
#include "a2net/training/checkpoint.hpp"
#include "fixtures.hpp"
#include "json.hpp"

namespace a2net {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::vector<char> bytes_of(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Tiny run configuration: small widths, 16x16 patches, a two-epoch schedule.
nlohmann::json tiny_config() {
  auto doc = nlohmann::json::parse(cli::to_json(cli::default_run_config()));
  doc["levels"] = 2;
  doc["k_encoder"] = 8;
  doc["k_y"] = 8;
  doc["k_uv"] = 6;
  doc["epochs_constant"] = 1;
  doc["epochs_decay"] = 1;
  doc["batch_size"] = 2;
  doc["patch_size"] = 16;
  doc["patch_count"] = 4;
  doc["seed"] = 5;
  return doc;
}

fs::path write_json(const fs::path& p, const nlohmann::json& doc) {
  std::ofstream(p) << doc.dump();
  return p;
}

TEST(RunConfig, DefaultsArePublishedSettings) {
  const auto cfg = cli::default_run_config();
  EXPECT_EQ(cfg.network.k_encoder, 32u);
  EXPECT_EQ(cfg.network.k_y, 32u);
  EXPECT_EQ(cfg.network.k_uv, 24u);
  EXPECT_EQ(cfg.training.alpha, 0.6);
  EXPECT_EQ(cfg.training.base_lr, 2e-4);
  EXPECT_EQ(cfg.training.epochs_constant, 100u);
  EXPECT_EQ(cfg.training.epochs_decay, 100u);
  EXPECT_EQ(cfg.training.batch_size, 4u);
  EXPECT_EQ(cfg.patches.size, 256u);
  const auto again = cli::parse_run_config(cli::to_json(cfg));
  EXPECT_EQ(again.network, cfg.network);
}

TEST(RunConfig, StrictKeys) {
  auto doc = tiny_config();
  doc["learning_rate"] = 1e-3;
  try {
    cli::parse_run_config(doc.dump());
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("learning_rate"), std::string::npos);
  }
  doc = tiny_config();
  doc.erase("alpha");
  try {
    cli::parse_run_config(doc.dump());
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("alpha"), std::string::npos);
  }
  doc = tiny_config();
  doc["levels"] = -1;
  EXPECT_THROW(cli::parse_run_config(doc.dump()), ConfigError);
  doc = tiny_config();
  doc["variant"] = "unet";
  EXPECT_THROW(cli::parse_run_config(doc.dump()), ConfigError);
  EXPECT_THROW(cli::parse_run_config("{"), ConfigError);
}

TEST(ReflectPad, MirrorsWithoutRepeatingEdges) {
  color::RgbImage img(3, 2);
  for (std::size_t y = 0; y < 3; ++y)
    for (std::size_t x = 0; x < 2; ++x) img.at(0, y, x) = float(10 * y + x);
  const auto p = cli::reflect_pad(img, 8);
  ASSERT_EQ(p.height(), 8u);
  ASSERT_EQ(p.width(), 8u);
  const std::vector<float> rows{0, 10, 20, 10, 0, 10, 20, 10};
  const std::vector<float> cols{0, 1, 0, 1, 0, 1, 0, 1};
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x) EXPECT_EQ(p.at(0, y, x), rows[y] + cols[x]);
  EXPECT_EQ(cli::reflect_pad(p, 8), p);
}

TEST(Cli, ParamsReportsCounts) {
  const auto r = cli({"params"});
  EXPECT_EQ(r.code, 0);
  const auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1][0], "a2net");
  const long n = std::stol(rows[1][1]);
  EXPECT_GE(n, 340000);
  EXPECT_LE(n, 460000);
  const auto all = csv_rows(cli({"params", "--all"}).out);
  ASSERT_EQ(all.size(), 6u);
  EXPECT_EQ(all[5][0], "general");
  EXPECT_EQ(std::stol(all[2][1]) - n >= 30000, true);
}

TEST(Cli, ExitCodes) {
  TempDir dir("cli");
  auto doc = tiny_config();
  doc.erase("k_uv");
  const auto cfg = write_json(dir / "bad.json", doc);
  const auto r = cli({"train", "--config", cfg.string(), "--data-root", dir.path().string(),
                      "--out", (dir / "run").string()});
  EXPECT_EQ(r.code, cli::kConfigError);
  EXPECT_NE(r.err.find("k_uv"), std::string::npos);

  const auto good = write_json(dir / "good.json", tiny_config());
  EXPECT_EQ(cli({"train", "--config", good.string(), "--data-root", (dir / "nothing").string(),
                 "--out", (dir / "run").string()})
                .code,
            cli::kDataError);
  EXPECT_EQ(cli({"infer", "--ckpt", good.string(), "--input", "x.png", "--output", "y.png"}).code,
            cli::kCheckpointError);
  EXPECT_EQ(cli({"bogus"}).code, cli::kConfigError);
  EXPECT_EQ(cli({"swap", "--degraded", "a.png", "--clean", "b.png", "--mode", "rgb", "--out", "c.png"}).code,
            cli::kConfigError);
  EXPECT_EQ(cli({"eval", "--pairs-root", (dir / "nothing").string()}).code, cli::kDataError);
  EXPECT_EQ(cli({"config"}).code, 0);
}

TEST(Cli, SynthIsDeterministicAndLoadable) {
  TempDir dir("synth");
  const auto a = dir / "a", b = dir / "b";
  for (const auto& root : {a, b}) {
    ASSERT_EQ(cli({"synth", "--out-root", root.string(), "--count", "3", "--height", "32",
                   "--width", "40", "--seed", "4"})
                  .code,
              0);
  }
  const auto ds = data::load_pairs(a);
  ASSERT_EQ(ds.size(), 3u);
  for (const auto& p : ds.pairs) {
    EXPECT_EQ(bytes_of(p.degraded), bytes_of(b / "rain" / p.degraded.filename()));
    EXPECT_EQ(bytes_of(p.clean), bytes_of(b / "clean" / p.clean.filename()));
  }

  // Degrading an existing clean directory keeps its stems.
  ASSERT_EQ(cli({"synth", "--clean-root", (a / "clean").string(), "--out-root", (dir / "c").string()}).code, 0);
  EXPECT_EQ(data::load_pairs(dir / "c").size(), 3u);
  EXPECT_EQ(bytes_of(dir / "c" / "clean" / "synth0001.png"), bytes_of(a / "clean" / "synth0001.png"));

  std::ofstream(dir / "p.json") << R"({"blobs_min": 0, "blobs_max": 0})";
  ASSERT_EQ(cli({"synth", "--out-root", (dir / "d").string(), "--count", "1", "--params",
                 (dir / "p.json").string()})
                .code,
            0);
  EXPECT_EQ(bytes_of(dir / "d/rain/synth0000.png"), bytes_of(dir / "d/clean/synth0000.png"));
  std::ofstream(dir / "q.json") << R"({"blobz": 1})";
  EXPECT_EQ(cli({"synth", "--out-root", (dir / "e").string(), "--params", (dir / "q.json").string()}).code,
            cli::kConfigError);
}

TEST(Cli, EvalOfCleanPairs) {
  TempDir dir("eval");
  auto pairs = testing::synth_pairs(3, 24, 24, 2);
  for (auto& p : pairs) p.degraded = p.clean;
  testing::write_pairs(dir.path(), pairs);
  const auto r = cli({"eval", "--pairs-root", dir.path().string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 1u + 3u + 1u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"file", "psnr", "ssim"}));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_EQ(std::stod(rows[i][1]), 100.0);
    EXPECT_NEAR(std::stod(rows[i][2]), 1.0, 1e-9);
  }
  EXPECT_EQ(rows.back()[0], "mean");
}

TEST(Cli, EvalMeanRowIsTheAverage) {
  TempDir dir("eval");
  testing::write_pairs(dir.path(), testing::synth_pairs(4, 24, 24, 3));
  const auto r = cli({"eval", "--pairs-root", dir.path().string(), "--out", (dir / "m.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(dir / "m.csv");
  const auto rows = csv_rows({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});
  ASSERT_EQ(rows.size(), 6u);
  double psnr = 0, ssim = 0;
  for (std::size_t i = 1; i < 5; ++i) {
    psnr += std::stod(rows[i][1]);
    ssim += std::stod(rows[i][2]);
  }
  EXPECT_NEAR(std::stod(rows[5][1]), psnr / 4, 1e-9);
  EXPECT_NEAR(std::stod(rows[5][2]), ssim / 4, 1e-9);
}

TEST(Cli, TrainInferAndRerun) {
  TempDir dir("train");
  testing::write_pairs(dir / "data", testing::synth_pairs(2, 24, 24, 6));
  const auto cfg = write_json(dir / "c.json", tiny_config());
  for (const auto* out : {"r1", "r2"}) {
    const auto r = cli({"train", "--config", cfg.string(), "--data-root", (dir / "data").string(),
                        "--out", (dir / out).string()});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  EXPECT_TRUE(fs::exists(dir / "r1/loss.csv"));
  EXPECT_EQ(bytes_of(dir / "r1/model.a2ck"), bytes_of(dir / "r2/model.a2ck"));
  const auto ckpt = training::load_checkpoint(dir / "r1/model.a2ck");
  ASSERT_TRUE(ckpt.state.has_value());
  EXPECT_EQ(ckpt.state->step, 4u);  // 2 epochs of 4 patches in batches of 2

  // Resume to the end from a two-step checkpoint.
  ASSERT_EQ(cli({"train", "--config", cfg.string(), "--data-root", (dir / "data").string(),
                 "--out", (dir / "r3").string(), "--max-steps", "2"})
                .code,
            0);
  ASSERT_EQ(cli({"train", "--config", cfg.string(), "--data-root", (dir / "data").string(),
                 "--out", (dir / "r3").string(), "--resume", (dir / "r3/model.a2ck").string()})
                .code,
            0);
  EXPECT_EQ(bytes_of(dir / "r1/model.a2ck"), bytes_of(dir / "r3/model.a2ck"));

  // A non-multiple-of-4 image comes back at its own size.
  data::encode_image(testing::random_rgb(30, 27, 1), dir / "odd.png");
  ASSERT_EQ(cli({"infer", "--ckpt", (dir / "r1/model.a2ck").string(), "--input",
                 (dir / "odd.png").string(), "--output", (dir / "odd_out.png").string()})
                .code,
            0);
  const auto e = data::read_extent(dir / "odd_out.png");
  EXPECT_EQ(e.height, 30u);
  EXPECT_EQ(e.width, 27u);
}

TEST(Cli, IdentityCheckpointReproducesInput) {
  TempDir dir("identity");
  training::save_checkpoint(net::Model<float>(net::NetworkConfig{}), dir / "id.a2ck");
  const auto img = testing::random_rgb(250, 250, 2);
  data::encode_image(img, dir / "in.png");
  const auto r = cli({"infer", "--ckpt", (dir / "id.a2ck").string(), "--input",
                      (dir / "in.png").string(), "--output", (dir / "out.png").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto in = data::decode_image(dir / "in.png");
  const auto out = data::decode_image(dir / "out.png");
  ASSERT_TRUE(out.same_extents(in));
  for (std::size_t i = 0; i < in.data().size(); ++i) {
    EXPECT_LE(std::abs(out.data()[i] - in.data()[i]), 1.0f / 255.0f + 1e-6f);
  }
}

TEST(Cli, AnalyzeIdenticalPairs) {
  TempDir dir("analyze");
  auto pairs = testing::synth_pairs(2, 16, 16, 7);
  for (auto& p : pairs) p.degraded = p.clean;
  testing::write_pairs(dir.path(), pairs);
  const auto r = cli({"analyze", "--pairs-root", dir.path().string(), "--space", "yuv", "--bins",
                      "8", "--out", (dir / "h.csv").string(), "--summary", (dir / "s.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(dir / "h.csv");
  const auto rows = csv_rows({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});
  ASSERT_EQ(rows.size(), 1u + 3u * 8u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const bool zero_bin = std::stod(rows[i][1]) == 0.0;
    EXPECT_EQ(std::stoul(rows[i][3]), zero_bin ? 512u : 0u);
  }
  EXPECT_EQ(cli({"analyze", "--pairs-root", dir.path().string(), "--space", "hsv"}).code,
            cli::kConfigError);
}

TEST(Cli, SwapSelfAndLuminanceRepair) {
  TempDir dir("swap");
  const auto pair = testing::synth_pairs(1, 48, 48, 8)[0];
  data::encode_image(pair.degraded, dir / "d.png");
  data::encode_image(pair.clean, dir / "c.png");
  ASSERT_EQ(cli({"swap", "--degraded", (dir / "c.png").string(), "--clean", (dir / "c.png").string(),
                 "--mode", "uv", "--out", (dir / "self.png").string()})
                .code,
            0);
  const auto clean = data::decode_image(dir / "c.png");
  const auto self = data::decode_image(dir / "self.png");
  for (std::size_t i = 0; i < clean.data().size(); ++i) {
    EXPECT_LE(std::abs(self.data()[i] - clean.data()[i]), 1.0f / 255.0f + 1e-6f);
  }
  ASSERT_EQ(cli({"swap", "--degraded", (dir / "d.png").string(), "--clean", (dir / "c.png").string(),
                 "--mode", "y", "--out", (dir / "y.png").string()})
                .code,
            0);
  EXPECT_GT(objective::psnr(data::decode_image(dir / "y.png"), clean), 35.0);
}

TEST(Cli, BenchOneRowPerSize) {
  TempDir dir("bench");
  auto doc = tiny_config();
  const auto cfg = write_json(dir / "c.json", doc);
  const auto r = cli({"bench", "--config", cfg.string(), "--sizes", "16,32,64", "--repeat", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"size", "seconds"}));
  EXPECT_EQ(rows[3][0], "64");
  EXPECT_GT(std::stod(rows[3][1]), 0.0);
  EXPECT_EQ(cli({"bench", "--config", cfg.string(), "--sizes", "18"}).code, cli::kConfigError);
}

}  // namespace
}  // namespace a2net
