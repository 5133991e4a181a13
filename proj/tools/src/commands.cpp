#include "a2net/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>
#include <utility>

#include "CLI11.hpp"
#include "a2net/cli/inference.hpp"
#include "a2net/cli/run_config.hpp"
#include "a2net/data/png_codec.hpp"
#include "a2net/data/synth.hpp"
#include "a2net/errors.hpp"
#include "a2net/objective/objective.hpp"
#include "a2net/rng.hpp"
#include "a2net/training/checkpoint.hpp"
#include "a2net/training/trainer.hpp"
#include "json.hpp"

namespace a2net::cli {

namespace fs = std::filesystem;

namespace {

constexpr int kDigits = std::numeric_limits<double>::max_digits10;

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

RunConfig config_or_default(const std::string& path) {
  return path.empty() ? default_run_config() : load_run_config(path);
}

// Writes to `path`, or to `fallback` when the path is empty.
template <typename Fn>
void with_output(const std::string& path, std::ostream& fallback, Fn&& fn) {
  if (path.empty()) {
    fn(fallback);
    return;
  }
  std::ofstream file(path);
  if (!file) throw DataError("cannot open " + path + " for writing");
  fn(file);
  if (!file) throw DataError("failed writing " + path);
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string data_root;
  std::string split;
  std::string out;
  std::string resume;
  std::uint64_t max_steps = 0;
  std::size_t checkpoint_every = 10;
  bool log_every_step = false;
};

int cmd_train(const TrainArgs& a, Streams io) {
  const RunConfig cfg = config_or_default(a.config);
  training::TrainingConfig tr = cfg.training;
  tr.checkpoint_every = a.checkpoint_every;

  std::optional<training::Checkpoint> resume;
  if (!a.resume.empty()) {
    resume = training::load_checkpoint(a.resume);
    if (!resume->state) throw CheckpointError(a.resume + " holds no optimizer state to resume");
    if (!(resume->model.config() == cfg.network.resolved())) {
      throw ConfigError("the network in " + a.resume + " does not match the configuration");
    }
  }

  const data::PairedDataset ds = data::load_pairs(a.data_root, a.split);
  data::PatchSampler sampler(ds, cfg.patches);
  training::TrainOptions options;
  options.out_dir = a.out;
  options.max_steps = a.max_steps;
  options.log_every_step = a.log_every_step;

  const auto result = training::train(cfg.network, tr, training::SampleSet::of(sampler), options,
                                      resume ? &*resume : nullptr);
  io.out << "steps " << result.state.step << '\n';
  if (!result.log.empty()) {
    io.out << "final_loss " << std::setprecision(kDigits) << result.log.back().loss.l_total << '\n';
  }
  io.out << "checkpoint " << (fs::path(a.out) / training::kCheckpointFile).string() << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct InferArgs {
  std::string ckpt;
  std::string input;
  std::string output;
};

int cmd_infer(const InferArgs& a, Streams) {
  const auto ckpt = training::load_checkpoint(a.ckpt);
  const color::RgbImage img = data::decode_image(a.input);
  data::encode_image(restore(ckpt.model, img), a.output);
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string ckpt;
  std::string pairs_root;
  std::string split;
  std::string out;
};

int cmd_eval(const EvalArgs& a, Streams io) {
  std::optional<training::Checkpoint> ckpt;
  if (!a.ckpt.empty()) ckpt = training::load_checkpoint(a.ckpt);
  const data::PairedDataset ds = data::load_pairs(a.pairs_root, a.split);
  if (ds.empty()) throw DataError("no image pairs under " + a.pairs_root);

  std::vector<objective::MetricReport> rows;
  rows.reserve(ds.size());
  for (const auto& pair : ds.pairs) {
    const color::RgbImage degraded = data::decode_image(pair.degraded);
    const color::RgbImage clean = data::decode_image(pair.clean);
    const color::RgbImage restored =
        ckpt ? data::quantize(restore(ckpt->model, degraded)) : degraded;
    rows.push_back(objective::evaluate(restored, clean));
  }

  with_output(a.out, io.out, [&](std::ostream& os) {
    os << "file,psnr,ssim\n" << std::setprecision(kDigits);
    double psnr = 0.0;
    double ssim = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      os << ds.pairs[i].degraded.filename().string() << ',' << rows[i].psnr << ','
         << rows[i].ssim << '\n';
      psnr += rows[i].psnr;
      ssim += rows[i].ssim;
    }
    const double n = static_cast<double>(rows.size());
    os << "mean," << psnr / n << ',' << ssim / n << '\n';
  });
  return kOk;
}

// ---------------------------------------------------------------------------

struct ParamsArgs {
  std::string config;
  bool all = false;
};

int cmd_params(const ParamsArgs& a, Streams io) {
  const RunConfig cfg = config_or_default(a.config);
  io.out << "variant,params\n";
  if (!a.all) {
    io.out << net::to_string(cfg.network.variant) << ',' << net::param_count(cfg.network) << '\n';
    return kOk;
  }
  for (net::Variant v : net::kAllVariants) {
    net::NetworkConfig n = cfg.network;
    n.variant = v;
    io.out << net::to_string(v) << ',' << net::param_count(n) << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct AnalyzeArgs {
  std::string pairs_root;
  std::string split;
  std::string space = "yuv";
  std::size_t bins = 100;
  std::string out;
  std::string summary;
};

color::Space parse_space(const std::string& name) {
  if (name == "rgb") return color::Space::rgb;
  if (name == "yuv") return color::Space::yuv;
  throw ConfigError("--space must be rgb or yuv, got \"" + name + "\"");
}

int cmd_analyze(const AnalyzeArgs& a, Streams io) {
  const color::Space space = parse_space(a.space);
  if (a.bins < 2) throw ConfigError("--bins must be >= 2");
  const auto images = data::load_images(data::load_pairs(a.pairs_root, a.split));
  const auto hist = color::residual_histogram(images, space, a.bins);
  with_output(a.out, io.out, [&](std::ostream& os) { color::write_histogram_csv(hist, os); });
  with_output(a.summary, a.out.empty() ? io.err : io.out,
              [&](std::ostream& os) { color::write_histogram_summary(hist, os); });
  return kOk;
}

// ---------------------------------------------------------------------------

struct SwapArgs {
  std::string degraded;
  std::string clean;
  std::string mode;
  std::string out;
};

int cmd_swap(const SwapArgs& a, Streams) {
  color::SwapMode mode;
  if (a.mode == "y") {
    mode = color::SwapMode::take_y_from_clean;
  } else if (a.mode == "uv") {
    mode = color::SwapMode::take_uv_from_clean;
  } else {
    throw ConfigError("--mode must be y or uv, got \"" + a.mode + "\"");
  }
  const color::RgbImage degraded = data::decode_image(a.degraded);
  const color::RgbImage clean = data::decode_image(a.clean);
  if (!degraded.same_extents(clean)) {
    throw DataError(a.degraded + " and " + a.clean + " differ in size");
  }
  data::encode_image(color::swap_channels(degraded, clean, mode), a.out);
  return kOk;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::string ckpt;
  std::string config;
  std::vector<std::size_t> sizes{256, 512, 640};
  std::size_t repeat = 3;
  std::size_t warmup = 1;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_bench(const BenchArgs& a, Streams io) {
  if (a.repeat < 1) throw ConfigError("--repeat must be >= 1");
  if (a.sizes.empty()) throw ConfigError("--sizes must list at least one size");
  const net::Model<float> model = a.ckpt.empty()
                                      ? net::Model<float>(config_or_default(a.config).network)
                                      : training::load_checkpoint(a.ckpt).model;
  const std::size_t multiple = std::size_t{1} << model.config().levels;
  for (std::size_t s : a.sizes) {
    if (s == 0 || s % multiple != 0) {
      throw ConfigError("--sizes: " + std::to_string(s) + " is not a positive multiple of " +
                        std::to_string(multiple));
    }
  }

  std::vector<double> seconds;
  Rng rng(a.seed);
  diff::NoGradGuard no_grad;
  for (std::size_t s : a.sizes) {
    color::RgbImage img(s, s);
    for (float& v : img.data()) v = static_cast<float>(rng.uniform());
    const auto input = net::model_space(model.config().variant) == color::Space::yuv
                           ? color::to_tensor(color::rgb_to_yuv(img))
                           : color::to_tensor(img);
    for (std::size_t i = 0; i < a.warmup; ++i) (void)model.forward(input);
    double total = 0.0;
    for (std::size_t i = 0; i < a.repeat; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      (void)model.forward(input);
      total += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    seconds.push_back(total / static_cast<double>(a.repeat));
  }

  with_output(a.out, io.out, [&](std::ostream& os) {
    os << "size,seconds\n" << std::setprecision(6);
    for (std::size_t i = 0; i < a.sizes.size(); ++i) os << a.sizes[i] << ',' << seconds[i] << '\n';
  });
  return kOk;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string clean_root;
  std::string out_root;
  std::string params;
  std::uint64_t seed = 0;
  std::size_t count = 20;
  std::size_t height = 128;
  std::size_t width = 128;
};

data::SynthParams load_synth_params(const std::string& path) {
  data::SynthParams p;
  if (path.empty()) return p;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read synth parameters " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object()) throw ConfigError(path + ": top level must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    const auto number = [&, &key = key, &value = value] {
      if (!value.is_number()) throw ConfigError(path + ": \"" + key + "\" must be a number");
      return value.get<double>();
    };
    const auto count = [&, &key = key, &value = value] {
      if (!value.is_number_unsigned()) {
        throw ConfigError(path + ": \"" + key + "\" must be a non-negative integer");
      }
      return value.get<std::size_t>();
    };
    if (key == "blobs_min") p.blobs.lo = count();
    else if (key == "blobs_max") p.blobs.hi = count();
    else if (key == "radius_min") p.radius.lo = number();
    else if (key == "radius_max") p.radius.hi = number();
    else if (key == "gain_min") p.gain.lo = number();
    else if (key == "gain_max") p.gain.hi = number();
    else if (key == "blur_sigma") p.blur_sigma = number();
    else if (key == "chroma_leak") p.chroma_leak = number();
    else throw ConfigError(path + ": unknown key \"" + key + "\"");
  }
  p.validate();
  return p;
}

std::vector<fs::path> png_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("missing directory " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) {
      return static_cast<char>(std::tolower(c));
    });
    if (entry.is_regular_file() && ext == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no .png files in " + dir.string());
  return files;
}

int cmd_synth(const SynthArgs& a, Streams io) {
  const data::SynthParams base = load_synth_params(a.params);
  const fs::path out = a.out_root;
  fs::create_directories(out / "rain");
  fs::create_directories(out / "clean");

  std::size_t written = 0;
  const auto emit = [&](const std::string& stem, const color::RgbImage& clean) {
    data::SynthParams p = base;
    p.seed = Rng::derive(a.seed, written).next();
    data::encode_image(clean, out / "clean" / (stem + ".png"));
    data::encode_image(data::synth_degrade(clean, p), out / "rain" / (stem + ".png"));
    ++written;
  };

  if (!a.clean_root.empty()) {
    for (const auto& file : png_files(a.clean_root)) {
      emit(file.stem().string(), data::decode_image(file));
    }
  } else {
    if (a.count < 1) throw ConfigError("--count must be >= 1");
    if (a.height < 1 || a.width < 1) throw ConfigError("--height and --width must be >= 1");
    for (std::size_t i = 0; i < a.count; ++i) {
      std::ostringstream stem;
      stem << "synth" << std::setw(4) << std::setfill('0') << i;
      const std::uint64_t seed = Rng::derive(a.seed ^ 0x636c65616eULL, i).next();
      emit(stem.str(), data::quantize(data::synth_clean(a.height, a.width, seed)));
    }
  }
  io.out << "pairs " << written << '\n';
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"A2Net raindrop removal: training, inference and analysis"};
  app.require_subcommand(1);
  std::function<int()> action;
  const Streams io{out, err};

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a network on a paired dataset");
  t->add_option("--config", train.config, "JSON run configuration (defaults when omitted)");
  t->add_option("--data-root", train.data_root, "Dataset root holding rain/ and clean/")->required();
  t->add_option("--split", train.split, "Subdirectory of the root to read");
  t->add_option("--out", train.out, "Output directory for model.a2ck and loss.csv")->required();
  t->add_option("--resume", train.resume, "Checkpoint to continue from");
  t->add_option("--max-steps", train.max_steps, "Stop after this many optimizer steps in total");
  t->add_option("--checkpoint-every", train.checkpoint_every, "Epochs between checkpoints");
  t->add_flag("--log-every-step", train.log_every_step, "One loss row per step");
  t->callback([&] { action = [&] { return cmd_train(train, io); }; });

  InferArgs infer;
  auto* i = app.add_subcommand("infer", "Restore one image");
  i->add_option("--ckpt", infer.ckpt, "Checkpoint")->required();
  i->add_option("--input", infer.input, "Input PNG")->required();
  i->add_option("--output", infer.output, "Output PNG")->required();
  i->callback([&] { action = [&] { return cmd_infer(infer, io); }; });

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "PSNR and SSIM over a paired dataset");
  e->add_option("--ckpt", eval.ckpt, "Checkpoint; without it the degraded images are scored");
  e->add_option("--pairs-root", eval.pairs_root, "Dataset root")->required();
  e->add_option("--split", eval.split, "Subdirectory of the root to read");
  e->add_option("--out", eval.out, "CSV path (stdout when omitted)");
  e->callback([&] { action = [&] { return cmd_eval(eval, io); }; });

  ParamsArgs params;
  auto* p = app.add_subcommand("params", "Print parameter counts");
  p->add_option("--config", params.config, "JSON run configuration");
  p->add_flag("--all", params.all, "Every variant at the configured widths");
  p->callback([&] { action = [&] { return cmd_params(params, io); }; });

  AnalyzeArgs analyze;
  auto* an = app.add_subcommand("analyze", "Residual histograms of a paired dataset");
  an->add_option("--pairs-root", analyze.pairs_root, "Dataset root")->required();
  an->add_option("--split", analyze.split, "Subdirectory of the root to read");
  an->add_option("--space", analyze.space, "rgb or yuv");
  an->add_option("--bins", analyze.bins, "Histogram bins on [-1, 1]");
  an->add_option("--out", analyze.out, "Histogram CSV path (stdout when omitted)");
  an->add_option("--summary", analyze.summary, "Per-channel mean/std CSV path");
  an->callback([&] { action = [&] { return cmd_analyze(analyze, io); }; });

  SwapArgs swap;
  auto* s = app.add_subcommand("swap", "Combine channels of a degraded and a clean image");
  s->add_option("--degraded", swap.degraded, "Degraded PNG")->required();
  s->add_option("--clean", swap.clean, "Clean PNG")->required();
  s->add_option("--mode", swap.mode, "y: Y from clean; uv: UV from clean")->required();
  s->add_option("--out", swap.out, "Output PNG")->required();
  s->callback([&] { action = [&] { return cmd_swap(swap, io); }; });

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Forward-pass wall-clock time per input size");
  b->add_option("--ckpt", bench.ckpt, "Checkpoint (a fresh network when omitted)");
  b->add_option("--config", bench.config, "JSON run configuration for the fresh network");
  b->add_option("--sizes", bench.sizes, "Square input sizes")->delimiter(',');
  b->add_option("--repeat", bench.repeat, "Timed passes per size");
  b->add_option("--warmup", bench.warmup, "Untimed passes per size");
  b->add_option("--seed", bench.seed, "Seed of the random inputs");
  b->add_option("--out", bench.out, "CSV path (stdout when omitted)");
  b->callback([&] { action = [&] { return cmd_bench(bench, io); }; });

  SynthArgs synth;
  auto* sy = app.add_subcommand("synth", "Write a synthetic paired dataset");
  sy->add_option("--clean-root", synth.clean_root, "Directory of clean PNGs to degrade");
  sy->add_option("--out-root", synth.out_root, "Output dataset root")->required();
  sy->add_option("--params", synth.params, "JSON file overriding degrader parameters");
  sy->add_option("--seed", synth.seed, "Seed");
  sy->add_option("--count", synth.count, "Generated pairs without --clean-root");
  sy->add_option("--height", synth.height, "Generated image height");
  sy->add_option("--width", synth.width, "Generated image width");
  sy->callback([&] { action = [&] { return cmd_synth(synth, io); }; });

  auto* c = app.add_subcommand("config", "Print the default run configuration");
  c->callback([&] { action = [&] { out << to_json(default_run_config()) << '\n'; return kOk; }; });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    return action();
  } catch (const ConfigError& ex) {
    err << "config error: " << ex.what() << '\n';
    return kConfigError;
  } catch (const DataError& ex) {
    err << "data error: " << ex.what() << '\n';
    return kDataError;
  } catch (const CheckpointError& ex) {
    err << "checkpoint error: " << ex.what() << '\n';
    return kCheckpointError;
  } catch (const ShapeError& ex) {
    err << "data error: " << ex.what() << '\n';
    return kDataError;
  } catch (const fs::filesystem_error& ex) {
    err << "data error: " << ex.what() << '\n';
    return kDataError;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return 1;
  }
}

}  // namespace a2net::cli
