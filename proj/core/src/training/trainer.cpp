#include "a2net/training/trainer.hpp"

#include <fstream>
#include <iomanip>
#include <memory>
#include <numeric>
#include <ostream>

#include "a2net/errors.hpp"
#include "a2net/rng.hpp"

namespace a2net::training {

Batch make_batch(std::span<const data::PatchPair> patches, color::Space space) {
  if (patches.empty()) throw DataError("make_batch: no patches");
  if (space == color::Space::rgb) {
    std::vector<color::RgbImage> degraded, clean;
    for (const auto& p : patches) {
      degraded.push_back(p.degraded);
      clean.push_back(p.clean);
    }
    return {color::to_tensor<color::RgbTag>(degraded), color::to_tensor<color::RgbTag>(clean)};
  }
  std::vector<color::YuvImage> degraded, clean;
  for (const auto& p : patches) {
    degraded.push_back(color::rgb_to_yuv(p.degraded));
    clean.push_back(color::rgb_to_yuv(p.clean));
  }
  return {color::to_tensor<color::YuvTag>(degraded), color::to_tensor<color::YuvTag>(clean)};
}

template <typename T>
std::pair<diff::Tensor<T>, objective::LossReport> output_loss(net::Variant variant,
                                                              const diff::Tensor<T>& predicted,
                                                              const diff::Tensor<T>& clean,
                                                              const TrainingConfig& cfg) {
  const objective::LossWeights weights{cfg.alpha};
  if (net::has_split_decoders(variant)) {
    const auto y = objective::loss_y(diff::slice_channels(predicted, 0, 1),
                                     diff::slice_channels(clean, 0, 1), cfg.loss_mode);
    const auto uv = objective::loss_uv(diff::slice_channels(predicted, 1, 2),
                                       diff::slice_channels(clean, 1, 2), cfg.loss_mode);
    return objective::total_loss(y, uv, weights);
  }
  const auto whole =
      objective::loss_image(predicted, clean, net::model_space(variant), cfg.loss_mode);
  return objective::total_loss(whole, objective::ComponentLoss<T>{}, weights);
}

template std::pair<diff::Tensor<float>, objective::LossReport> output_loss(
    net::Variant, const diff::Tensor<float>&, const diff::Tensor<float>&, const TrainingConfig&);
template std::pair<diff::Tensor<double>, objective::LossReport> output_loss(
    net::Variant, const diff::Tensor<double>&, const diff::Tensor<double>&,
    const TrainingConfig&);

std::pair<diff::Tensor<float>, objective::LossReport> compute_loss(
    const net::Model<float>& model, const Batch& batch, const TrainingConfig& cfg) {
  return output_loss(model.config().variant, model.forward(batch.degraded), batch.clean, cfg);
}

objective::LossReport train_step(net::Model<float>& model, Adam& adam, const Batch& batch,
                                 const TrainingConfig& cfg, double lr) {
  model.zero_grad();
  auto [loss, report] = compute_loss(model, batch, cfg);
  if (loss.requires_grad()) loss.backward();
  adam.step(model.parameters(), lr);
  model.zero_grad();
  return report;
}

SampleSet SampleSet::of(std::vector<data::PatchPair> patches) {
  auto shared = std::make_shared<const std::vector<data::PatchPair>>(std::move(patches));
  return {shared->size(), [shared](std::size_t i) { return (*shared)[i]; }};
}

SampleSet SampleSet::of(data::PatchSampler& sampler) {
  return {sampler.size(), [&sampler](std::size_t i) { return sampler.patch(i); }};
}

std::size_t steps_per_epoch(std::size_t samples, std::size_t batch_size) {
  return (samples + batch_size - 1) / batch_size;
}

std::vector<std::size_t> epoch_order(std::size_t samples, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(samples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = Rng::derive(seed, epoch);
  for (std::size_t i = samples; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

void write_log_header(std::ostream& out) { out << "epoch,step,l_total,l_y,l_uv,lr\n"; }

void write_log_row(const LogRow& row, std::ostream& out) {
  out << row.epoch << ',' << row.step << ',' << std::setprecision(9) << row.loss.l_total << ','
      << row.loss.l_y << ',' << row.loss.l_uv << ',' << row.lr << '\n';
}

TrainResult train(const net::NetworkConfig& net_cfg, const TrainingConfig& cfg,
                  const SampleSet& samples, const TrainOptions& options,
                  const Checkpoint* resume) {
  cfg.validate();
  if (samples.size == 0) throw DataError("train: the dataset is empty");
  const AdamHyper hyper{cfg.beta1, cfg.beta2, cfg.epsilon};

  TrainResult result{resume ? resume->model.clone() : net::Model<float>(net_cfg), {}, {}};
  if (resume != nullptr && resume->state) {
    result.state = *resume->state;
    result.state.adam.set_hyper(hyper);
  } else {
    result.state.adam = Adam(result.model.parameters(), hyper);
  }

  const std::size_t per_epoch = steps_per_epoch(samples.size, cfg.batch_size);
  const std::uint64_t schedule_steps = per_epoch * cfg.total_epochs();
  const std::uint64_t last_step =
      options.max_steps ? std::min<std::uint64_t>(options.max_steps, schedule_steps)
                        : schedule_steps;
  const color::Space space = net::model_space(result.model.config().variant);

  std::ofstream log;
  const bool to_disk = !options.out_dir.empty();
  const auto checkpoint = [&] {
    if (to_disk) {
      save_checkpoint(result.model, options.out_dir / kCheckpointFile, &result.state);
    }
  };
  if (to_disk) {
    std::filesystem::create_directories(options.out_dir);
    const auto path = options.out_dir / kLossLogFile;
    const bool append = resume != nullptr && std::filesystem::exists(path);
    log.open(path, append ? std::ios::app : std::ios::trunc);
    if (!log) throw DataError("cannot open loss log " + path.string());
    if (!append) write_log_header(log);
  }
  const auto emit = [&](const LogRow& row) {
    result.log.push_back(row);
    if (to_disk) {
      write_log_row(row, log);
      log.flush();
    }
  };

  std::uint64_t& step = result.state.step;
  bool stop = false;
  while (step < last_step && !stop) {
    const std::size_t epoch = step / per_epoch;
    const double lr = lr_at(epoch, cfg);
    const std::vector<std::size_t> order = epoch_order(samples.size, cfg.seed, epoch);

    objective::LossReport sum;
    std::size_t counted = 0;
    for (std::size_t k = step % per_epoch; k < per_epoch && step < last_step; ++k) {
      const std::size_t begin = k * cfg.batch_size;
      const std::size_t end = std::min(samples.size, begin + cfg.batch_size);
      std::vector<data::PatchPair> patches;
      patches.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i) patches.push_back(samples.get(order[i]));

      const Batch batch = make_batch(patches, space);
      const objective::LossReport r = train_step(result.model, result.state.adam, batch, cfg, lr);
      ++step;
      sum.l_total += r.l_total;
      sum.l_y += r.l_y;
      sum.l_uv += r.l_uv;
      ++counted;
      if (options.log_every_step) emit({epoch, step, r, lr});
      if (options.on_step && !options.on_step(step, r)) {
        stop = true;
        break;
      }
    }

    if (!options.log_every_step && counted > 0) {
      const double n = static_cast<double>(counted);
      objective::LossReport mean;
      mean.l_total = sum.l_total / n;
      mean.l_y = sum.l_y / n;
      mean.l_uv = sum.l_uv / n;
      mean.alpha = cfg.alpha;
      emit({epoch, step, mean, lr});
    }
    const bool epoch_done = step % per_epoch == 0;
    if (epoch_done && cfg.checkpoint_every > 0 && (step / per_epoch) % cfg.checkpoint_every == 0) {
      checkpoint();
    }
  }
  checkpoint();
  return result;
}

}  // namespace a2net::training
