#include "a2net/net/model.hpp"

#include <algorithm>
#include <cmath>

#include "a2net/errors.hpp"
#include "a2net/rng.hpp"

namespace a2net::net {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::a2net: return "a2net";
    case Variant::a2net32: return "a2net32";
    case Variant::a2net_rgb: return "a2net_rgb";
    case Variant::a2net_yuv: return "a2net_yuv";
    case Variant::general: return "general";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : kAllVariants) {
    if (to_string(v) == name) return v;
  }
  throw ConfigError("unknown variant '" + std::string(name) +
                    "' (expected a2net, a2net32, a2net_rgb, a2net_yuv or general)");
}

color::Space model_space(Variant v) {
  return (v == Variant::a2net_rgb || v == Variant::general) ? color::Space::rgb
                                                             : color::Space::yuv;
}

bool has_split_decoders(Variant v) { return v == Variant::a2net || v == Variant::a2net32; }

void NetworkConfig::validate() const {
  if (levels < 1) throw ConfigError("levels must be >= 1");
  if (k_encoder < 1) throw ConfigError("k_encoder must be >= 1");
  if (k_y < 1) throw ConfigError("k_y must be >= 1");
  if (k_uv < 1) throw ConfigError("k_uv must be >= 1");
  if (levels > 12) throw ConfigError("levels must be <= 12");
}

NetworkConfig NetworkConfig::resolved() const {
  NetworkConfig out = *this;
  if (variant == Variant::a2net32) out.k_uv = 32;
  return out;
}

template <typename T>
diff::Tensor<T> aggregate(const AggregationNode& node, std::span<const diff::Tensor<T>> inputs,
                          const diff::Tensor<T>& weight, const diff::Tensor<T>& bias) {
  if (inputs.size() != node.arity) {
    throw ShapeError("aggregate: node takes " + std::to_string(node.arity) + " inputs, got " +
                     std::to_string(inputs.size()));
  }
  const diff::Tensor<T> merged =
      inputs.size() == 1 ? inputs[0] : diff::concat_channels<T>(inputs);
  return diff::relu(diff::conv2d(merged, weight, bias, node.spec));
}

namespace {

diff::ConvSpec conv_spec(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
                         std::size_t padding) {
  return diff::ConvSpec{out, in, kernel, kernel, stride, padding};
}

// Program under construction, independent of the element type.
struct Program {
  std::vector<Step> steps;
  std::vector<std::size_t> channels{3};  // per slot

  std::size_t add(std::string name, StepKind kind, std::vector<std::size_t> inputs,
                  std::size_t out, std::size_t kernel, std::size_t stride, std::size_t padding,
                  Activation act = Activation::relu, bool fusion = false) {
    std::size_t in = 0;
    for (std::size_t s : inputs) in += channels[s];
    Step step;
    step.name = std::move(name);
    step.kind = kind;
    step.inputs = std::move(inputs);
    step.spec = conv_spec(in, out, kernel, stride, padding);
    step.activation = act;
    step.fusion = fusion;
    steps.push_back(std::move(step));
    channels.push_back(out);
    return steps.size();
  }

  std::size_t conv3(std::string name, std::vector<std::size_t> inputs, std::size_t out,
                    bool fusion = false) {
    return add(std::move(name), StepKind::conv, std::move(inputs), out, 3, 1, 1,
               Activation::relu, fusion);
  }
};

// Returns lateral slots F_0..F_levels.
std::vector<std::size_t> build_encoder(Program& p, const NetworkConfig& cfg, bool adjacent) {
  const std::size_t k = cfg.k_encoder;
  std::vector<std::size_t> laterals;
  for (std::size_t l = 0; l <= cfg.levels; ++l) {
    const std::string prefix = "encoder.level" + std::to_string(l);
    const std::size_t a =
        l == 0 ? p.conv3(prefix + ".stem", {0}, k)
               : p.add(prefix + ".down", StepKind::conv, {laterals.back()}, k, 4, 2, 1);
    const std::size_t b = p.conv3(prefix + ".conv", {a}, k);
    const std::size_t fused = adjacent ? p.conv3(prefix + ".fuse", {a, b}, k, true)
                                       : p.conv3(prefix + ".fuse", {b}, k, true);
    laterals.push_back(fused);
  }
  return laterals;
}

// Returns the head step index (slot - 1).
std::size_t build_decoder(Program& p, const NetworkConfig& cfg, const std::string& name,
                          std::size_t k, std::size_t out_channels,
                          const std::vector<std::size_t>& laterals, bool adjacent) {
  std::size_t g = laterals.back();
  for (std::size_t l = cfg.levels; l >= 1; --l) {
    const std::string prefix = name + ".level" + std::to_string(l - 1);
    const std::size_t u1 = p.add(prefix + ".up", StepKind::conv_transpose, {g}, k, 2, 2, 0);
    const std::size_t u2 = p.conv3(prefix + ".conv", {u1}, k);
    g = adjacent ? p.conv3(prefix + ".fuse", {u1, u2, laterals[l - 1]}, k, true)
                 : p.conv3(prefix + ".fuse", {u2, laterals[l - 1]}, k, true);
  }
  const std::size_t head =
      p.add(name + ".head", StepKind::conv, {g}, out_channels, 3, 1, 1, Activation::tanh);
  p.steps.back().head = true;
  return head - 1;
}

// Contributions per output element, the fan-in for uniform initialization.
std::size_t fan_in(const Step& s) {
  const auto& c = s.spec;
  if (s.kind == StepKind::conv) return c.in_channels * c.kernel_h * c.kernel_w;
  const auto per_axis = [&](std::size_t k) { return (k + c.stride - 1) / c.stride; };
  return c.in_channels * per_axis(c.kernel_h) * per_axis(c.kernel_w);
}

}  // namespace

template <typename T>
Model<T>::Model(const NetworkConfig& config) : Model(config, true) {}

template <typename T>
Model<T>::Model(const NetworkConfig& config, bool initialize) : config_(config.resolved()) {
  config_.validate();
  Program p;
  const Variant v = config_.variant;
  const bool adjacent = v != Variant::general;
  const auto laterals = build_encoder(p, config_, adjacent);
  if (has_split_decoders(v)) {
    const std::size_t y = build_decoder(p, config_, "decoder_y", config_.k_y, 1, laterals, true);
    const std::size_t uv =
        build_decoder(p, config_, "decoder_uv", config_.k_uv, 2, laterals, true);
    outputs_ = {{y, 0, 0, 1, 0.0f, 1.0f}, {uv, 0, 1, 2, -0.5f, 0.5f}};
  } else {
    const std::size_t head =
        build_decoder(p, config_, "decoder", config_.k_y, 3, laterals, adjacent);
    if (model_space(v) == color::Space::yuv) {
      outputs_ = {{head, 0, 0, 1, 0.0f, 1.0f}, {head, 1, 1, 2, -0.5f, 0.5f}};
    } else {
      outputs_ = {{head, 0, 0, 3, 0.0f, 1.0f}};
    }
  }
  steps_ = std::move(p.steps);

  Rng rng(config_.seed);
  for (const Step& s : steps_) {
    const auto& c = s.spec;
    const diff::Shape ws = s.kind == StepKind::conv
                               ? diff::Shape{c.out_channels, c.in_channels, c.kernel_h, c.kernel_w}
                               : diff::Shape{c.in_channels, c.out_channels, c.kernel_h, c.kernel_w};
    Tensor w(ws), b(diff::Shape{c.out_channels, 1, 1, 1});
    if (initialize && !s.head) {
      const double bound = std::sqrt(1.0 / static_cast<double>(fan_in(s)));
      for (auto& x : w.mutable_data()) x = static_cast<T>(rng.uniform(-bound, bound));
      for (auto& x : b.mutable_data()) x = static_cast<T>(rng.uniform(-bound, bound));
    }
    w.set_requires_grad(true);
    b.set_requires_grad(true);
    weight_index_.push_back(params_.size());
    for (auto* entry : {&w, &b}) {
      const std::string name = s.name + (entry == &w ? ".weight" : ".bias");
      by_name_.emplace(name, params_.size());
      params_.push_back({name, *entry});
    }
  }
}

template <typename T>
typename Model<T>::Tensor& Model<T>::parameter(std::string_view name) {
  const auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) throw Error("unknown parameter '" + std::string(name) + "'");
  return params_[it->second].tensor;
}

template <typename T>
const typename Model<T>::Tensor& Model<T>::parameter(std::string_view name) const {
  return const_cast<Model*>(this)->parameter(name);
}

template <typename T>
bool Model<T>::has_parameter(std::string_view name) const {
  return by_name_.contains(std::string(name));
}

template <typename T>
std::size_t Model<T>::step_index(std::string_view name) const {
  for (std::size_t i = 0; i < steps_.size(); ++i) {
    if (steps_[i].name == name) return i;
  }
  throw Error("unknown network node '" + std::string(name) + "'");
}

template <typename T>
void Model<T>::check_input(const Tensor& input) const {
  const auto& s = input.shape();
  if (s.c != 3) throw ShapeError("forward: input has " + std::to_string(s.c) + " channels, expected 3");
  const std::size_t multiple = std::size_t{1} << config_.levels;
  if (s.h == 0 || s.h % multiple != 0) {
    throw ShapeError("forward: height " + std::to_string(s.h) + " is not a positive multiple of " +
                     std::to_string(multiple));
  }
  if (s.w == 0 || s.w % multiple != 0) {
    throw ShapeError("forward: width " + std::to_string(s.w) + " is not a positive multiple of " +
                     std::to_string(multiple));
  }
}

template <typename T>
typename Model<T>::Tensor Model<T>::run_step(std::size_t i, std::span<const Tensor> slots) const {
  const Step& s = steps_[i];
  const Tensor& w = weight(i);
  const Tensor& b = bias(i);
  std::vector<Tensor> inputs;
  inputs.reserve(s.inputs.size());
  for (std::size_t slot : s.inputs) inputs.push_back(slots[slot]);
  if (s.fusion && s.inputs.size() > 1 && s.activation == Activation::relu) {
    return aggregate<T>(AggregationNode{s.inputs.size(), s.spec}, inputs, w, b);
  }
  const Tensor merged =
      inputs.size() == 1 ? inputs[0] : diff::concat_channels<T>(std::span<const Tensor>(inputs));
  const Tensor pre = s.kind == StepKind::conv ? diff::conv2d(merged, w, b, s.spec)
                                              : diff::conv_transpose2d(merged, w, b, s.spec);
  return s.activation == Activation::relu ? diff::relu(pre) : diff::tanh_act(pre);
}

template <typename T>
typename Model<T>::Tensor Model<T>::compose(std::span<const Tensor> slots) const {
  const Tensor& input = slots[0];
  std::vector<Tensor> parts;
  for (const ResidualGroup& g : outputs_) {
    const Tensor& head = slots[g.step + 1];
    const Tensor residual =
        head.shape().c == g.channels ? head : diff::slice_channels(head, g.head_channel, g.channels);
    const Tensor base = input.shape().c == g.channels
                            ? input
                            : diff::slice_channels(input, g.input_channel, g.channels);
    parts.push_back(diff::clamp(diff::add(base, residual), static_cast<T>(g.lo),
                                static_cast<T>(g.hi)));
  }
  return parts.size() == 1 ? parts[0] : diff::concat_channels<T>(std::span<const Tensor>(parts));
}

template <typename T>
std::vector<typename Model<T>::Tensor> Model<T>::forward_slots(const Tensor& input) const {
  check_input(input);
  std::vector<Tensor> slots;
  slots.reserve(steps_.size() + 1);
  slots.push_back(input);
  for (std::size_t i = 0; i < steps_.size(); ++i) slots.push_back(run_step(i, slots));
  return slots;
}

template <typename T>
typename Model<T>::Tensor Model<T>::forward(const Tensor& input) const {
  return compose(forward_slots(input));
}

template <typename T>
std::size_t Model<T>::param_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += p.tensor.numel();
  return total;
}

template <typename T>
void Model<T>::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

template <typename T>
Model<T> Model<T>::clone() const {
  Model out(config_, false);
  for (std::size_t i = 0; i < params_.size(); ++i) out.params_[i].tensor = params_[i].tensor.clone();
  return out;
}

template <typename T>
template <typename U>
Model<U> Model<T>::cast() const {
  Model<U> out(config_, false);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out.params_[i].tensor = diff::tensor_cast<U>(params_[i].tensor);
  }
  return out;
}

template class Model<float>;
template class Model<double>;
template Model<double> Model<float>::cast<double>() const;
template Model<float> Model<double>::cast<float>() const;
template diff::Tensor<float> aggregate(const AggregationNode&, std::span<const diff::Tensor<float>>,
                                       const diff::Tensor<float>&, const diff::Tensor<float>&);
template diff::Tensor<double> aggregate(const AggregationNode&,
                                        std::span<const diff::Tensor<double>>,
                                        const diff::Tensor<double>&, const diff::Tensor<double>&);

std::size_t param_count(const NetworkConfig& config) {
  return Model<float>(config).param_count();
}

std::vector<FeatureMap> dump_features(const Model<float>& model, const diff::Tensor<float>& input,
                                      std::string_view node_path) {
  const std::size_t index = model.step_index(node_path);
  if (!model.steps()[index].fusion) {
    throw Error("'" + std::string(node_path) + "' is not an aggregation node");
  }
  diff::NoGradGuard guard;
  const auto slots = model.forward_slots(input);
  const auto& act = slots[index + 1];
  const auto& s = act.shape();
  std::vector<FeatureMap> maps;
  for (std::size_t c = 0; c < s.c; ++c) {
    const auto plane = act.data().subspan(s.offset(0, c, 0, 0), s.plane());
    const auto [lo, hi] = std::ranges::minmax(plane);
    FeatureMap m{s.h, s.w, std::vector<float>(plane.size(), 0.0f)};
    if (hi > lo) {
      for (std::size_t i = 0; i < plane.size(); ++i) m.values[i] = (plane[i] - lo) / (hi - lo);
    }
    maps.push_back(std::move(m));
  }
  return maps;
}

}  // namespace a2net::net
