#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "a2net/colorspace/colorspace.hpp"
#include "a2net/diffcore/ops.hpp"
#include "a2net/diffcore/tensor.hpp"

namespace a2net::net {

enum class Variant {
  a2net,      // shared encoder, Y decoder and UV decoder, YUV input
  a2net32,    // a2net with the UV decoder widened to 32 maps
  a2net_rgb,  // one encoder, one 3-channel decoder, RGB input
  a2net_yuv,  // one encoder, one 3-channel decoder, YUV input
  general,    // plain encoder-decoder with laterals, no adjacent fusion, RGB input
};

std::string_view to_string(Variant v);
/// Throws ConfigError for unknown names.
Variant parse_variant(std::string_view name);
inline constexpr Variant kAllVariants[] = {Variant::a2net, Variant::a2net32, Variant::a2net_rgb,
                                           Variant::a2net_yuv, Variant::general};

/// Color space the variant consumes and produces.
color::Space model_space(Variant v);
/// True for variants with separate Y and UV decoders.
bool has_split_decoders(Variant v);

struct NetworkConfig {
  std::size_t levels = 3;
  std::size_t k_encoder = 32;
  std::size_t k_y = 32;   // also the width of single-decoder variants
  std::size_t k_uv = 24;
  Variant variant = Variant::a2net;
  std::uint32_t seed = 0;

  /// Throws ConfigError on zero counts.
  void validate() const;
  /// Copy with variant-implied overrides applied (a2net32 forces k_uv = 32).
  NetworkConfig resolved() const;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

enum class StepKind { conv, conv_transpose };
enum class Activation { relu, tanh };

/// One convolution of the network program. Slot 0 holds the network input
/// and step i writes slot i + 1; a step with several inputs concatenates
/// them along channels first.
struct Step {
  std::string name;
  StepKind kind = StepKind::conv;
  std::vector<std::size_t> inputs;
  diff::ConvSpec spec;
  Activation activation = Activation::relu;
  bool fusion = false;  // aggregation node (or its plain replacement in `general`)
  bool head = false;
};

/// output[input_channel + i] = clamp(input[input_channel + i] + head[head_channel + i], lo, hi)
struct ResidualGroup {
  std::size_t step;
  std::size_t head_channel;
  std::size_t input_channel;
  std::size_t channels;
  float lo;
  float hi;
};

/// Aggregation node: relu(conv3x3(concat(inputs)) + b) with `arity` inputs.
struct AggregationNode {
  std::size_t arity = 2;
  diff::ConvSpec spec;
};

template <typename T>
diff::Tensor<T> aggregate(const AggregationNode& node, std::span<const diff::Tensor<T>> inputs,
                          const diff::Tensor<T>& weight, const diff::Tensor<T>& bias);

template <typename T>
struct NamedParameter {
  std::string name;
  diff::Tensor<T> tensor;
};

template <typename T>
class Model {
 public:
  using Tensor = diff::Tensor<T>;

  /// Builds the topology for `config` and initializes parameters from its seed.
  explicit Model(const NetworkConfig& config);

  const NetworkConfig& config() const { return config_; }
  const std::vector<Step>& steps() const { return steps_; }
  const std::vector<ResidualGroup>& outputs() const { return outputs_; }
  std::span<const NamedParameter<T>> parameters() const { return params_; }
  std::span<NamedParameter<T>> parameters() { return params_; }
  Tensor& parameter(std::string_view name);
  const Tensor& parameter(std::string_view name) const;
  bool has_parameter(std::string_view name) const;
  const Tensor& weight(std::size_t step) const { return params_[weight_index_[step]].tensor; }
  const Tensor& bias(std::size_t step) const { return params_[weight_index_[step] + 1].tensor; }
  std::size_t step_index(std::string_view name) const;

  /// [N, 3, H, W] to [N, 3, H, W]; H and W must be multiples of 2^levels.
  Tensor forward(const Tensor& input) const;

  /// Every slot of the program for `input`; slots[0] is the input itself.
  std::vector<Tensor> forward_slots(const Tensor& input) const;
  /// Output of step `i` from already computed slots.
  Tensor run_step(std::size_t i, std::span<const Tensor> slots) const;
  /// Network output from the input and the computed slots.
  Tensor compose(std::span<const Tensor> slots) const;

  std::size_t param_count() const;
  void zero_grad();

  /// Deep copy of all parameters.
  Model clone() const;

  template <typename U>
  Model<U> cast() const;

 private:
  template <typename U>
  friend class Model;

  Model(const NetworkConfig& config, bool initialize);
  void check_input(const Tensor& input) const;

  NetworkConfig config_;
  std::vector<Step> steps_;
  std::vector<ResidualGroup> outputs_;
  std::vector<NamedParameter<T>> params_;
  std::vector<std::size_t> weight_index_;  // per step; bias follows its weight
  std::unordered_map<std::string, std::size_t> by_name_;
};

extern template class Model<float>;
extern template class Model<double>;

/// Sum of element counts over all weights and biases.
template <typename T>
std::size_t param_count(const Model<T>& model) {
  return model.param_count();
}

/// Parameter count of the network `config` describes.
std::size_t param_count(const NetworkConfig& config);

/// One activation map scaled to [0, 1].
struct FeatureMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> values;
};

/// Per-channel activations of fusion node `node_path` (e.g.
/// "encoder.level0.fuse") for the first batch item, each min-max
/// normalized to [0, 1]; constant maps become all zero.
std::vector<FeatureMap> dump_features(const Model<float>& model, const diff::Tensor<float>& input,
                                      std::string_view node_path);

}  // namespace a2net::net
