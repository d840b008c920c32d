#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lckd/availability.hpp"
#include "lckd/kernels.hpp"
#include "lckd/tensor.hpp"

namespace lckd {

struct ModelConfig {
  int spatial_dims = 3;
  int n_modalities = 4;
  int n_tasks = 3;
  int base_channels = 8;
  int depth = 3;
  std::uint64_t seed = 0;

  [[nodiscard]] int channels_at(int stage) const { return base_channels << stage; }
  [[nodiscard]] bool volumetric() const { return spatial_dims == 3; }
  void validate() const;
  /// Throws UsageError unless every axis of `e` is divisible by 2^depth.
  void check_extent(Extent e) const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ParamSpec {
  std::string name;
  std::vector<int> shape;
  std::size_t count = 0;
};

/// Flat parameter storage in registry order. One encoder set exists no matter
/// how many modalities there are.
template <class T>
struct ModelParams {
  std::vector<std::vector<T>> tensors;

  [[nodiscard]] std::size_t scalar_count() const;
  void zero();
  [[nodiscard]] bool all_finite() const;
  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct ConvLayer {
  ConvShape shape;
  int weight = -1;
  int bias = -1;
};

struct NormLayer {
  int gamma = -1;
  int beta = -1;
};

/// conv -> instance norm -> leaky ReLU, twice.
struct Block {
  ConvLayer conv1;
  NormLayer norm1;
  ConvLayer conv2;
  NormLayer norm2;
};

/// Layer table and parameter registry derived from a ModelConfig.
///
/// Encoder (shared by every modality): stage 0 is a block at full
/// resolution; stage s >= 1 is a 2x2(x2) stride-2 convolution followed by a
/// block, doubling channels. The last stage is the bottleneck, the others are
/// skips. Decoder: the N bottleneck features are concatenated in modality
/// order; each upward stage is nearest-neighbour upsampling, a 3x3(x3)
/// convolution, concatenation with the N skip features of that stage, and a
/// block. A pointwise head emits K logits.
class Architecture {
 public:
  explicit Architecture(ModelConfig config);

  [[nodiscard]] const ModelConfig& config() const { return config_; }
  [[nodiscard]] const std::vector<ParamSpec>& registry() const { return registry_; }
  [[nodiscard]] int find(const std::string& name) const;

  [[nodiscard]] const Block& encoder_block(int stage) const { return enc_blocks_[stage]; }
  [[nodiscard]] const ConvLayer& down(int stage) const { return downs_[stage - 1]; }
  [[nodiscard]] const ConvLayer& up(int stage) const { return ups_[stage]; }
  [[nodiscard]] const Block& decoder_block(int stage) const { return dec_blocks_[stage]; }
  [[nodiscard]] const ConvLayer& head() const { return head_; }

  /// Fan-in-scaled uniform weights U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero
  /// biases, unit norm scales, zero norm shifts. Deterministic in config.seed.
  template <class T>
  [[nodiscard]] ModelParams<T> init_params() const;

  template <class T>
  [[nodiscard]] ModelParams<T> zeros() const;

 private:
  int add(const std::string& name, std::vector<int> shape);
  ConvLayer add_conv(const std::string& name, ConvShape shape);
  NormLayer add_norm(const std::string& name, int channels);
  Block add_block(const std::string& name, int in_ch, int out_ch);

  ModelConfig config_;
  std::vector<ParamSpec> registry_;
  std::vector<Block> enc_blocks_;
  std::vector<ConvLayer> downs_;
  std::vector<ConvLayer> ups_;
  std::vector<Block> dec_blocks_;
  ConvLayer head_;
};

template <class T>
struct BlockTrace {
  Tensor<T> input;
  Tensor<T> norm1_hat, pre1, act1;
  std::vector<T> inv1;
  Tensor<T> norm2_hat, pre2;
  std::vector<T> inv2;
};

template <class T>
struct EncoderTrace {
  std::vector<BlockTrace<T>> blocks;  // [stage]
  std::vector<Tensor<T>> outputs;     // [stage]; last is the bottleneck
};

template <class T>
struct DecoderTrace {
  Tensor<T> bottleneck_cat;
  std::vector<Tensor<T>> upsampled;  // [stage], input of up(stage)
  std::vector<BlockTrace<T>> blocks;  // [stage]
  Tensor<T> head_input;
};

/// Everything a training step needs to backpropagate one sample.
template <class T>
struct ForwardPass {
  AvailabilityMask mask;
  std::vector<std::optional<EncoderTrace<T>>> encoders;  // [modality]
  FeatureBundle<T> features;                             // after generate_missing
  DecoderTrace<T> decoder;
  Tensor<T> logits;
};

/// Runs the shared encoder on every available modality.
template <class T>
FeatureBundle<T> encode(const Architecture& arch, const ModelParams<T>& params,
                        std::span<const Tensor<T>> modalities, const AvailabilityMask& mask);

/// Decodes a complete bundle into K logits.
template <class T>
Tensor<T> decode_logits(const Architecture& arch, const ModelParams<T>& params,
                        const FeatureBundle<T>& features);

/// Decodes a complete bundle into K sigmoid probabilities.
template <class T>
Tensor<T> decode(const Architecture& arch, const ModelParams<T>& params,
                 const FeatureBundle<T>& features);

/// encode -> generate_missing -> decode.
template <class T>
Tensor<T> predict(const Architecture& arch, const ModelParams<T>& params,
                  std::span<const Tensor<T>> modalities, const AvailabilityMask& mask);

template <class T>
ForwardPass<T> forward_train(const Architecture& arch, const ModelParams<T>& params,
                             std::span<const Tensor<T>> modalities, const AvailabilityMask& mask);

/// Accumulates parameter gradients into `grads`. `grad_logits` is dL/dlogits;
/// `grad_bottleneck` adds extra gradient on available bottleneck features
/// (the distillation term) and may hold empty slots.
template <class T>
void backward_train(const Architecture& arch, const ModelParams<T>& params,
                    const ForwardPass<T>& pass, const Tensor<T>& grad_logits,
                    std::span<const std::optional<Tensor<T>>> grad_bottleneck,
                    ModelParams<T>& grads);

template <class T>
Tensor<T> sigmoid(const Tensor<T>& logits);

}  // namespace lckd
