#include "lckd/backbone.hpp"

#include <cmath>
#include <random>

#include "lckd/errors.hpp"

namespace lckd {

namespace k = parallel;

void ModelConfig::validate() const {
  require(spatial_dims == 2 || spatial_dims == 3, "spatial_dims must be 2 or 3");
  require(n_modalities >= 1, "n_modalities must be >= 1");
  require(n_tasks >= 1, "n_tasks must be >= 1");
  require(base_channels >= 1, "base_channels must be >= 1");
  require(depth >= 1, "depth must be >= 1");
}

void ModelConfig::check_extent(Extent e) const {
  const int f = 1 << depth;
  const bool ok = e.height % f == 0 && e.width % f == 0 && (!volumetric() || e.depth % f == 0) &&
                  (volumetric() || e.depth == 1);
  require(ok, "input extent " + to_string(e) + " is not divisible by 2^depth = " + std::to_string(f));
}

template <class T>
std::size_t ModelParams<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

template <class T>
void ModelParams<T>::zero() {
  for (auto& t : tensors) std::fill(t.begin(), t.end(), T(0));
}

template <class T>
bool ModelParams<T>::all_finite() const {
  for (const auto& t : tensors)
    for (T v : t)
      if (!std::isfinite(v)) return false;
  return true;
}

template struct ModelParams<float>;
template struct ModelParams<double>;

Architecture::Architecture(ModelConfig config) : config_(config) {
  config_.validate();
  const bool vol = config_.volumetric();
  const int n = config_.n_modalities;
  enc_blocks_.push_back(add_block("enc.s0", 1, config_.channels_at(0)));
  for (int s = 1; s <= config_.depth; ++s) {
    downs_.push_back(add_conv("enc.down" + std::to_string(s),
                              {config_.channels_at(s - 1), config_.channels_at(s), 2, 2, 0, vol}));
    enc_blocks_.push_back(
        add_block("enc.s" + std::to_string(s), config_.channels_at(s), config_.channels_at(s)));
  }
  ups_.resize(config_.depth);
  dec_blocks_.resize(config_.depth);
  for (int s = config_.depth - 1; s >= 0; --s) {
    const int in_ch = s == config_.depth - 1 ? n * config_.channels_at(config_.depth)
                                             : config_.channels_at(s + 1);
    const int c = config_.channels_at(s);
    ups_[s] = add_conv("dec.up" + std::to_string(s), {in_ch, c, 3, 1, 1, vol});
    dec_blocks_[s] = add_block("dec.s" + std::to_string(s), c + n * c, c);
  }
  head_ = add_conv("head", {config_.channels_at(0), config_.n_tasks, 1, 1, 0, vol});
}

int Architecture::add(const std::string& name, std::vector<int> shape) {
  std::size_t count = 1;
  for (int d : shape) count *= static_cast<std::size_t>(d);
  registry_.push_back({name, std::move(shape), count});
  return static_cast<int>(registry_.size()) - 1;
}

ConvLayer Architecture::add_conv(const std::string& name, ConvShape shape) {
  std::vector<int> wshape{shape.out_channels, shape.in_channels};
  if (shape.volumetric) wshape.push_back(shape.kernel);
  wshape.push_back(shape.kernel);
  wshape.push_back(shape.kernel);
  ConvLayer layer{shape, add(name + ".weight", wshape), add(name + ".bias", {shape.out_channels})};
  return layer;
}

NormLayer Architecture::add_norm(const std::string& name, int channels) {
  return {add(name + ".gamma", {channels}), add(name + ".beta", {channels})};
}

Block Architecture::add_block(const std::string& name, int in_ch, int out_ch) {
  const bool vol = config_.volumetric();
  Block b;
  b.conv1 = add_conv(name + ".conv1", {in_ch, out_ch, 3, 1, 1, vol});
  b.norm1 = add_norm(name + ".norm1", out_ch);
  b.conv2 = add_conv(name + ".conv2", {out_ch, out_ch, 3, 1, 1, vol});
  b.norm2 = add_norm(name + ".norm2", out_ch);
  return b;
}

int Architecture::find(const std::string& name) const {
  for (std::size_t i = 0; i < registry_.size(); ++i)
    if (registry_[i].name == name) return static_cast<int>(i);
  return -1;
}

template <class T>
ModelParams<T> Architecture::zeros() const {
  ModelParams<T> p;
  for (const auto& spec : registry_) p.tensors.emplace_back(spec.count, T(0));
  return p;
}

template <class T>
ModelParams<T> Architecture::init_params() const {
  ModelParams<T> p = zeros<T>();
  std::mt19937_64 rng(config_.seed);
  for (std::size_t i = 0; i < registry_.size(); ++i) {
    const auto& spec = registry_[i];
    auto ends_with = [&](const std::string& suffix) {
      return spec.name.size() >= suffix.size() &&
             spec.name.compare(spec.name.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (ends_with(".weight")) {
      const double fan_in = static_cast<double>(spec.count) / spec.shape.front();
      std::uniform_real_distribution<double> u(-std::sqrt(6.0 / fan_in), std::sqrt(6.0 / fan_in));
      for (auto& v : p.tensors[i]) v = static_cast<T>(u(rng));
    } else if (ends_with(".gamma")) {
      std::fill(p.tensors[i].begin(), p.tensors[i].end(), T(1));
    }
  }
  return p;
}

template ModelParams<float> Architecture::init_params<float>() const;
template ModelParams<double> Architecture::init_params<double>() const;
template ModelParams<float> Architecture::zeros<float>() const;
template ModelParams<double> Architecture::zeros<double>() const;

namespace {

template <class T>
std::span<const T> cview(const ModelParams<T>& p, int idx) {
  return {p.tensors[idx].data(), p.tensors[idx].size()};
}

template <class T>
std::span<T> view(ModelParams<T>& p, int idx) {
  return {p.tensors[idx].data(), p.tensors[idx].size()};
}

template <class T>
Tensor<T> conv(const ConvLayer& l, const ModelParams<T>& p, const Tensor<T>& in) {
  Tensor<T> out;
  k::conv_forward(l.shape, in, cview(p, l.weight), cview(p, l.bias), out);
  return out;
}

// Returns the block output; fills `trace` when given.
template <class T>
Tensor<T> block_forward(const Block& b, const ModelParams<T>& p, Tensor<T> input,
                        BlockTrace<T>* trace) {
  BlockTrace<T> local;
  BlockTrace<T>& t = trace ? *trace : local;
  Tensor<T> c1 = conv(b.conv1, p, input);
  k::instance_norm_forward(c1, cview(p, b.norm1.gamma), cview(p, b.norm1.beta), t.pre1, t.norm1_hat,
                           t.inv1);
  k::leaky_relu_forward(t.pre1, t.act1);
  Tensor<T> c2 = conv(b.conv2, p, t.act1);
  k::instance_norm_forward(c2, cview(p, b.norm2.gamma), cview(p, b.norm2.beta), t.pre2, t.norm2_hat,
                           t.inv2);
  Tensor<T> out;
  k::leaky_relu_forward(t.pre2, out);
  t.input = std::move(input);
  return out;
}

// Returns dL/dinput when `need_input_grad`.
template <class T>
Tensor<T> block_backward(const Block& b, const ModelParams<T>& p, const BlockTrace<T>& t,
                         const Tensor<T>& grad_out, ModelParams<T>& g, bool need_input_grad) {
  Tensor<T> g_pre2, g_c2, g_act1, g_pre1, g_c1, g_in;
  k::leaky_relu_backward(t.pre2, grad_out, g_pre2);
  k::instance_norm_backward(g_pre2, t.norm2_hat, std::span<const T>(t.inv2), cview(p, b.norm2.gamma), g_c2,
                            view(g, b.norm2.gamma), view(g, b.norm2.beta));
  k::conv_backward(b.conv2.shape, t.act1, cview(p, b.conv2.weight), g_c2, &g_act1,
                   view(g, b.conv2.weight), view(g, b.conv2.bias));
  k::leaky_relu_backward(t.pre1, g_act1, g_pre1);
  k::instance_norm_backward(g_pre1, t.norm1_hat, std::span<const T>(t.inv1), cview(p, b.norm1.gamma), g_c1,
                            view(g, b.norm1.gamma), view(g, b.norm1.beta));
  k::conv_backward(b.conv1.shape, t.input, cview(p, b.conv1.weight), g_c1,
                   need_input_grad ? &g_in : nullptr, view(g, b.conv1.weight), view(g, b.conv1.bias));
  return g_in;
}

template <class T>
void check_inputs(const Architecture& arch, std::span<const Tensor<T>> modalities,
                  const AvailabilityMask& mask) {
  const auto& cfg = arch.config();
  require(static_cast<int>(modalities.size()) == cfg.n_modalities,
          "expected " + std::to_string(cfg.n_modalities) + " modality fields, got " +
              std::to_string(modalities.size()));
  require(mask.modalities() == cfg.n_modalities, "mask modality count differs from model");
  require(mask.available_count() >= 1, "every modality is missing");
  for (int i : mask.available_indices()) {
    require(modalities[i].channels == 1, "modality fields must be single-channel");
    require(modalities[i].extent == modalities[mask.available_indices().front()].extent,
            "modality fields differ in shape");
    cfg.check_extent(modalities[i].extent);
  }
}

template <class T>
std::vector<Tensor<T>> encode_one(const Architecture& arch, const ModelParams<T>& p,
                                  const Tensor<T>& x, EncoderTrace<T>* trace) {
  const int depth = arch.config().depth;
  std::vector<Tensor<T>> outputs;
  if (trace) trace->blocks.resize(depth + 1);
  for (int s = 0; s <= depth; ++s) {
    Tensor<T> in = s == 0 ? x : conv(arch.down(s), p, outputs.back());
    outputs.push_back(block_forward(arch.encoder_block(s), p, std::move(in),
                                    trace ? &trace->blocks[s] : nullptr));
  }
  return outputs;
}

template <class T>
FeatureBundle<T> empty_bundle(const ModelConfig& cfg) {
  FeatureBundle<T> b;
  b.bottleneck.resize(cfg.n_modalities);
  b.skips.assign(cfg.depth, std::vector<std::optional<Tensor<T>>>(cfg.n_modalities));
  return b;
}

template <class T>
Tensor<T> decode_impl(const Architecture& arch, const ModelParams<T>& p,
                      const FeatureBundle<T>& f, DecoderTrace<T>* trace) {
  const auto& cfg = arch.config();
  require(f.modalities() == cfg.n_modalities && static_cast<int>(f.skips.size()) == cfg.depth,
          "feature bundle does not match model config");
  require(f.complete(), "feature bundle has an unfilled slot; run generate_missing first");
  std::vector<const Tensor<T>*> parts;
  for (const auto& slot : f.bottleneck) parts.push_back(&*slot);
  Tensor<T> h = concat_channels<T>(parts);
  if (trace) {
    trace->bottleneck_cat = h;
    trace->upsampled.resize(cfg.depth);
    trace->blocks.resize(cfg.depth);
  }
  for (int s = cfg.depth - 1; s >= 0; --s) {
    Tensor<T> up;
    k::upsample_forward(h, cfg.volumetric(), up);
    Tensor<T> c = conv(arch.up(s), p, up);
    if (trace) trace->upsampled[s] = std::move(up);
    parts.assign({&c});
    for (const auto& slot : f.skips[s]) parts.push_back(&*slot);
    h = block_forward(arch.decoder_block(s), p, concat_channels<T>(parts),
                      trace ? &trace->blocks[s] : nullptr);
  }
  Tensor<T> logits = conv(arch.head(), p, h);
  if (trace) trace->head_input = std::move(h);
  return logits;
}

}  // namespace

template <class T>
FeatureBundle<T> encode(const Architecture& arch, const ModelParams<T>& params,
                        std::span<const Tensor<T>> modalities, const AvailabilityMask& mask) {
  check_inputs(arch, modalities, mask);
  const auto& cfg = arch.config();
  FeatureBundle<T> bundle = empty_bundle<T>(cfg);
  for (int i : mask.available_indices()) {
    auto outputs = encode_one(arch, params, modalities[i], static_cast<EncoderTrace<T>*>(nullptr));
    for (int s = 0; s < cfg.depth; ++s) bundle.skips[s][i] = std::move(outputs[s]);
    bundle.bottleneck[i] = std::move(outputs[cfg.depth]);
  }
  return bundle;
}

template <class T>
Tensor<T> decode_logits(const Architecture& arch, const ModelParams<T>& params,
                        const FeatureBundle<T>& features) {
  return decode_impl(arch, params, features, static_cast<DecoderTrace<T>*>(nullptr));
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& logits) {
  Tensor<T> out(logits.channels, logits.extent);
  for (std::size_t i = 0; i < logits.size(); ++i)
    out.data[i] = static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(logits.data[i]))));
  return out;
}

template <class T>
Tensor<T> decode(const Architecture& arch, const ModelParams<T>& params,
                 const FeatureBundle<T>& features) {
  return sigmoid(decode_logits(arch, params, features));
}

template <class T>
Tensor<T> predict(const Architecture& arch, const ModelParams<T>& params,
                  std::span<const Tensor<T>> modalities, const AvailabilityMask& mask) {
  return decode(arch, params, generate_missing(encode(arch, params, modalities, mask), mask));
}

template <class T>
ForwardPass<T> forward_train(const Architecture& arch, const ModelParams<T>& params,
                             std::span<const Tensor<T>> modalities, const AvailabilityMask& mask) {
  check_inputs(arch, modalities, mask);
  const auto& cfg = arch.config();
  ForwardPass<T> pass;
  pass.mask = mask;
  pass.encoders.resize(cfg.n_modalities);
  FeatureBundle<T> bundle = empty_bundle<T>(cfg);
  for (int i : mask.available_indices()) {
    EncoderTrace<T> trace;
    auto outputs = encode_one(arch, params, modalities[i], &trace);
    for (int s = 0; s < cfg.depth; ++s) bundle.skips[s][i] = outputs[s];
    bundle.bottleneck[i] = outputs[cfg.depth];
    trace.outputs = std::move(outputs);
    pass.encoders[i] = std::move(trace);
  }
  pass.features = generate_missing(std::move(bundle), mask);
  pass.logits = decode_impl(arch, params, pass.features, &pass.decoder);
  return pass;
}

template <class T>
void backward_train(const Architecture& arch, const ModelParams<T>& params,
                    const ForwardPass<T>& pass, const Tensor<T>& grad_logits,
                    std::span<const std::optional<Tensor<T>>> grad_bottleneck,
                    ModelParams<T>& grads) {
  const auto& cfg = arch.config();
  const int n = cfg.n_modalities;
  require(grad_logits.same_shape(pass.logits), "logit gradient shape mismatch");

  // Decoder.
  Tensor<T> g_h;
  k::conv_backward(arch.head().shape, pass.decoder.head_input, cview(params, arch.head().weight),
                   grad_logits, &g_h, view(grads, arch.head().weight), view(grads, arch.head().bias));
  FeatureBundle<T> fg = empty_bundle<T>(cfg);
  for (int s = 0; s < cfg.depth; ++s) {
    Tensor<T> g_cat = block_backward(arch.decoder_block(s), params, pass.decoder.blocks[s], g_h, grads, true);
    const int c = cfg.channels_at(s);
    Tensor<T> g_upconv(c, g_cat.extent);
    std::vector<Tensor<T>> g_skip(n, Tensor<T>(c, g_cat.extent));
    std::vector<Tensor<T>*> parts{&g_upconv};
    for (auto& t : g_skip) parts.push_back(&t);
    split_channels<T>(g_cat, parts);
    for (int i = 0; i < n; ++i) fg.skips[s][i] = std::move(g_skip[i]);
    Tensor<T> g_up;
    const ConvLayer& up = arch.up(s);
    k::conv_backward(up.shape, pass.decoder.upsampled[s], cview(params, up.weight), g_upconv, &g_up,
                     view(grads, up.weight), view(grads, up.bias));
    k::upsample_backward(g_up, cfg.volumetric(), g_h);
  }
  {
    const int c = cfg.channels_at(cfg.depth);
    std::vector<Tensor<T>> g_b(n, Tensor<T>(c, g_h.extent));
    std::vector<Tensor<T>*> parts;
    for (auto& t : g_b) parts.push_back(&t);
    split_channels<T>(g_h, parts);
    for (int i = 0; i < n; ++i) fg.bottleneck[i] = std::move(g_b[i]);
  }

  // Mean-filled slots route their gradient back to the available features.
  generate_missing_backward(fg, pass.mask);
  for (int i = 0; i < static_cast<int>(grad_bottleneck.size()); ++i) {
    if (!grad_bottleneck[i]) continue;
    require(pass.mask.available(i), "distillation gradient on a missing modality");
    auto& dst = *fg.bottleneck[i];
    for (std::size_t e = 0; e < dst.size(); ++e) dst.data[e] += grad_bottleneck[i]->data[e];
  }

  // Shared encoder, once per available modality.
  for (int i : pass.mask.available_indices()) {
    const EncoderTrace<T>& trace = *pass.encoders[i];
    Tensor<T> g = *fg.bottleneck[i];
    for (int s = cfg.depth; s >= 0; --s) {
      Tensor<T> g_in = block_backward(arch.encoder_block(s), params, trace.blocks[s], g, grads, s > 0);
      if (s == 0) break;
      Tensor<T> g_prev;
      const ConvLayer& down = arch.down(s);
      k::conv_backward(down.shape, trace.outputs[s - 1], cview(params, down.weight), g_in, &g_prev,
                       view(grads, down.weight), view(grads, down.bias));
      const auto& skip_grad = *fg.skips[s - 1][i];
      for (std::size_t e = 0; e < g_prev.size(); ++e) g_prev.data[e] += skip_grad.data[e];
      g = std::move(g_prev);
    }
  }
}

#define LCKD_INSTANTIATE(T)                                                                         \
  template FeatureBundle<T> encode(const Architecture&, const ModelParams<T>&,                      \
                                   std::span<const Tensor<T>>, const AvailabilityMask&);            \
  template Tensor<T> decode_logits(const Architecture&, const ModelParams<T>&,                      \
                                   const FeatureBundle<T>&);                                        \
  template Tensor<T> decode(const Architecture&, const ModelParams<T>&, const FeatureBundle<T>&);   \
  template Tensor<T> predict(const Architecture&, const ModelParams<T>&,                            \
                             std::span<const Tensor<T>>, const AvailabilityMask&);                  \
  template ForwardPass<T> forward_train(const Architecture&, const ModelParams<T>&,                 \
                                        std::span<const Tensor<T>>, const AvailabilityMask&);       \
  template void backward_train(const Architecture&, const ModelParams<T>&, const ForwardPass<T>&,   \
                               const Tensor<T>&, std::span<const std::optional<Tensor<T>>>,         \
                               ModelParams<T>&);                                                    \
  template Tensor<T> sigmoid(const Tensor<T>&);

LCKD_INSTANTIATE(float)
LCKD_INSTANTIATE(double)

}  // namespace lckd
