#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qunet/nn.hpp"
#include "qunet/qufex.hpp"
#include "qunet/rng.hpp"
#include "qunet/tensor.hpp"

namespace qunet::models {

enum class Variant { UNET, QUNET_8_1, QUNET_4_2 };
enum class Scale { TINY, SMALL, MEDIUM };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::UNET: return "unet";
    case Variant::QUNET_8_1: return "qunet-8-1";
    case Variant::QUNET_4_2: return "qunet-4-2";
  }
  return "?";
}

inline const char* scale_name(Scale s) {
  switch (s) {
    case Scale::TINY: return "tiny";
    case Scale::SMALL: return "small";
    case Scale::MEDIUM: return "medium";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "unet") return Variant::UNET;
  if (s == "qunet-8-1") return Variant::QUNET_8_1;
  if (s == "qunet-4-2") return Variant::QUNET_4_2;
  throw std::invalid_argument("unknown variant '" + s +
                              "' (expected unet, qunet-8-1 or qunet-4-2)");
}

inline Scale parse_scale(const std::string& s) {
  if (s == "tiny") return Scale::TINY;
  if (s == "small") return Scale::SMALL;
  if (s == "medium") return Scale::MEDIUM;
  throw std::invalid_argument("unknown scale '" + s + "' (expected tiny, small or medium)");
}

struct ModelConfig {
  Variant variant = Variant::UNET;
  Scale scale = Scale::TINY;
  int input_size = 64;
  int input_channels = 3;
  std::vector<int> encoder_filters;  // filled from scale when empty
  int bottleneck_filters = 0;        // filled from scale when 0

  // Sub-options the architecture leaves open; defaults are the combination
  // closest to the reference parameter counts (see the params subcommand).
  int bottleneck_convs = 2;
  bool tconv_bias = true;
  bool tconv_preserve_channels = true;  // false: tconv output = stage filters

  bool identity_bottleneck = false;  // ablation: bottleneck becomes a no-op
};

inline void apply_scale_defaults(ModelConfig& c) {
  if (c.encoder_filters.empty()) {
    switch (c.scale) {
      case Scale::TINY: c.encoder_filters = {4, 4, 8, 8, 8}; break;
      case Scale::SMALL: c.encoder_filters = {4, 8, 8, 8, 16}; break;
      case Scale::MEDIUM: c.encoder_filters = {8, 8, 8, 16, 16}; break;
    }
  }
  if (c.bottleneck_filters == 0) {
    switch (c.scale) {
      case Scale::TINY: c.bottleneck_filters = 4; break;
      case Scale::SMALL: c.bottleneck_filters = 8; break;
      case Scale::MEDIUM: c.bottleneck_filters = 16; break;
    }
  }
}

// ---------------------------------------------------------------------------
// Layer wrappers: thin state holders around the nn kernels, each caching what
// its backward pass needs. backward() accumulates parameter gradients and
// returns the input gradient.
// ---------------------------------------------------------------------------

struct ConvLayer {
  Tensor kernel;  // (out, in, k, k)
  Tensor bias;    // (out) or empty
  int padding = 1;
  bool relu = false;

  Tensor in_cache, pre_cache;

  Tensor forward(const Tensor& x) {
    in_cache = x;
    Tensor y = nn::conv2d(x, kernel, bias.empty() ? nullptr : &bias, padding);
    if (!relu) return y;
    pre_cache = y;
    return nn::relu(y);
  }

  Tensor backward(const Tensor& gy) {
    Tensor g = relu ? nn::relu_backward(pre_cache, gy) : gy;
    Tensor gx(in_cache.shape);
    Tensor gk(kernel.shape);
    Tensor gb = bias.empty() ? Tensor() : Tensor(bias.shape);
    nn::conv2d_backward(in_cache, kernel, padding, g, gx, gk, bias.empty() ? nullptr : &gb);
    for (std::size_t i = 0; i < gk.data.size(); ++i) kernel.grad[i] += gk.data[i];
    for (std::size_t i = 0; i < gb.data.size(); ++i) bias.grad[i] += gb.data[i];
    return gx;
  }
};

struct PoolLayer {
  std::vector<int> argmax;
  std::vector<int> in_shape;

  Tensor forward(const Tensor& x) {
    in_shape = x.shape;
    return nn::maxpool2(x, &argmax);
  }
  Tensor backward(const Tensor& gy) { return nn::maxpool2_backward(argmax, gy, in_shape); }
};

struct TConvLayer {
  Tensor kernel;  // (in, out, 2, 2)
  Tensor bias;    // (out) or empty
  Tensor in_cache;

  Tensor forward(const Tensor& x) {
    in_cache = x;
    return nn::transposed_conv2(x, kernel, bias.empty() ? nullptr : &bias);
  }
  Tensor backward(const Tensor& gy) {
    Tensor gx(in_cache.shape);
    Tensor gk(kernel.shape);
    Tensor gb = bias.empty() ? Tensor() : Tensor(bias.shape);
    nn::transposed_conv2_backward(in_cache, kernel, gy, gx, gk, bias.empty() ? nullptr : &gb);
    for (std::size_t i = 0; i < gk.data.size(); ++i) kernel.grad[i] += gk.data[i];
    for (std::size_t i = 0; i < gb.data.size(); ++i) bias.grad[i] += gb.data[i];
    return gx;
  }
};

struct EncoderStage {
  ConvLayer conv1, conv2;
  bool pooled = false;
  PoolLayer pool;
  Tensor skip;       // stage output before pooling (forward)
  Tensor skip_grad;  // gradient arriving from the decoder (backward)
};

struct DecoderStage {
  bool upsampled = false;
  TConvLayer up;
  int up_channels = 0;  // channels entering the concat from below
  ConvLayer conv1, conv2;
};

struct ParamRef {
  std::string name;
  Tensor* tensor;
  bool quantum;
};

// ---------------------------------------------------------------------------
// The assembled network. Encoder and decoder are mirror symmetric: decoder
// stage i consumes the skip tensor of encoder stage 4-i at the same
// resolution, and upsamples exactly where the mirrored encoder stage pooled
// (pooling is skipped once feature maps reach 1x1).
// ---------------------------------------------------------------------------

class Model {
 public:
  ModelConfig config;
  std::vector<EncoderStage> encoder;
  std::vector<ConvLayer> bottleneck_convs;            // UNET
  std::unique_ptr<qufex::QuFeXModule> qufex_module;   // QUNET_*
  std::vector<DecoderStage> decoder;
  ConvLayer head;

  Tensor forward(const Tensor& x) {
    require_shape(x.dims() == 4 && x.dim(1) == config.input_channels &&
                      x.dim(2) == config.input_size && x.dim(3) == config.input_size,
                  "model forward: input must be (B," + std::to_string(config.input_channels) +
                      "," + std::to_string(config.input_size) + "," +
                      std::to_string(config.input_size) + ")");
    Tensor cur = x;
    for (EncoderStage& st : encoder) {
      cur = st.conv2.forward(st.conv1.forward(cur));
      st.skip = cur;
      if (st.pooled) cur = st.pool.forward(cur);
    }

    if (qufex_module) {
      cur = qufex_module->forward(cur);
    } else {
      for (ConvLayer& c : bottleneck_convs) cur = c.forward(cur);
    }

    for (std::size_t i = 0; i < decoder.size(); ++i) {
      DecoderStage& st = decoder[i];
      Tensor u = st.upsampled ? st.up.forward(cur) : cur;
      const Tensor& skip = encoder[encoder.size() - 1 - i].skip;
      require_shape(u.dim(2) == skip.dim(2) && u.dim(3) == skip.dim(3),
                    "model forward: skip resolution mismatch at decoder stage " +
                        std::to_string(i + 1));
      cur = st.conv2.forward(st.conv1.forward(nn::concat_channels(u, skip)));
    }

    out_cache_ = nn::sigmoid(head.forward(cur));
    return out_cache_;
  }

  // gy is the gradient with respect to the sigmoid output. Returns the
  // gradient with respect to the network input.
  Tensor backward(const Tensor& gy) {
    Tensor g = nn::sigmoid_backward(out_cache_, gy);
    g = head.backward(g);

    for (std::size_t ri = decoder.size(); ri-- > 0;) {
      DecoderStage& st = decoder[ri];
      g = st.conv1.backward(st.conv2.backward(g));
      Tensor gu, gskip;
      nn::split_channels(g, st.up_channels, gu, gskip);
      encoder[encoder.size() - 1 - ri].skip_grad = std::move(gskip);
      g = st.upsampled ? st.up.backward(gu) : gu;
    }

    if (qufex_module) {
      g = qufex_module->backward(g);
    } else {
      for (std::size_t ri = bottleneck_convs.size(); ri-- > 0;)
        g = bottleneck_convs[ri].backward(g);
    }

    for (std::size_t ri = encoder.size(); ri-- > 0;) {
      EncoderStage& st = encoder[ri];
      Tensor gs = st.pooled ? st.pool.backward(g) : g;
      for (std::size_t i = 0; i < gs.data.size(); ++i) gs.data[i] += st.skip_grad.data[i];
      g = st.conv1.backward(st.conv2.backward(gs));
    }
    return g;
  }

  std::vector<ParamRef> params() {
    std::vector<ParamRef> out;
    auto add = [&out](const std::string& name, Tensor& t, bool quantum = false) {
      if (!t.empty()) out.push_back(ParamRef{name, &t, quantum});
    };
    for (std::size_t i = 0; i < encoder.size(); ++i) {
      const std::string p = "enc" + std::to_string(i + 1);
      add(p + ".conv1.kernel", encoder[i].conv1.kernel);
      add(p + ".conv1.bias", encoder[i].conv1.bias);
      add(p + ".conv2.kernel", encoder[i].conv2.kernel);
      add(p + ".conv2.bias", encoder[i].conv2.bias);
    }
    for (std::size_t i = 0; i < bottleneck_convs.size(); ++i) {
      const std::string p = "bottleneck.conv" + std::to_string(i + 1);
      add(p + ".kernel", bottleneck_convs[i].kernel);
      add(p + ".bias", bottleneck_convs[i].bias);
    }
    if (qufex_module) {
      for (std::size_t i = 0; i < qufex_module->layers.size(); ++i)
        add("qufex.filter" + std::to_string(i + 1) + ".theta",
            qufex_module->layers[i].theta, true);
      add("qufex.merge.kernel", qufex_module->merge_kernel);
    }
    for (std::size_t i = 0; i < decoder.size(); ++i) {
      const std::string p = "dec" + std::to_string(i + 1);
      if (decoder[i].upsampled) {
        add(p + ".up.kernel", decoder[i].up.kernel);
        add(p + ".up.bias", decoder[i].up.bias);
      }
      add(p + ".conv1.kernel", decoder[i].conv1.kernel);
      add(p + ".conv1.bias", decoder[i].conv1.bias);
      add(p + ".conv2.kernel", decoder[i].conv2.kernel);
      add(p + ".conv2.bias", decoder[i].conv2.bias);
    }
    add("head.kernel", head.kernel);
    add("head.bias", head.bias);
    return out;
  }

  void zero_grad() {
    for (ParamRef& p : params()) p.tensor->zero_grad();
  }

  long long circuit_applications() const {
    return qufex_module ? qufex_module->forward_applications() : 0;
  }
  void reset_circuit_counter() {
    if (qufex_module) qufex_module->reset_counters();
  }

 private:
  Tensor out_cache_;
};

// (classical, quantum) trainable parameter counts.
inline std::pair<long long, long long> count_params(Model& m) {
  long long classical = 0, quantum = 0;
  for (const ParamRef& p : m.params())
    (p.quantum ? quantum : classical) += p.tensor->size();
  return {classical, quantum};
}

namespace detail {

inline ConvLayer make_conv(int in, int out, int k, int padding, bool relu, bool bias,
                           Rng& rng) {
  ConvLayer c;
  c.kernel = Tensor({out, in, k, k});
  nn::glorot_uniform(c.kernel, in * k * k, out * k * k, rng);
  c.kernel.ensure_grad();
  if (bias) {
    c.bias = Tensor({out});
    c.bias.ensure_grad();
  }
  c.padding = padding;
  c.relu = relu;
  return c;
}

inline TConvLayer make_tconv(int in, int out, bool bias, Rng& rng) {
  TConvLayer t;
  t.kernel = Tensor({in, out, 2, 2});
  nn::glorot_uniform(t.kernel, in * 4, out * 4, rng);
  t.kernel.ensure_grad();
  if (bias) {
    t.bias = Tensor({out});
    t.bias.ensure_grad();
  }
  return t;
}

}  // namespace detail

inline Model build_model(ModelConfig config, std::uint64_t seed) {
  apply_scale_defaults(config);
  if (config.variant == Variant::QUNET_8_1 && config.scale == Scale::MEDIUM)
    throw std::invalid_argument("qunet-8-1 is not supported at medium scale");
  if (static_cast<int>(config.encoder_filters.size()) != 5)
    throw std::invalid_argument("build_model: exactly 5 encoder filter counts required");
  if (config.input_size < 16 || (config.input_size & (config.input_size - 1)) != 0)
    throw std::invalid_argument("build_model: input_size must be a power of two >= 16");

  Model m;
  m.config = config;
  Rng rng(seed);

  int ch = config.input_channels;
  int size = config.input_size;
  for (int f : config.encoder_filters) {
    EncoderStage st;
    st.conv1 = detail::make_conv(ch, f, 3, 1, true, true, rng);
    st.conv2 = detail::make_conv(f, f, 3, 1, true, true, rng);
    st.pooled = size > 1;
    m.encoder.push_back(std::move(st));
    ch = f;
    if (m.encoder.back().pooled) size /= 2;
  }
  const int enc_out = ch;

  if (config.identity_bottleneck) {
    // ablation hook: feature maps pass straight through
  } else if (config.variant == Variant::UNET) {
    int in = enc_out;
    for (int i = 0; i < config.bottleneck_convs; ++i) {
      m.bottleneck_convs.push_back(
          detail::make_conv(in, config.bottleneck_filters, 3, 1, true, true, rng));
      in = config.bottleneck_filters;
    }
    ch = in;
  } else {
    if (config.variant == Variant::QUNET_8_1) {
      if ((2 * size * size) % 8 != 0)
        throw std::invalid_argument(
            "qunet-8-1 needs bottleneck maps with H*W divisible by 4; input_size " +
            std::to_string(config.input_size) + " gives " + std::to_string(size) + "x" +
            std::to_string(size));
      m.qufex_module = std::make_unique<qufex::QuFeXModule>(
          qufex::QuFeXModule::single_filter());
    } else {
      m.qufex_module = std::make_unique<qufex::QuFeXModule>(
          qufex::QuFeXModule::dual_filter(enc_out));
      nn::glorot_uniform(m.qufex_module->merge_kernel, enc_out * 9, enc_out * 9, rng);
    }
    for (qufex::QuFeXLayer& l : m.qufex_module->layers)
      for (double& v : l.theta.data) v = rng.uniform(-0.1 * qsim::kPi, 0.1 * qsim::kPi);
    ch = enc_out;
  }

  const std::vector<int>& ef = config.encoder_filters;
  for (int i = 0; i < 5; ++i) {
    const EncoderStage& mirror = m.encoder[static_cast<std::size_t>(4 - i)];
    const int skip_ch = ef[static_cast<std::size_t>(4 - i)];
    const int f = ef[static_cast<std::size_t>(4 - i)];
    DecoderStage st;
    st.upsampled = mirror.pooled;
    if (st.upsampled) {
      const int up_out = config.tconv_preserve_channels ? ch : f;
      st.up = detail::make_tconv(ch, up_out, config.tconv_bias, rng);
      st.up_channels = up_out;
    } else {
      st.up_channels = ch;
    }
    st.conv1 = detail::make_conv(st.up_channels + skip_ch, f, 3, 1, true, true, rng);
    st.conv2 = detail::make_conv(f, f, 3, 1, true, true, rng);
    m.decoder.push_back(std::move(st));
    ch = f;
  }

  m.head = detail::make_conv(ch, 1, 1, 0, false, true, rng);
  return m;
}

}  // namespace qunet::models
