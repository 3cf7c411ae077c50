#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "qunet/nn.hpp"
#include "qunet/qsim.hpp"
#include "qunet/tensor.hpp"

namespace qunet::qufex {

enum class EncodingBasis { Y, X };

// Slot ids: encoding slot q for qubit q, trainable slots n..n+3.
// Block A reads trainable slots (0,1) as RX/RZ angles, block B reads (2,3)
// as RX/RY angles. Every instance of a block reuses the same two slots, so a
// template carries exactly 4 trainable parameters however many qubits it has.
namespace detail {

inline void emit_block(std::vector<qsim::Gate>& gates, bool block_a, int a, int b,
                       int trainable_base) {
  using qsim::Gate;
  using qsim::GateKind;
  if (block_a) {
    gates.push_back(Gate{GateKind::RX, a, -1, trainable_base + 0});
    gates.push_back(Gate{GateKind::RZ, b, -1, trainable_base + 1});
  } else {
    gates.push_back(Gate{GateKind::RX, a, -1, trainable_base + 2});
    gates.push_back(Gate{GateKind::RY, b, -1, trainable_base + 3});
  }
  gates.push_back(Gate{GateKind::CNOT, a, b, -1});
}

// Brick pattern over an ordered chain of qubits: first the even pairs
// (c0,c1),(c2,c3),..., then the odd pairs (c1,c2),(c3,c4),..., non-wrapping.
inline void emit_brick(std::vector<qsim::Gate>& gates, const std::vector<int>& chain,
                       bool block_a, int trainable_base) {
  for (std::size_t i = 0; i + 1 < chain.size(); i += 2)
    emit_block(gates, block_a, chain[i], chain[i + 1], trainable_base);
  for (std::size_t i = 1; i + 1 < chain.size(); i += 2)
    emit_block(gates, block_a, chain[i], chain[i + 1], trainable_base);
}

}  // namespace detail

// Builds the translationally shared filter circuit:
//   1. angle encoding on every qubit (layer 1: RY; layer 2: H then RZ,
//      i.e. X-basis encoding without a closing H),
//   2. a brick of two-qubit blocks over the full chain,
//   3. CZ pooling from each odd qubit onto its lower even neighbour, with
//      the controls kept rather than discarded,
//   4. a second brick over the retained even sub-chain.
// Layer 1 places block A in stage 2 and block B in stage 4; layer 2
// interchanges them. Trainable slot count is always 4.
inline qsim::CircuitTemplate build_template(int n_qubits, int layer_index) {
  if (n_qubits != 4 && n_qubits != 8)
    throw std::invalid_argument("build_template: n_qubits must be 4 or 8, got " +
                                std::to_string(n_qubits));
  if (layer_index != 1 && layer_index != 2)
    throw std::invalid_argument("build_template: layer_index must be 1 or 2, got " +
                                std::to_string(layer_index));

  using qsim::Gate;
  using qsim::GateKind;
  qsim::CircuitTemplate t;
  t.n_qubits = n_qubits;
  const int tbase = n_qubits;

  for (int q = 0; q < n_qubits; ++q) {
    if (layer_index == 1) {
      t.gates.push_back(Gate{GateKind::RY, q, -1, q});
    } else {
      t.gates.push_back(Gate{GateKind::H, q, -1, -1});
      t.gates.push_back(Gate{GateKind::RZ, q, -1, q});
    }
  }

  std::vector<int> full_chain, even_chain;
  for (int q = 0; q < n_qubits; ++q) full_chain.push_back(q);
  for (int q = 0; q < n_qubits; q += 2) even_chain.push_back(q);

  const bool stage_a_is_block_a = (layer_index == 1);
  detail::emit_brick(t.gates, full_chain, stage_a_is_block_a, tbase);
  for (int q = 1; q < n_qubits; q += 2)
    t.gates.push_back(Gate{GateKind::CZ, q, q - 1, -1});
  detail::emit_brick(t.gates, even_chain, !stage_a_is_block_a, tbase);

  for (int j = 0; j < 4; ++j) t.trainable_slots.push_back(tbase + j);
  for (int q = 0; q < n_qubits; ++q) t.encoding_slots.push_back(q);
  qsim::validate_template(t);
  return t;
}

// One circuit application's worth of input values, plus the flat offsets
// (c*H*W + y*W + x) they were read from, so outputs can be scattered back.
struct FeatureGroup {
  std::vector<double> values;
  std::vector<int> offsets;
};

// Deterministic grouping: consecutive channel groups of group_size maps are
// flattened channel-major then row-major into a stream, and the stream is cut
// into consecutive windows of n_qubits values.
inline std::vector<FeatureGroup> group_maps(const Tensor& input, int n_qubits,
                                            int group_size) {
  require_shape(input.dims() == 3, "group_maps: input must be (C,H,W)");
  const int C = input.dim(0), H = input.dim(1), W = input.dim(2);
  if (group_size < 1 || C % group_size != 0)
    throw std::invalid_argument("group_maps: " + std::to_string(C) +
                                " channels not divisible by group size " +
                                std::to_string(group_size));
  if ((group_size * H * W) % n_qubits != 0)
    throw std::invalid_argument("group_maps: stream length " +
                                std::to_string(group_size * H * W) +
                                " not divisible by " + std::to_string(n_qubits) +
                                " qubits");

  std::vector<FeatureGroup> groups;
  for (int g = 0; g < C / group_size; ++g) {
    FeatureGroup cur;
    for (int c = g * group_size; c < (g + 1) * group_size; ++c)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          const int off = input.idx3(c, y, x);
          cur.values.push_back(input.data[static_cast<std::size_t>(off)]);
          cur.offsets.push_back(off);
          if (static_cast<int>(cur.values.size()) == n_qubits) {
            groups.push_back(cur);
            cur.values.clear();
            cur.offsets.clear();
          }
        }
  }
  return groups;
}

// One quantum filter: shared 4-parameter template plus its grouping policy.
struct QuFeXLayer {
  int n_qubits = 0;
  int layer_index = 0;
  int group_size = 0;
  EncodingBasis basis = EncodingBasis::Y;
  qsim::CircuitTemplate tmpl;
  Tensor theta;  // shape {4}

  static QuFeXLayer make(int n_qubits, int layer_index, int group_size) {
    QuFeXLayer l;
    l.n_qubits = n_qubits;
    l.layer_index = layer_index;
    l.group_size = group_size;
    l.basis = layer_index == 1 ? EncodingBasis::Y : EncodingBasis::X;
    l.tmpl = build_template(n_qubits, layer_index);
    l.theta = Tensor({4});
    l.theta.ensure_grad();
    return l;
  }
};

// The QuFeX bottleneck: one 8-qubit filter, or two 4-qubit filters whose
// outputs are summed and mixed by a bias-free 3x3 convolution. Inputs are
// angle-encoded as pi * value with no clamping; expectation outputs are used
// raw. The result always carries the residual bypass y = Q(x) + x.
class QuFeXModule {
 public:
  std::vector<QuFeXLayer> layers;
  Tensor merge_kernel;  // {C,C,3,3} when two layers, empty otherwise

  QuFeXModule() = default;

  // Config for the 8(1) bottleneck: a single layer grouping pairs of maps.
  static QuFeXModule single_filter() {
    QuFeXModule m;
    m.layers.push_back(QuFeXLayer::make(8, 1, 2));
    return m;
  }

  // Config for the 4(2) bottleneck: both filters stream the whole tensor.
  static QuFeXModule dual_filter(int channels) {
    QuFeXModule m;
    m.layers.push_back(QuFeXLayer::make(4, 1, channels));
    m.layers.push_back(QuFeXLayer::make(4, 2, channels));
    m.merge_kernel = Tensor({channels, channels, 3, 3});
    m.merge_kernel.ensure_grad();
    return m;
  }

  long long forward_applications() const { return forward_applications_; }
  void reset_counters() { forward_applications_ = 0; }

  // Quantum output Q(x) of the last forward, before the residual addition.
  const Tensor& last_quantum_output() const { return q_cache_; }

  // x: (B,C,H,W). Returns Q(x) + x with identical shape.
  Tensor forward(const Tensor& x) {
    require_shape(x.dims() == 4, "qufex forward: input must be (B,C,H,W)");
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const bool merged = layers.size() == 2;
    if (merged)
      require_shape(merge_kernel.dim(0) == C && merge_kernel.dim(1) == C,
                    "qufex forward: merge kernel built for different channel count");

    x_cache_ = x;
    groups_cache_.assign(static_cast<std::size_t>(B),
                         std::vector<std::vector<FeatureGroup>>(layers.size()));

    // Per-layer quantum maps, summed across layers.
    Tensor sum({B, C, H, W});
    for (int b = 0; b < B; ++b) {
      Tensor sample({C, H, W});
      std::copy(x.data.begin() + static_cast<std::size_t>(b) * sample.data.size(),
                x.data.begin() + static_cast<std::size_t>(b + 1) * sample.data.size(),
                sample.data.begin());
      for (std::size_t li = 0; li < layers.size(); ++li) {
        QuFeXLayer& layer = layers[li];
        auto groups = group_maps(sample, layer.n_qubits, layer.group_size);
        for (const FeatureGroup& fg : groups) {
          std::vector<double> enc(fg.values.size());
          for (std::size_t j = 0; j < fg.values.size(); ++j)
            enc[j] = qsim::kPi * fg.values[j];
          const auto z = qsim::run_circuit(layer.tmpl, layer.theta.data, enc);
          ++forward_applications_;
          for (std::size_t j = 0; j < fg.offsets.size(); ++j)
            sum.data[static_cast<std::size_t>(b) * sample.data.size() +
                     static_cast<std::size_t>(fg.offsets[j])] += z[j];
        }
        groups_cache_[static_cast<std::size_t>(b)][li] = std::move(groups);
      }
    }

    if (merged) {
      merge_in_cache_ = sum;
      q_cache_ = nn::conv2d(sum, merge_kernel, nullptr, 1);
    } else {
      q_cache_ = std::move(sum);
    }

    Tensor y = x;
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] = q_cache_.data[i] + x.data[i];
    return y;
  }

  // Accumulates theta.grad (and merge_kernel.grad) and returns the gradient
  // with respect to the input. Requires a preceding forward.
  Tensor backward(const Tensor& upstream) {
    if (x_cache_.empty())
      throw std::logic_error("qufex backward: no cached forward pass");
    require_shape(upstream.same_shape(x_cache_), "qufex backward: upstream shape mismatch");
    const int B = x_cache_.dim(0);
    const std::size_t plane = x_cache_.data.size() / static_cast<std::size_t>(B);
    const bool merged = layers.size() == 2;

    // Identity branch of the residual.
    Tensor gx = upstream;

    Tensor gsum;
    if (merged) {
      Tensor gmerge_in(merge_in_cache_.shape);
      Tensor gkernel(merge_kernel.shape);
      nn::conv2d_backward(merge_in_cache_, merge_kernel, 1, upstream, gmerge_in,
                          gkernel, nullptr);
      for (std::size_t i = 0; i < gkernel.data.size(); ++i)
        merge_kernel.grad[i] += gkernel.data[i];
      gsum = std::move(gmerge_in);
    } else {
      gsum = upstream;
    }

    for (int b = 0; b < B; ++b) {
      for (std::size_t li = 0; li < layers.size(); ++li) {
        QuFeXLayer& layer = layers[li];
        for (const FeatureGroup& fg : groups_cache_[static_cast<std::size_t>(b)][li]) {
          std::vector<double> enc(fg.values.size());
          std::vector<double> up(fg.values.size());
          for (std::size_t j = 0; j < fg.values.size(); ++j) {
            enc[j] = qsim::kPi * fg.values[j];
            up[j] = gsum.data[static_cast<std::size_t>(b) * plane +
                              static_cast<std::size_t>(fg.offsets[j])];
          }
          const auto grads = qsim::param_shift_grad(layer.tmpl, layer.theta.data, enc);
          for (std::size_t q = 0; q < up.size(); ++q) {
            if (up[q] == 0.0) continue;
            for (std::size_t j = 0; j < 4; ++j)
              layer.theta.grad[j] += up[q] * grads.theta[q][j];
            for (std::size_t j = 0; j < enc.size(); ++j)
              gx.data[static_cast<std::size_t>(b) * plane +
                      static_cast<std::size_t>(fg.offsets[j])] +=
                  qsim::kPi * up[q] * grads.encodings[q][j];
          }
        }
      }
    }
    return gx;
  }

 private:
  Tensor x_cache_;
  Tensor merge_in_cache_;
  Tensor q_cache_;
  std::vector<std::vector<std::vector<FeatureGroup>>> groups_cache_;  // [b][layer]
  long long forward_applications_ = 0;
};

}  // namespace qunet::qufex
