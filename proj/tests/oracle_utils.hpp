#pragma once

// Test-side reference implementations, deliberately independent of the
// library's strided simulator and loop kernels: full 2^n x 2^n circuit
// unitaries assembled from Kronecker products, and pad-first nested-loop
// versions of the nn ops.

#include <array>
#include <complex>
#include <optional>
#include <vector>

#include "qunet/qsim.hpp"
#include "qunet/tensor.hpp"

namespace oracle {

using cdouble = std::complex<double>;
using Mat = std::vector<std::vector<cdouble>>;

inline Mat identity(int d) {
  Mat m(static_cast<std::size_t>(d), std::vector<cdouble>(static_cast<std::size_t>(d)));
  for (int i = 0; i < d; ++i) m[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1.0;
  return m;
}

inline Mat kron(const Mat& a, const Mat& b) {
  const std::size_t ra = a.size(), ca = a[0].size(), rb = b.size(), cb = b[0].size();
  Mat m(ra * rb, std::vector<cdouble>(ca * cb));
  for (std::size_t i = 0; i < ra; ++i)
    for (std::size_t j = 0; j < ca; ++j)
      for (std::size_t k = 0; k < rb; ++k)
        for (std::size_t l = 0; l < cb; ++l) m[i * rb + k][j * cb + l] = a[i][j] * b[k][l];
  return m;
}

inline Mat matmul(const Mat& a, const Mat& b) {
  const std::size_t n = a.size(), m = b[0].size(), k = b.size();
  Mat out(n, std::vector<cdouble>(m));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const cdouble v = a[i][p];
      if (v == cdouble(0.0, 0.0)) continue;
      for (std::size_t j = 0; j < m; ++j) out[i][j] += v * b[p][j];
    }
  return out;
}

inline Mat add(const Mat& a, const Mat& b) {
  Mat out = a;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[0].size(); ++j) out[i][j] += b[i][j];
  return out;
}

// Qubit 0 is the least-significant index bit, i.e. the rightmost Kronecker
// factor.
inline Mat embed_single(const std::array<cdouble, 4>& u, int qubit, int n_qubits) {
  const Mat m = {{u[0], u[1]}, {u[2], u[3]}};
  return kron(identity(1 << (n_qubits - 1 - qubit)), kron(m, identity(1 << qubit)));
}

inline Mat gate_matrix(const qunet::qsim::Gate& g, std::optional<double> angle, int n) {
  using GK = qunet::qsim::GateKind;
  const cdouble i1(0.0, 1.0);
  const std::array<cdouble, 4> p0 = {1.0, 0.0, 0.0, 0.0};
  const std::array<cdouble, 4> p1 = {0.0, 0.0, 0.0, 1.0};
  const std::array<cdouble, 4> px = {0.0, 1.0, 1.0, 0.0};
  const std::array<cdouble, 4> pz = {1.0, 0.0, 0.0, -1.0};
  switch (g.kind) {
    case GK::RX: {
      const double c = std::cos(*angle / 2), s = std::sin(*angle / 2);
      return embed_single({c, -i1 * s, -i1 * s, c}, g.q0, n);
    }
    case GK::RY: {
      const double c = std::cos(*angle / 2), s = std::sin(*angle / 2);
      return embed_single({c, -s, s, c}, g.q0, n);
    }
    case GK::RZ: {
      const cdouble e0 = std::exp(-i1 * (*angle / 2)), e1 = std::exp(i1 * (*angle / 2));
      return embed_single({e0, 0.0, 0.0, e1}, g.q0, n);
    }
    case GK::H: {
      const double r = 1.0 / std::sqrt(2.0);
      return embed_single({r, r, r, -r}, g.q0, n);
    }
    case GK::CNOT:
      return add(embed_single(p0, g.q0, n),
                 matmul(embed_single(p1, g.q0, n), embed_single(px, g.q1, n)));
    case GK::CZ:
      return add(embed_single(p0, g.q0, n),
                 matmul(embed_single(p1, g.q0, n), embed_single(pz, g.q1, n)));
  }
  return identity(1 << n);
}

// Independent slot lookup against the template's tables.
inline std::optional<double> resolve_angle(const qunet::qsim::CircuitTemplate& t,
                                           const qunet::qsim::Gate& g,
                                           const std::vector<double>& theta,
                                           const std::vector<double>& enc) {
  if (!qunet::qsim::is_rotation(g.kind)) return std::nullopt;
  for (std::size_t j = 0; j < t.trainable_slots.size(); ++j)
    if (t.trainable_slots[j] == g.angle_slot) return theta[j];
  for (std::size_t j = 0; j < t.encoding_slots.size(); ++j)
    if (t.encoding_slots[j] == g.angle_slot) return enc[j];
  return std::nullopt;
}

// Multiplies the full-circuit unitary out of per-gate dense matrices, applies
// it to |0..0> and reads each <Z_q> from the amplitudes directly.
inline std::vector<double> run_dense(const qunet::qsim::CircuitTemplate& t,
                                     const std::vector<double>& theta,
                                     const std::vector<double>& enc) {
  const int dim = 1 << t.n_qubits;
  Mat u = identity(dim);
  for (const auto& g : t.gates)
    u = matmul(gate_matrix(g, resolve_angle(t, g, theta, enc), t.n_qubits), u);

  std::vector<cdouble> psi(static_cast<std::size_t>(dim));
  for (int i = 0; i < dim; ++i) psi[static_cast<std::size_t>(i)] = u[static_cast<std::size_t>(i)][0];

  std::vector<double> out(static_cast<std::size_t>(t.n_qubits));
  for (int q = 0; q < t.n_qubits; ++q) {
    double acc = 0.0;
    for (int i = 0; i < dim; ++i)
      acc += ((i >> q) & 1 ? -1.0 : 1.0) * std::norm(psi[static_cast<std::size_t>(i)]);
    out[static_cast<std::size_t>(q)] = acc;
  }
  return out;
}

// Cheaper dense reference for 8-qubit circuits: per-gate dense matrix applied
// to the vector (still no strided pairing).
inline std::vector<double> run_dense_vec(const qunet::qsim::CircuitTemplate& t,
                                         const std::vector<double>& theta,
                                         const std::vector<double>& enc) {
  const int dim = 1 << t.n_qubits;
  std::vector<cdouble> psi(static_cast<std::size_t>(dim));
  psi[0] = 1.0;
  for (const auto& g : t.gates) {
    const Mat m = gate_matrix(g, resolve_angle(t, g, theta, enc), t.n_qubits);
    std::vector<cdouble> next(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j)
        next[static_cast<std::size_t>(i)] +=
            m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] *
            psi[static_cast<std::size_t>(j)];
    psi = std::move(next);
  }
  std::vector<double> out(static_cast<std::size_t>(t.n_qubits));
  for (int q = 0; q < t.n_qubits; ++q) {
    double acc = 0.0;
    for (int i = 0; i < dim; ++i)
      acc += ((i >> q) & 1 ? -1.0 : 1.0) * std::norm(psi[static_cast<std::size_t>(i)]);
    out[static_cast<std::size_t>(q)] = acc;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Naive nn references: explicit zero-padded copies, quadruple loops.
// ---------------------------------------------------------------------------

inline qunet::Tensor conv2d_naive(const qunet::Tensor& x, const qunet::Tensor& k,
                                  const qunet::Tensor* bias, int pad) {
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int OC = k.dim(0), KH = k.dim(2), KW = k.dim(3);
  qunet::Tensor padded({B, C, H + 2 * pad, W + 2 * pad});
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < H; ++y)
        for (int xx = 0; xx < W; ++xx)
          padded.at4(b, c, y + pad, xx + pad) = x.at4(b, c, y, xx);

  const int OH = H + 2 * pad - KH + 1, OW = W + 2 * pad - KW + 1;
  qunet::Tensor y({B, OC, OH, OW});
  for (int b = 0; b < B; ++b)
    for (int oc = 0; oc < OC; ++oc)
      for (int oy = 0; oy < OH; ++oy)
        for (int ox = 0; ox < OW; ++ox) {
          double acc = bias ? bias->data[static_cast<std::size_t>(oc)] : 0.0;
          for (int ic = 0; ic < C; ++ic)
            for (int ky = 0; ky < KH; ++ky)
              for (int kx = 0; kx < KW; ++kx)
                acc += padded.at4(b, ic, oy + ky, ox + kx) *
                       k.data[static_cast<std::size_t>(((oc * C + ic) * KH + ky) * KW + kx)];
          y.at4(b, oc, oy, ox) = acc;
        }
  return y;
}

inline qunet::Tensor maxpool2_naive(const qunet::Tensor& x) {
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  qunet::Tensor y({B, C, H / 2, W / 2});
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c)
      for (int oy = 0; oy < H / 2; ++oy)
        for (int ox = 0; ox < W / 2; ++ox)
          y.at4(b, c, oy, ox) =
              std::max(std::max(x.at4(b, c, 2 * oy, 2 * ox), x.at4(b, c, 2 * oy, 2 * ox + 1)),
                       std::max(x.at4(b, c, 2 * oy + 1, 2 * ox), x.at4(b, c, 2 * oy + 1, 2 * ox + 1)));
  return y;
}

// Valid stride-2 convolution with an (in,out,2,2) kernel, contracted over the
// *out* axis of the kernel: the adjoint partner of transposed_conv2.
inline qunet::Tensor conv2_stride2(const qunet::Tensor& y, const qunet::Tensor& k) {
  const int B = y.dim(0), OC = y.dim(1), OH = y.dim(2), OW = y.dim(3);
  const int IC = k.dim(0);
  qunet::Tensor x({B, IC, OH / 2, OW / 2});
  for (int b = 0; b < B; ++b)
    for (int ic = 0; ic < IC; ++ic)
      for (int iy = 0; iy < OH / 2; ++iy)
        for (int ix = 0; ix < OW / 2; ++ix) {
          double acc = 0.0;
          for (int oc = 0; oc < OC; ++oc)
            for (int ky = 0; ky < 2; ++ky)
              for (int kx = 0; kx < 2; ++kx)
                acc += y.at4(b, oc, 2 * iy + ky, 2 * ix + kx) *
                       k.data[static_cast<std::size_t>(((ic * OC + oc) * 2 + ky) * 2 + kx)];
          x.at4(b, ic, iy, ix) = acc;
        }
  return x;
}

}  // namespace oracle
