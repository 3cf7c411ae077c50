#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace qunet::qsim {

using cdouble = std::complex<double>;

inline constexpr int kMaxQubits = 12;
inline constexpr double kPi = 3.14159265358979323846;

// Amplitudes of an n-qubit register. Qubit 0 is the least-significant bit of
// the basis-state index, so |q1 q0> = |10> sits at index 1 when written with
// qubit 0 leftmost.
struct StateVector {
  int n_qubits = 0;
  std::vector<cdouble> amps;
};

inline StateVector new_state(int n_qubits) {
  if (n_qubits < 1 || n_qubits > kMaxQubits)
    throw std::invalid_argument("new_state: n_qubits must be in [1, " +
                                std::to_string(kMaxQubits) + "], got " +
                                std::to_string(n_qubits));
  StateVector s;
  s.n_qubits = n_qubits;
  s.amps.assign(std::size_t(1) << n_qubits, cdouble(0.0, 0.0));
  s.amps[0] = 1.0;
  return s;
}

enum class GateKind { RX, RY, RZ, H, CNOT, CZ };

inline bool is_rotation(GateKind k) {
  return k == GateKind::RX || k == GateKind::RY || k == GateKind::RZ;
}

inline const char* gate_name(GateKind k) {
  switch (k) {
    case GateKind::RX: return "RX";
    case GateKind::RY: return "RY";
    case GateKind::RZ: return "RZ";
    case GateKind::H: return "H";
    case GateKind::CNOT: return "CNOT";
    case GateKind::CZ: return "CZ";
  }
  return "?";
}

// q1 is the second qubit of CNOT/CZ (q0 acts as control) and unused
// otherwise. Rotations carry an angle_slot resolved against the slot tables
// of the enclosing template; fixed gates carry none.
struct Gate {
  GateKind kind = GateKind::H;
  int q0 = 0;
  int q1 = -1;
  int angle_slot = -1;
};

// Ordered gate list plus the slot tables. trainable_slots lists the slot ids
// bound to theta, in theta order; encoding_slots the slot ids bound to
// input-derived angles, in encoding order. A slot id referenced by a gate
// must appear in exactly one of the two tables; trainable slots may be
// referenced by many gates (weight sharing).
struct CircuitTemplate {
  int n_qubits = 0;
  std::vector<Gate> gates;
  std::vector<int> trainable_slots;
  std::vector<int> encoding_slots;
};

namespace detail {

inline void apply_1q(StateVector& s, int q, cdouble u00, cdouble u01, cdouble u10,
                     cdouble u11) {
  const std::size_t n = s.amps.size();
  const std::size_t mask = std::size_t(1) << q;
  for (std::size_t i = 0; i < n; ++i) {
    if (i & mask) continue;
    const cdouble a = s.amps[i];
    const cdouble b = s.amps[i | mask];
    s.amps[i] = u00 * a + u01 * b;
    s.amps[i | mask] = u10 * a + u11 * b;
  }
}

inline void check_qubit(const StateVector& s, int q, const char* who) {
  if (q < 0 || q >= s.n_qubits)
    throw std::out_of_range(std::string(who) + ": qubit " + std::to_string(q) +
                            " out of range for " + std::to_string(s.n_qubits) +
                            " qubits");
}

}  // namespace detail

// Applies one gate in place via strided amplitude pairing. The angle must be
// supplied iff the gate is a rotation.
inline void apply_gate(StateVector& s, const Gate& g,
                       std::optional<double> angle = std::nullopt) {
  detail::check_qubit(s, g.q0, "apply_gate");
  if (g.kind == GateKind::CNOT || g.kind == GateKind::CZ) {
    detail::check_qubit(s, g.q1, "apply_gate");
    if (g.q0 == g.q1)
      throw std::invalid_argument("apply_gate: two-qubit gate needs distinct qubits");
  }
  if (is_rotation(g.kind) != angle.has_value())
    throw std::invalid_argument(std::string("apply_gate: ") + gate_name(g.kind) +
                                (angle ? " takes no angle" : " requires an angle"));

  switch (g.kind) {
    case GateKind::RX: {
      const double c = std::cos(*angle / 2.0), sn = std::sin(*angle / 2.0);
      detail::apply_1q(s, g.q0, {c, 0.0}, {0.0, -sn}, {0.0, -sn}, {c, 0.0});
      break;
    }
    case GateKind::RY: {
      const double c = std::cos(*angle / 2.0), sn = std::sin(*angle / 2.0);
      detail::apply_1q(s, g.q0, {c, 0.0}, {-sn, 0.0}, {sn, 0.0}, {c, 0.0});
      break;
    }
    case GateKind::RZ: {
      const cdouble e0 = std::exp(cdouble(0.0, -*angle / 2.0));
      const cdouble e1 = std::exp(cdouble(0.0, *angle / 2.0));
      detail::apply_1q(s, g.q0, e0, 0.0, 0.0, e1);
      break;
    }
    case GateKind::H: {
      const double r = 1.0 / std::sqrt(2.0);
      detail::apply_1q(s, g.q0, {r, 0.0}, {r, 0.0}, {r, 0.0}, {-r, 0.0});
      break;
    }
    case GateKind::CNOT: {
      const std::size_t cm = std::size_t(1) << g.q0;
      const std::size_t tm = std::size_t(1) << g.q1;
      for (std::size_t i = 0; i < s.amps.size(); ++i)
        if ((i & cm) && !(i & tm)) std::swap(s.amps[i], s.amps[i | tm]);
      break;
    }
    case GateKind::CZ: {
      const std::size_t cm = std::size_t(1) << g.q0;
      const std::size_t tm = std::size_t(1) << g.q1;
      for (std::size_t i = 0; i < s.amps.size(); ++i)
        if ((i & cm) && (i & tm)) s.amps[i] = -s.amps[i];
      break;
    }
  }
}

// <Z_q>: +|a|^2 where bit q of the basis index is 0, -|a|^2 where it is 1.
inline double expectation_z(const StateVector& s, int qubit) {
  detail::check_qubit(s, qubit, "expectation_z");
  const std::size_t mask = std::size_t(1) << qubit;
  double acc = 0.0;
  for (std::size_t i = 0; i < s.amps.size(); ++i) {
    const double p = std::norm(s.amps[i]);
    acc += (i & mask) ? -p : p;
  }
  return acc;
}

namespace detail {

struct SlotRef {
  bool trainable = false;
  int pos = -1;
};

// slot id -> which table and position. Throws if a referenced slot is
// missing or appears in both tables.
inline SlotRef resolve_slot(const CircuitTemplate& t, int slot) {
  SlotRef ref;
  for (std::size_t i = 0; i < t.trainable_slots.size(); ++i)
    if (t.trainable_slots[i] == slot) {
      ref.trainable = true;
      ref.pos = static_cast<int>(i);
    }
  for (std::size_t i = 0; i < t.encoding_slots.size(); ++i)
    if (t.encoding_slots[i] == slot) {
      if (ref.pos >= 0)
        throw std::invalid_argument("circuit template: slot " + std::to_string(slot) +
                                    " bound as both trainable and encoding");
      ref.trainable = false;
      ref.pos = static_cast<int>(i);
    }
  if (ref.pos < 0)
    throw std::invalid_argument("circuit template: slot " + std::to_string(slot) +
                                " referenced by a gate but not bound");
  return ref;
}

inline std::vector<double> run_internal(const CircuitTemplate& t,
                                        const std::vector<double>& theta,
                                        const std::vector<double>& encodings,
                                        int shifted_gate, double shift) {
  StateVector s = new_state(t.n_qubits);
  for (std::size_t i = 0; i < t.gates.size(); ++i) {
    const Gate& g = t.gates[i];
    if (is_rotation(g.kind)) {
      const SlotRef ref = resolve_slot(t, g.angle_slot);
      double a = ref.trainable ? theta[static_cast<std::size_t>(ref.pos)]
                               : encodings[static_cast<std::size_t>(ref.pos)];
      if (static_cast<int>(i) == shifted_gate) a += shift;
      apply_gate(s, g, a);
    } else {
      apply_gate(s, g);
    }
  }
  std::vector<double> out(static_cast<std::size_t>(t.n_qubits));
  for (int q = 0; q < t.n_qubits; ++q) out[static_cast<std::size_t>(q)] = expectation_z(s, q);
  return out;
}

inline void check_lengths(const CircuitTemplate& t, const std::vector<double>& theta,
                          const std::vector<double>& encodings, const char* who) {
  if (theta.size() != t.trainable_slots.size())
    throw std::invalid_argument(std::string(who) + ": expected " +
                                std::to_string(t.trainable_slots.size()) +
                                " theta values, got " + std::to_string(theta.size()));
  if (encodings.size() != t.encoding_slots.size())
    throw std::invalid_argument(std::string(who) + ": expected " +
                                std::to_string(t.encoding_slots.size()) +
                                " encoding values, got " +
                                std::to_string(encodings.size()));
}

}  // namespace detail

// Runs the template from |0..0> with all slots resolved and returns <Z_q> for
// every qubit. Exact expectations, no sampling; bit-deterministic.
inline std::vector<double> run_circuit(const CircuitTemplate& t,
                                       const std::vector<double>& theta,
                                       const std::vector<double>& encodings) {
  detail::check_lengths(t, theta, encodings, "run_circuit");
  return detail::run_internal(t, theta, encodings, -1, 0.0);
}

struct CircuitGradients {
  // theta[q][j] = d<Z_q>/d theta_j, encodings[q][k] = d<Z_q>/d encoding_k
  std::vector<std::vector<double>> theta;
  std::vector<std::vector<double>> encodings;
};

// Parameter-shift gradients, exact for RX/RY/RZ generators. A slot shared by
// several gates is handled by shifting each occurrence separately and summing
// the contributions, which is the chain rule for a shared parameter.
inline CircuitGradients param_shift_grad(const CircuitTemplate& t,
                                         const std::vector<double>& theta,
                                         const std::vector<double>& encodings) {
  detail::check_lengths(t, theta, encodings, "param_shift_grad");
  CircuitGradients g;
  g.theta.assign(static_cast<std::size_t>(t.n_qubits),
                 std::vector<double>(theta.size(), 0.0));
  g.encodings.assign(static_cast<std::size_t>(t.n_qubits),
                     std::vector<double>(encodings.size(), 0.0));
  for (std::size_t gi = 0; gi < t.gates.size(); ++gi) {
    const Gate& gate = t.gates[gi];
    if (!is_rotation(gate.kind)) continue;
    const detail::SlotRef ref = detail::resolve_slot(t, gate.angle_slot);
    const auto ep = detail::run_internal(t, theta, encodings, static_cast<int>(gi), kPi / 2.0);
    const auto em = detail::run_internal(t, theta, encodings, static_cast<int>(gi), -kPi / 2.0);
    for (int q = 0; q < t.n_qubits; ++q) {
      const double d = 0.5 * (ep[static_cast<std::size_t>(q)] - em[static_cast<std::size_t>(q)]);
      if (ref.trainable)
        g.theta[static_cast<std::size_t>(q)][static_cast<std::size_t>(ref.pos)] += d;
      else
        g.encodings[static_cast<std::size_t>(q)][static_cast<std::size_t>(ref.pos)] += d;
    }
  }
  return g;
}

// Structural checks: qubit indices in range, arity respected, every
// referenced slot bound exactly once.
inline void validate_template(const CircuitTemplate& t) {
  if (t.n_qubits < 1 || t.n_qubits > kMaxQubits)
    throw std::invalid_argument("circuit template: bad qubit count");
  for (const Gate& g : t.gates) {
    if (g.q0 < 0 || g.q0 >= t.n_qubits)
      throw std::invalid_argument("circuit template: qubit index out of range");
    const bool two = g.kind == GateKind::CNOT || g.kind == GateKind::CZ;
    if (two) {
      if (g.q1 < 0 || g.q1 >= t.n_qubits || g.q1 == g.q0)
        throw std::invalid_argument("circuit template: bad two-qubit operands");
    }
    if (is_rotation(g.kind)) {
      detail::resolve_slot(t, g.angle_slot);
    } else if (g.angle_slot >= 0) {
      throw std::invalid_argument("circuit template: fixed gate carries an angle slot");
    }
  }
}

}  // namespace qunet::qsim
