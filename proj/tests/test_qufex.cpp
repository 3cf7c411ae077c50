#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <future>
#include <vector>

#include "oracle_utils.hpp"
#include "qunet/gradcheck.hpp"
#include "qunet/qufex.hpp"
#include "qunet/rng.hpp"

using namespace qunet;
using qufex::QuFeXModule;

namespace {

// Rotation slots in gate order, encoding prefix skipped.
std::vector<int> trainable_slot_sequence(const qsim::CircuitTemplate& t) {
  std::vector<int> out;
  for (const auto& g : t.gates)
    if (qsim::is_rotation(g.kind) && g.angle_slot >= t.n_qubits) out.push_back(g.angle_slot);
  return out;
}

}  // namespace

TEST_CASE("build_template slot counts and layout") {
  const auto t41 = qufex::build_template(4, 1);
  CHECK(t41.trainable_slots.size() == 4);
  CHECK(t41.encoding_slots.size() == 4);

  const auto t81 = qufex::build_template(8, 1);
  CHECK(t81.trainable_slots.size() == 4);
  CHECK(t81.encoding_slots.size() == 8);

  SECTION("second layer interchanges the two block kinds") {
    const auto t82 = qufex::build_template(8, 2);
    CHECK(t82.trainable_slots.size() == 4);
    auto seq1 = trainable_slot_sequence(t81);
    auto seq2 = trainable_slot_sequence(t82);
    REQUIRE(seq1.size() == seq2.size());
    // Same placements, block A slots (8,9) swapped with block B slots (10,11).
    for (std::size_t i = 0; i < seq1.size(); ++i) {
      const int swapped = seq1[i] >= 10 ? seq1[i] - 2 : seq1[i] + 2;
      CHECK(seq2[i] == swapped);
    }
    // Layer 2 encodes in the X basis: one H per qubit ahead of each RZ.
    int h_count = 0, rz_enc = 0;
    for (const auto& g : t82.gates) {
      h_count += g.kind == qsim::GateKind::H;
      rz_enc += g.kind == qsim::GateKind::RZ && g.angle_slot >= 0 && g.angle_slot < 8;
    }
    CHECK(h_count == 8);
    CHECK(rz_enc == 8);
  }

  SECTION("controls are retained: one output per qubit") {
    for (int nq : {4, 8})
      for (int layer : {1, 2}) {
        const auto t = qufex::build_template(nq, layer);
        const auto z = qsim::run_circuit(t, std::vector<double>(4, 0.5),
                                         std::vector<double>(static_cast<std::size_t>(nq), 0.3));
        CHECK(static_cast<int>(z.size()) == nq);
      }
  }

  SECTION("pooling uses CZ with odd controls") {
    int cz41 = 0;
    for (const auto& g : t41.gates)
      if (g.kind == qsim::GateKind::CZ) {
        ++cz41;
        CHECK(g.q0 % 2 == 1);
        CHECK(g.q1 == g.q0 - 1);
      }
    CHECK(cz41 == 2);
  }

  CHECK_THROWS_AS(qufex::build_template(6, 1), std::invalid_argument);
  CHECK_THROWS_AS(qufex::build_template(4, 3), std::invalid_argument);
}

TEST_CASE("group_maps streaming") {
  Rng rng(5);
  Tensor x({8, 2, 2});
  for (double& v : x.data) v = rng.uniform(0.0, 1.0);

  SECTION("pairwise grouping for the 8-qubit filter") {
    const auto groups = qufex::group_maps(x, 8, 2);
    REQUIRE(groups.size() == 4);
    for (const auto& g : groups) {
      CHECK(g.values.size() == 8);
      CHECK(g.offsets.size() == 8);
    }
    // First group is channels 0..1 flattened channel-major, row-major.
    for (int j = 0; j < 8; ++j) CHECK(groups[0].offsets[static_cast<std::size_t>(j)] == j);
    for (int j = 0; j < 8; ++j)
      CHECK(groups[0].values[static_cast<std::size_t>(j)] == x.data[static_cast<std::size_t>(j)]);
  }

  SECTION("whole-tensor streaming for the 4-qubit filters") {
    const auto groups = qufex::group_maps(x, 4, 8);
    REQUIRE(groups.size() == 8);
    for (std::size_t g = 0; g < groups.size(); ++g)
      for (int j = 0; j < 4; ++j)
        CHECK(groups[g].offsets[static_cast<std::size_t>(j)] ==
              static_cast<int>(g) * 4 + j);
  }

  SECTION("divisibility violations") {
    Tensor bad({3, 2, 2});
    CHECK_THROWS_AS(qufex::group_maps(bad, 4, 2), std::invalid_argument);
    CHECK_THROWS_AS(qufex::group_maps(x, 8, 1), std::invalid_argument);  // 4 not divisible by 8
  }
}

TEST_CASE("forward basics") {
  SECTION("zero input, zero theta: quantum output is all ones") {
    QuFeXModule mod = QuFeXModule::single_filter();
    Tensor x({1, 8, 2, 2});
    const Tensor y = mod.forward(x);
    for (double v : y.data) CHECK(v == 1.0);
    CHECK(mod.forward_applications() == 4);
  }

  SECTION("output shape equals input shape for both variants") {
    Rng rng(8);
    QuFeXModule single = QuFeXModule::single_filter();
    QuFeXModule dual = QuFeXModule::dual_filter(8);
    for (double& v : dual.merge_kernel.data) v = rng.uniform(-0.3, 0.3);
    Tensor x({2, 8, 2, 2});
    for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
    CHECK(single.forward(x).shape == x.shape);
    CHECK(dual.forward(x).shape == x.shape);
  }
}

TEST_CASE("single 4-qubit filter matches the dense oracle through the data path") {
  Rng rng(13);
  QuFeXModule mod;
  mod.layers.push_back(qufex::QuFeXLayer::make(4, 1, 2));
  for (double& v : mod.layers[0].theta.data) v = rng.uniform(-2.0, 2.0);

  Tensor x({1, 2, 2, 2});
  for (double& v : x.data) v = rng.uniform(-0.9, 0.9);
  const Tensor y = mod.forward(x);

  Tensor sample({2, 2, 2});
  std::copy(x.data.begin(), x.data.end(), sample.data.begin());
  const auto groups = qufex::group_maps(sample, 4, 2);
  REQUIRE(groups.size() == 2);

  Tensor expected_q({2, 2, 2});
  for (const auto& g : groups) {
    std::vector<double> enc(g.values.size());
    for (std::size_t j = 0; j < enc.size(); ++j) enc[j] = qsim::kPi * g.values[j];
    const auto z = oracle::run_dense(mod.layers[0].tmpl, mod.layers[0].theta.data, enc);
    for (std::size_t j = 0; j < g.offsets.size(); ++j)
      expected_q.data[static_cast<std::size_t>(g.offsets[j])] = z[j];
  }
  for (std::size_t i = 0; i < y.data.size(); ++i)
    CHECK(std::abs((y.data[i] - x.data[i]) - expected_q.data[i]) < 1e-10);
}

TEST_CASE("residual identity is the literal final addition") {
  Rng rng(21);
  QuFeXModule mod = QuFeXModule::dual_filter(4);
  for (double& v : mod.merge_kernel.data) v = rng.uniform(-0.5, 0.5);
  for (auto& l : mod.layers)
    for (double& v : l.theta.data) v = rng.uniform(-1.0, 1.0);
  Tensor x({1, 4, 2, 2});
  for (double& v : x.data) v = rng.uniform(-2.0, 2.0);
  const Tensor y = mod.forward(x);
  const Tensor& q = mod.last_quantum_output();
  for (std::size_t i = 0; i < y.data.size(); ++i) {
    const double sum = q.data[i] + x.data[i];
    CHECK(std::memcmp(&y.data[i], &sum, sizeof(double)) == 0);
  }
}

TEST_CASE("weight sharing: identical feature groups give identical outputs") {
  Rng rng(34);
  QuFeXModule mod = QuFeXModule::single_filter();
  for (double& v : mod.layers[0].theta.data) v = rng.uniform(-2.0, 2.0);

  Tensor x({1, 8, 2, 2});
  for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
  // Make channels 4..5 a copy of channels 0..1: groups 0 and 2 coincide.
  for (int i = 0; i < 8; ++i)
    x.data[static_cast<std::size_t>(16 + i)] = x.data[static_cast<std::size_t>(i)];

  const Tensor y = mod.forward(x);
  const Tensor& q = mod.last_quantum_output();
  for (int i = 0; i < 8; ++i)
    CHECK(q.data[static_cast<std::size_t>(i)] == q.data[static_cast<std::size_t>(16 + i)]);
  (void)y;
}

TEST_CASE("trainable parameter count is 4 per filter regardless of width") {
  CHECK(qufex::QuFeXLayer::make(4, 1, 8).theta.size() == 4);
  CHECK(qufex::QuFeXLayer::make(8, 1, 2).theta.size() == 4);
  CHECK(qufex::QuFeXLayer::make(8, 2, 2).theta.size() == 4);
}

TEST_CASE("backward") {
  SECTION("zero upstream gives zero gradients") {
    Rng rng(44);
    QuFeXModule mod = QuFeXModule::dual_filter(2);
    for (double& v : mod.merge_kernel.data) v = rng.uniform(-0.5, 0.5);
    Tensor x({1, 2, 2, 2});
    for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
    mod.forward(x);
    const Tensor gx = mod.backward(Tensor({1, 2, 2, 2}));
    for (double v : gx.data) CHECK(v == 0.0);
    for (const auto& l : mod.layers)
      for (double v : l.theta.grad) CHECK(v == 0.0);
    for (double v : mod.merge_kernel.grad) CHECK(v == 0.0);
  }

  SECTION("backward without forward is a usage error") {
    QuFeXModule mod = QuFeXModule::single_filter();
    CHECK_THROWS_AS(mod.backward(Tensor({1, 8, 2, 2})), std::logic_error);
  }

  SECTION("theta, merge kernel and input gradients match finite differences") {
    const auto checks = gradcheck::layer_gradient_checks(1234);
    bool found = false;
    for (const auto& r : checks)
      if (r.name == "qufex module backward") {
        found = true;
        INFO(r.name << " max_err=" << r.max_err);
        CHECK(r.pass);
      }
    REQUIRE(found);
  }
}

TEST_CASE("groups evaluate the same concurrently and sequentially") {
  Rng rng(66);
  const auto layer = qufex::QuFeXLayer::make(8, 1, 2);
  std::vector<double> theta(4);
  for (double& v : theta) v = rng.uniform(-1.5, 1.5);

  Tensor x({8, 2, 2});
  for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
  const auto groups = qufex::group_maps(x, 8, 2);

  std::vector<std::vector<double>> sequential;
  for (const auto& g : groups) {
    std::vector<double> enc(g.values.size());
    for (std::size_t j = 0; j < enc.size(); ++j) enc[j] = qsim::kPi * g.values[j];
    sequential.push_back(qsim::run_circuit(layer.tmpl, theta, enc));
  }

  std::vector<std::future<std::vector<double>>> futs;
  for (const auto& g : groups)
    futs.push_back(std::async(std::launch::async, [&layer, &theta, &g]() {
      std::vector<double> enc(g.values.size());
      for (std::size_t j = 0; j < enc.size(); ++j) enc[j] = qsim::kPi * g.values[j];
      return qsim::run_circuit(layer.tmpl, theta, enc);
    }));
  for (std::size_t i = 0; i < futs.size(); ++i) REQUIRE(futs[i].get() == sequential[i]);
}
