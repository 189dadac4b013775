#include <cmath>
#include <set>

#include "doctest.h"
#include "gradcheck.hpp"
#include "primitive_cases.hpp"
#include "oostraj/error.hpp"
#include "oostraj/nn.hpp"
#include "oostraj/optim.hpp"

using namespace oostraj;
using namespace oostraj::ad;
using oostraj::testing::gradcheck;
using oostraj::testing::random_tensor;
using oostraj::testing::weighted_sum;

namespace {

double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

template <class F>
void expect_errc(Errc code, F&& f) {
  try {
    f();
    FAIL("expected error ", errc_name(code));
  } catch (const Error& e) {
    CHECK(e.code() == code);
  }
}

}  // namespace

TEST_CASE("matmul") {
  SUBCASE("identity") {
    const Tensor c = matmul(Tensor::from({2, 2}, {1, 0, 0, 1}), Tensor::from({2, 2}, {1, 2, 3, 4}));
    CHECK(c.values() == std::vector<double>{1, 2, 3, 4});
  }
  SUBCASE("zero row annihilates") {
    const Tensor c = matmul(Tensor::from({2, 2}, {1, 0, 0, 0}), Tensor::from({2, 1}, {0, 5}));
    CHECK(c.values() == std::vector<double>{0, 0});
  }
  SUBCASE("matches triple loop") {
    Rng rng(1);
    const Tensor a = random_tensor({3, 4}, rng, -1, 1, false);
    const Tensor b = random_tensor({4, 2}, rng, -1, 1, false);
    const Tensor c = matmul(a, b);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 2; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < 4; ++k) s += a.at(i, k) * b.at(k, j);
        CHECK(std::abs(c.at(i, j) - s) < 1e-12);
      }
  }
  SUBCASE("inner dimensions must agree") {
    expect_errc(Errc::ShapeMismatch, [] { matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})); });
  }
}

TEST_CASE("softmax_rows") {
  SUBCASE("uniform row") {
    const Tensor y = softmax_rows(Tensor::from({1, 3}, {0, 0, 0}));
    for (double v : y.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
  SUBCASE("large logits do not overflow") {
    const Tensor y = softmax_rows(Tensor::from({1, 2}, {1000, 0}));
    CHECK(std::abs(y[0] - 1.0) < 1e-12);
    CHECK(std::abs(y[1]) < 1e-12);
  }
  SUBCASE("direct formula") {
    const Tensor y = softmax_rows(Tensor::from({1, 3}, {1, 2, 3}));
    const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
    CHECK(std::abs(y[0] - std::exp(1.0) / z) < 1e-12);
    CHECK(std::abs(y[1] - std::exp(2.0) / z) < 1e-12);
    CHECK(std::abs(y[2] - std::exp(3.0) / z) < 1e-12);
  }
  SUBCASE("rows are distributions for wide-ranging inputs") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
      const double span = std::pow(10.0, rng.uniform(-3.0, 3.0));
      const Tensor x = random_tensor({4, 7}, rng, -span, span, false);
      const Tensor y = softmax_rows(x);
      for (std::size_t i = 0; i < 4; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < 7; ++j) {
          CHECK(y.at(i, j) >= 0.0);
          s += y.at(i, j);
        }
        CHECK(std::abs(s - 1.0) < 1e-9);
      }
    }
  }
}

TEST_CASE("attention_block") {
  Rng rng(11);
  SUBCASE("single key returns v") {
    const Tensor q = random_tensor({1, 4}, rng, -1, 1, false);
    const Tensor k = random_tensor({1, 4}, rng, -1, 1, false);
    const Tensor v = random_tensor({1, 4}, rng, -1, 1, false);
    CHECK(attention_block(q, k, v).values() == v.values());
  }
  SUBCASE("identical keys average the values") {
    const Tensor q = random_tensor({3, 2}, rng, -1, 1, false);
    const Tensor k = Tensor::from({3, 2}, {0.3, -0.7, 0.3, -0.7, 0.3, -0.7});
    const Tensor v = random_tensor({3, 2}, rng, -1, 1, false);
    const Tensor out = attention_block(q, k, v);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 2; ++j) {
        const double mean = (v.at(0, j) + v.at(1, j) + v.at(2, j)) / 3.0;
        CHECK(std::abs(out.at(i, j) - mean) < 1e-12);
      }
  }
  SUBCASE("two-loop oracle") {
    const std::size_t T = 4, d = 8;
    const Tensor q = random_tensor({T, d}, rng, -1, 1, false);
    const Tensor k = random_tensor({T, d}, rng, -1, 1, false);
    const Tensor v = random_tensor({T, d}, rng, -1, 1, false);
    const Tensor out = attention_block(q, k, v);
    for (std::size_t i = 0; i < T; ++i) {
      std::vector<double> w(T);
      double z = 0.0;
      for (std::size_t j = 0; j < T; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) s += q.at(i, c) * k.at(j, c);
        w[j] = std::exp(s / std::sqrt(static_cast<double>(d)));
        z += w[j];
      }
      for (std::size_t c = 0; c < d; ++c) {
        double o = 0.0;
        for (std::size_t j = 0; j < T; ++j) o += w[j] / z * v.at(j, c);
        CHECK(std::abs(out.at(i, c) - o) < 1e-10);
      }
    }
  }
  SUBCASE("shape mismatch") {
    expect_errc(Errc::ShapeMismatch,
                [] { attention_block(Tensor::zeros({2, 4}), Tensor::zeros({3, 4}), Tensor::zeros({2, 4})); });
  }
}

TEST_CASE("recurrent_cell") {
  Rng rng(3);
  SUBCASE("zero rnn gives zero state") {
    nn::RecurrentCell cell(nn::CellKind::Rnn, 3, 4, rng);
    for (auto* t : {&cell.w_x(), &cell.w_h(), &cell.b_x(), &cell.b_h()})
      for (auto& x : t->data()) x = 0.0;
    const auto s = cell.step(Tensor::from({1, 3}, {5, -2, 9}), {Tensor::from({1, 4}, {1, 2, 3, 4}), {}});
    for (double v : s.h.values()) CHECK(v == 0.0);
  }
  SUBCASE("saturated gru update gate keeps the state") {
    const std::size_t H = 5;
    nn::RecurrentCell cell(nn::CellKind::Gru, 2, H, rng);
    for (std::size_t j = H; j < 2 * H; ++j) cell.b_x().data()[j] = 50.0;
    const Tensor h0 = random_tensor({1, H}, rng, -1, 1, false);
    const auto s = cell.step(random_tensor({1, 2}, rng, -1, 1, false), {h0, {}});
    for (std::size_t j = 0; j < H; ++j) CHECK(std::abs(s.h[j] - h0[j]) < 1e-9);
  }
  SUBCASE("lstm scalar step matches hand formula") {
    nn::RecurrentCell cell(nn::CellKind::Lstm, 1, 1, rng);
    const double x = 0.7, h = -0.4, c = 0.9;
    const auto s = cell.step(Tensor::from({1, 1}, {x}), {Tensor::from({1, 1}, {h}), Tensor::from({1, 1}, {c})});
    auto pre = [&](std::size_t g) {
      return x * cell.w_x()[g] + h * cell.w_h()[g] + cell.b_x()[g] + cell.b_h()[g];
    };
    const double i = sigm(pre(0)), f = sigm(pre(1)), g = std::tanh(pre(2)), o = sigm(pre(3));
    const double c1 = f * c + i * g;
    CHECK(std::abs(s.c[0] - c1) < 1e-10);
    CHECK(std::abs(s.h[0] - o * std::tanh(c1)) < 1e-10);
  }
  SUBCASE("errors") {
    expect_errc(Errc::UnknownCellKind, [] { nn::parse_cell_kind("mamba"); });
    nn::RecurrentCell cell(nn::CellKind::Rnn, 3, 4, rng);
    expect_errc(Errc::ShapeMismatch, [&] { cell.step(Tensor::zeros({1, 2}), cell.initial_state()); });
  }
}

TEST_CASE("mse_loss") {
  SUBCASE("identical") { CHECK(mse_loss(Tensor::from({2}, {1, 2}), Tensor::from({2}, {1, 2})).item() == 0.0); }
  SUBCASE("unit offset") {
    CHECK(mse_loss(Tensor::from({2, 2}, {2, 3, 4, 5}), Tensor::from({2, 2}, {1, 2, 3, 4})).item() == 1.0);
  }
  SUBCASE("direct sum oracle") {
    Rng rng(8);
    const Tensor a = random_tensor({5, 2}, rng, -3, 3, false);
    const Tensor b = random_tensor({5, 2}, rng, -3, 3, false);
    double s = 0.0;
    for (std::size_t i = 0; i < 10; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    CHECK(std::abs(mse_loss(a, b).item() - s / 10.0) < 1e-12);
  }
  SUBCASE("shape mismatch") {
    expect_errc(Errc::ShapeMismatch, [] { mse_loss(Tensor::zeros({2, 1}), Tensor::zeros({1, 2})); });
  }
}

TEST_CASE("backward") {
  SUBCASE("sum") {
    Tensor x = Tensor::from({3}, {1, 2, 3}, true);
    backward(sum(x));
    CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) == std::vector<double>{1, 1, 1});
  }
  SUBCASE("mse against zero") {
    Tensor x = Tensor::from({1}, {3}, true);
    backward(mse_loss(x, Tensor::zeros({1})));
    CHECK(x.grad()[0] == 6.0);
  }
  SUBCASE("accumulates without reset") {
    Tensor x = Tensor::from({2}, {1, -1}, true);
    backward(sum(mul(x, x)));
    backward(sum(mul(x, x)));
    CHECK(x.grad()[0] == 4.0);
    CHECK(x.grad()[1] == -4.0);
    x.zero_grad();
    backward(sum(x));
    CHECK(x.grad()[0] == 1.0);
  }
  SUBCASE("non-scalar loss rejected") {
    expect_errc(Errc::NotScalar, [] { backward(Tensor::zeros({2}, true)); });
  }
}

TEST_CASE("tape is topological and visits each node once") {
  Tensor x = Tensor::from({2, 2}, {1, 2, 3, 4}, true);
  // Diamond: x feeds two branches that rejoin.
  const Tensor a = tanh(x);
  const Tensor b = relu(x);
  const Tensor loss = sum(add(mul(a, b), a));
  const Tape tape = Tape::build(loss);
  const auto& nodes = tape.nodes();
  std::set<const Node*> seen;
  for (const Node* n : nodes) {
    CHECK(seen.insert(n).second);
    for (const auto& p : n->parents)
      if (p->requires_grad) CHECK(seen.count(p.get()) == 1);
  }
  CHECK(nodes.back() == loss.node());
  CHECK(nodes.size() == 6);  // x, tanh, relu, mul, add, sum
  backward(loss);
  for (std::size_t i = 0; i < 4; ++i) {
    const double xi = x[i], t = std::tanh(xi);
    CHECK(std::abs(x.grad()[i] - ((1 - t * t) * (xi + 1) + t)) < 1e-12);
  }
}

TEST_CASE("every primitive passes finite differences") {
  Rng rng(2024);
  for (const auto& c : oostraj::testing::primitive_cases()) {
    CAPTURE(c.name);
    for (int trial = 0; trial < 20; ++trial) CHECK(gradcheck(c.f, oostraj::testing::primitive_inputs(c, rng)) < 1e-4);
  }
}

TEST_CASE("recurrent cells and transformer blocks pass finite differences") {
  Rng rng(77);
  for (auto kind : {nn::CellKind::Rnn, nn::CellKind::Gru, nn::CellKind::Lstm}) {
    CAPTURE(nn::cell_kind_name(kind));
    for (int trial = 0; trial < 20; ++trial) {
      nn::RecurrentCell cell(kind, 2, 3, rng);
      nn::ParamList params;
      cell.collect("cell", params);
      std::vector<Tensor> inputs{random_tensor({3, 2}, rng)};
      for (auto& p : params) inputs.push_back(p.tensor);
      auto f = [&](const std::vector<Tensor>& in) {
        auto s = cell.initial_state();
        std::vector<Tensor> hs;
        for (std::size_t t = 0; t < 3; ++t) {
          s = cell.step(slice_rows(in[0], t, t + 1), s);
          hs.push_back(s.h);
        }
        return weighted_sum(concat_rows(hs));
      };
      CHECK(gradcheck(f, inputs) < 1e-4);
    }
  }
  for (int trial = 0; trial < 5; ++trial) {
    nn::SequenceTrunk trunk(nn::TrunkKind::Transformer, 3, {8, 1, 2, 2}, rng);
    nn::ParamList params;
    trunk.collect("trunk", params);
    std::vector<Tensor> inputs{random_tensor({4, 3}, rng)};
    for (auto& p : params) inputs.push_back(p.tensor);
    CHECK(gradcheck([&](const std::vector<Tensor>& in) { return weighted_sum(trunk(in[0])); }, inputs) < 1e-4);
  }
}

TEST_CASE("determinism: same seed gives bitwise identical outputs and gradients") {
  auto run = [] {
    Rng rng(314);
    nn::SequenceTrunk trunk(nn::TrunkKind::Gru, 3, {8, 2, 2, 2}, rng);
    const Tensor x = random_tensor({5, 3}, rng);
    const Tensor y = trunk(x);
    backward(weighted_sum(y));
    nn::ParamList params;
    trunk.collect("t", params);
    std::vector<double> out(y.values());
    for (auto& p : params) out.insert(out.end(), p.tensor.grad().begin(), p.tensor.grad().end());
    out.insert(out.end(), x.grad().begin(), x.grad().end());
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("adam_step") {
  SUBCASE("zero gradient is a fixed point") {
    Tensor p = Tensor::from({3}, {1, -2, 3}, true);
    optim::Adam adam({{"p", p}}, {});
    p.grad_mut();
    backward(scale(sum(p), 0.0));
    adam.step();
    CHECK(p.values() == std::vector<double>{1, -2, 3});
    CHECK(adam.steps() == 1);
  }
  SUBCASE("first bias-corrected step moves by lr") {
    Tensor p = Tensor::from({1}, {0.5}, true);
    optim::Adam adam({{"p", p}}, {.lr = 0.1});
    backward(sum(p));
    adam.step();
    CHECK(std::abs(p[0] - (0.5 - 0.1)) < 1e-8);
    CHECK_FALSE(p.has_grad());
  }
  SUBCASE("missing gradient") {
    Tensor p = Tensor::from({1}, {0.5}, true);
    optim::Adam adam({{"p", p}}, {});
    expect_errc(Errc::MissingGradient, [&] { adam.step(); });
  }
  SUBCASE("moment buffers track parameter shapes; steps count by one") {
    Tensor a = Tensor::zeros({2, 3}, true), b = Tensor::zeros({4}, true);
    optim::Adam adam({{"a", a}, {"b", b}}, {});
    CHECK(adam.first_moments()[0].size() == 6);
    CHECK(adam.second_moments()[1].size() == 4);
    for (int i = 1; i <= 3; ++i) {
      backward(add(sum(a), sum(b)));
      adam.step();
      CHECK(adam.steps() == static_cast<std::uint64_t>(i));
    }
  }
  SUBCASE("two identical steps reproduce the golden value") {
    Rng rng(42);
    Tensor p = random_tensor({3}, rng);
    const Tensor g = random_tensor({3}, rng, -1, 1, false);
    optim::Adam adam({{"p", p}}, {.lr = 0.01});
    for (int s = 0; s < 2; ++s) {
      backward(sum(mul(p, g)));
      adam.step();
    }
    const std::vector<double> golden = {0.53031106563414665, 0.25806278795736837, 0.52429040124970627};
    for (std::size_t i = 0; i < 3; ++i) CHECK(p[i] == doctest::Approx(golden[i]).epsilon(1e-14));
  }
}
