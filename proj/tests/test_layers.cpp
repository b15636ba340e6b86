#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "caplab/layers.hpp"

using namespace caplab;

namespace {

void zero_all(Tensor t) {
  for (double& v : t.values()) v = 0.0;
}

}  // namespace

TEST_CASE("zero-parameter gru_step halves the state exactly") {
  Rng rng(1);
  GruParams p = GruParams::create(4, 3, WeightInit::Xavier, 0.1, rng);
  for (Tensor t : {p.W_f, p.b_f, p.W_r, p.b_r, p.W_s, p.b_s, p.s0}) zero_all(t);

  // exactly representable state values: halving must be bit-level exact
  Tensor s = Tensor::leaf({2, 4}, {1.0, -0.5, 0.25, -8.0, 0.125, 2.0, -1.0, 3.0});
  Tensor x = Tensor::leaf({2, 3}, {0.3, -0.7, 0.9, 1.1, 0.0, -2.2});
  Tensor out = gru_step(s, x, p);
  REQUIRE(out.shape() == Shape{2, 4});
  for (std::size_t i = 0; i < 8; ++i) CHECK(out.values()[i] == 0.5 * s.values()[i]);
}

TEST_CASE("init_weights respects the clipping bound") {
  Rng rng(2);
  Tensor w = init_weights({50, 40}, WeightInit::Normal, 1e-5, rng);
  for (double v : w.values()) CHECK(std::abs(v) <= 1e-5);
}

TEST_CASE("xavier initialisation has the expected spread") {
  Rng rng(3);
  const std::size_t fan_in = 300, fan_out = 200;
  Tensor w = init_weights({fan_in, fan_out}, WeightInit::Xavier, 1.0, rng);
  const auto& v = w.values();
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  const double expected_sd = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
  CHECK(std::sqrt(var) == doctest::Approx(expected_sd).epsilon(0.05));
  CHECK(std::abs(mean) < 3 * expected_sd / std::sqrt(static_cast<double>(v.size())) * 5);
}

TEST_CASE("gru gates stay strictly inside (0,1)") {
  Rng rng(4);
  GruParams p = GruParams::create(5, 4, WeightInit::Normal, 0.5, rng);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> sx(5 + 4);
  for (double& v : sx) v = u(rng);
  for (const auto& [W, b] : {std::pair<Tensor, Tensor>{p.W_f, p.b_f}, {p.W_r, p.b_r}}) {
    for (std::size_t j = 0; j < 5; ++j) {
      double z = b.values()[j];
      for (std::size_t i = 0; i < sx.size(); ++i) z += sx[i] * W.values()[i * 5 + j];
      const double g = 1.0 / (1.0 + std::exp(-z));
      CHECK(g > 0.0);
      CHECK(g < 1.0);
    }
  }
}

TEST_CASE("dense and embed compute the obvious things") {
  Rng rng(5);
  DenseParams d = DenseParams::create(2, 3, Activation::Identity, WeightInit::Normal, 0.5, rng);
  Tensor x = Tensor::leaf({1, 2}, {1.0, -1.0});
  Tensor y = dense(x, d);
  for (std::size_t j = 0; j < 3; ++j) {
    const double expect =
        d.W.values()[0 * 3 + j] - d.W.values()[1 * 3 + j] + d.b.values()[j];
    CHECK(y.values()[j] == doctest::Approx(expect).epsilon(1e-12));
  }
  for (double b : d.b.values()) CHECK(b == 0.0);  // biases start at zero

  EmbeddingParams e = EmbeddingParams::create(7, 4, WeightInit::Normal, 0.5, rng);
  Tensor rows = embed({3, 0, 3}, e);
  REQUIRE(rows.shape() == Shape{3, 4});
  for (std::size_t c = 0; c < 4; ++c) {
    CHECK(rows.values()[0 * 4 + c] == e.E.values()[3 * 4 + c]);
    CHECK(rows.values()[1 * 4 + c] == e.E.values()[0 * 4 + c]);
    CHECK(rows.values()[2 * 4 + c] == e.E.values()[3 * 4 + c]);
  }
}

namespace {

// Finite differences through a fresh copy of the computation for one scalar.
template <typename Fn>
void fd_check_param(Tensor param, const Fn& rebuild_loss) {
  Tensor loss = rebuild_loss();
  backward(loss);
  const std::vector<double> grad = param.grad();
  const double h = 1e-5;
  for (std::size_t i = 0; i < param.numel(); ++i) {
    const double keep = param.values()[i];
    param.values()[i] = keep + h;
    const double fp = rebuild_loss().item();
    param.values()[i] = keep - h;
    const double fm = rebuild_loss().item();
    param.values()[i] = keep;
    const double fd = (fp - fm) / (2 * h);
    const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-4});
    INFO("element ", i, ": autodiff ", grad[i], " vs fd ", fd);
    CHECK(std::abs(grad[i] - fd) / denom <= 1e-4);
  }
}

}  // namespace

TEST_CASE("gru_step gradients match finite differences") {
  Rng rng(6);
  GruParams p = GruParams::create(3, 2, WeightInit::Normal, 0.4, rng);
  const std::vector<double> sv{0.2, -0.4, 0.6, -0.1, 0.3, 0.9};
  const std::vector<double> xv{0.5, -0.5, 1.0, 0.25};
  auto loss = [&] {
    Tensor s = Tensor::leaf({2, 3}, sv);
    Tensor x = Tensor::leaf({2, 2}, xv);
    return sumsq(gru_step(s, x, p));
  };
  for (Tensor t : {p.W_f, p.b_f, p.W_r, p.b_r, p.W_s, p.b_s}) {
    t.zero_grad();
    fd_check_param(t, loss);
  }
}

TEST_CASE("lstm_step gradients match finite differences") {
  Rng rng(7);
  LstmParams p = LstmParams::create(3, 2, WeightInit::Normal, 0.4, rng);
  const std::vector<double> hv{0.2, -0.4, 0.6};
  const std::vector<double> cv{-0.3, 0.1, 0.5};
  const std::vector<double> xv{0.5, -0.5};
  auto loss = [&] {
    Tensor h = Tensor::leaf({1, 3}, hv);
    Tensor c = Tensor::leaf({1, 3}, cv);
    Tensor x = Tensor::leaf({1, 2}, xv);
    auto [h2, c2] = lstm_step(h, c, x, p);
    return add(sumsq(h2), sumsq(c2));
  };
  for (Tensor t : {p.W_f, p.b_f, p.W_i, p.b_i, p.W_o, p.b_o, p.W_c, p.b_c}) {
    t.zero_grad();
    fd_check_param(t, loss);
  }
}

TEST_CASE("rnn_unroll gradients match finite differences over T=4") {
  Rng rng(8);
  GruParams p = GruParams::create(3, 2, WeightInit::Normal, 0.4, rng);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> seq(4 * 2);
  for (double& v : seq) v = u(rng);
  auto loss = [&] {
    Tensor inputs = Tensor::leaf({4, 2}, seq);
    Tensor init = repeat_rows(p.s0, 1);
    return sumsq(rnn_unroll(inputs, init, p));
  };
  for (Tensor t : {p.W_f, p.W_r, p.W_s, p.b_s, p.s0}) {
    t.zero_grad();
    fd_check_param(t, loss);
  }
  Tensor states = rnn_unroll(Tensor::leaf({4, 2}, seq), repeat_rows(p.s0, 1), p);
  CHECK(states.shape() == Shape{4, 3});
}
