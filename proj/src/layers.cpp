#include "caplab/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace caplab {

Tensor init_weights(const Shape& shape, WeightInit method, double max_abs, Rng& rng) {
  if (max_abs <= 0.0) throw std::invalid_argument("init_weights: max_abs must be positive");
  for (std::size_t d : shape)
    if (d == 0) throw std::invalid_argument("init_weights: non-positive dimension");
  double stddev = 1.0;
  if (method == WeightInit::Xavier) {
    const std::size_t fan_in = shape[0];
    const std::size_t fan_out = shape.size() > 1 ? shape[1] : shape[0];
    stddev = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
  }
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> vals(shape_numel(shape));
  for (double& v : vals) v = std::clamp(dist(rng), -max_abs, max_abs);
  return Tensor::leaf(shape, std::move(vals));
}

DenseParams DenseParams::create(std::size_t in, std::size_t out, Activation act,
                                WeightInit method, double max_abs, Rng& rng) {
  DenseParams p;
  p.W = init_weights({in, out}, method, max_abs, rng);
  p.b = Tensor::zeros({out});
  p.act = act;
  return p;
}

EmbeddingParams EmbeddingParams::create(std::size_t vocab, std::size_t embed,
                                        WeightInit method, double max_abs, Rng& rng) {
  return EmbeddingParams{init_weights({vocab, embed}, method, max_abs, rng)};
}

GruParams GruParams::create(std::size_t state, std::size_t input,
                            WeightInit method, double max_abs, Rng& rng) {
  GruParams p;
  p.W_f = init_weights({state + input, state}, method, max_abs, rng);
  p.b_f = Tensor::zeros({state});
  p.W_r = init_weights({state + input, state}, method, max_abs, rng);
  p.b_r = Tensor::zeros({state});
  p.W_s = init_weights({state + input, state}, method, max_abs, rng);
  p.b_s = Tensor::zeros({state});
  p.s0 = init_weights({state}, method, max_abs, rng);
  return p;
}

LstmParams LstmParams::create(std::size_t state, std::size_t input,
                              WeightInit method, double max_abs, Rng& rng) {
  LstmParams p;
  p.W_f = init_weights({state + input, state}, method, max_abs, rng);
  p.b_f = Tensor::zeros({state});
  p.W_i = init_weights({state + input, state}, method, max_abs, rng);
  p.b_i = Tensor::zeros({state});
  p.W_o = init_weights({state + input, state}, method, max_abs, rng);
  p.b_o = Tensor::zeros({state});
  p.W_c = init_weights({state + input, state}, method, max_abs, rng);
  p.b_c = Tensor::zeros({state});
  p.h0 = init_weights({state}, method, max_abs, rng);
  p.c0 = init_weights({state}, method, max_abs, rng);
  return p;
}

Tensor dense(const Tensor& x, const DenseParams& p) {
  return activation(add_rowvec(matmul(x, p.W), p.b), p.act);
}

Tensor embed(const std::vector<int>& indices, const EmbeddingParams& p) {
  return gather_rows(p.E, indices);
}

Tensor gru_step(const Tensor& s_prev, const Tensor& x, const GruParams& p) {
  const Tensor sx = concat(s_prev, x, 1);
  const Tensor g_f = activation(add_rowvec(matmul(sx, p.W_f), p.b_f), Activation::Sigmoid);
  const Tensor g_i = rsub_scalar(1.0, g_f);
  const Tensor g_r = activation(add_rowvec(matmul(sx, p.W_r), p.b_r), Activation::Sigmoid);
  const Tensor reset_sx = concat(mul(s_prev, g_r), x, 1);
  const Tensor cand = activation(add_rowvec(matmul(reset_sx, p.W_s), p.b_s), Activation::Tanh);
  return add(mul(g_i, cand), mul(g_f, s_prev));
}

std::pair<Tensor, Tensor> lstm_step(const Tensor& h_prev, const Tensor& c_prev,
                                    const Tensor& x, const LstmParams& p) {
  const Tensor hx = concat(h_prev, x, 1);
  const Tensor g_f = activation(add_rowvec(matmul(hx, p.W_f), p.b_f), Activation::Sigmoid);
  const Tensor g_i = activation(add_rowvec(matmul(hx, p.W_i), p.b_i), Activation::Sigmoid);
  const Tensor g_o = activation(add_rowvec(matmul(hx, p.W_o), p.b_o), Activation::Sigmoid);
  const Tensor cand = activation(add_rowvec(matmul(hx, p.W_c), p.b_c), Activation::Tanh);
  const Tensor c = add(mul(g_i, cand), mul(g_f, c_prev));
  const Tensor h = mul(g_o, activation(c, Activation::Tanh));
  return {h, c};
}

Tensor rnn_unroll(const Tensor& inputs, const Tensor& init, const GruParams& p) {
  if (inputs.ndim() != 2 || inputs.shape()[0] == 0)
    throw std::invalid_argument("rnn_unroll: expected a nonempty [T x input] sequence");
  const std::size_t t_len = inputs.shape()[0];
  Tensor s = init.ndim() == 1 ? repeat_rows(init, 1) : init;
  Tensor out;
  for (std::size_t t = 0; t < t_len; ++t) {
    s = gru_step(s, slice_rows(inputs, t, t + 1), p);
    out = t == 0 ? s : concat(out, s, 0);
  }
  return out;
}

}  // namespace caplab
