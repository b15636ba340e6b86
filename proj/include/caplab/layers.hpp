#ifndef CAPLAB_LAYERS_HPP
#define CAPLAB_LAYERS_HPP

#include <utility>
#include <vector>

#include "caplab/tensor.hpp"

namespace caplab {

enum class WeightInit { Normal, Xavier };

// Unit (or Xavier-scaled) normal samples, every value clipped to
// [-max_abs, +max_abs].
Tensor init_weights(const Shape& shape, WeightInit method, double max_abs, Rng& rng);

struct DenseParams {
  Tensor W;  // [in x out]
  Tensor b;  // [out], zero-initialised
  Activation act = Activation::Identity;

  static DenseParams create(std::size_t in, std::size_t out, Activation act,
                            WeightInit method, double max_abs, Rng& rng);
  std::size_t in_size() const { return W.shape()[0]; }
  std::size_t out_size() const { return W.shape()[1]; }
};

struct EmbeddingParams {
  Tensor E;  // [vocab x embed]

  static EmbeddingParams create(std::size_t vocab, std::size_t embed,
                                WeightInit method, double max_abs, Rng& rng);
};

// Fused gate weights over the concatenated (state ++ input) vector.
// The input gate is derived as 1 - forget gate and never stored.
struct GruParams {
  Tensor W_f, b_f;  // forget gate
  Tensor W_r, b_r;  // reset gate
  Tensor W_s, b_s;  // candidate state
  Tensor s0;        // learned initial state [state]

  static GruParams create(std::size_t state, std::size_t input,
                          WeightInit method, double max_abs, Rng& rng);
  std::size_t state_size() const { return W_f.shape()[1]; }
  std::size_t input_size() const { return W_f.shape()[0] - W_f.shape()[1]; }
};

struct LstmParams {
  Tensor W_f, b_f;  // forget gate
  Tensor W_i, b_i;  // input gate
  Tensor W_o, b_o;  // output gate
  Tensor W_c, b_c;  // candidate cell
  Tensor h0, c0;    // learned initial states [state]

  static LstmParams create(std::size_t state, std::size_t input,
                           WeightInit method, double max_abs, Rng& rng);
  std::size_t state_size() const { return W_f.shape()[1]; }
  std::size_t input_size() const { return W_f.shape()[0] - W_f.shape()[1]; }
};

Tensor dense(const Tensor& x, const DenseParams& p);
Tensor embed(const std::vector<int>& indices, const EmbeddingParams& p);

// One step over a batch of rows: s_prev [B x state], x [B x input].
Tensor gru_step(const Tensor& s_prev, const Tensor& x, const GruParams& p);
std::pair<Tensor, Tensor> lstm_step(const Tensor& h_prev, const Tensor& c_prev,
                                    const Tensor& x, const LstmParams& p);

// Unrolled GRU over a [T x input] sequence; returns the [T x state] stack of
// states. Parameters are shared across steps.
Tensor rnn_unroll(const Tensor& inputs, const Tensor& init, const GruParams& p);

}  // namespace caplab

#endif
