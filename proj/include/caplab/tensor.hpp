#ifndef CAPLAB_TENSOR_HPP
#define CAPLAB_TENSOR_HPP

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace caplab {

using Shape = std::vector<std::size_t>;
using Rng = std::mt19937_64;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorNode {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // allocated lazily; accumulates across backward calls
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backprop;  // adds into parents' grad
  const char* op = "leaf";

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
};

// Value-semantics handle on a shared graph node. Copies alias the node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}

  static Tensor leaf(Shape shape, std::vector<double> values);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor scalar(double v);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t numel() const { return node_->values.size(); }
  std::size_t ndim() const { return node_->shape.size(); }
  const std::vector<double>& values() const { return node_->values; }
  std::vector<double>& values() { return node_->values; }
  const std::vector<double>& grad() const;
  double item() const;
  void zero_grad() { node_->grad.assign(node_->values.size(), 0.0); }
  const std::shared_ptr<TensorNode>& node() const { return node_; }

 private:
  std::shared_ptr<TensorNode> node_;
};

enum class Activation { Identity, Sigmoid, Tanh, Relu };
enum class Elementwise { Add, Sub, Mul };

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor elementwise(const Tensor& a, const Tensor& b, Elementwise op);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);
Tensor rsub_scalar(double c, const Tensor& a);  // c - a
// b (1-D, length n) added to every row of a [m x n]
Tensor add_rowvec(const Tensor& a, const Tensor& b);
Tensor concat(const Tensor& a, const Tensor& b, std::size_t axis);
Tensor activation(const Tensor& x, Activation kind);
// softmax over the last axis, stabilised by row-max subtraction
Tensor softmax(const Tensor& x);
Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng);
Tensor sum(const Tensor& x);
Tensor sumsq(const Tensor& x);
Tensor pick(const Tensor& x, std::size_t flat_index);
// rows of table [v x d] gathered by index; backward scatters additively
Tensor gather_rows(const Tensor& table, const std::vector<int>& indices);
Tensor repeat_rows(const Tensor& row, std::size_t count);  // [n] or [1 x n] -> [count x n]
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor l2_normalize_rows(const Tensor& x);
// -sum_i mask[i] * ln x[i, target[i]]  (scalar); divisor applied by the caller
Tensor masked_nll_sum(const Tensor& probs, const std::vector<int>& targets,
                      const std::vector<double>& mask);

// Reverse-mode sweep from a scalar root. Visits each reachable node once in
// reverse topological order; leaf gradients accumulate additively.
void backward(const Tensor& root);

}  // namespace caplab

#endif
