#include "caplab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "caplab/kernels.hpp"

namespace caplab {

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

namespace {

void check_positive_dims(const Shape& s) {
  for (std::size_t d : s)
    if (d == 0) throw std::invalid_argument("tensor dimension must be positive, got shape " + shape_str(s));
}

std::shared_ptr<TensorNode> make_node(Shape shape, std::vector<double> values,
                                      std::vector<std::shared_ptr<TensorNode>> parents,
                                      const char* op) {
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  n->parents = std::move(parents);
  n->op = op;
  return n;
}

}  // namespace

Tensor Tensor::leaf(Shape shape, std::vector<double> values) {
  check_positive_dims(shape);
  if (shape_numel(shape) != values.size())
    throw std::invalid_argument("leaf value count " + std::to_string(values.size()) +
                                " does not match shape " + shape_str(shape));
  return Tensor(make_node(std::move(shape), std::move(values), {}, "leaf"));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double v) {
  check_positive_dims(shape);
  std::vector<double> vals(shape_numel(shape), v);
  return Tensor(make_node(std::move(shape), std::move(vals), {}, "leaf"));
}

Tensor Tensor::scalar(double v) { return leaf({1}, {v}); }

const std::vector<double>& Tensor::grad() const {
  node_->ensure_grad();
  return node_->grad;
}

double Tensor::item() const {
  if (numel() != 1) throw std::logic_error("item() on non-scalar tensor " + shape_str(shape()));
  return node_->values[0];
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.shape()[1] != b.shape()[0])
    throw std::invalid_argument("matmul shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> out(m * n, 0.0);
  gemm_parallel(a.values().data(), b.values().data(), out.data(), m, k, n);
  auto an = a.node();
  auto bn = b.node();
  auto node = make_node({m, n}, std::move(out), {an, bn}, "matmul");
  node->backprop = [an, bn, m, k, n](TensorNode& self) {
    an->ensure_grad();
    bn->ensure_grad();
    // dA += dC * B^T ; dB += A^T * dC
    gemm_a_bt_parallel(self.grad.data(), bn->values.data(), an->grad.data(), m, n, k);
    gemm_at_b_parallel(an->values.data(), self.grad.data(), bn->grad.data(), k, m, n);
  };
  return Tensor(node);
}

Tensor elementwise(const Tensor& a, const Tensor& b, Elementwise op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument("elementwise shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const std::size_t n = a.numel();
  std::vector<double> out(n);
  const auto& av = a.values();
  const auto& bv = b.values();
  switch (op) {
    case Elementwise::Add: for (std::size_t i = 0; i < n; ++i) out[i] = av[i] + bv[i]; break;
    case Elementwise::Sub: for (std::size_t i = 0; i < n; ++i) out[i] = av[i] - bv[i]; break;
    case Elementwise::Mul: for (std::size_t i = 0; i < n; ++i) out[i] = av[i] * bv[i]; break;
  }
  auto an = a.node();
  auto bn = b.node();
  auto node = make_node(a.shape(), std::move(out), {an, bn}, "elementwise");
  node->backprop = [an, bn, op, n](TensorNode& self) {
    an->ensure_grad();
    bn->ensure_grad();
    for (std::size_t i = 0; i < n; ++i) {
      const double g = self.grad[i];
      switch (op) {
        case Elementwise::Add: an->grad[i] += g; bn->grad[i] += g; break;
        case Elementwise::Sub: an->grad[i] += g; bn->grad[i] -= g; break;
        case Elementwise::Mul:
          an->grad[i] += g * bn->values[i];
          bn->grad[i] += g * an->values[i];
          break;
      }
    }
  };
  return Tensor(node);
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(a, b, Elementwise::Add); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(a, b, Elementwise::Sub); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(a, b, Elementwise::Mul); }

Tensor add_scalar(const Tensor& a, double c) {
  std::vector<double> out(a.values());
  for (double& v : out) v += c;
  auto an = a.node();
  auto node = make_node(a.shape(), std::move(out), {an}, "add_scalar");
  node->backprop = [an](TensorNode& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
  };
  return Tensor(node);
}

Tensor mul_scalar(const Tensor& a, double c) {
  std::vector<double> out(a.values());
  for (double& v : out) v *= c;
  auto an = a.node();
  auto node = make_node(a.shape(), std::move(out), {an}, "mul_scalar");
  node->backprop = [an, c](TensorNode& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += c * self.grad[i];
  };
  return Tensor(node);
}

Tensor rsub_scalar(double c, const Tensor& a) {
  std::vector<double> out(a.numel());
  const auto& av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c - av[i];
  auto an = a.node();
  auto node = make_node(a.shape(), std::move(out), {an}, "rsub_scalar");
  node->backprop = [an](TensorNode& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] -= self.grad[i];
  };
  return Tensor(node);
}

Tensor add_rowvec(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 1 || a.shape()[1] != b.shape()[0])
    throw std::invalid_argument("add_rowvec shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  std::vector<double> out(m * n);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = av[i * n + j] + bv[j];
  auto an = a.node();
  auto bn = b.node();
  auto node = make_node(a.shape(), std::move(out), {an, bn}, "add_rowvec");
  node->backprop = [an, bn, m, n](TensorNode& self) {
    an->ensure_grad();
    bn->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double g = self.grad[i * n + j];
        an->grad[i * n + j] += g;
        bn->grad[j] += g;
      }
  };
  return Tensor(node);
}

Tensor concat(const Tensor& a, const Tensor& b, std::size_t axis) {
  if (a.ndim() != b.ndim() || axis >= a.ndim())
    throw std::invalid_argument("concat rank/axis mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  for (std::size_t d = 0; d < a.ndim(); ++d)
    if (d != axis && a.shape()[d] != b.shape()[d])
      throw std::invalid_argument("concat shape mismatch on axis " + std::to_string(d) + ": " +
                                  shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Shape out_shape = a.shape();
  out_shape[axis] += b.shape()[axis];
  // outer = product of dims before axis, inner = product after
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= a.shape()[d];
  for (std::size_t d = axis + 1; d < a.ndim(); ++d) inner *= a.shape()[d];
  const std::size_t wa = a.shape()[axis] * inner, wb = b.shape()[axis] * inner;
  std::vector<double> out(shape_numel(out_shape));
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(av.data() + o * wa, wa, out.data() + o * (wa + wb));
    std::copy_n(bv.data() + o * wb, wb, out.data() + o * (wa + wb) + wa);
  }
  auto an = a.node();
  auto bn = b.node();
  auto node = make_node(std::move(out_shape), std::move(out), {an, bn}, "concat");
  node->backprop = [an, bn, outer, wa, wb](TensorNode& self) {
    an->ensure_grad();
    bn->ensure_grad();
    for (std::size_t o = 0; o < outer; ++o) {
      const double* g = self.grad.data() + o * (wa + wb);
      for (std::size_t i = 0; i < wa; ++i) an->grad[o * wa + i] += g[i];
      for (std::size_t i = 0; i < wb; ++i) bn->grad[o * wb + i] += g[wa + i];
    }
  };
  return Tensor(node);
}

Tensor activation(const Tensor& x, Activation kind) {
  const std::size_t n = x.numel();
  std::vector<double> out(n);
  const auto& xv = x.values();
  switch (kind) {
    case Activation::Identity: out = xv; break;
    case Activation::Sigmoid:
      for (std::size_t i = 0; i < n; ++i) out[i] = 1.0 / (1.0 + std::exp(-xv[i]));
      break;
    case Activation::Tanh:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(xv[i]);
      break;
    case Activation::Relu:
      for (std::size_t i = 0; i < n; ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
      break;
  }
  auto xn = x.node();
  auto node = make_node(x.shape(), std::move(out), {xn}, "activation");
  node->backprop = [xn, kind, n](TensorNode& self) {
    xn->ensure_grad();
    for (std::size_t i = 0; i < n; ++i) {
      const double y = self.values[i];
      double d = 1.0;
      switch (kind) {
        case Activation::Identity: d = 1.0; break;
        case Activation::Sigmoid: d = y * (1.0 - y); break;
        case Activation::Tanh: d = 1.0 - y * y; break;
        case Activation::Relu: d = xn->values[i] > 0.0 ? 1.0 : 0.0; break;
      }
      xn->grad[i] += d * self.grad[i];
    }
  };
  return Tensor(node);
}

Tensor softmax(const Tensor& x) {
  const std::size_t cols = x.shape().back();
  const std::size_t rows = x.numel() / cols;
  std::vector<double> out(x.numel());
  const auto& xv = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * cols;
    double* o = out.data() + r * cols;
    double mx = in[0];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, in[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      o[j] = std::exp(in[j] - mx);
      z += o[j];
    }
    for (std::size_t j = 0; j < cols; ++j) o[j] /= z;
  }
  auto xn = x.node();
  auto node = make_node(x.shape(), std::move(out), {xn}, "softmax");
  node->backprop = [xn, rows, cols](TensorNode& self) {
    xn->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.values.data() + r * cols;
      const double* g = self.grad.data() + r * cols;
      double dot = 0.0;
      for (std::size_t j = 0; j < cols; ++j) dot += y[j] * g[j];
      for (std::size_t j = 0; j < cols; ++j) xn->grad[r * cols + j] += y[j] * (g[j] - dot);
    }
  };
  return Tensor(node);
}

Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw std::invalid_argument("dropout rate out of range: " + std::to_string(rate));
  if (!training || rate == 0.0) return x;
  const std::size_t n = x.numel();
  const double keep = 1.0 - rate;
  // inverted dropout: survivors scaled at train time, inference is identity
  auto mask = std::make_shared<std::vector<double>>(n);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<double> out(n);
  const auto& xv = x.values();
  for (std::size_t i = 0; i < n; ++i) {
    (*mask)[i] = uni(rng) < rate ? 0.0 : 1.0 / keep;
    out[i] = xv[i] * (*mask)[i];
  }
  auto xn = x.node();
  auto node = make_node(x.shape(), std::move(out), {xn}, "dropout");
  node->backprop = [xn, mask, n](TensorNode& self) {
    xn->ensure_grad();
    for (std::size_t i = 0; i < n; ++i) xn->grad[i] += self.grad[i] * (*mask)[i];
  };
  return Tensor(node);
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  auto xn = x.node();
  auto node = make_node({1}, {s}, {xn}, "sum");
  node->backprop = [xn](TensorNode& self) {
    xn->ensure_grad();
    const double g = self.grad[0];
    for (double& gv : xn->grad) gv += g;
  };
  return Tensor(node);
}

Tensor sumsq(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v * v;
  auto xn = x.node();
  auto node = make_node({1}, {s}, {xn}, "sumsq");
  node->backprop = [xn](TensorNode& self) {
    xn->ensure_grad();
    const double g = self.grad[0];
    for (std::size_t i = 0; i < xn->values.size(); ++i) xn->grad[i] += 2.0 * xn->values[i] * g;
  };
  return Tensor(node);
}

Tensor pick(const Tensor& x, std::size_t flat_index) {
  if (flat_index >= x.numel())
    throw std::out_of_range("pick index " + std::to_string(flat_index) + " out of range for " + shape_str(x.shape()));
  auto xn = x.node();
  auto node = make_node({1}, {x.values()[flat_index]}, {xn}, "pick");
  node->backprop = [xn, flat_index](TensorNode& self) {
    xn->ensure_grad();
    xn->grad[flat_index] += self.grad[0];
  };
  return Tensor(node);
}

Tensor gather_rows(const Tensor& table, const std::vector<int>& indices) {
  if (table.ndim() != 2) throw std::invalid_argument("gather_rows expects a 2-D table");
  const std::size_t v = table.shape()[0], d = table.shape()[1];
  for (int ix : indices)
    if (ix < 0 || static_cast<std::size_t>(ix) >= v)
      throw std::out_of_range("gather_rows index " + std::to_string(ix) + " out of range for table with " +
                              std::to_string(v) + " rows");
  const std::size_t n = indices.size();
  std::vector<double> out(n * d);
  const auto& tv = table.values();
  for (std::size_t i = 0; i < n; ++i)
    std::copy_n(tv.data() + static_cast<std::size_t>(indices[i]) * d, d, out.data() + i * d);
  auto tn = table.node();
  auto idx = indices;
  auto node = make_node({n, d}, std::move(out), {tn}, "gather_rows");
  node->backprop = [tn, idx, d](TensorNode& self) {
    tn->ensure_grad();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      double* row = tn->grad.data() + static_cast<std::size_t>(idx[i]) * d;
      const double* g = self.grad.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) row[j] += g[j];
    }
  };
  return Tensor(node);
}

Tensor repeat_rows(const Tensor& row, std::size_t count) {
  const std::size_t n = row.numel();
  if (row.ndim() > 2 || (row.ndim() == 2 && row.shape()[0] != 1))
    throw std::invalid_argument("repeat_rows expects a single row, got " + shape_str(row.shape()));
  std::vector<double> out(count * n);
  for (std::size_t i = 0; i < count; ++i)
    std::copy_n(row.values().data(), n, out.data() + i * n);
  auto rn = row.node();
  auto node = make_node({count, n}, std::move(out), {rn}, "repeat_rows");
  node->backprop = [rn, count, n](TensorNode& self) {
    rn->ensure_grad();
    for (std::size_t i = 0; i < count; ++i)
      for (std::size_t j = 0; j < n; ++j) rn->grad[j] += self.grad[i * n + j];
  };
  return Tensor(node);
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  if (x.ndim() != 2 || begin >= end || end > x.shape()[0])
    throw std::invalid_argument("slice_rows [" + std::to_string(begin) + "," + std::to_string(end) +
                                ") invalid for " + shape_str(x.shape()));
  const std::size_t n = x.shape()[1], rows = end - begin;
  std::vector<double> out(rows * n);
  std::copy_n(x.values().data() + begin * n, rows * n, out.data());
  auto xn = x.node();
  auto node = make_node({rows, n}, std::move(out), {xn}, "slice_rows");
  node->backprop = [xn, begin, rows, n](TensorNode& self) {
    xn->ensure_grad();
    for (std::size_t i = 0; i < rows * n; ++i) xn->grad[begin * n + i] += self.grad[i];
  };
  return Tensor(node);
}

Tensor l2_normalize_rows(const Tensor& x) {
  const std::size_t cols = x.shape().back();
  const std::size_t rows = x.numel() / cols;
  std::vector<double> out(x.numel());
  auto norms = std::make_shared<std::vector<double>>(rows);
  const auto& xv = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += xv[r * cols + j] * xv[r * cols + j];
    const double nrm = std::sqrt(s);
    if (nrm == 0.0) throw std::invalid_argument("l2_normalize_rows: zero row");
    (*norms)[r] = nrm;
    for (std::size_t j = 0; j < cols; ++j) out[r * cols + j] = xv[r * cols + j] / nrm;
  }
  auto xn = x.node();
  auto node = make_node(x.shape(), std::move(out), {xn}, "l2_normalize_rows");
  node->backprop = [xn, norms, rows, cols](TensorNode& self) {
    xn->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.values.data() + r * cols;
      const double* g = self.grad.data() + r * cols;
      double dot = 0.0;
      for (std::size_t j = 0; j < cols; ++j) dot += y[j] * g[j];
      const double nrm = (*norms)[r];
      for (std::size_t j = 0; j < cols; ++j)
        xn->grad[r * cols + j] += (g[j] - y[j] * dot) / nrm;
    }
  };
  return Tensor(node);
}

Tensor masked_nll_sum(const Tensor& probs, const std::vector<int>& targets,
                      const std::vector<double>& mask) {
  if (probs.ndim() != 2) throw std::invalid_argument("masked_nll_sum expects 2-D probabilities");
  const std::size_t n = probs.shape()[0], v = probs.shape()[1];
  if (targets.size() != n || mask.size() != n)
    throw std::invalid_argument("masked_nll_sum target/mask length mismatch");
  double s = 0.0;
  const auto& pv = probs.values();
  for (std::size_t i = 0; i < n; ++i) {
    if (mask[i] == 0.0) continue;
    s -= mask[i] * std::log(pv[i * v + static_cast<std::size_t>(targets[i])]);
  }
  auto pn = probs.node();
  auto tgt = targets;
  auto msk = mask;
  auto node = make_node({1}, {s}, {pn}, "masked_nll_sum");
  node->backprop = [pn, tgt, msk, v](TensorNode& self) {
    pn->ensure_grad();
    const double g = self.grad[0];
    for (std::size_t i = 0; i < tgt.size(); ++i) {
      if (msk[i] == 0.0) continue;
      const std::size_t ix = i * v + static_cast<std::size_t>(tgt[i]);
      pn->grad[ix] -= g * msk[i] / pn->values[ix];
    }
  };
  return Tensor(node);
}

void backward(const Tensor& root) {
  if (root.numel() != 1)
    throw std::logic_error("backward requires a scalar root, got " + shape_str(root.shape()));
  // iterative post-order DFS for reverse topological order
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> visited;
  std::vector<std::pair<TensorNode*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorNode* p = node->parents[next++].get();
      if (visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  // non-leaf grads are per-sweep scratch; leaf grads persist and accumulate
  for (TensorNode* n : order)
    if (!n->parents.empty()) n->grad.assign(n->values.size(), 0.0);
  root.node()->ensure_grad();
  root.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backprop) (*it)->backprop(**it);
}

}  // namespace caplab
