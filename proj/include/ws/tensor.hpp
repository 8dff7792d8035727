#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "ws/rng.hpp"

namespace ws::nn {

inline int64_t numel_of(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor: non-positive dimension");
    n *= d;
  }
  return n;
}

inline std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// One vertex of the computation graph. Nodes are created in topological
// order, so the monotone `seq` id doubles as a deterministic reverse
// traversal order for backward passes.
struct Node {
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  uint64_t seq = 0;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backfn;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

inline uint64_t next_seq() {
  static std::atomic<uint64_t> counter{0};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

// Value-semantics handle to a graph node. Copies share the node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor from(std::vector<int> shape, std::vector<double> data, bool requires_grad = false) {
    if (static_cast<int64_t>(data.size()) != numel_of(shape)) {
      throw std::invalid_argument("Tensor::from: data length does not match shape " +
                                  shape_str(shape));
    }
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    n->seq = next_seq();
    return Tensor(std::move(n));
  }

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
    const auto n = numel_of(shape);
    return from(std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0), requires_grad);
  }

  static Tensor full(std::vector<int> shape, double v, bool requires_grad = false) {
    const auto n = numel_of(shape);
    return from(std::move(shape), std::vector<double>(static_cast<size_t>(n), v), requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->shape; }
  int dim(size_t i) const { return node_->shape.at(i); }
  size_t ndim() const { return node_->shape.size(); }
  int64_t numel() const { return static_cast<int64_t>(node_->value.size()); }
  std::vector<double>& value() { return node_->value; }
  const std::vector<double>& value() const { return node_->value; }
  std::vector<double>& grad() { return node_->grad; }
  const std::vector<double>& grad() const { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  const std::shared_ptr<Node>& node() const { return node_; }

  double item() const {
    if (numel() != 1) throw std::invalid_argument("Tensor::item: tensor is not scalar");
    return node_->value[0];
  }

  void zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

  Tensor detach() const {
    return from(node_->shape, node_->value, false);
  }

 private:
  std::shared_ptr<Node> node_;
};

// Creates an op node; `backfn` must accumulate (+=) into parents' grads.
inline Tensor make_op(std::vector<int> shape, std::vector<double> value,
                      std::vector<Tensor> parents, std::function<void(Node&)> backfn) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  bool any = false;
  for (const auto& p : parents) {
    any = any || p.requires_grad();
    n->parents.push_back(p.node());
  }
  n->requires_grad = any;
  if (any) n->backfn = std::move(backfn);
  n->seq = next_seq();
  return Tensor(std::move(n));
}

// Reverse-mode sweep from a scalar loss: seed 1.0, visit the reachable
// subgraph in descending creation order (a topological order), accumulate
// parameter gradients. Repeated calls keep accumulating until zero_grad.
inline void backward(const Tensor& loss) {
  if (loss.numel() != 1) throw std::invalid_argument("backward: loss must be scalar");
  if (!loss.requires_grad()) {
    throw std::invalid_argument("backward: loss does not depend on any tracked tensor");
  }
  std::vector<Node*> nodes;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack = {loss.node().get()};
  seen.insert(stack[0]);
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    nodes.push_back(n);
    for (const auto& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  std::sort(nodes.begin(), nodes.end(), [](Node* a, Node* b) { return a->seq > b->seq; });
  for (Node* n : nodes) n->ensure_grad();
  // Each call propagates a fresh unit seed: op-node grads are scratch space
  // for this pass, while leaf grads persist and accumulate across calls.
  for (Node* n : nodes) {
    if (n->backfn) n->grad.assign(n->grad.size(), 0.0);
  }
  loss.node()->grad[0] += 1.0;
  for (Node* n : nodes) {
    if (n->backfn) n->backfn(*n);
  }
}

namespace detail {

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
  }
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "add");
  std::vector<double> out(a.value().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  auto an = a.node();
  auto bn = b.node();
  return make_op(a.shape(), std::move(out), {a, b}, [an, bn](Node& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i];
    }
  });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "sub");
  std::vector<double> out(a.value().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  auto an = a.node();
  auto bn = b.node();
  return make_op(a.shape(), std::move(out), {a, b}, [an, bn](Node& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] -= self.grad[i];
    }
  });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "mul");
  std::vector<double> out(a.value().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  auto an = a.node();
  auto bn = b.node();
  return make_op(a.shape(), std::move(out), {a, b}, [an, bn](Node& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * bn->value[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i] * an->value[i];
    }
  });
}

inline Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.value().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * s;
  auto an = a.node();
  return make_op(a.shape(), std::move(out), {a}, [an, s](Node& self) {
    an->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * s;
  });
}

inline Tensor sum_all(const Tensor& a) {
  double s = 0.0;
  for (double v : a.value()) s += v;
  auto an = a.node();
  return make_op({1}, {s}, {a}, [an](Node& self) {
    an->ensure_grad();
    for (size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += self.grad[0];
  });
}

// 2D matrix product [m,k] × [k,n] → [m,n].
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
  const auto& av = a.value();
  const auto& bv = b.value();
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      const double av_ip = av[i * k + p];
      if (av_ip == 0.0) continue;
      for (int j = 0; j < n; ++j) out[i * n + j] += av_ip * bv[p * n + j];
    }
  }
  auto an = a.node();
  auto bn = b.node();
  return make_op({m, n}, std::move(out), {a, b}, [an, bn, m, k, n](Node& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
          const double g = self.grad[i * n + j];
          if (g == 0.0) continue;
          for (int p = 0; p < k; ++p) an->grad[i * k + p] += g * bn->value[p * n + j];
        }
      }
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
          const double av_ip = an->value[i * k + p];
          if (av_ip == 0.0) continue;
          for (int j = 0; j < n; ++j) bn->grad[p * n + j] += av_ip * self.grad[i * n + j];
        }
      }
    }
  });
}

// Batched matrix product [batch,m,k] × [batch,k,n] → [batch,m,n].
inline Tensor bmm(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 3 || b.ndim() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1)) {
    throw std::invalid_argument("bmm: incompatible shapes " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
  const int bs = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  std::vector<double> out(static_cast<size_t>(bs) * m * n, 0.0);
  const auto& av = a.value();
  const auto& bv = b.value();
  for (int t = 0; t < bs; ++t) {
    const double* ap = av.data() + static_cast<size_t>(t) * m * k;
    const double* bp = bv.data() + static_cast<size_t>(t) * k * n;
    double* op = out.data() + static_cast<size_t>(t) * m * n;
    for (int i = 0; i < m; ++i) {
      for (int p = 0; p < k; ++p) {
        const double a_ip = ap[i * k + p];
        if (a_ip == 0.0) continue;
        for (int j = 0; j < n; ++j) op[i * n + j] += a_ip * bp[p * n + j];
      }
    }
  }
  auto an = a.node();
  auto bn = b.node();
  return make_op({bs, m, n}, std::move(out), {a, b}, [an, bn, bs, m, k, n](Node& self) {
    for (int t = 0; t < bs; ++t) {
      const double* gp = self.grad.data() + static_cast<size_t>(t) * m * n;
      if (an->requires_grad) {
        an->ensure_grad();
        double* agp = an->grad.data() + static_cast<size_t>(t) * m * k;
        const double* bp = bn->value.data() + static_cast<size_t>(t) * k * n;
        for (int i = 0; i < m; ++i) {
          for (int j = 0; j < n; ++j) {
            const double g = gp[i * n + j];
            if (g == 0.0) continue;
            for (int p = 0; p < k; ++p) agp[i * k + p] += g * bp[p * n + j];
          }
        }
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        double* bgp = bn->grad.data() + static_cast<size_t>(t) * k * n;
        const double* ap = an->value.data() + static_cast<size_t>(t) * m * k;
        for (int i = 0; i < m; ++i) {
          for (int p = 0; p < k; ++p) {
            const double a_ip = ap[i * k + p];
            if (a_ip == 0.0) continue;
            for (int j = 0; j < n; ++j) bgp[p * n + j] += a_ip * gp[i * n + j];
          }
        }
      }
    }
  });
}

inline Tensor reshape(const Tensor& a, std::vector<int> shape) {
  if (numel_of(shape) != a.numel()) {
    throw std::invalid_argument("reshape: element count mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(shape));
  }
  auto an = a.node();
  return make_op(std::move(shape), a.value(), {a}, [an](Node& self) {
    an->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
  });
}

namespace detail {

inline std::vector<int64_t> strides_of(const std::vector<int>& shape) {
  std::vector<int64_t> st(shape.size());
  int64_t acc = 1;
  for (int i = static_cast<int>(shape.size()) - 1; i >= 0; --i) {
    st[i] = acc;
    acc *= shape[i];
  }
  return st;
}

}  // namespace detail

// Reorders axes: out dimension i is input dimension axes[i].
inline Tensor permute(const Tensor& a, const std::vector<int>& axes) {
  const size_t nd = a.ndim();
  if (axes.size() != nd) throw std::invalid_argument("permute: axes rank mismatch");
  std::vector<bool> used(nd, false);
  std::vector<int> out_shape(nd);
  for (size_t i = 0; i < nd; ++i) {
    const int ax = axes[i];
    if (ax < 0 || ax >= static_cast<int>(nd) || used[ax]) {
      throw std::invalid_argument("permute: bad axes");
    }
    used[ax] = true;
    out_shape[i] = a.dim(ax);
  }
  const auto in_strides = detail::strides_of(a.shape());
  const auto out_strides = detail::strides_of(out_shape);
  const int64_t n = a.numel();
  std::vector<double> out(static_cast<size_t>(n));
  // Map each output linear index to its source index.
  std::vector<int64_t> src_stride_for_out(nd);
  for (size_t i = 0; i < nd; ++i) src_stride_for_out[i] = in_strides[axes[i]];
  for (int64_t o = 0; o < n; ++o) {
    int64_t rem = o, src = 0;
    for (size_t i = 0; i < nd; ++i) {
      const int64_t idx = rem / out_strides[i];
      rem -= idx * out_strides[i];
      src += idx * src_stride_for_out[i];
    }
    out[static_cast<size_t>(o)] = a.value()[static_cast<size_t>(src)];
  }
  auto an = a.node();
  return make_op(std::move(out_shape), std::move(out), {a},
                 [an, out_strides, src_stride_for_out, nd, n](Node& self) {
                   an->ensure_grad();
                   for (int64_t o = 0; o < n; ++o) {
                     int64_t rem = o, src = 0;
                     for (size_t i = 0; i < nd; ++i) {
                       const int64_t idx = rem / out_strides[i];
                       rem -= idx * out_strides[i];
                       src += idx * src_stride_for_out[i];
                     }
                     an->grad[static_cast<size_t>(src)] += self.grad[static_cast<size_t>(o)];
                   }
                 });
}

// Contiguous slice [start, start+len) along one dimension.
inline Tensor slice(const Tensor& a, int dim, int start, int len) {
  if (dim < 0 || dim >= static_cast<int>(a.ndim())) throw std::invalid_argument("slice: bad dim");
  if (start < 0 || len <= 0 || start + len > a.dim(dim)) {
    throw std::invalid_argument("slice: bad range");
  }
  std::vector<int> out_shape = a.shape();
  out_shape[dim] = len;
  const auto in_strides = detail::strides_of(a.shape());
  int64_t outer = 1;
  for (int i = 0; i < dim; ++i) outer *= a.dim(i);
  const int64_t inner = in_strides[dim];
  const int64_t in_dim = a.dim(dim);
  std::vector<double> out(static_cast<size_t>(numel_of(out_shape)));
  size_t o = 0;
  for (int64_t ou = 0; ou < outer; ++ou) {
    const double* base = a.value().data() + (ou * in_dim + start) * inner;
    for (int64_t i = 0; i < static_cast<int64_t>(len) * inner; ++i) out[o++] = base[i];
  }
  auto an = a.node();
  return make_op(std::move(out_shape), std::move(out), {a},
                 [an, outer, inner, in_dim, start, len](Node& self) {
                   an->ensure_grad();
                   size_t o = 0;
                   for (int64_t ou = 0; ou < outer; ++ou) {
                     double* base = an->grad.data() + (ou * in_dim + start) * inner;
                     for (int64_t i = 0; i < static_cast<int64_t>(len) * inner; ++i) {
                       base[i] += self.grad[o++];
                     }
                   }
                 });
}

// Concatenation along one dimension; all other dimensions must agree.
inline Tensor concat(const std::vector<Tensor>& parts, int dim) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const auto& first = parts[0].shape();
  if (dim < 0 || dim >= static_cast<int>(first.size())) {
    throw std::invalid_argument("concat: bad dim");
  }
  std::vector<int> out_shape = first;
  int total = first[dim];
  for (size_t p = 1; p < parts.size(); ++p) {
    const auto& s = parts[p].shape();
    if (s.size() != first.size()) throw std::invalid_argument("concat: rank mismatch");
    for (size_t i = 0; i < s.size(); ++i) {
      if (static_cast<int>(i) != dim && s[i] != first[i]) {
        throw std::invalid_argument("concat: shape mismatch " + shape_str(first) + " vs " +
                                    shape_str(s));
      }
    }
    total += s[dim];
  }
  out_shape[dim] = total;

  int64_t outer = 1;
  for (int i = 0; i < dim; ++i) outer *= first[i];
  int64_t inner = 1;
  for (size_t i = dim + 1; i < first.size(); ++i) inner *= first[i];

  std::vector<double> out(static_cast<size_t>(numel_of(out_shape)));
  std::vector<int> dims(parts.size());
  for (size_t p = 0; p < parts.size(); ++p) dims[p] = parts[p].dim(dim);
  for (int64_t ou = 0; ou < outer; ++ou) {
    int64_t off = 0;
    for (size_t p = 0; p < parts.size(); ++p) {
      const int64_t chunk = static_cast<int64_t>(dims[p]) * inner;
      const double* src = parts[p].value().data() + ou * chunk;
      double* dst = out.data() + (ou * total * inner) + off * inner;
      std::copy(src, src + chunk, dst);
      off += dims[p];
    }
  }
  std::vector<std::shared_ptr<Node>> pnodes;
  for (const auto& p : parts) pnodes.push_back(p.node());
  return make_op(std::move(out_shape), std::move(out), parts,
                 [pnodes, dims, outer, inner, total](Node& self) {
                   for (int64_t ou = 0; ou < outer; ++ou) {
                     int64_t off = 0;
                     for (size_t p = 0; p < pnodes.size(); ++p) {
                       const int64_t chunk = static_cast<int64_t>(dims[p]) * inner;
                       const double* src = self.grad.data() + (ou * total * inner) + off * inner;
                       if (pnodes[p]->requires_grad) {
                         pnodes[p]->ensure_grad();
                         double* dst = pnodes[p]->grad.data() + ou * chunk;
                         for (int64_t i = 0; i < chunk; ++i) dst[i] += src[i];
                       }
                       off += dims[p];
                     }
                   }
                 });
}

// ELU with α = 1: x for x > 0, eˣ − 1 otherwise.
inline Tensor elu(const Tensor& a) {
  std::vector<double> out(a.value().size());
  for (size_t i = 0; i < out.size(); ++i) {
    const double x = a.value()[i];
    out[i] = x > 0.0 ? x : std::expm1(x);
  }
  auto an = a.node();
  return make_op(a.shape(), std::move(out), {a}, [an](Node& self) {
    an->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) {
      const double x = an->value[i];
      an->grad[i] += self.grad[i] * (x > 0.0 ? 1.0 : std::exp(x));
    }
  });
}

// Numerically stable softmax along the last dimension.
inline Tensor softmax_last(const Tensor& a) {
  if (a.ndim() < 1) throw std::invalid_argument("softmax_last: rank 0");
  const int c = a.dim(a.ndim() - 1);
  const int64_t rows = a.numel() / c;
  std::vector<double> out(a.value().size());
  for (int64_t r = 0; r < rows; ++r) {
    const double* in = a.value().data() + r * c;
    double* o = out.data() + r * c;
    double mx = in[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, in[j]);
    double sum = 0.0;
    for (int j = 0; j < c; ++j) {
      o[j] = std::exp(in[j] - mx);
      sum += o[j];
    }
    for (int j = 0; j < c; ++j) o[j] /= sum;
  }
  auto an = a.node();
  return make_op(a.shape(), std::move(out), {a}, [an, rows, c](Node& self) {
    an->ensure_grad();
    for (int64_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * c;
      const double* g = self.grad.data() + r * c;
      double dot = 0.0;
      for (int j = 0; j < c; ++j) dot += g[j] * y[j];
      double* ag = an->grad.data() + r * c;
      for (int j = 0; j < c; ++j) ag[j] += y[j] * (g[j] - dot);
    }
  });
}

}  // namespace ws::nn
