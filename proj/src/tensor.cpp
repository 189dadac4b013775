#include "oostraj/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "oostraj/error.hpp"

namespace oostraj::ad {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::ShapeMismatch, what);
}

void require_2d(const Tensor& t, const char* op) {
  require(t.rank() == 2, std::string(op) + " expects a 2-D tensor, got " + shape_str(t.shape()));
}

/// Builds a result node. Parents and the backward rule are only kept when
/// some parent requires a gradient.
thread_local bool g_grad_enabled = true;

Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                   std::function<void(Node&)> fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  const bool needs = g_grad_enabled && std::any_of(parents.begin(), parents.end(), [](const Tensor& p) { return p.requires_grad(); });
  if (needs) {
    node->requires_grad = true;
    node->is_leaf = false;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.ptr());
    node->backward_fn = std::move(fn);
  }
  return Tensor(std::move(node));
}

/// Gradient sink for parent i, or nullptr if that parent takes no gradient.
double* sink(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  if (!p.requires_grad) return nullptr;
  p.ensure_grad();
  return p.grad.data();
}

}  // namespace

// ---------------------------------------------------------------- Tensor

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  for (auto d : shape) require(d > 0, "tensor dimensions must be positive");
  auto node = std::make_shared<Node>();
  node->data.assign(numel(shape), value);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  for (auto d : shape) require(d > 0, "tensor dimensions must be positive");
  require(numel(shape) == data.size(),
          "data length " + std::to_string(data.size()) + " does not match shape " + shape_str(shape));
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

std::size_t Tensor::rows() const { return rank() == 2 ? node_->shape[0] : 1; }
std::size_t Tensor::cols() const { return rank() == 2 ? node_->shape[1] : node_->shape.back(); }

double Tensor::item() const {
  if (size() != 1) throw Error(Errc::NotScalar, "item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

Tensor Tensor::detach() const { return from(shape(), node_->data, false); }

// ---------------------------------------------------------------- Tape

Tape Tape::build(const Tensor& root) {
  Tape tape;
  std::unordered_set<const Node*> visited;
  // Iterative post-order DFS: (node, next parent index).
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      tape.nodes_.push_back(node);
      stack.pop_back();
    }
  }
  return tape;
}

void Tape::run_backward() {
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad.size() == n->data.size()) n->backward_fn(*n);
  }
}

void backward(const Tensor& loss, double seed) {
  if (loss.size() != 1) throw Error(Errc::NotScalar, "backward() needs a one-element loss, got " + shape_str(loss.shape()));
  if (!loss.requires_grad()) return;
  Tape tape = Tape::build(loss);
  // Interior nodes start clean each pass; leaves keep accumulating.
  for (Node* n : tape.nodes()) {
    if (!n->is_leaf) n->grad.assign(n->data.size(), 0.0);
  }
  Node* root = loss.node();
  root->ensure_grad();
  root->grad[0] += seed;
  tape.run_backward();
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

// ---------------------------------------------------------------- linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  require(b.dim(0) == k, "matmul inner dimensions differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  std::vector<double> out(m * n, 0.0);
  const double* A = a.data().data();
  const double* B = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = B + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
    }
  }
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    const double* G = self.grad.data();
    const double* A = self.parents[0]->data.data();
    const double* B = self.parents[1]->data.data();
    if (double* dA = sink(self, 0)) {
      // dA = dC * B^T
      for (std::size_t i = 0; i < m; ++i) {
        const double* g = G + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = B + p * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[j] * brow[j];
          dA[i * k + p] += acc;
        }
      }
    }
    if (double* dB = sink(self, 1)) {
      // dB = A^T * dC
      for (std::size_t i = 0; i < m; ++i) {
        const double* g = G + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = A[i * k + p];
          if (aip == 0.0) continue;
          double* drow = dB + p * n;
          for (std::size_t j = 0; j < n; ++j) drow[j] += aip * g[j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_2d(a, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a.data()[i * n + j];
  return make_result({n, m}, std::move(out), {a}, [m, n](Node& self) {
    if (double* d = sink(self, 0))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) d[i * n + j] += self.grad[j * m + i];
  });
}

// ---------------------------------------------------------------- element-wise

namespace {

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape() == b.shape(),
          std::string(op) + ": shapes differ " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

template <class F, class DF>
Tensor unary(const Tensor& a, F f, DF df) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[i]);
  return make_result(a.shape(), std::move(out), {a}, [df](Node& self) {
    if (double* d = sink(self, 0)) {
      const auto& x = self.parents[0]->data;
      for (std::size_t i = 0; i < x.size(); ++i) d[i] += self.grad[i] * df(x[i], self.data[i]);
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p)
      if (double* d = sink(self, p))
        for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i];
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (double* d = sink(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i];
    if (double* d = sink(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& x = self.parents[0]->data;
    const auto& y = self.parents[1]->data;
    if (double* d = sink(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i] * y[i];
    if (double* d = sink(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i] * x[i];
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  require_2d(a, "add_row");
  const std::size_t m = a.dim(0), n = a.dim(1);
  require(row.size() == n, "add_row: bias of " + shape_str(row.shape()) + " for " + shape_str(a.shape()));
  std::vector<double> out(a.values());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += row[j];
  return make_result(a.shape(), std::move(out), {a, row}, [m, n](Node& self) {
    if (double* d = sink(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i];
    if (double* d = sink(self, 1))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) d[j] += self.grad[i * n + j];
  });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

// ---------------------------------------------------------------- reductions

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a.values()) s += x;
  return make_result({1}, {s}, {a}, [](Node& self) {
    if (double* d = sink(self, 0))
      for (std::size_t i = 0; i < self.parents[0]->data.size(); ++i) d[i] += self.grad[0];
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor row_sum(const Tensor& a) {
  require_2d(a, "row_sum");
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i] += a.data()[i * n + j];
  return make_result({m, 1}, std::move(out), {a}, [m, n](Node& self) {
    if (double* d = sink(self, 0))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) d[i * n + j] += self.grad[i];
  });
}

Tensor softmax_rows(const Tensor& x) {
  require_2d(x, "softmax_rows");
  const std::size_t m = x.dim(0), n = x.dim(1);
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = x.data().data() + i * n;
    const double mx = *std::max_element(row, row + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += (out[i * n + j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= z;
  }
  return make_result(x.shape(), std::move(out), {x}, [m, n](Node& self) {
    if (double* d = sink(self, 0)) {
      for (std::size_t i = 0; i < m; ++i) {
        const double* y = self.data.data() + i * n;
        const double* g = self.grad.data() + i * n;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += g[j] * y[j];
        for (std::size_t j = 0; j < n; ++j) d[i * n + j] += y[j] * (g[j] - dot);
      }
    }
  });
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_2d(x, "layer_norm_rows");
  const std::size_t m = x.dim(0), n = x.dim(1);
  require(gain.size() == n && bias.size() == n, "layer_norm_rows: gain/bias width must equal " + std::to_string(n));
  std::vector<double> out(m * n);
  auto xhat = std::make_shared<std::vector<double>>(m * n);
  auto inv_std = std::make_shared<std::vector<double>>(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = x.data().data() + i * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (row[j] - mu) * is;
      (*xhat)[i * n + j] = h;
      out[i * n + j] = h * gain[j] + bias[j];
    }
  }
  return make_result(x.shape(), std::move(out), {x, gain, bias}, [m, n, xhat, inv_std](Node& self) {
    const auto& g = self.parents[1]->data;
    const double* G = self.grad.data();
    if (double* dg = sink(self, 1))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) dg[j] += G[i * n + j] * (*xhat)[i * n + j];
    if (double* db = sink(self, 2))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) db[j] += G[i * n + j];
    if (double* dx = sink(self, 0)) {
      const double inv_n = 1.0 / static_cast<double>(n);
      for (std::size_t i = 0; i < m; ++i) {
        double s1 = 0.0, s2 = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double dh = G[i * n + j] * g[j];
          s1 += dh;
          s2 += dh * (*xhat)[i * n + j];
        }
        for (std::size_t j = 0; j < n; ++j) {
          const double dh = G[i * n + j] * g[j];
          dx[i * n + j] += (*inv_std)[i] * (dh - inv_n * s1 - (*xhat)[i * n + j] * inv_n * s2);
        }
      }
    }
  });
}

// ---------------------------------------------------------------- structure

Tensor reshape(const Tensor& a, Shape shape) {
  require(numel(shape) == a.size(), "reshape " + shape_str(a.shape()) + " -> " + shape_str(shape));
  return make_result(std::move(shape), a.values(), {a}, [](Node& self) {
    if (double* d = sink(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i];
  });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  require_2d(a, "slice_rows");
  const std::size_t n = a.dim(1);
  require(begin < end && end <= a.dim(0), "slice_rows out of range for " + shape_str(a.shape()));
  std::vector<double> out(a.values().begin() + static_cast<std::ptrdiff_t>(begin * n),
                          a.values().begin() + static_cast<std::ptrdiff_t>(end * n));
  return make_result({end - begin, n}, std::move(out), {a}, [begin, n](Node& self) {
    if (double* d = sink(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) d[begin * n + i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  require_2d(a, "slice_cols");
  const std::size_t m = a.dim(0), n = a.dim(1), w = end - begin;
  require(begin < end && end <= n, "slice_cols out of range for " + shape_str(a.shape()));
  std::vector<double> out(m * w);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = a.data()[i * n + begin + j];
  return make_result({m, w}, std::move(out), {a}, [m, n, w, begin](Node& self) {
    if (double* d = sink(self, 0))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) d[i * n + begin + j] += self.grad[i * w + j];
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_rows of nothing");
  const std::size_t n = parts.front().cols();
  std::size_t m = 0;
  std::vector<double> out;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    require(p.rank() == 2 && p.cols() == n, "concat_rows: column counts differ");
    offsets.push_back(out.size());
    out.insert(out.end(), p.values().begin(), p.values().end());
    m += p.rows();
  }
  return make_result({m, n}, std::move(out), parts, [offsets](Node& self) {
    for (std::size_t p = 0; p < self.parents.size(); ++p)
      if (double* d = sink(self, p))
        for (std::size_t i = 0; i < self.parents[p]->data.size(); ++i) d[i] += self.grad[offsets[p] + i];
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_cols of nothing");
  const std::size_t m = parts.front().rows();
  std::vector<std::size_t> widths, offsets;
  std::size_t n = 0;
  for (const auto& p : parts) {
    require(p.rank() == 2 && p.rows() == m, "concat_cols: row counts differ");
    offsets.push_back(n);
    widths.push_back(p.cols());
    n += p.cols();
  }
  std::vector<double> out(m * n);
  for (std::size_t p = 0; p < parts.size(); ++p)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < widths[p]; ++j) out[i * n + offsets[p] + j] = parts[p].data()[i * widths[p] + j];
  return make_result({m, n}, std::move(out), parts, [m, n, widths, offsets](Node& self) {
    for (std::size_t p = 0; p < self.parents.size(); ++p)
      if (double* d = sink(self, p))
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < widths[p]; ++j) d[i * widths[p] + j] += self.grad[i * n + offsets[p] + j];
  });
}

Tensor repeat_rows(const Tensor& row, std::size_t times) {
  require(row.rank() == 2 && row.dim(0) == 1, "repeat_rows expects [1 x n], got " + shape_str(row.shape()));
  require(times > 0, "repeat_rows needs times > 0");
  const std::size_t n = row.dim(1);
  std::vector<double> out;
  out.reserve(times * n);
  for (std::size_t t = 0; t < times; ++t) out.insert(out.end(), row.values().begin(), row.values().end());
  return make_result({times, n}, std::move(out), {row}, [times, n](Node& self) {
    if (double* d = sink(self, 0))
      for (std::size_t t = 0; t < times; ++t)
        for (std::size_t j = 0; j < n; ++j) d[j] += self.grad[t * n + j];
  });
}

Tensor perspective_divide(const Tensor& h, double min_abs) {
  require(h.rank() == 2 && h.dim(1) == 3, "perspective_divide expects [T x 3], got " + shape_str(h.shape()));
  const std::size_t T = h.dim(0);
  std::vector<double> out(T * 2);
  std::vector<double> den(T);
  std::vector<char> clamped(T, 0);
  for (std::size_t t = 0; t < T; ++t) {
    double w = h.data()[t * 3 + 2];
    if (std::abs(w) < min_abs) {
      w = w < 0.0 ? -min_abs : min_abs;
      clamped[t] = 1;
    }
    den[t] = w;
    out[t * 2] = h.data()[t * 3] / w;
    out[t * 2 + 1] = h.data()[t * 3 + 1] / w;
  }
  return make_result({T, 2}, std::move(out), {h}, [T, den, clamped](Node& self) {
    if (double* d = sink(self, 0)) {
      for (std::size_t t = 0; t < T; ++t) {
        const double g0 = self.grad[t * 2], g1 = self.grad[t * 2 + 1];
        d[t * 3] += g0 / den[t];
        d[t * 3 + 1] += g1 / den[t];
        if (!clamped[t]) d[t * 3 + 2] -= (g0 * self.data[t * 2] + g1 * self.data[t * 2 + 1]) / den[t];
      }
    }
  });
}

Tensor attention_block(const Tensor& q, const Tensor& k, const Tensor& v) {
  require_2d(q, "attention_block");
  require(q.shape() == k.shape() && q.shape() == v.shape(),
          "attention_block: q/k/v shapes differ " + shape_str(q.shape()) + " " + shape_str(k.shape()) + " " +
              shape_str(v.shape()));
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.dim(1)));
  return matmul(softmax_rows(scale(matmul(q, transpose(k)), inv_sqrt_d)), v);
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  require_same(pred, target, "mse_loss");
  const std::size_t n = pred.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = pred[i] - target[i];
    acc += d * d;
  }
  return make_result({1}, {acc / static_cast<double>(n)}, {pred, target}, [n](Node& self) {
    const auto& p = self.parents[0]->data;
    const auto& t = self.parents[1]->data;
    const double c = 2.0 * self.grad[0] / static_cast<double>(n);
    if (double* d = sink(self, 0))
      for (std::size_t i = 0; i < n; ++i) d[i] += c * (p[i] - t[i]);
    if (double* d = sink(self, 1))
      for (std::size_t i = 0; i < n; ++i) d[i] -= c * (p[i] - t[i]);
  });
}

}  // namespace oostraj::ad
