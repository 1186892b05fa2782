#include "fairtrans/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "fairtrans/util.hpp"

namespace fairtrans {

namespace {

using detail::Node;

size_t numel(const std::vector<size_t>& shape) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return n;
}

std::shared_ptr<Node> make_leaf(std::vector<size_t> shape, std::vector<double> values,
                                bool requires_grad) {
  for (size_t d : shape) {
    if (d == 0) throw std::invalid_argument("tensor: zero dimension in shape " + shape_str(shape));
  }
  if (values.size() != numel(shape)) {
    throw std::invalid_argument(str_format("tensor: %zu values for shape %s", values.size(),
                                           shape_str(shape).c_str()));
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  n->requires_grad = requires_grad;
  return n;
}

Tensor make_op(const char* op, std::vector<size_t> shape, std::vector<double> values,
               std::vector<Tensor> inputs, std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  n->leaf = false;
  n->op = op;
  bool rg = false;
  n->parents.reserve(inputs.size());
  for (const Tensor& t : inputs) {
    rg = rg || t.node()->requires_grad;
    n->parents.push_back(t.node());
  }
  n->requires_grad = rg;
  if (rg) n->backprop = std::move(backprop);
  return Tensor(std::move(n));
}

[[noreturn]] void shape_fail(const char* op, const std::vector<size_t>& a,
                             const std::vector<size_t>& b) {
  throw std::invalid_argument(str_format("%s: shape mismatch (%s vs %s)", op,
                                         shape_str(a).c_str(), shape_str(b).c_str()));
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw std::invalid_argument(std::string(op) + ": undefined tensor");
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2)
    throw std::invalid_argument(str_format("%s: expected rank-2 tensor, got %s", op,
                                           shape_str(t.shape()).c_str()));
}

// grad of parent i, allocating on demand; returns nullptr when that parent
// does not participate in differentiation.
double* parent_grad(Node& self, size_t i) {
  Node& p = *self.parents[i];
  if (!p.requires_grad) return nullptr;
  p.ensure_grad();
  return p.grad.data();
}

Tensor unary_elementwise(const char* op, const Tensor& a, double (*fwd)(double),
                         // dx given (x, y, g)
                         double (*dfn)(double, double, double)) {
  require_defined(a, op);
  const auto& av = a.node()->values;
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  return make_op(op, a.shape(), std::move(out), {a}, [dfn](Node& self) {
    double* ga = parent_grad(self, 0);
    if (!ga) return;
    const auto& x = self.parents[0]->values;
    for (size_t i = 0; i < x.size(); ++i) ga[i] += dfn(x[i], self.values[i], self.grad[i]);
  });
}

}  // namespace

std::string shape_str(const std::vector<size_t>& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  out += ")";
  return out;
}

Tensor Tensor::zeros(std::vector<size_t> shape, bool requires_grad) {
  size_t n = numel(shape);
  return Tensor(make_leaf(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(std::vector<size_t> shape, double v, bool requires_grad) {
  size_t n = numel(shape);
  return Tensor(make_leaf(std::move(shape), std::vector<double>(n, v), requires_grad));
}

Tensor Tensor::from_values(std::vector<size_t> shape, std::vector<double> values,
                           bool requires_grad) {
  return Tensor(make_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double v) { return from_values({1}, {v}); }

const std::vector<size_t>& Tensor::shape() const { return node_->shape; }
size_t Tensor::size() const { return node_->values.size(); }
size_t Tensor::rank() const { return node_->shape.size(); }

size_t Tensor::rows() const {
  if (rank() != 2) throw std::invalid_argument("rows: not a rank-2 tensor");
  return node_->shape[0];
}

size_t Tensor::cols() const {
  if (rank() == 2) return node_->shape[1];
  if (rank() == 1) return node_->shape[0];
  throw std::invalid_argument("cols: tensor rank > 2");
}

double Tensor::value() const {
  if (size() != 1) {
    throw std::invalid_argument("value: tensor is not scalar, shape " + shape_str(shape()));
  }
  return node_->values[0];
}

std::span<const double> Tensor::values() const { return node_->values; }

std::span<double> Tensor::values_mut() { return node_->values; }

std::span<const double> Tensor::grad() const {
  if (node_->grad.empty()) return {};
  return node_->grad;
}

bool Tensor::has_grad() const { return !node_->grad.empty(); }
bool Tensor::requires_grad() const { return node_->requires_grad; }

void Tensor::set_requires_grad(bool rg) {
  if (!node_->leaf && rg) return;  // non-leaf nodes derive this from parents
  node_->requires_grad = rg;
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return from_values(node_->shape, node_->values); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  size_t m = a.shape()[0], k = a.shape()[1];
  size_t k2 = b.shape()[0], n = b.shape()[1];
  if (k != k2) shape_fail("matmul", a.shape(), b.shape());
  const double* A = a.node()->values.data();
  const double* B = b.node()->values.data();
  std::vector<double> out(m * n, 0.0);
  for (size_t i = 0; i < m; ++i) {
    double* ci = out.data() + i * n;
    const double* ai = A + i * k;
    for (size_t p = 0; p < k; ++p) {
      double av = ai[p];
      const double* bp = B + p * n;
      for (size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
  return make_op("matmul", {m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    const double* G = self.grad.data();
    const double* A = self.parents[0]->values.data();
    const double* B = self.parents[1]->values.data();
    if (double* dA = parent_grad(self, 0)) {
      // dA[i,p] += sum_j G[i,j] * B[p,j]
      for (size_t i = 0; i < m; ++i) {
        const double* gi = G + i * n;
        double* dai = dA + i * k;
        for (size_t p = 0; p < k; ++p) {
          const double* bp = B + p * n;
          double acc = 0.0;
          for (size_t j = 0; j < n; ++j) acc += gi[j] * bp[j];
          dai[p] += acc;
        }
      }
    }
    if (double* dB = parent_grad(self, 1)) {
      // dB[p,j] += sum_i A[i,p] * G[i,j]
      for (size_t i = 0; i < m; ++i) {
        const double* ai = A + i * k;
        const double* gi = G + i * n;
        for (size_t p = 0; p < k; ++p) {
          double av = ai[p];
          double* dbp = dB + p * n;
          for (size_t j = 0; j < n; ++j) dbp[j] += av * gi[j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_defined(a, "transpose");
  require_rank2(a, "transpose");
  size_t m = a.shape()[0], n = a.shape()[1];
  const double* A = a.node()->values.data();
  std::vector<double> out(m * n);
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) out[j * m + i] = A[i * n + j];
  return make_op("transpose", {n, m}, std::move(out), {a}, [m, n](Node& self) {
    double* dA = parent_grad(self, 0);
    if (!dA) return;
    const double* G = self.grad.data();
    for (size_t j = 0; j < n; ++j)
      for (size_t i = 0; i < m; ++i) dA[i * n + j] += G[j * m + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_defined(a, "add");
  require_defined(b, "add");
  if (a.shape() == b.shape()) {
    const auto& av = a.node()->values;
    const auto& bv = b.node()->values;
    std::vector<double> out(av.size());
    for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
    return make_op("add", a.shape(), std::move(out), {a, b}, [](Node& self) {
      const double* G = self.grad.data();
      size_t n = self.values.size();
      if (double* ga = parent_grad(self, 0))
        for (size_t i = 0; i < n; ++i) ga[i] += G[i];
      if (double* gb = parent_grad(self, 1))
        for (size_t i = 0; i < n; ++i) gb[i] += G[i];
    });
  }
  // rank-1 bias broadcast over the rows of a rank-2 left operand
  if (a.rank() == 2 && b.rank() == 1 && b.shape()[0] == a.shape()[1]) {
    size_t m = a.shape()[0], n = a.shape()[1];
    const double* A = a.node()->values.data();
    const double* B = b.node()->values.data();
    std::vector<double> out(m * n);
    for (size_t i = 0; i < m; ++i)
      for (size_t j = 0; j < n; ++j) out[i * n + j] = A[i * n + j] + B[j];
    return make_op("add", {m, n}, std::move(out), {a, b}, [m, n](Node& self) {
      const double* G = self.grad.data();
      if (double* ga = parent_grad(self, 0))
        for (size_t i = 0; i < m * n; ++i) ga[i] += G[i];
      if (double* gb = parent_grad(self, 1)) {
        for (size_t i = 0; i < m; ++i)
          for (size_t j = 0; j < n; ++j) gb[j] += G[i * n + j];
      }
    });
  }
  shape_fail("add", a.shape(), b.shape());
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_defined(a, "sub");
  require_defined(b, "sub");
  if (a.shape() != b.shape()) shape_fail("sub", a.shape(), b.shape());
  const auto& av = a.node()->values;
  const auto& bv = b.node()->values;
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
  return make_op("sub", a.shape(), std::move(out), {a, b}, [](Node& self) {
    const double* G = self.grad.data();
    size_t n = self.values.size();
    if (double* ga = parent_grad(self, 0))
      for (size_t i = 0; i < n; ++i) ga[i] += G[i];
    if (double* gb = parent_grad(self, 1))
      for (size_t i = 0; i < n; ++i) gb[i] -= G[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_defined(a, "mul");
  require_defined(b, "mul");
  if (a.shape() != b.shape()) shape_fail("mul", a.shape(), b.shape());
  const auto& av = a.node()->values;
  const auto& bv = b.node()->values;
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  return make_op("mul", a.shape(), std::move(out), {a, b}, [](Node& self) {
    const double* G = self.grad.data();
    const auto& x = self.parents[0]->values;
    const auto& y = self.parents[1]->values;
    size_t n = self.values.size();
    if (double* ga = parent_grad(self, 0))
      for (size_t i = 0; i < n; ++i) ga[i] += G[i] * y[i];
    if (double* gb = parent_grad(self, 1))
      for (size_t i = 0; i < n; ++i) gb[i] += G[i] * x[i];
  });
}

Tensor scale(const Tensor& a, double c) {
  require_defined(a, "scale");
  const auto& av = a.node()->values;
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] * c;
  return make_op("scale", a.shape(), std::move(out), {a}, [c](Node& self) {
    double* ga = parent_grad(self, 0);
    if (!ga) return;
    for (size_t i = 0; i < self.values.size(); ++i) ga[i] += c * self.grad[i];
  });
}

Tensor add_scalar(const Tensor& a, double c) {
  require_defined(a, "add_scalar");
  const auto& av = a.node()->values;
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] + c;
  return make_op("add_scalar", a.shape(), std::move(out), {a}, [](Node& self) {
    double* ga = parent_grad(self, 0);
    if (!ga) return;
    for (size_t i = 0; i < self.values.size(); ++i) ga[i] += self.grad[i];
  });
}

Tensor sum(const Tensor& a) {
  require_defined(a, "sum");
  double acc = 0.0;
  for (double v : a.node()->values) acc += v;
  return make_op("sum", {1}, {acc}, {a}, [](Node& self) {
    double* ga = parent_grad(self, 0);
    if (!ga) return;
    double g = self.grad[0];
    for (size_t i = 0; i < self.parents[0]->values.size(); ++i) ga[i] += g;
  });
}

Tensor mean(const Tensor& a) {
  require_defined(a, "mean");
  const auto& av = a.node()->values;
  double acc = 0.0;
  for (double v : av) acc += v;
  double inv = 1.0 / static_cast<double>(av.size());
  return make_op("mean", {1}, {acc * inv}, {a}, [inv](Node& self) {
    double* ga = parent_grad(self, 0);
    if (!ga) return;
    double g = self.grad[0] * inv;
    for (size_t i = 0; i < self.parents[0]->values.size(); ++i) ga[i] += g;
  });
}

Tensor sum_rows(const Tensor& a) {
  require_defined(a, "sum_rows");
  require_rank2(a, "sum_rows");
  size_t m = a.shape()[0], n = a.shape()[1];
  const double* A = a.node()->values.data();
  std::vector<double> out(m, 0.0);
  for (size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (size_t j = 0; j < n; ++j) acc += A[i * n + j];
    out[i] = acc;
  }
  return make_op("sum_rows", {m}, std::move(out), {a}, [m, n](Node& self) {
    double* ga = parent_grad(self, 0);
    if (!ga) return;
    for (size_t i = 0; i < m; ++i) {
      double g = self.grad[i];
      for (size_t j = 0; j < n; ++j) ga[i * n + j] += g;
    }
  });
}

Tensor log_sum_exp_rows(const Tensor& a) {
  require_defined(a, "log_sum_exp_rows");
  require_rank2(a, "log_sum_exp_rows");
  size_t m = a.shape()[0], n = a.shape()[1];
  const double* A = a.node()->values.data();
  std::vector<double> out(m);
  for (size_t i = 0; i < m; ++i) {
    const double* row = A + i * n;
    double mx = row[0];
    for (size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double s = 0.0;
    for (size_t j = 0; j < n; ++j) s += std::exp(row[j] - mx);
    out[i] = mx + std::log(s);
  }
  return make_op("log_sum_exp_rows", {m}, std::move(out), {a}, [m, n](Node& self) {
    double* ga = parent_grad(self, 0);
    if (!ga) return;
    const double* A = self.parents[0]->values.data();
    for (size_t i = 0; i < m; ++i) {
      double g = self.grad[i];
      double y = self.values[i];
      for (size_t j = 0; j < n; ++j) ga[i * n + j] += g * std::exp(A[i * n + j] - y);
    }
  });
}

Tensor abs(const Tensor& a) {
  return unary_elementwise("abs", a, [](double x) { return std::fabs(x); },
                           [](double x, double, double g) {
                             return x > 0.0 ? g : (x < 0.0 ? -g : 0.0);
                           });
}

Tensor log(const Tensor& a) {
  require_defined(a, "log");
  const auto& av = a.node()->values;
  for (size_t i = 0; i < av.size(); ++i) {
    if (!(av[i] > 0.0)) {
      throw std::domain_error(str_format("log: non-positive input %.17g at index %zu", av[i], i));
    }
  }
  return unary_elementwise("log", a, [](double x) { return std::log(x); },
                           [](double x, double, double g) { return g / x; });
}

Tensor exp(const Tensor& a) {
  return unary_elementwise("exp", a, [](double x) { return std::exp(x); },
                           [](double, double y, double g) { return g * y; });
}

Tensor logistic(const Tensor& a) {
  return unary_elementwise(
      "logistic", a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y, double g) { return g * y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary_elementwise("tanh", a, [](double x) { return std::tanh(x); },
                           [](double, double y, double g) { return g * (1.0 - y * y); });
}

Tensor relu(const Tensor& a) {
  return unary_elementwise("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
                           [](double x, double, double g) { return x > 0.0 ? g : 0.0; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  require_defined(a, "clamp");
  if (!(lo <= hi)) throw std::invalid_argument("clamp: lo > hi");
  const auto& av = a.node()->values;
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = std::min(std::max(av[i], lo), hi);
  return make_op("clamp", a.shape(), std::move(out), {a}, [lo, hi](Node& self) {
    double* ga = parent_grad(self, 0);
    if (!ga) return;
    const auto& x = self.parents[0]->values;
    for (size_t i = 0; i < x.size(); ++i) {
      if (x[i] > lo && x[i] < hi) ga[i] += self.grad[i];
    }
  });
}

Tensor l2_normalize_rows(const Tensor& a) {
  require_defined(a, "l2_normalize");
  size_t m, n;
  if (a.rank() == 1) {
    m = 1;
    n = a.shape()[0];
  } else if (a.rank() == 2) {
    m = a.shape()[0];
    n = a.shape()[1];
  } else {
    throw std::invalid_argument("l2_normalize: expected rank 1 or 2, got " +
                                shape_str(a.shape()));
  }
  const double* A = a.node()->values.data();
  std::vector<double> norms(m);
  std::vector<double> out(m * n);
  for (size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (size_t j = 0; j < n; ++j) s += A[i * n + j] * A[i * n + j];
    double norm = std::sqrt(s);
    if (norm < 1e-12) {
      throw std::domain_error(str_format("l2_normalize: zero-norm row %zu (norm=%.3g)", i, norm));
    }
    norms[i] = norm;
    for (size_t j = 0; j < n; ++j) out[i * n + j] = A[i * n + j] / norm;
  }
  return make_op("l2_normalize", a.shape(), std::move(out), {a},
                 [m, n, norms = std::move(norms)](Node& self) {
                   double* ga = parent_grad(self, 0);
                   if (!ga) return;
                   const double* Y = self.values.data();
                   const double* G = self.grad.data();
                   for (size_t i = 0; i < m; ++i) {
                     double gy = 0.0;
                     for (size_t j = 0; j < n; ++j) gy += G[i * n + j] * Y[i * n + j];
                     double inv = 1.0 / norms[i];
                     for (size_t j = 0; j < n; ++j)
                       ga[i * n + j] += (G[i * n + j] - Y[i * n + j] * gy) * inv;
                   }
                 });
}

Tensor arccos(const Tensor& a) {
  require_defined(a, "arccos");
  const auto& av = a.node()->values;
  for (size_t i = 0; i < av.size(); ++i) {
    if (av[i] < -1.0 || av[i] > 1.0) {
      throw std::domain_error(
          str_format("arccos: input %.17g outside [-1,1] at index %zu", av[i], i));
    }
  }
  return unary_elementwise("arccos", a, [](double x) { return std::acos(x); },
                           [](double x, double, double g) {
                             return -g / std::sqrt(std::max(1.0 - x * x, 1e-300));
                           });
}

Tensor cosine(const Tensor& a) {
  return unary_elementwise("cosine", a, [](double x) { return std::cos(x); },
                           [](double x, double, double g) { return -g * std::sin(x); });
}

Tensor dot(const Tensor& a, const Tensor& b) {
  require_defined(a, "dot");
  require_defined(b, "dot");
  if (a.rank() != 1 || b.rank() != 1 || a.shape() != b.shape()) {
    shape_fail("dot", a.shape(), b.shape());
  }
  const auto& av = a.node()->values;
  const auto& bv = b.node()->values;
  double acc = 0.0;
  for (size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
  return make_op("dot", {1}, {acc}, {a, b}, [](Node& self) {
    const auto& x = self.parents[0]->values;
    const auto& y = self.parents[1]->values;
    double g = self.grad[0];
    if (double* ga = parent_grad(self, 0))
      for (size_t i = 0; i < x.size(); ++i) ga[i] += g * y[i];
    if (double* gb = parent_grad(self, 1))
      for (size_t i = 0; i < y.size(); ++i) gb[i] += g * x[i];
  });
}

Tensor concat(const Tensor& a, const Tensor& b, size_t axis) {
  require_defined(a, "concat");
  require_defined(b, "concat");
  if (a.rank() != b.rank()) shape_fail("concat", a.shape(), b.shape());
  if (a.rank() == 1) {
    if (axis != 0) throw std::invalid_argument("concat: axis out of range for rank-1");
    size_t na = a.size(), nb = b.size();
    std::vector<double> out;
    out.reserve(na + nb);
    out.insert(out.end(), a.node()->values.begin(), a.node()->values.end());
    out.insert(out.end(), b.node()->values.begin(), b.node()->values.end());
    return make_op("concat", {na + nb}, std::move(out), {a, b}, [na, nb](Node& self) {
      if (double* ga = parent_grad(self, 0))
        for (size_t i = 0; i < na; ++i) ga[i] += self.grad[i];
      if (double* gb = parent_grad(self, 1))
        for (size_t i = 0; i < nb; ++i) gb[i] += self.grad[na + i];
    });
  }
  if (a.rank() != 2 || axis > 1) {
    throw std::invalid_argument("concat: supports rank-1 and rank-2 tensors, axis 0 or 1");
  }
  size_t ma = a.shape()[0], na = a.shape()[1];
  size_t mb = b.shape()[0], nb = b.shape()[1];
  if (axis == 0) {
    if (na != nb) shape_fail("concat", a.shape(), b.shape());
    std::vector<double> out;
    out.reserve((ma + mb) * na);
    out.insert(out.end(), a.node()->values.begin(), a.node()->values.end());
    out.insert(out.end(), b.node()->values.begin(), b.node()->values.end());
    return make_op("concat", {ma + mb, na}, std::move(out), {a, b}, [ma, na, mb](Node& self) {
      size_t la = ma * na;
      if (double* ga = parent_grad(self, 0))
        for (size_t i = 0; i < la; ++i) ga[i] += self.grad[i];
      if (double* gb = parent_grad(self, 1))
        for (size_t i = 0; i < mb * na; ++i) gb[i] += self.grad[la + i];
    });
  }
  if (ma != mb) shape_fail("concat", a.shape(), b.shape());
  size_t n = na + nb;
  std::vector<double> out(ma * n);
  const double* A = a.node()->values.data();
  const double* B = b.node()->values.data();
  for (size_t i = 0; i < ma; ++i) {
    for (size_t j = 0; j < na; ++j) out[i * n + j] = A[i * na + j];
    for (size_t j = 0; j < nb; ++j) out[i * n + na + j] = B[i * nb + j];
  }
  return make_op("concat", {ma, n}, std::move(out), {a, b}, [ma, na, nb, n](Node& self) {
    if (double* ga = parent_grad(self, 0)) {
      for (size_t i = 0; i < ma; ++i)
        for (size_t j = 0; j < na; ++j) ga[i * na + j] += self.grad[i * n + j];
    }
    if (double* gb = parent_grad(self, 1)) {
      for (size_t i = 0; i < ma; ++i)
        for (size_t j = 0; j < nb; ++j) gb[i * nb + j] += self.grad[i * n + na + j];
    }
  });
}

void backward(const Tensor& root) {
  if (!root.defined() || root.size() != 1) {
    throw std::invalid_argument("backward: root must be a defined scalar tensor");
  }
  Node* r = root.node().get();
  if (!r->requires_grad) return;  // nothing reachable needs gradients

  // Post-order DFS; reversed, every consumer precedes its inputs.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* node;
    size_t next;
  };
  std::vector<Frame> stack;
  stack.push_back({r, 0});
  visited.insert(r);
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.node->parents.size()) {
      Node* p = f.node->parents[f.next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  // Transient grads on interior nodes are rebuilt per pass; leaves keep
  // accumulating until the caller resets them.
  for (Node* n : order) {
    if (n->leaf) n->ensure_grad();
    else n->grad.assign(n->values.size(), 0.0);
  }
  r->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop) n->backprop(*n);
  }
}

}  // namespace fairtrans
