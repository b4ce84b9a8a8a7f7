#include "crest/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "crest/special.hpp"

namespace crest {

namespace {

std::atomic<std::uint64_t> g_next_id{1};

std::shared_ptr<TensorNode> make_node(std::size_t rows, std::size_t cols,
                                      std::vector<double> values) {
  auto n = std::make_shared<TensorNode>();
  n->rows = rows;
  n->cols = cols;
  n->values = std::move(values);
  n->id = g_next_id.fetch_add(1);
  return n;
}

std::string shape_of(const TensorNode& n) {
  return std::to_string(n.rows) + "x" + std::to_string(n.cols);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw shape_error(std::string(op) + ": shape mismatch " + a.shape_str() +
                      " vs " + b.shape_str());
  }
}

std::vector<double>& grad_buffer(TensorNode& n) {
  if (n.grad.size() != n.size()) n.grad.assign(n.size(), 0.0);
  return n.grad;
}

// Creates the result node wired into the graph if any parent needs grads.
Tensor make_result(std::size_t rows, std::size_t cols, std::vector<double> values,
                   std::vector<std::shared_ptr<TensorNode>> parents,
                   std::function<void(const TensorNode&)> backward_fn) {
  auto n = make_node(rows, cols, std::move(values));
  bool needs = false;
  for (const auto& p : parents) needs = needs || p->requires_grad;
  if (needs) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
  }
  return Tensor(n);
}

using Map = double (*)(double);

Tensor elementwise(const Tensor& a, Map fwd, Map deriv, const char* op,
                   bool positive_domain = false) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a.values()[i];
    if (positive_domain && !(x > 0.0)) {
      throw std::domain_error(std::string(op) + ": argument must be positive, got " +
                              std::to_string(x));
    }
    out[i] = fwd(x);
  }
  auto pa = a.node();
  return make_result(a.rows(), a.cols(), std::move(out), {pa},
                     [pa, deriv](const TensorNode& self) {
                       auto& g = grad_buffer(*pa);
                       for (std::size_t i = 0; i < self.size(); ++i) {
                         g[i] += self.grad[i] * deriv(pa->values[i]);
                       }
                     });
}

}  // namespace

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values,
               bool requires_grad) {
  if (values.size() != rows * cols) {
    throw shape_error("Tensor: " + std::to_string(rows) + "x" + std::to_string(cols) +
                      " needs " + std::to_string(rows * cols) + " values, got " +
                      std::to_string(values.size()));
  }
  node_ = make_node(rows, cols, std::move(values));
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
  return Tensor(rows, cols, std::vector<double>(rows * cols, 0.0), requires_grad);
}

Tensor Tensor::full(std::size_t rows, std::size_t cols, double value) {
  return Tensor(rows, cols, std::vector<double>(rows * cols, value));
}

Tensor Tensor::scalar(double value) { return Tensor(1, 1, {value}); }

Tensor Tensor::identity(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return Tensor(n, n, std::move(v));
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return node_->values[r * cols() + c];
}

double Tensor::item() const {
  if (size() != 1) throw shape_error("item: tensor is " + shape_str() + ", not 1x1");
  return node_->values[0];
}

const std::vector<double>& Tensor::grad() const {
  if (node_->grad.size() != size()) {
    const_cast<TensorNode&>(*node_).grad.assign(size(), 0.0);
  }
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.assign(size(), 0.0); }

std::string Tensor::shape_str() const { return shape_of(*node_); }

void backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw shape_error("backward: loss must be 1x1, got " + loss.shape_str());
  }
  if (!std::isfinite(loss.item())) {
    throw numeric_error("backward: loss is not finite");
  }
  // Collect the reachable subgraph. Creation ids give a topological order.
  std::vector<std::shared_ptr<TensorNode>> nodes;
  std::unordered_set<const TensorNode*> seen;
  std::vector<std::shared_ptr<TensorNode>> stack{loss.node()};
  while (!stack.empty()) {
    auto n = stack.back();
    stack.pop_back();
    if (!seen.insert(n.get()).second) continue;
    nodes.push_back(n);
    for (const auto& p : n->parents) stack.push_back(p);
  }
  for (auto& n : nodes) n->grad.assign(n->size(), 0.0);
  std::sort(nodes.begin(), nodes.end(),
            [](const auto& a, const auto& b) { return a->id > b->id; });
  loss.node()->grad[0] = 1.0;
  for (auto& n : nodes) {
    if (n->backward_fn && n->requires_grad) n->backward_fn(*n);
  }
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  auto pa = a.node(), pb = b.node();
  return make_result(a.rows(), a.cols(), std::move(out), {pa, pb},
                     [pa, pb](const TensorNode& self) {
                       auto& ga = grad_buffer(*pa);
                       auto& gb = grad_buffer(*pb);
                       for (std::size_t i = 0; i < self.size(); ++i) {
                         ga[i] += self.grad[i];
                         gb[i] += self.grad[i];
                       }
                     });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a.values()[i] - b.values()[i];
  auto pa = a.node(), pb = b.node();
  return make_result(a.rows(), a.cols(), std::move(out), {pa, pb},
                     [pa, pb](const TensorNode& self) {
                       auto& ga = grad_buffer(*pa);
                       auto& gb = grad_buffer(*pb);
                       for (std::size_t i = 0; i < self.size(); ++i) {
                         ga[i] += self.grad[i];
                         gb[i] -= self.grad[i];
                       }
                     });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  auto pa = a.node(), pb = b.node();
  return make_result(a.rows(), a.cols(), std::move(out), {pa, pb},
                     [pa, pb](const TensorNode& self) {
                       auto& ga = grad_buffer(*pa);
                       auto& gb = grad_buffer(*pb);
                       for (std::size_t i = 0; i < self.size(); ++i) {
                         ga[i] += self.grad[i] * pb->values[i];
                         gb[i] += self.grad[i] * pa->values[i];
                       }
                     });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "div");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a.values()[i] / b.values()[i];
  auto pa = a.node(), pb = b.node();
  return make_result(a.rows(), a.cols(), std::move(out), {pa, pb},
                     [pa, pb](const TensorNode& self) {
                       auto& ga = grad_buffer(*pa);
                       auto& gb = grad_buffer(*pb);
                       for (std::size_t i = 0; i < self.size(); ++i) {
                         const double inv = 1.0 / pb->values[i];
                         ga[i] += self.grad[i] * inv;
                         gb[i] -= self.grad[i] * pa->values[i] * inv * inv;
                       }
                     });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a.values()[i] * c;
  auto pa = a.node();
  return make_result(a.rows(), a.cols(), std::move(out), {pa},
                     [pa, c](const TensorNode& self) {
                       auto& g = grad_buffer(*pa);
                       for (std::size_t i = 0; i < self.size(); ++i) g[i] += self.grad[i] * c;
                     });
}

Tensor add_scalar(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a.values()[i] + c;
  auto pa = a.node();
  return make_result(a.rows(), a.cols(), std::move(out), {pa},
                     [pa](const TensorNode& self) {
                       auto& g = grad_buffer(*pa);
                       for (std::size_t i = 0; i < self.size(); ++i) g[i] += self.grad[i];
                     });
}

Tensor exp_t(const Tensor& a) {
  return elementwise(a, [](double x) { return std::exp(x); },
                     [](double x) { return std::exp(x); }, "exp");
}

Tensor log_t(const Tensor& a) {
  return elementwise(a, [](double x) { return std::log(x); },
                     [](double x) { return 1.0 / x; }, "log",
                     /*positive_domain=*/true);
}

Tensor sqrt_t(const Tensor& a) {
  return elementwise(a, [](double x) { return std::sqrt(x); },
                     [](double x) { return 0.5 / std::sqrt(x); }, "sqrt",
                     /*positive_domain=*/true);
}

Tensor abs_t(const Tensor& a) {
  return elementwise(a, [](double x) { return std::fabs(x); },
                     [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); },
                     "abs");
}

Tensor relu(const Tensor& a) {
  return elementwise(a, [](double x) { return x > 0.0 ? x : 0.0; },
                     [](double x) { return x > 0.0 ? 1.0 : 0.0; }, "relu");
}

Tensor softplus_t(const Tensor& a) {
  return elementwise(a, [](double x) { return softplus(x); },
                     [](double x) { return sigmoid(x); }, "softplus");
}

Tensor digamma_t(const Tensor& a) {
  return elementwise(a, [](double x) { return digamma(x); },
                     [](double x) { return trigamma(x); }, "digamma",
                     /*positive_domain=*/true);
}

Tensor lgamma_t(const Tensor& a) {
  return elementwise(a, [](double x) { return lgamma_pos(x); },
                     [](double x) { return digamma(x); }, "lgamma",
                     /*positive_domain=*/true);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw shape_error("matmul: inner dimensions disagree, " + a.shape_str() + " vs " +
                      b.shape_str());
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double aij = a.values()[i * k + j];
      if (aij == 0.0) continue;
      for (std::size_t c = 0; c < n; ++c) out[i * n + c] += aij * b.values()[j * n + c];
    }
  }
  auto pa = a.node(), pb = b.node();
  return make_result(m, n, std::move(out), {pa, pb},
                     [pa, pb, m, k, n](const TensorNode& self) {
                       // dA = dC B^T, dB = A^T dC
                       auto& ga = grad_buffer(*pa);
                       auto& gb = grad_buffer(*pb);
                       for (std::size_t i = 0; i < m; ++i) {
                         for (std::size_t j = 0; j < k; ++j) {
                           double acc = 0.0;
                           for (std::size_t c = 0; c < n; ++c) {
                             acc += self.grad[i * n + c] * pb->values[j * n + c];
                           }
                           ga[i * k + j] += acc;
                         }
                       }
                       for (std::size_t j = 0; j < k; ++j) {
                         for (std::size_t c = 0; c < n; ++c) {
                           double acc = 0.0;
                           for (std::size_t i = 0; i < m; ++i) {
                             acc += pa->values[i * k + j] * self.grad[i * n + c];
                           }
                           gb[j * n + c] += acc;
                         }
                       }
                     });
}

Tensor transpose(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a.values()[i * n + j];
  }
  auto pa = a.node();
  return make_result(n, m, std::move(out), {pa},
                     [pa, m, n](const TensorNode& self) {
                       auto& g = grad_buffer(*pa);
                       for (std::size_t i = 0; i < m; ++i) {
                         for (std::size_t j = 0; j < n; ++j) {
                           g[i * n + j] += self.grad[j * m + i];
                         }
                       }
                     });
}

Tensor softmax_rows(const Tensor& x, double s) {
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      const double v = x.values()[i * n + j];
      if (std::isnan(v)) throw numeric_error("softmax_rows: NaN input");
      mx = std::max(mx, s * v);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = std::exp(s * x.values()[i * n + j] - mx);
      z += out[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= z;
  }
  auto px = x.node();
  return make_result(m, n, std::move(out), {px},
                     [px, s, m, n](const TensorNode& self) {
                       auto& g = grad_buffer(*px);
                       for (std::size_t i = 0; i < m; ++i) {
                         double dot = 0.0;
                         for (std::size_t j = 0; j < n; ++j) {
                           dot += self.grad[i * n + j] * self.values[i * n + j];
                         }
                         for (std::size_t j = 0; j < n; ++j) {
                           g[i * n + j] += s * self.values[i * n + j] *
                                           (self.grad[i * n + j] - dot);
                         }
                       }
                     });
}

Tensor sum_all(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  auto pa = a.node();
  return make_result(1, 1, {acc}, {pa}, [pa](const TensorNode& self) {
    auto& g = grad_buffer(*pa);
    for (std::size_t i = 0; i < pa->size(); ++i) g[i] += self.grad[0];
  });
}

Tensor mean_all(const Tensor& a) { return scale(sum_all(a), 1.0 / double(a.size())); }

Tensor row_sum(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i] += a.values()[i * n + j];
  }
  auto pa = a.node();
  return make_result(m, 1, std::move(out), {pa},
                     [pa, m, n](const TensorNode& self) {
                       auto& g = grad_buffer(*pa);
                       for (std::size_t i = 0; i < m; ++i) {
                         for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[i];
                       }
                     });
}

Tensor mean_rows(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j] += a.values()[i * n + j];
  }
  for (std::size_t j = 0; j < n; ++j) out[j] /= double(m);
  auto pa = a.node();
  return make_result(1, n, std::move(out), {pa},
                     [pa, m, n](const TensorNode& self) {
                       auto& g = grad_buffer(*pa);
                       for (std::size_t i = 0; i < m; ++i) {
                         for (std::size_t j = 0; j < n; ++j) {
                           g[i * n + j] += self.grad[j] / double(m);
                         }
                       }
                     });
}

Tensor max_rows(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(n);
  std::vector<std::size_t> arg(n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    double best = a.values()[j];
    for (std::size_t i = 1; i < m; ++i) {
      if (a.values()[i * n + j] > best) {
        best = a.values()[i * n + j];
        arg[j] = i;
      }
    }
    out[j] = best;
  }
  auto pa = a.node();
  return make_result(1, n, std::move(out), {pa},
                     [pa, arg, n](const TensorNode& self) {
                       auto& g = grad_buffer(*pa);
                       for (std::size_t j = 0; j < n; ++j) {
                         g[arg[j] * n + j] += self.grad[j];
                       }
                     });
}

Tensor row(const Tensor& a, std::size_t r) {
  if (r >= a.rows()) {
    throw shape_error("row: index " + std::to_string(r) + " out of range for " +
                      a.shape_str());
  }
  const std::size_t n = a.cols();
  std::vector<double> out(a.values().begin() + r * n, a.values().begin() + (r + 1) * n);
  auto pa = a.node();
  return make_result(1, n, std::move(out), {pa},
                     [pa, r, n](const TensorNode& self) {
                       auto& g = grad_buffer(*pa);
                       for (std::size_t j = 0; j < n; ++j) g[r * n + j] += self.grad[j];
                     });
}

Tensor vcat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw shape_error("vcat: empty input");
  const std::size_t n = parts[0].cols();
  std::size_t m = 0;
  for (const auto& p : parts) {
    if (p.cols() != n) {
      throw shape_error("vcat: column mismatch " + parts[0].shape_str() + " vs " +
                        p.shape_str());
    }
    m += p.rows();
  }
  std::vector<double> out;
  out.reserve(m * n);
  std::vector<std::shared_ptr<TensorNode>> parents;
  parents.reserve(parts.size());
  for (const auto& p : parts) {
    out.insert(out.end(), p.values().begin(), p.values().end());
    parents.push_back(p.node());
  }
  auto parents_copy = parents;
  return make_result(m, n, std::move(out), std::move(parents),
                     [parents_copy, n](const TensorNode& self) {
                       std::size_t offset = 0;
                       for (const auto& p : parents_copy) {
                         auto& g = grad_buffer(*p);
                         for (std::size_t i = 0; i < p->size(); ++i) {
                           g[i] += self.grad[offset + i];
                         }
                         offset += p->size();
                       }
                     });
}

Tensor gather_cols(const Tensor& a, const std::vector<std::size_t>& cols) {
  const std::size_t m = a.rows(), n = a.cols(), k = cols.size();
  for (std::size_t c : cols) {
    if (c >= n) {
      throw shape_error("gather_cols: column " + std::to_string(c) +
                        " out of range for " + a.shape_str());
    }
  }
  std::vector<double> out(m * k);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] = a.values()[i * n + cols[j]];
  }
  auto pa = a.node();
  return make_result(m, k, std::move(out), {pa},
                     [pa, cols, m, n, k](const TensorNode& self) {
                       auto& g = grad_buffer(*pa);
                       for (std::size_t i = 0; i < m; ++i) {
                         for (std::size_t j = 0; j < k; ++j) {
                           g[i * n + cols[j]] += self.grad[i * k + j];
                         }
                       }
                     });
}

Tensor tile_col(const Tensor& col, std::size_t c) {
  if (col.cols() != 1) throw shape_error("tile_col: expected Nx1, got " + col.shape_str());
  const std::size_t m = col.rows();
  std::vector<double> out(m * c);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = col.values()[i];
  }
  auto pa = col.node();
  return make_result(m, c, std::move(out), {pa},
                     [pa, m, c](const TensorNode& self) {
                       auto& g = grad_buffer(*pa);
                       for (std::size_t i = 0; i < m; ++i) {
                         for (std::size_t j = 0; j < c; ++j) g[i] += self.grad[i * c + j];
                       }
                     });
}

}  // namespace crest
