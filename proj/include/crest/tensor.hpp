#pragma once

// Minimal reverse-mode automatic differentiation over 2-D double tensors.
// The graph is built dynamically per evaluation: every op allocates a node
// holding its forward values plus a closure that scatters adjoints into its
// parents. Scalars are 1x1 tensors, vectors are 1xN or Nx1.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace crest {

class shape_error : public std::runtime_error {
 public:
  explicit shape_error(const std::string& what) : std::runtime_error(what) {}
};

class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

struct TensorNode {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  std::vector<double> grad;
  bool requires_grad = false;
  std::uint64_t id = 0;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(const TensorNode&)> backward_fn;

  std::size_t size() const { return rows * cols; }
};

class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values,
         bool requires_grad = false);

  static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
  static Tensor full(std::size_t rows, std::size_t cols, double value);
  static Tensor scalar(double value);
  static Tensor identity(std::size_t n);

  std::size_t rows() const { return node_->rows; }
  std::size_t cols() const { return node_->cols; }
  std::size_t size() const { return node_->size(); }
  bool requires_grad() const { return node_->requires_grad; }

  double at(std::size_t r, std::size_t c) const;
  double item() const;  // value of a 1x1 tensor

  const std::vector<double>& values() const { return node_->values; }
  std::vector<double>& values() { return node_->values; }
  const std::vector<double>& grad() const;
  void zero_grad();

  std::string shape_str() const;
  bool defined() const { return node_ != nullptr; }

  std::shared_ptr<TensorNode> node() const { return node_; }
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<TensorNode> node_;
};

// Runs the backward pass from a 1x1 loss, populating grad buffers on every
// reachable tensor with requires_grad set. Grads are overwritten, not
// accumulated across calls.
void backward(const Tensor& loss);

// Elementwise (shapes must match exactly).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

// Elementwise with constants.
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);

// Elementwise functions.
Tensor exp_t(const Tensor& a);
Tensor log_t(const Tensor& a);
Tensor sqrt_t(const Tensor& a);
Tensor abs_t(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor softplus_t(const Tensor& a);
Tensor digamma_t(const Tensor& a);
Tensor lgamma_t(const Tensor& a);

// Linear algebra.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Row-stabilized softmax of (scale * x), rowwise.
Tensor softmax_rows(const Tensor& x, double scale);

// Reductions.
Tensor sum_all(const Tensor& a);    // 1x1
Tensor mean_all(const Tensor& a);   // 1x1
Tensor row_sum(const Tensor& a);    // Nx1
Tensor mean_rows(const Tensor& a);  // 1xC, mean over rows
Tensor max_rows(const Tensor& a);   // 1xC, max over rows (ties: first row)

// Structure.
Tensor row(const Tensor& a, std::size_t r);                // 1xC copy
Tensor vcat(const std::vector<Tensor>& parts);             // stack by rows
Tensor gather_cols(const Tensor& a, const std::vector<std::size_t>& cols);

// Broadcast helper: repeat an Nx1 column across C columns (NxC).
Tensor tile_col(const Tensor& col, std::size_t c);

}  // namespace crest
