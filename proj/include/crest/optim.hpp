#pragma once

#include <functional>
#include <vector>

#include "crest/tensor.hpp"

namespace crest {

// Classic Adam with bias correction. Weight decay is the coupled form,
// added to the gradient as an L2 term before the moment updates.
struct AdamState {
  double learning_rate = 1e-4;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step_count = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

// One update over the parameter list, consuming each tensor's grad buffer.
// Moment buffers are allocated on first use and must keep matching shapes.
void adam_step(std::vector<Tensor>& params, AdamState& state);

struct GradCheckEntry {
  std::size_t param_index = 0;
  std::size_t value_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  bool pass = false;
  GradCheckEntry worst;
};

// Compares the backward-pass gradient of f() against central finite
// differences (f(x+h)-f(x-h))/2h for every entry of every parameter.
// f must rebuild its graph from the current parameter values on each call.
GradCheckReport check_gradients(const std::function<Tensor()>& f,
                                std::vector<Tensor>& params, double h, double tol);

}  // namespace crest
