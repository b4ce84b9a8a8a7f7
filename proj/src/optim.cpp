#include "crest/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace crest {

void adam_step(std::vector<Tensor>& params, AdamState& state) {
  if (state.first_moment.empty()) {
    state.first_moment.resize(params.size());
    state.second_moment.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.first_moment[i].assign(params[i].size(), 0.0);
      state.second_moment[i].assign(params[i].size(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw shape_error("adam_step: state tracks " +
                      std::to_string(state.first_moment.size()) + " params, got " +
                      std::to_string(params.size()));
  }
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, double(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, double(state.step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    if (m.size() != p.size()) {
      throw shape_error("adam_step: moment/param shape mismatch at index " +
                        std::to_string(i));
    }
    const auto& g = p.grad();
    auto& values = p.values();
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double grad = g[j] + state.weight_decay * values[j];
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * grad;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * grad * grad;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      values[j] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

GradCheckReport check_gradients(const std::function<Tensor()>& f,
                                std::vector<Tensor>& params, double h, double tol) {
  if (!(h > 0.0)) throw std::domain_error("check_gradients: h must be positive");
  Tensor loss = f();
  if (!std::isfinite(loss.item())) {
    throw numeric_error("check_gradients: loss is not finite");
  }
  backward(loss);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) analytic.push_back(p.grad());

  GradCheckReport report;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& values = params[i].values();
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double saved = values[j];
      values[j] = saved + h;
      const double up = f().item();
      values[j] = saved - h;
      const double down = f().item();
      values[j] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw numeric_error("check_gradients: perturbed loss is not finite");
      }
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[i][j];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-6});
      const double rel = std::fabs(a - numeric) / denom;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst = {i, j, a, numeric, rel};
      }
    }
  }
  report.pass = report.max_rel_error < tol;
  return report;
}

}  // namespace crest
