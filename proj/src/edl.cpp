#include "crest/edl.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "crest/special.hpp"

namespace crest {

namespace {

constexpr double kFusionEps = 1e-12;

void require_one_hot(const Tensor& y) {
  for (std::size_t i = 0; i < y.rows(); ++i) {
    int ones = 0;
    for (std::size_t j = 0; j < y.cols(); ++j) {
      const double v = y.at(i, j);
      if (v == 1.0) {
        ++ones;
      } else if (v != 0.0) {
        throw std::domain_error("label row " + std::to_string(i) +
                                " is not one-hot (entry " + std::to_string(v) + ")");
      }
    }
    if (ones != 1) {
      throw std::domain_error("label row " + std::to_string(i) +
                              " is not one-hot (" + std::to_string(ones) + " ones)");
    }
  }
}

void require_matching(const Tensor& alpha, const Tensor& y, const char* op) {
  if (alpha.rows() != y.rows() || alpha.cols() != y.cols()) {
    throw shape_error(std::string(op) + ": alpha " + alpha.shape_str() +
                      " vs labels " + y.shape_str());
  }
}

}  // namespace

double AnnealSchedule::lambda() const {
  if (annealing_steps <= 0) throw std::domain_error("AnnealSchedule: E must be positive");
  if (current_epoch < 0) throw std::domain_error("AnnealSchedule: t must be nonnegative");
  return std::min(1.0, double(current_epoch) / double(annealing_steps));
}

Tensor ace_loss_rows(const Tensor& alpha, const Tensor& y) {
  require_matching(alpha, y, "ace_loss");
  require_one_hot(y);
  const std::size_t k = alpha.cols();
  Tensor psi_s = tile_col(digamma_t(row_sum(alpha)), k);
  return row_sum(mul(y, sub(psi_s, digamma_t(alpha))));
}

Tensor ace_loss(const Tensor& alpha, const Tensor& y) {
  return mean_all(ace_loss_rows(alpha, y));
}

Tensor kl_to_uniform_rows(const Tensor& alpha, const Tensor& y) {
  require_matching(alpha, y, "kl_to_uniform");
  require_one_hot(y);
  const std::size_t k = alpha.cols();
  // alpha_tilde = y + (1 - y) . alpha, with y constant
  Tensor one_minus_y(y.rows(), y.cols(), [&] {
    std::vector<double> v(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) v[i] = 1.0 - y.values()[i];
    return v;
  }());
  Tensor at = add(Tensor(y.rows(), y.cols(), y.values()), mul(one_minus_y, alpha));
  Tensor s = row_sum(at);
  Tensor term = mul(add_scalar(at, -1.0), sub(digamma_t(at), tile_col(digamma_t(s), k)));
  Tensor kl = add(sub(lgamma_t(s), row_sum(lgamma_t(at))), row_sum(term));
  return add_scalar(kl, -lgamma_pos(double(k)));
}

Tensor kl_to_uniform(const Tensor& alpha, const Tensor& y) {
  return mean_all(kl_to_uniform_rows(alpha, y));
}

Tensor acc_loss_rows(const Tensor& alpha, const Tensor& y, const AnnealSchedule& schedule) {
  return add(ace_loss_rows(alpha, y), scale(kl_to_uniform_rows(alpha, y), schedule.lambda()));
}

Tensor acc_loss(const Tensor& alpha, const Tensor& y, const AnnealSchedule& schedule) {
  return mean_all(acc_loss_rows(alpha, y, schedule));
}

OpinionRows opinion_rows(const Tensor& alpha) {
  const std::size_t k = alpha.cols();
  Tensor s = row_sum(alpha);
  OpinionRows o;
  o.uncertainty = div(Tensor::full(alpha.rows(), 1, double(k)), s);
  o.belief = div(add_scalar(alpha, -1.0), tile_col(s, k));
  o.projected = add(o.belief, scale(tile_col(o.uncertainty, k), 1.0 / double(k)));
  return o;
}

Tensor conflict_rows(const Tensor& alpha_a, const Tensor& alpha_b) {
  if (alpha_a.cols() != alpha_b.cols() || alpha_a.rows() != alpha_b.rows()) {
    throw shape_error("conflict_rows: " + alpha_a.shape_str() + " vs " +
                      alpha_b.shape_str());
  }
  OpinionRows a = opinion_rows(alpha_a);
  OpinionRows b = opinion_rows(alpha_b);
  Tensor cp = scale(row_sum(abs_t(sub(a.projected, b.projected))), 0.5);
  Tensor certainty_a = add_scalar(scale(a.uncertainty, -1.0), 1.0);
  Tensor certainty_b = add_scalar(scale(b.uncertainty, -1.0), 1.0);
  return mul(cp, mul(certainty_a, certainty_b));
}

Tensor consistency_loss_rows(const std::vector<Tensor>& alphas) {
  const std::size_t m = alphas.size();
  if (m < 2) throw std::domain_error("consistency_loss: needs at least 2 modalities");
  Tensor acc;
  for (std::size_t p = 0; p < m; ++p) {
    for (std::size_t q = 0; q < m; ++q) {
      if (q == p) continue;
      Tensor c = conflict_rows(alphas[p], alphas[q]);
      acc = acc.defined() ? add(acc, c) : c;
    }
  }
  return scale(acc, 1.0 / double(m - 1));
}

Tensor consistency_loss(const std::vector<Tensor>& alphas) {
  return mean_all(consistency_loss_rows(alphas));
}

Tensor fuse_alpha(const std::vector<Tensor>& alphas, AlphaFusion mode) {
  if (alphas.empty()) throw std::domain_error("fuse_alpha: empty modality list");
  const std::size_t k = alphas[0].cols();
  for (const auto& a : alphas) {
    if (a.cols() != k || a.rows() != alphas[0].rows()) {
      throw shape_error("fuse_alpha: modality shapes differ, " + alphas[0].shape_str() +
                        " vs " + a.shape_str());
    }
  }
  if (alphas.size() == 1) return alphas[0];

  if (mode == AlphaFusion::weighted_average) {
    // w_m = (1 - u_m) / sum_j (1 - u_j); the epsilon keeps the all-vacuous
    // case defined (it degrades to uniform weights).
    std::vector<Tensor> certainties;
    Tensor denom;
    for (const auto& a : alphas) {
      Tensor u = opinion_rows(a).uncertainty;
      Tensor c = add_scalar(add_scalar(scale(u, -1.0), 1.0), kFusionEps);
      certainties.push_back(c);
      denom = denom.defined() ? add(denom, c) : c;
    }
    Tensor fused;
    for (std::size_t m = 0; m < alphas.size(); ++m) {
      Tensor w = tile_col(div(certainties[m], denom), k);
      Tensor part = mul(w, alphas[m]);
      fused = fused.defined() ? add(fused, part) : part;
    }
    return fused;
  }

  // Opinion fusion: left-fold of the belief/uncertainty rule, then back to
  // alpha via e = K * b / u.
  OpinionRows acc = opinion_rows(alphas[0]);
  for (std::size_t m = 1; m < alphas.size(); ++m) {
    OpinionRows next = opinion_rows(alphas[m]);
    Tensor usum = add(acc.uncertainty, next.uncertainty);
    Tensor b = div(add(mul(acc.belief, tile_col(next.uncertainty, k)),
                       mul(next.belief, tile_col(acc.uncertainty, k))),
                   tile_col(usum, k));
    Tensor u = div(scale(mul(acc.uncertainty, next.uncertainty), 2.0), usum);
    acc.belief = b;
    acc.uncertainty = u;
  }
  Tensor e = scale(div(acc.belief, tile_col(acc.uncertainty, k)), double(k));
  return add_scalar(e, 1.0);
}

Tensor edl_total(const std::vector<Tensor>& alphas, const Tensor& y,
                 const AnnealSchedule& schedule, const EdlWeights& weights,
                 AlphaFusion mode) {
  if (alphas.empty()) throw std::domain_error("edl_total: empty modality list");
  Tensor fused = fuse_alpha(alphas, mode);
  Tensor per_instance = acc_loss_rows(fused, y, schedule);
  if (weights.beta != 0.0) {
    Tensor unimodal;
    for (const auto& a : alphas) {
      Tensor l = acc_loss_rows(a, y, schedule);
      unimodal = unimodal.defined() ? add(unimodal, l) : l;
    }
    per_instance = add(per_instance, scale(unimodal, weights.beta));
  }
  if (weights.gamma != 0.0 && alphas.size() >= 2) {
    per_instance = add(per_instance, scale(consistency_loss_rows(alphas), weights.gamma));
  }
  return mean_all(per_instance);
}

}  // namespace crest
