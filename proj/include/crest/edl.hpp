#pragma once

// Evidential losses over Dirichlet parameters, built on the autodiff graph.
// Row-wise variants return a Bx1 column of per-instance values; the scalar
// variants are their batch means.

#include <vector>

#include "crest/tensor.hpp"

namespace crest {

struct AnnealSchedule {
  int annealing_steps = 10;  // E
  int current_epoch = 0;     // t

  // lambda_t = min(1, t/E)
  double lambda() const;
};

struct EdlWeights {
  double beta = 1.0;
  double gamma = 1.0;
};

enum class AlphaFusion { weighted_average, opinion_fusion };

// sum_j y_j (psi(S) - psi(alpha_j)), per row. y must be one-hot.
Tensor ace_loss_rows(const Tensor& alpha, const Tensor& y);
Tensor ace_loss(const Tensor& alpha, const Tensor& y);

// KL[Dir(alpha_tilde) || Dir(1)] with alpha_tilde = y + (1-y) * alpha.
Tensor kl_to_uniform_rows(const Tensor& alpha, const Tensor& y);
Tensor kl_to_uniform(const Tensor& alpha, const Tensor& y);

Tensor acc_loss_rows(const Tensor& alpha, const Tensor& y, const AnnealSchedule& schedule);
Tensor acc_loss(const Tensor& alpha, const Tensor& y, const AnnealSchedule& schedule);

// In-graph opinion view of a BxK alpha matrix.
struct OpinionRows {
  Tensor belief;       // BxK
  Tensor uncertainty;  // Bx1
  Tensor projected;    // BxK (uniform base rate)
};
OpinionRows opinion_rows(const Tensor& alpha);

// Conflict degree between two modalities, per row.
Tensor conflict_rows(const Tensor& alpha_a, const Tensor& alpha_b);

// (1/(M-1)) sum_p sum_{q != p} c(w^p, w^q); ordered pairs are double-counted.
Tensor consistency_loss_rows(const std::vector<Tensor>& alphas);
Tensor consistency_loss(const std::vector<Tensor>& alphas);

// Uncertainty-driven combination of modalities' alphas.
Tensor fuse_alpha(const std::vector<Tensor>& alphas, AlphaFusion mode);

// L_ACC(alpha_hat) + beta * sum_m L_ACC(alpha^m) + gamma * L_CON, batch mean.
Tensor edl_total(const std::vector<Tensor>& alphas, const Tensor& y,
                 const AnnealSchedule& schedule, const EdlWeights& weights,
                 AlphaFusion mode);

}  // namespace crest
