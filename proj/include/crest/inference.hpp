#pragma once

// ARISE loss, total objective, calibrated zero-shot prediction, and the
// CZSL/GZSL evaluation metrics.

#include <vector>

#include "crest/tensor.hpp"

namespace crest {

struct ClassSemanticMatrix {
  Tensor z;  // |C| x |A| class attribute vectors
  std::vector<int> seen_ids;
  std::vector<int> unseen_ids;

  std::size_t class_count() const { return z.rows(); }
  bool is_seen(int class_id) const;
  void validate() const;
};

struct FusionCoefficients {
  double mu = 0.5;
  double lambda_cal = 0.2;
  double lambda_edl = 0.001;
  double delta = 1.0;  // indicator value added to unseen-class logits
};

enum class EvalMode { czsl, gzsl };

// mu * f_A + (1 - mu) * f_V.
Tensor fused_embedding(const Tensor& f_attribute, const Tensor& f_visual, double mu);

// Seen-class cross-entropy of f(x) . z^c, minus lambda_cal times the sum of
// unseen-class log-softmax over all classes with delta on unseen logits.
Tensor arise_loss(const Tensor& fused, const std::vector<int>& labels,
                  const ClassSemanticMatrix& semantics, const FusionCoefficients& coeffs);

// L_ARISE + L_VICL + L_DIGS + lambda_edl * L_EDL.
Tensor total_loss(const Tensor& arise, const Tensor& vicl, const Tensor& digs,
                  const Tensor& edl, double lambda_edl);

// argmax_c fused . z^c + delta * [c in C^u], over C^u (CZSL) or C (GZSL).
// Ties break to the lowest class id.
int predict(const std::vector<double>& fused, const ClassSemanticMatrix& semantics,
            const FusionCoefficients& coeffs, EvalMode mode);

struct GzslMetrics {
  double seen = 0.0;    // S, macro per-class top-1 over seen classes
  double unseen = 0.0;  // U, macro per-class top-1 over unseen classes
  double harmonic = 0.0;
};

double harmonic_mean(double s, double u);

GzslMetrics gzsl_metrics(const std::vector<int>& predictions,
                         const std::vector<int>& labels,
                         const ClassSemanticMatrix& semantics);

// Macro top-1 over unseen classes.
double czsl_metrics(const std::vector<int>& predictions, const std::vector<int>& labels,
                    const ClassSemanticMatrix& semantics);

}  // namespace crest
