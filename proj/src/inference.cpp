#include "crest/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

namespace crest {

bool ClassSemanticMatrix::is_seen(int class_id) const {
  return std::find(seen_ids.begin(), seen_ids.end(), class_id) != seen_ids.end();
}

void ClassSemanticMatrix::validate() const {
  std::set<int> seen(seen_ids.begin(), seen_ids.end());
  std::set<int> unseen(unseen_ids.begin(), unseen_ids.end());
  for (int id : seen) {
    if (unseen.count(id)) {
      throw std::domain_error("semantics: class " + std::to_string(id) +
                              " is both seen and unseen");
    }
  }
  if (seen.size() + unseen.size() != class_count()) {
    throw std::domain_error("semantics: seen + unseen must cover all classes");
  }
  for (int id : seen_ids) {
    if (id < 0 || std::size_t(id) >= class_count()) {
      throw std::domain_error("semantics: class id out of range");
    }
  }
}

Tensor fused_embedding(const Tensor& f_attribute, const Tensor& f_visual, double mu) {
  if (f_attribute.rows() != f_visual.rows() || f_attribute.cols() != f_visual.cols()) {
    throw shape_error("fused_embedding: " + f_attribute.shape_str() + " vs " +
                      f_visual.shape_str());
  }
  return add(scale(f_attribute, mu), scale(f_visual, 1.0 - mu));
}

namespace {

// Row-stabilized log-softmax.
Tensor log_softmax_rows(const Tensor& logits) {
  const std::size_t m = logits.rows(), n = logits.cols();
  std::vector<double> shift(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = logits.at(i, 0);
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, logits.at(i, j));
    for (std::size_t j = 0; j < n; ++j) shift[i * n + j] = mx;
  }
  Tensor shifted = sub(logits, Tensor(m, n, std::move(shift)));
  Tensor lse = log_t(row_sum(exp_t(shifted)));
  return sub(shifted, tile_col(lse, n));
}

}  // namespace

Tensor arise_loss(const Tensor& fused, const std::vector<int>& labels,
                  const ClassSemanticMatrix& semantics, const FusionCoefficients& coeffs) {
  semantics.validate();
  const std::size_t b = fused.rows();
  if (labels.size() != b) throw std::domain_error("arise_loss: label count mismatch");
  for (int label : labels) {
    if (!semantics.is_seen(label)) {
      throw std::domain_error("arise_loss: training label " + std::to_string(label) +
                              " is not a seen class");
    }
  }
  Tensor scores = matmul(fused, transpose(semantics.z));  // B x C

  // Seen-class cross-entropy.
  std::vector<std::size_t> seen_cols(semantics.seen_ids.begin(), semantics.seen_ids.end());
  Tensor seen_scores = gather_cols(scores, seen_cols);
  Tensor seen_logp = log_softmax_rows(seen_scores);
  std::vector<double> pick(b * seen_cols.size(), 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    const auto it = std::find(semantics.seen_ids.begin(), semantics.seen_ids.end(),
                              labels[i]);
    pick[i * seen_cols.size() + std::size_t(it - semantics.seen_ids.begin())] = 1.0;
  }
  Tensor ce = scale(mean_all(row_sum(mul(seen_logp,
                                         Tensor(b, seen_cols.size(), std::move(pick))))),
                    -1.0);

  if (coeffs.lambda_cal == 0.0) return ce;

  // Self-calibration: push log-probability mass toward the unseen classes.
  std::vector<double> indicator(b * semantics.class_count(), 0.0);
  std::vector<double> unseen_mask(b * semantics.class_count(), 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    for (int u : semantics.unseen_ids) {
      indicator[i * semantics.class_count() + std::size_t(u)] = coeffs.delta;
      unseen_mask[i * semantics.class_count() + std::size_t(u)] = 1.0;
    }
  }
  Tensor boosted = add(scores, Tensor(b, semantics.class_count(), std::move(indicator)));
  Tensor all_logp = log_softmax_rows(boosted);
  Tensor cal = mean_all(row_sum(mul(all_logp, Tensor(b, semantics.class_count(),
                                                     std::move(unseen_mask)))));
  return sub(ce, scale(cal, coeffs.lambda_cal));
}

Tensor total_loss(const Tensor& arise, const Tensor& vicl, const Tensor& digs,
                  const Tensor& edl, double lambda_edl) {
  Tensor out = add(add(arise, vicl), digs);
  if (lambda_edl != 0.0) out = add(out, scale(edl, lambda_edl));
  return out;
}

int predict(const std::vector<double>& fused, const ClassSemanticMatrix& semantics,
            const FusionCoefficients& coeffs, EvalMode mode) {
  semantics.validate();
  if (fused.size() != semantics.z.cols()) {
    throw shape_error("predict: embedding width " + std::to_string(fused.size()) +
                      " vs semantics " + semantics.z.shape_str());
  }
  std::vector<int> sorted;
  if (mode == EvalMode::czsl) {
    sorted = semantics.unseen_ids;
  } else {
    for (std::size_t c = 0; c < semantics.class_count(); ++c) sorted.push_back(int(c));
  }
  std::sort(sorted.begin(), sorted.end());
  int best = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int c : sorted) {
    double score = 0.0;
    for (std::size_t a = 0; a < fused.size(); ++a) {
      score += fused[a] * semantics.z.at(std::size_t(c), a);
    }
    if (!semantics.is_seen(c)) score += coeffs.delta;
    if (score > best_score) {
      best_score = score;
      best = c;
    }
  }
  return best;
}

double harmonic_mean(double s, double u) {
  if (s <= 0.0 || u <= 0.0) return 0.0;
  return 2.0 * s * u / (s + u);
}

namespace {

double macro_accuracy(const std::vector<int>& predictions, const std::vector<int>& labels,
                      const std::vector<int>& class_ids, const char* split) {
  std::map<int, std::pair<int, int>> per_class;  // class -> (correct, total)
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& entry = per_class[labels[i]];
    entry.second += 1;
    if (predictions[i] == labels[i]) entry.first += 1;
  }
  double acc = 0.0;
  int counted = 0;
  for (int c : class_ids) {
    auto it = per_class.find(c);
    if (it == per_class.end()) continue;
    acc += double(it->second.first) / double(it->second.second);
    ++counted;
  }
  if (counted == 0) {
    throw std::domain_error(std::string("metrics: empty ") + split + " split");
  }
  return acc / double(counted);
}

}  // namespace

GzslMetrics gzsl_metrics(const std::vector<int>& predictions,
                         const std::vector<int>& labels,
                         const ClassSemanticMatrix& semantics) {
  if (predictions.size() != labels.size()) {
    throw std::domain_error("gzsl_metrics: prediction/label count mismatch");
  }
  GzslMetrics m;
  m.seen = macro_accuracy(predictions, labels, semantics.seen_ids, "seen");
  m.unseen = macro_accuracy(predictions, labels, semantics.unseen_ids, "unseen");
  m.harmonic = harmonic_mean(m.seen, m.unseen);
  return m;
}

double czsl_metrics(const std::vector<int>& predictions, const std::vector<int>& labels,
                    const ClassSemanticMatrix& semantics) {
  if (predictions.size() != labels.size()) {
    throw std::domain_error("czsl_metrics: prediction/label count mismatch");
  }
  return macro_accuracy(predictions, labels, semantics.unseen_ids, "unseen");
}

}  // namespace crest
