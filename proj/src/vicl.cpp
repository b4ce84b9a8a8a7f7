#include "crest/vicl.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crest {

namespace {

void require_batch(const ContrastiveBatch& batch) {
  if (batch.embeddings.rows() < 2) {
    throw std::domain_error("vicl: batch must hold at least 2 elements");
  }
  if (batch.labels.size() != batch.embeddings.rows()) {
    throw std::domain_error("vicl: label count does not match batch size");
  }
  if (!(batch.temperature > 0.0)) {
    throw std::domain_error("vicl: temperature must be positive");
  }
}

}  // namespace

std::vector<std::vector<double>> cosine_similarities(const Tensor& embeddings) {
  const std::size_t b = embeddings.rows(), w = embeddings.cols();
  std::vector<double> norms(b, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < w; ++j) acc += embeddings.at(i, j) * embeddings.at(i, j);
    norms[i] = std::sqrt(acc);
  }
  std::vector<std::vector<double>> sims(b, std::vector<double>(b, 0.0));
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < w; ++k) dot += embeddings.at(i, k) * embeddings.at(j, k);
      const double denom = norms[i] * norms[j];
      sims[i][j] = denom > 0.0 ? dot / denom : 0.0;
    }
  }
  return sims;
}

std::size_t select_positive(const ContrastiveBatch& batch, std::size_t anchor) {
  require_batch(batch);
  const auto sims = cosine_similarities(batch.embeddings);
  const std::size_t b = batch.embeddings.rows();

  std::size_t best_intra = b;
  double best_intra_sim = -2.0;
  std::size_t best_global = b;
  double best_global_sim = -2.0;
  for (std::size_t j = 0; j < b; ++j) {
    if (j == anchor) continue;
    const double s = sims[anchor][j];
    if (s > best_global_sim) {
      best_global_sim = s;
      best_global = j;
    }
    if (batch.labels[j] == batch.labels[anchor] && s > best_intra_sim) {
      best_intra_sim = s;
      best_intra = j;
    }
  }
  if (best_intra < b && best_intra_sim >= batch.similarity_threshold) return best_intra;
  return best_global;
}

Tensor vicl_loss(const ContrastiveBatch& batch) {
  require_batch(batch);
  const std::size_t b = batch.embeddings.rows(), w = batch.embeddings.cols();
  const Tensor& f = batch.embeddings;

  std::vector<std::size_t> positives(b);
  for (std::size_t i = 0; i < b; ++i) positives[i] = select_positive(batch, i);

  // L2-normalized rows, then the full cosine matrix in one product.
  Tensor norms = sqrt_t(add_scalar(row_sum(mul(f, f)), 1e-24));
  Tensor normalized = div(f, tile_col(norms, w));
  Tensor scores = scale(matmul(normalized, transpose(normalized)), 1.0 / batch.temperature);

  // Row max over the non-anchor entries, as a constant stabilizer.
  std::vector<double> shift(b, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < b; ++j) {
      if (j != i) mx = std::max(mx, scores.at(i, j));
    }
    shift[i] = mx;
  }
  std::vector<double> mask(b * b, 1.0), pos_mask(b * b, 0.0), shift_mat(b * b, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    mask[i * b + i] = 0.0;
    pos_mask[i * b + positives[i]] = 1.0;
    for (std::size_t j = 0; j < b; ++j) shift_mat[i * b + j] = shift[i];
  }
  Tensor shifted = sub(scores, Tensor(b, b, std::move(shift_mat)));
  Tensor denom = row_sum(mul(exp_t(shifted), Tensor(b, b, std::move(mask))));
  Tensor positive_term = row_sum(mul(shifted, Tensor(b, b, std::move(pos_mask))));
  return mean_all(sub(log_t(denom), positive_term));
}

}  // namespace crest
