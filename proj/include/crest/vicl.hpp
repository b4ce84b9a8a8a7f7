#pragma once

// Visual instance-level contrastive learning: cosine-similarity positive
// selection with cross-category fallback, and the InfoNCE-style loss.

#include <cstddef>
#include <vector>

#include "crest/tensor.hpp"

namespace crest {

struct ContrastiveBatch {
  Tensor embeddings;        // B x width (pooled visual embeddings)
  std::vector<int> labels;  // B category ids
  double temperature = 0.1;
  double similarity_threshold = 0.5;
};

// Cosine similarity matrix of the batch embeddings (value-level, B x B).
std::vector<std::vector<double>> cosine_similarities(const Tensor& embeddings);

// Highest-similarity same-category candidate if it clears the threshold,
// otherwise the globally most similar non-anchor element. Ties break to the
// lowest index.
std::size_t select_positive(const ContrastiveBatch& batch, std::size_t anchor);

// Batch mean of -log softmax(sim(anchor, positive)/tau) over positive plus
// all non-anchor negatives. Positives come from select_positive.
Tensor vicl_loss(const ContrastiveBatch& batch);

}  // namespace crest
