#pragma once

// Meta-pattern bank with sparse attention readout, and the DIGS loss
// (triplet separation against the second-nearest pattern plus a compactness
// regularizer).

#include <random>
#include <utility>
#include <vector>

#include "crest/tensor.hpp"

namespace crest {

struct MetaPatternBank {
  Tensor patterns;  // phi x d, learnable
  Tensor w_q;       // in_width x d
  Tensor b_q;       // 1 x d
  Tensor w_r;       // d x in_width, remap back to the feature space
  double margin = 1.0;

  std::size_t pattern_count() const { return patterns.rows(); }
  std::vector<Tensor> parameters() const { return {patterns, w_q, b_q, w_r}; }
};

// Patterns drawn from a seeded standard normal scaled by 1/sqrt(d).
MetaPatternBank make_meta_pattern_bank(std::size_t in_width, std::size_t pattern_count,
                                       std::size_t pattern_dim, double margin,
                                       std::mt19937_64& rng);

struct BankReadout {
  Tensor queries;    // B x d
  Tensor attention;  // B x phi
  Tensor v_star;     // B x d
  Tensor enriched;   // B x in_width, input + remapped readout
};

BankReadout bank_attend(const Tensor& f_attribute, const MetaPatternBank& bank);

// (nearest, second-nearest) pattern indices by dot-product similarity,
// ties broken to the lowest index. Selection is value-level (fixed per step).
std::pair<std::size_t, std::size_t> nearest_patterns(const std::vector<double>& query,
                                                     const Tensor& patterns);

// sum_i max(||Q_i - Phi_p||^2 - ||Q_i - Phi_n||^2 + margin, 0)
//   + sum_i ||Q_i - Phi_p||^2, summed over the batch (no mean).
Tensor digs_loss(const Tensor& queries, const Tensor& patterns, double margin);

}  // namespace crest
