#pragma once

// Bidirectional grounding: VGT (attribute-side queries attend visual regions)
// and AGT (region queries attend attribute embeddings), followed by the
// evidence heads that map attribute-space embeddings to class evidence.

#include <random>
#include <vector>

#include "crest/tensor.hpp"

namespace crest {

enum class Pooling { mean, max };
enum class EvidenceActivation { softplus, relu, exp };

struct AttentionLayer {
  Tensor w_q;  // width x d_k
  Tensor w_k;  // width x d_k
  Tensor w_v;  // width x width
};

struct GroundingParams {
  std::vector<AttentionLayer> layers;
  Tensor w1, b1;  // width x width, 1 x width
  Tensor w2, b2;  // width x out_width, 1 x out_width
  std::size_t d_k = 32;
  Pooling pooling = Pooling::mean;

  std::vector<Tensor> parameters() const;
};

// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
Tensor init_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng);

GroundingParams make_grounding_params(std::size_t width, std::size_t out_width,
                                      std::size_t d_k, std::size_t n_layers,
                                      std::mt19937_64& rng);

// softmax(Q K^T / sqrt(d_k)) V with Q from `queries`, K/V from `context`.
Tensor cross_attention_block(const Tensor& queries, const Tensor& context,
                             const AttentionLayer& layer, std::size_t d_k);

// ReLU((x W1 + b1) W2 + b2); the ReLU wraps the whole affine composition.
Tensor ffn(const Tensor& x, const GroundingParams& params);

// n stacked blocks (attribute embeddings as initial queries, regions as
// context), ffn, then pooled over queries to a single 1 x out_width row.
Tensor vgt_forward(const Tensor& regions, const Tensor& attribute_embeddings,
                   const GroundingParams& params);

// Mirror of vgt_forward: region queries attend the attribute embeddings.
Tensor agt_forward(const Tensor& regions, const Tensor& attribute_embeddings,
                   const GroundingParams& params);

// alpha = act(f z^T) + 1 over the class semantic matrix z (C x |A|).
Tensor evidence_head(const Tensor& f, const Tensor& class_semantics,
                     EvidenceActivation activation);

}  // namespace crest
