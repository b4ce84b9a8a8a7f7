#pragma once

// Synthetic zero-shot dataset generation and the on-disk dataset formats.
// Region rows of each instance are split into two modality streams: the
// first half feeds the visual path, the second half the attribute path,
// which lets conflict injection corrupt one stream independently.

#include <cstdint>
#include <string>
#include <vector>

#include "crest/inference.hpp"
#include "crest/tensor.hpp"

namespace crest {

class format_error : public std::runtime_error {
 public:
  explicit format_error(const std::string& what) : std::runtime_error(what) {}
};

struct SynthConfig {
  int class_count = 20;
  int seen_count = 15;
  int attribute_count = 32;
  int regions_per_instance = 8;
  int feature_width = 64;
  int instances_per_class = 50;
  double imbalance_exponent = 0.3;    // power-law skew of attribute frequencies
  double cooccurrence_strength = 0.3; // probability of tying attribute pairs
  double variability_noise = 0.1;     // per-instance transform + additive noise
  double conflict_rate = 0.0;         // fraction of instances with one noisy stream
  std::uint64_t seed = 1;

  void validate() const;
};

enum class Split { train_seen, test_seen, test_unseen };
enum class Corruption { none, visual, attribute };

const char* split_name(Split s);
const char* corruption_name(Corruption c);

struct Instance {
  Tensor features;  // R x h
  int label = 0;
  Split split = Split::train_seen;
  Corruption corruption = Corruption::none;
};

struct ZslDataset {
  ClassSemanticMatrix semantics;
  std::vector<Instance> instances;
  int regions_per_instance = 0;
  int feature_width = 0;

  std::vector<std::size_t> split_indices(Split s) const;
};

// Rows feeding each modality stream.
Tensor visual_block(const Instance& instance);
Tensor attribute_block(const Instance& instance);

ZslDataset generate(const SynthConfig& config);

void save(const ZslDataset& dataset, const std::string& dir);
ZslDataset load(const std::string& dir);

// Text (CSV) or binary ("CRSTMAT1") matrix files, sniffed by magic.
Tensor load_matrix(const std::string& path);
void save_matrix_text(const Tensor& m, const std::string& path);
void save_matrix_binary(const Tensor& m, const std::string& path);

}  // namespace crest
