#pragma once

// Flat key=value config files covering the generator and trainer settings.

#include <cstdint>
#include <stdexcept>
#include <string>

#include "crest/edl.hpp"
#include "crest/grounding.hpp"
#include "crest/inference.hpp"
#include "crest/synth.hpp"

namespace crest {

class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

struct TrainConfig {
  int epochs = 30;
  int batch_size = 64;
  double learning_rate = 1e-4;
  double weight_decay = 1e-4;
  std::uint64_t seed = 1;

  FusionCoefficients coeffs;  // mu, lambda_cal, lambda_edl, delta
  EdlWeights edl_weights;     // beta, gamma
  double tau = 0.1;
  double similarity_threshold = 0.5;
  double margin = 1.0;
  int annealing_steps = 10;

  int layers = 1;
  int d_k = 32;
  int bank_size = 64;
  int bank_dim = 16;

  AlphaFusion fusion_mode = AlphaFusion::weighted_average;
  EvidenceActivation evidence_activation = EvidenceActivation::softplus;
  Pooling pooling = Pooling::mean;

  // Ablation switches (not config-file keys; set by the ablate command).
  bool drop_vicl = false;
  bool drop_digs = false;
  bool drop_edl = false;
  int force_modality = -1;  // 0: visual only (mu=0), 1: attribute only (mu=1)

  void validate() const;
};

struct EngineConfig {
  SynthConfig synth;
  TrainConfig train;
};

// Parses "key = value" lines with '#' comments. Unknown keys are rejected
// with the offending line number.
EngineConfig parse_config_file(const std::string& path);
EngineConfig parse_config_text(const std::string& text, const std::string& origin);

}  // namespace crest
