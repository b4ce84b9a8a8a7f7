#pragma once

// Training orchestration: batching, the total objective, annealing,
// optimizer steps, and per-epoch diagnostics.

#include <string>
#include <vector>

#include "crest/config.hpp"
#include "crest/digs.hpp"
#include "crest/grounding.hpp"
#include "crest/optim.hpp"
#include "crest/synth.hpp"

namespace crest {

struct Model {
  GroundingParams vgt;
  GroundingParams agt;
  MetaPatternBank bank;
  Tensor attribute_embeddings;  // |A| x h, fixed

  std::vector<Tensor> parameters() const;
};

Model make_model(const ZslDataset& dataset, const TrainConfig& config);

// Batch forward through both grounding paths, the bank, and the evidence heads.
struct BatchForward {
  Tensor f_visual;         // B x |A|
  Tensor f_attribute;      // B x |A|, bank-enriched
  Tensor bank_queries;     // B x d
  Tensor alpha_visual;     // B x C
  Tensor alpha_attribute;  // B x C
  Tensor fused;            // B x |A| convex combination
};

BatchForward forward_batch(const Model& model, const ZslDataset& dataset,
                           const std::vector<std::size_t>& indices,
                           const TrainConfig& config);

struct EpochReport {
  int epoch = 0;
  double arise = 0.0, vicl = 0.0, digs = 0.0, edl = 0.0, total = 0.0;
  double mean_u_visual = 0.0, mean_u_attribute = 0.0, mean_u_fused = 0.0;
  double mean_conflict = 0.0;
  double seen = 0.0, unseen = 0.0, harmonic = 0.0, acc = 0.0;
  double seconds = 0.0;
};

struct EvalResult {
  GzslMetrics gzsl;
  double czsl_acc = 0.0;
  double mean_u_visual = 0.0, mean_u_attribute = 0.0, mean_u_fused = 0.0;
  double mean_conflict = 0.0;
  double mean_conflict_corrupted = 0.0;  // NaN when the group is empty
  double mean_conflict_clean = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<EpochReport> reports;
};

TrainResult train(const ZslDataset& dataset, const TrainConfig& config);

EvalResult evaluate(const Model& model, const ZslDataset& dataset,
                    const TrainConfig& config);

void write_reports_csv(const std::vector<EpochReport>& reports, const std::string& path);

// Flat binary parameter container (names + float64 payloads, little-endian).
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path, const ZslDataset& dataset,
                 const TrainConfig& config);

// Ridge regression from mean-pooled seen-class feature means to attribute
// vectors, then nearest class attribute vector. The independent baseline for
// the end-to-end accuracy checks.
double nearest_class_mean_baseline(const ZslDataset& dataset, EvalMode mode);

}  // namespace crest
