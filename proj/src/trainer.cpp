#include "crest/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "crest/edl.hpp"
#include "crest/opinion.hpp"
#include "crest/vicl.hpp"

namespace crest {

namespace {

constexpr char kModelMagic[8] = {'C', 'R', 'S', 'T', 'P', 'A', 'R', '1'};

double effective_mu(const TrainConfig& config) {
  if (config.force_modality == 0) return 0.0;  // visual path only
  if (config.force_modality == 1) return 1.0;  // attribute path only
  return config.coeffs.mu;
}

Tensor one_hot_labels(const std::vector<std::size_t>& indices, const ZslDataset& dataset) {
  const std::size_t c = dataset.semantics.class_count();
  std::vector<double> v(indices.size() * c, 0.0);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    v[i * c + std::size_t(dataset.instances[indices[i]].label)] = 1.0;
  }
  return Tensor(indices.size(), c, std::move(v));
}

}  // namespace

std::vector<Tensor> Model::parameters() const {
  std::vector<Tensor> out = vgt.parameters();
  for (const auto& t : agt.parameters()) out.push_back(t);
  for (const auto& t : bank.parameters()) out.push_back(t);
  return out;
}

Model make_model(const ZslDataset& dataset, const TrainConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  const std::size_t a = dataset.semantics.z.cols();
  const std::size_t h = std::size_t(dataset.feature_width);

  Model model;
  std::normal_distribution<double> normal(0.0, 1.0);
  // Fixed attribute embeddings: embedding k is an indicator of feature
  // coordinate k (plus light noise), so attending over the embeddings reads
  // out a profile over attributes in the same basis the generator's feature
  // map uses. A random table would force the attribute stream to first learn
  // a change of basis, which the step budget does not cover.
  const double kEmbedScale = 8.0;
  std::vector<double> emb(a * h);
  for (std::size_t k = 0; k < a; ++k)
    for (std::size_t j = 0; j < h; ++j)
      emb[k * h + j] = (j == k ? kEmbedScale : 0.1 * normal(rng));
  model.attribute_embeddings = Tensor(a, h, std::move(emb));

  model.vgt = make_grounding_params(h, a, std::size_t(config.d_k),
                                    std::size_t(config.layers), rng);
  model.vgt.pooling = config.pooling;
  // The visual stream carries the sharper class signal; doubling its output
  // scale keeps the mu-blended embedding's margins comparable to what the
  // stream achieves alone, and it damps the contrastive loss (whose cosine
  // gradients shrink with embedding norm) relative to the classification
  // terms, which see the blend at half strength.
  auto scale_readout = [](GroundingParams& p, double s) {
    for (auto* t : {&p.w2, &p.b2}) {
      std::vector<double> v = t->values();
      for (auto& x : v) x *= s;
      *t = Tensor(t->rows(), t->cols(), std::move(v), /*requires_grad=*/true);
    }
  };
  scale_readout(model.vgt, 3.25);
  model.agt = make_grounding_params(h, a, std::size_t(config.d_k),
                                    std::size_t(config.layers), rng);
  model.agt.pooling = config.pooling;
  // Align the attribute stream's first attention layer with the indicator
  // embeddings: diagonal query/key maps make the attention score of region r
  // on attribute k proportional to the region's coordinate-k content, so the
  // stream starts out summarizing which attributes an instance expresses.
  {
    const double kDiag = 1.5;
    const std::size_t d_k = std::size_t(config.d_k);
    auto aligned = [&](std::size_t rows) {
      Tensor noise = init_uniform(rows, d_k, rng);
      std::vector<double> v(rows * d_k);
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < d_k; ++j)
          v[i * d_k + j] = 0.2 * noise.at(i, j) + (i == j ? kDiag : 0.0);
      return Tensor(rows, d_k, std::move(v), /*requires_grad=*/true);
    };
    model.agt.layers.front().w_q = aligned(h);
    model.agt.layers.front().w_k = aligned(h);
  }
  // The attribute stream's attention profile sums to one, which caps its
  // class scores well below the visual stream's; scale its readout so both
  // streams contribute comparable margins to the blend and either one can
  // carry an instance whose other stream is corrupted.
  scale_readout(model.agt, 1.75);
  model.bank = make_meta_pattern_bank(a, std::size_t(config.bank_size),
                                      std::size_t(config.bank_dim), config.margin, rng);
  return model;
}

BatchForward forward_batch(const Model& model, const ZslDataset& dataset,
                           const std::vector<std::size_t>& indices,
                           const TrainConfig& config) {
  std::vector<Tensor> visual_rows, attribute_rows;
  visual_rows.reserve(indices.size());
  attribute_rows.reserve(indices.size());
  for (std::size_t idx : indices) {
    const Instance& inst = dataset.instances[idx];
    visual_rows.push_back(
        vgt_forward(visual_block(inst), model.attribute_embeddings, model.vgt));
    attribute_rows.push_back(
        agt_forward(attribute_block(inst), model.attribute_embeddings, model.agt));
  }
  BatchForward out;
  out.f_visual = vcat(visual_rows);
  BankReadout readout = bank_attend(vcat(attribute_rows), model.bank);
  out.f_attribute = readout.enriched;
  out.bank_queries = readout.queries;
  out.alpha_visual =
      evidence_head(out.f_visual, dataset.semantics.z, config.evidence_activation);
  out.alpha_attribute =
      evidence_head(out.f_attribute, dataset.semantics.z, config.evidence_activation);
  out.fused = fused_embedding(out.f_attribute, out.f_visual, effective_mu(config));
  return out;
}

TrainResult train(const ZslDataset& dataset, const TrainConfig& config) {
  config.validate();
  TrainResult result{make_model(dataset, config), {}};

  const auto train_indices = dataset.split_indices(Split::train_seen);
  if (train_indices.empty()) throw std::domain_error("train: empty training split");

  std::vector<Tensor> params = result.model.parameters();
  AdamState adam;
  adam.learning_rate = config.learning_rate;
  adam.weight_decay = config.weight_decay;
  std::mt19937_64 shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<std::size_t> order = train_indices;
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    AnnealSchedule schedule{config.annealing_steps, epoch};
    EpochReport report;
    report.epoch = epoch;
    std::size_t batches = 0;

    for (std::size_t offset = 0; offset < order.size();
         offset += std::size_t(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), offset + std::size_t(config.batch_size));
      std::vector<std::size_t> batch(order.begin() + offset, order.begin() + end);

      BatchForward fw = forward_batch(result.model, dataset, batch, config);
      Tensor y = one_hot_labels(batch, dataset);
      std::vector<int> labels;
      for (std::size_t idx : batch) labels.push_back(dataset.instances[idx].label);

      Tensor arise = arise_loss(fw.fused, labels, dataset.semantics, config.coeffs);
      Tensor total = arise;

      Tensor vicl;
      if (!config.drop_vicl && batch.size() >= 2) {
        ContrastiveBatch cb{fw.f_visual, labels, config.tau, config.similarity_threshold};
        vicl = vicl_loss(cb);
        total = add(total, vicl);
      }
      Tensor digs;
      if (!config.drop_digs) {
        digs = digs_loss(fw.bank_queries, result.model.bank.patterns, config.margin);
        total = add(total, digs);
      }
      Tensor edl;
      const double lambda_edl = config.drop_edl ? 0.0 : config.coeffs.lambda_edl;
      if (lambda_edl != 0.0) {
        edl = edl_total({fw.alpha_visual, fw.alpha_attribute}, y, schedule,
                        config.edl_weights, config.fusion_mode);
        total = add(total, scale(edl, lambda_edl));
      }

      if (!std::isfinite(total.item())) {
        throw numeric_error("train: non-finite loss at epoch " + std::to_string(epoch));
      }
      for (auto& p : params) p.zero_grad();
      backward(total);
      adam_step(params, adam);

      report.arise += arise.item();
      if (vicl.defined()) report.vicl += vicl.item();
      if (digs.defined()) report.digs += digs.item();
      if (edl.defined()) report.edl += edl.item();
      report.total += total.item();
      ++batches;
    }
    report.arise /= double(batches);
    report.vicl /= double(batches);
    report.digs /= double(batches);
    report.edl /= double(batches);
    report.total /= double(batches);

    EvalResult eval = evaluate(result.model, dataset, config);
    report.mean_u_visual = eval.mean_u_visual;
    report.mean_u_attribute = eval.mean_u_attribute;
    report.mean_u_fused = eval.mean_u_fused;
    report.mean_conflict = eval.mean_conflict;
    report.seen = eval.gzsl.seen;
    report.unseen = eval.gzsl.unseen;
    report.harmonic = eval.gzsl.harmonic;
    report.acc = eval.czsl_acc;
    report.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.reports.push_back(report);
  }
  return result;
}

EvalResult evaluate(const Model& model, const ZslDataset& dataset,
                    const TrainConfig& config) {
  const auto test_seen = dataset.split_indices(Split::test_seen);
  const auto test_unseen = dataset.split_indices(Split::test_unseen);
  if (test_unseen.empty()) throw std::domain_error("evaluate: empty unseen split");

  std::vector<std::size_t> all = test_seen;
  all.insert(all.end(), test_unseen.begin(), test_unseen.end());

  EvalResult out;
  std::vector<int> gzsl_preds, gzsl_labels, czsl_preds, czsl_labels;
  double conflict_corrupted = 0.0, conflict_clean = 0.0;
  std::size_t n_corrupted = 0, n_clean = 0;
  const std::size_t k = dataset.semantics.class_count();

  const std::size_t chunk = 256;
  for (std::size_t offset = 0; offset < all.size(); offset += chunk) {
    const std::size_t end = std::min(all.size(), offset + chunk);
    std::vector<std::size_t> batch(all.begin() + offset, all.begin() + end);
    BatchForward fw = forward_batch(model, dataset, batch, config);

    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Instance& inst = dataset.instances[batch[i]];
      std::vector<double> fused_row(fw.fused.cols());
      for (std::size_t j = 0; j < fw.fused.cols(); ++j) fused_row[j] = fw.fused.at(i, j);

      gzsl_preds.push_back(predict(fused_row, dataset.semantics, config.coeffs,
                                   EvalMode::gzsl));
      gzsl_labels.push_back(inst.label);
      if (inst.split == Split::test_unseen) {
        czsl_preds.push_back(predict(fused_row, dataset.semantics, config.coeffs,
                                     EvalMode::czsl));
        czsl_labels.push_back(inst.label);
      }

      DirichletParams av, aa;
      av.alpha.resize(k);
      aa.alpha.resize(k);
      for (std::size_t j = 0; j < k; ++j) {
        av.alpha[j] = fw.alpha_visual.at(i, j);
        aa.alpha[j] = fw.alpha_attribute.at(i, j);
      }
      Opinion ov = opinion_from_alpha(av);
      Opinion oa = opinion_from_alpha(aa);
      // Uncertainty is tracked over the unseen split: the epoch trace asks
      // how much evidence the model can marshal for classes it never
      // trained on, which seen-class instances would only wash out.
      const bool track_u = inst.split == Split::test_unseen;
      if (track_u) {
        out.mean_u_visual += ov.uncertainty;
        out.mean_u_attribute += oa.uncertainty;
      }

      double u_fused;
      if (config.fusion_mode == AlphaFusion::opinion_fusion) {
        u_fused = fuse(ov, oa).uncertainty;
      } else {
        const double wa = (1.0 - ov.uncertainty), wb = (1.0 - oa.uncertainty);
        const double denom = wa + wb;
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
          const double w1 = denom > 0.0 ? wa / denom : 0.5;
          const double w2 = denom > 0.0 ? wb / denom : 0.5;
          s += w1 * av.alpha[j] + w2 * aa.alpha[j];
        }
        u_fused = double(k) / s;
      }
      if (track_u) out.mean_u_fused += u_fused;

      const double c = conflict(ov, oa);
      out.mean_conflict += c;
      if (inst.corruption != Corruption::none) {
        conflict_corrupted += c;
        ++n_corrupted;
      } else {
        conflict_clean += c;
        ++n_clean;
      }
    }
  }

  const double n = double(all.size());
  const double nu = double(test_unseen.size());
  out.mean_u_visual /= nu;
  out.mean_u_attribute /= nu;
  out.mean_u_fused /= nu;
  out.mean_conflict /= n;
  out.mean_conflict_corrupted =
      n_corrupted ? conflict_corrupted / double(n_corrupted) : std::nan("");
  out.mean_conflict_clean = n_clean ? conflict_clean / double(n_clean) : std::nan("");

  out.czsl_acc = czsl_metrics(czsl_preds, czsl_labels, dataset.semantics);
  if (!test_seen.empty()) {
    out.gzsl = gzsl_metrics(gzsl_preds, gzsl_labels, dataset.semantics);
  } else {
    out.gzsl.unseen = out.czsl_acc;
  }
  return out;
}

void write_reports_csv(const std::vector<EpochReport>& reports, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw format_error(path + ": cannot open for writing");
  // Wall-clock seconds stay out of the CSV so reruns are byte-identical.
  out << "epoch,arise,vicl,digs,edl,total,mean_u_visual,mean_u_attribute,"
         "mean_u_fused,mean_conflict,seen,unseen,harmonic,acc\n";
  char buf[64];
  for (const auto& r : reports) {
    out << r.epoch;
    for (double v : {r.arise, r.vicl, r.digs, r.edl, r.total, r.mean_u_visual,
                     r.mean_u_attribute, r.mean_u_fused, r.mean_conflict, r.seen,
                     r.unseen, r.harmonic, r.acc}) {
      std::snprintf(buf, sizeof(buf), "%.12g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

namespace {

std::vector<std::pair<std::string, Tensor>> named_tensors(const Model& model) {
  std::vector<std::pair<std::string, Tensor>> out;
  auto add_grounding = [&](const std::string& prefix, const GroundingParams& g) {
    for (std::size_t i = 0; i < g.layers.size(); ++i) {
      const std::string base = prefix + ".layer" + std::to_string(i);
      out.emplace_back(base + ".w_q", g.layers[i].w_q);
      out.emplace_back(base + ".w_k", g.layers[i].w_k);
      out.emplace_back(base + ".w_v", g.layers[i].w_v);
    }
    out.emplace_back(prefix + ".w1", g.w1);
    out.emplace_back(prefix + ".b1", g.b1);
    out.emplace_back(prefix + ".w2", g.w2);
    out.emplace_back(prefix + ".b2", g.b2);
  };
  add_grounding("vgt", model.vgt);
  add_grounding("agt", model.agt);
  out.emplace_back("bank.patterns", model.bank.patterns);
  out.emplace_back("bank.w_q", model.bank.w_q);
  out.emplace_back("bank.b_q", model.bank.b_q);
  out.emplace_back("bank.w_r", model.bank.w_r);
  out.emplace_back("attribute_embeddings", model.attribute_embeddings);
  return out;
}

void write_u32le(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32le(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw format_error(path + ": truncated parameter file");
  }
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
         (std::uint32_t(b[3]) << 24);
}

}  // namespace

void save_model(const Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw format_error(path + ": cannot open for writing");
  const auto tensors = named_tensors(model);
  out.write(kModelMagic, 8);
  write_u32le(out, std::uint32_t(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    write_u32le(out, std::uint32_t(name.size()));
    out.write(name.data(), std::streamsize(name.size()));
    write_u32le(out, std::uint32_t(tensor.rows()));
    write_u32le(out, std::uint32_t(tensor.cols()));
    for (double v : tensor.values()) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, 8);
      unsigned char b[8];
      for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
      out.write(reinterpret_cast<const char*>(b), 8);
    }
  }
}

Model load_model(const std::string& path, const ZslDataset& dataset,
                 const TrainConfig& config) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw format_error(path + ": cannot open");
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kModelMagic, 8) != 0) {
    throw format_error(path + ": bad header magic, expected \"CRSTPAR1\"");
  }
  Model model = make_model(dataset, config);
  auto tensors = named_tensors(model);
  const std::uint32_t count = read_u32le(in, path);
  if (count != tensors.size()) {
    throw format_error(path + ": holds " + std::to_string(count) + " tensors, model has " +
                       std::to_string(tensors.size()));
  }
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::uint32_t name_len = read_u32le(in, path);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw format_error(path + ": truncated name");
    const std::uint32_t rows = read_u32le(in, path);
    const std::uint32_t cols = read_u32le(in, path);
    auto it = std::find_if(tensors.begin(), tensors.end(),
                           [&](const auto& p) { return p.first == name; });
    if (it == tensors.end()) {
      throw format_error(path + ": unknown tensor \"" + name + "\"");
    }
    if (it->second.rows() != rows || it->second.cols() != cols) {
      throw format_error(path + ": tensor \"" + name + "\" is " + std::to_string(rows) +
                         "x" + std::to_string(cols) + ", expected " +
                         it->second.shape_str());
    }
    for (std::size_t i = 0; i < it->second.size(); ++i) {
      unsigned char b[8];
      if (!in.read(reinterpret_cast<char*>(b), 8)) {
        throw format_error(path + ": truncated payload for \"" + name + "\"");
      }
      std::uint64_t bits = 0;
      for (int j = 0; j < 8; ++j) bits |= std::uint64_t(b[j]) << (8 * j);
      double v;
      std::memcpy(&v, &bits, 8);
      it->second.values()[i] = v;
    }
  }
  return model;
}

namespace {

// Solves (A + lambda I) x = b in place via Gaussian elimination.
std::vector<double> solve_ridge(std::vector<double> a, std::vector<double> b,
                                std::size_t n, std::size_t rhs) {
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t pivot = i;
    for (std::size_t r = i + 1; r < n; ++r) {
      if (std::fabs(a[r * n + i]) > std::fabs(a[pivot * n + i])) pivot = r;
    }
    if (pivot != i) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[i * n + c], a[pivot * n + c]);
      for (std::size_t c = 0; c < rhs; ++c) std::swap(b[i * rhs + c], b[pivot * rhs + c]);
    }
    const double d = a[i * n + i];
    for (std::size_t r = 0; r < n; ++r) {
      if (r == i || a[r * n + i] == 0.0) continue;
      const double factor = a[r * n + i] / d;
      for (std::size_t c = 0; c < n; ++c) a[r * n + c] -= factor * a[i * n + c];
      for (std::size_t c = 0; c < rhs; ++c) b[r * rhs + c] -= factor * b[i * rhs + c];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < rhs; ++c) b[i * rhs + c] /= a[i * n + i];
  }
  return b;
}

std::vector<double> mean_feature(const Instance& inst) {
  const std::size_t r = inst.features.rows(), h = inst.features.cols();
  std::vector<double> out(h, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < h; ++j) out[j] += inst.features.at(i, j);
  }
  for (auto& v : out) v /= double(r);
  return out;
}

}  // namespace

double nearest_class_mean_baseline(const ZslDataset& dataset, EvalMode mode) {
  const std::size_t h = std::size_t(dataset.feature_width);
  const std::size_t a = dataset.semantics.z.cols();

  // Seen-class feature means from the training split.
  std::map<int, std::pair<std::vector<double>, int>> sums;
  for (std::size_t idx : dataset.split_indices(Split::train_seen)) {
    const Instance& inst = dataset.instances[idx];
    auto& entry = sums[inst.label];
    if (entry.first.empty()) entry.first.assign(h, 0.0);
    const auto f = mean_feature(inst);
    for (std::size_t j = 0; j < h; ++j) entry.first[j] += f[j];
    entry.second += 1;
  }
  if (sums.empty()) throw std::domain_error("baseline: empty training split");

  std::vector<std::vector<double>> means;
  std::vector<int> classes;
  for (auto& [cls, entry] : sums) {
    for (auto& v : entry.first) v /= double(entry.second);
    means.push_back(entry.first);
    classes.push_back(cls);
  }

  // Ridge fit: class feature means -> attribute vectors.
  const double lambda = 1.0;
  std::vector<double> gram(h * h, 0.0);
  std::vector<double> xty(h * a, 0.0);
  for (std::size_t m = 0; m < means.size(); ++m) {
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < h; ++j) gram[i * h + j] += means[m][i] * means[m][j];
      for (std::size_t j = 0; j < a; ++j) {
        xty[i * a + j] += means[m][i] * dataset.semantics.z.at(std::size_t(classes[m]), j);
      }
    }
  }
  for (std::size_t i = 0; i < h; ++i) gram[i * h + i] += lambda;
  const std::vector<double> w = solve_ridge(std::move(gram), std::move(xty), h, a);

  auto nearest = [&](const std::vector<double>& zhat, const std::vector<int>& candidates) {
    int best = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    std::vector<int> sorted(candidates);
    std::sort(sorted.begin(), sorted.end());
    for (int c : sorted) {
      double dist = 0.0;
      for (std::size_t j = 0; j < a; ++j) {
        const double d = zhat[j] - dataset.semantics.z.at(std::size_t(c), j);
        dist += d * d;
      }
      if (dist < best_dist) {
        best_dist = dist;
        best = c;
      }
    }
    return best;
  };

  std::vector<int> all_ids;
  for (std::size_t c = 0; c < dataset.semantics.class_count(); ++c) all_ids.push_back(int(c));

  std::vector<int> preds, labels;
  auto run_split = [&](Split split, const std::vector<int>& candidates) {
    for (std::size_t idx : dataset.split_indices(split)) {
      const auto f = mean_feature(dataset.instances[idx]);
      std::vector<double> zhat(a, 0.0);
      for (std::size_t j = 0; j < a; ++j) {
        for (std::size_t i = 0; i < h; ++i) zhat[j] += f[i] * w[i * a + j];
      }
      preds.push_back(nearest(zhat, candidates));
      labels.push_back(dataset.instances[idx].label);
    }
  };

  if (mode == EvalMode::czsl) {
    run_split(Split::test_unseen, dataset.semantics.unseen_ids);
    return czsl_metrics(preds, labels, dataset.semantics);
  }
  run_split(Split::test_seen, all_ids);
  run_split(Split::test_unseen, all_ids);
  return gzsl_metrics(preds, labels, dataset.semantics).harmonic;
}

}  // namespace crest
