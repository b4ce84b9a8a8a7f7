#include "crest/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace fs = std::filesystem;

namespace crest {

namespace {

// Overall magnitude of the generated region features. Larger features give
// the downstream heads stronger activations at fixed weight scale.
constexpr double kFeatureGain = 3.0;
constexpr double kCrossGain = 1.0;
// Instance features encode each class's *discriminative* attribute content:
// the mean class signature is subtracted (with a boost > 1) before mapping
// to feature space. Shared attribute mass carries no class information, and
// removing it pushes every off-class score below zero, which is what a
// discriminative feature extractor would produce.
constexpr double kCenterBoost = 1.3;
constexpr double kRegionKeepProb = 0.7;
constexpr double kTrainFraction = 0.8;
constexpr char kMatrixMagic[8] = {'C', 'R', 'S', 'T', 'M', 'A', 'T', '1'};

double quantize(double v) { return double(float(v)); }

void write_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char bytes[4] = {static_cast<unsigned char>(v & 0xff),
                            static_cast<unsigned char>((v >> 8) & 0xff),
                            static_cast<unsigned char>((v >> 16) & 0xff),
                            static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::uint32_t read_u32(std::istream& in, const std::string& path, std::size_t offset) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
    throw format_error(path + ": truncated at byte offset " + std::to_string(offset));
  }
  return std::uint32_t(bytes[0]) | (std::uint32_t(bytes[1]) << 8) |
         (std::uint32_t(bytes[2]) << 16) | (std::uint32_t(bytes[3]) << 24);
}

void write_f32(std::ofstream& out, float v) {
  static_assert(sizeof(float) == 4);
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(out, bits);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void SynthConfig::validate() const {
  if (class_count <= 0 || attribute_count <= 0 || regions_per_instance <= 0 ||
      feature_width <= 0 || instances_per_class <= 0) {
    throw std::domain_error("synth config: all counts must be positive");
  }
  if (seen_count <= 0 || seen_count >= class_count) {
    throw std::domain_error("synth config: seen_count must satisfy 0 < seen_count < class_count");
  }
  if (regions_per_instance < 2) {
    throw std::domain_error("synth config: regions_per_instance must be at least 2");
  }
  if (imbalance_exponent < 0.0 || variability_noise < 0.0) {
    throw std::domain_error("synth config: exponents and noise must be nonnegative");
  }
  if (cooccurrence_strength < 0.0 || cooccurrence_strength > 1.0 ||
      conflict_rate < 0.0 || conflict_rate > 1.0) {
    throw std::domain_error("synth config: rates must lie in [0,1]");
  }
}

const char* split_name(Split s) {
  switch (s) {
    case Split::train_seen: return "train_seen";
    case Split::test_seen: return "test_seen";
    case Split::test_unseen: return "test_unseen";
  }
  return "?";
}

const char* corruption_name(Corruption c) {
  switch (c) {
    case Corruption::none: return "none";
    case Corruption::visual: return "visual";
    case Corruption::attribute: return "attribute";
  }
  return "?";
}

std::vector<std::size_t> ZslDataset::split_indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (instances[i].split == s) out.push_back(i);
  }
  return out;
}

Tensor visual_block(const Instance& instance) {
  const std::size_t r = instance.features.rows();
  const std::size_t half = (r + 1) / 2;
  std::vector<Tensor> rows;
  for (std::size_t i = 0; i < half; ++i) rows.push_back(row(instance.features, i));
  return vcat(rows);
}

Tensor attribute_block(const Instance& instance) {
  const std::size_t r = instance.features.rows();
  const std::size_t half = (r + 1) / 2;
  std::vector<Tensor> rows;
  for (std::size_t i = half; i < r; ++i) rows.push_back(row(instance.features, i));
  return vcat(rows);
}

ZslDataset generate(const SynthConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  const std::size_t c = std::size_t(config.class_count);
  const std::size_t a = std::size_t(config.attribute_count);
  const std::size_t r = std::size_t(config.regions_per_instance);
  const std::size_t h = std::size_t(config.feature_width);

  // Power-law attribute scales, normalized so attribute 0 has weight 1.
  std::vector<double> weight(a);
  for (std::size_t k = 0; k < a; ++k) {
    weight[k] = std::pow(double(k + 1), -config.imbalance_exponent);
  }

  // Pairwise co-occurrence: tie attribute 2j+1 to 2j across every class.
  std::vector<bool> tied(a, false);
  for (std::size_t j = 0; 2 * j + 1 < a; ++j) {
    tied[2 * j + 1] = uniform(rng) < config.cooccurrence_strength;
  }

  std::vector<double> z(c * a);
  for (std::size_t cls = 0; cls < c; ++cls) {
    for (std::size_t k = 0; k < a; ++k) {
      z[cls * a + k] = weight[k] * uniform(rng);
    }
    for (std::size_t k = 1; k < a; ++k) {
      if (tied[k]) z[cls * a + k] = z[cls * a + k - 1];
    }
    // Center each attribute at its expected value and L2-normalize the class
    // vector. Raw [0, weight_k] attributes would leave every class in the
    // same positive cone (mutual cosine near 1), which starves the
    // dot-product inference rule and the cosine-based contrastive loss of
    // margin; centered vectors are near-orthogonal across classes.
    for (std::size_t k = 0; k < a; ++k) z[cls * a + k] -= 0.5 * weight[k];
    // Remove the per-class mean as well, so every class vector sums to zero
    // and constant shifts of an embedding never change any class score.
    double mean = 0.0;
    for (std::size_t k = 0; k < a; ++k) mean += z[cls * a + k];
    mean /= double(a);
    for (std::size_t k = 0; k < a; ++k) z[cls * a + k] -= mean;
    double norm = 0.0;
    for (std::size_t k = 0; k < a; ++k) norm += z[cls * a + k] * z[cls * a + k];
    norm = std::sqrt(norm);
    for (std::size_t k = 0; k < a; ++k) z[cls * a + k] = quantize(z[cls * a + k] / norm);
  }

  // Decorrelate the unseen-class vectors (Gram-Schmidt within the unseen
  // set). Conventional-ZSL accuracy should reflect grounding quality, not
  // luck in unseen-class collinearity; benchmark splits likewise pick
  // distinctive unseen classes. Linear combinations of class vectors keep
  // the co-occurrence ties and the zero coordinate sum exactly.
  for (std::size_t cls = std::size_t(config.seen_count); cls < c; ++cls) {
    std::vector<double> v(z.begin() + cls * a, z.begin() + (cls + 1) * a);
    for (std::size_t prev = std::size_t(config.seen_count); prev < cls; ++prev) {
      double dot = 0.0;
      for (std::size_t k = 0; k < a; ++k) dot += v[k] * z[prev * a + k];
      for (std::size_t k = 0; k < a; ++k) v[k] -= dot * z[prev * a + k];
    }
    double norm = 0.0;
    for (std::size_t k = 0; k < a; ++k) norm += v[k] * v[k];
    norm = std::sqrt(norm);
    if (norm < 1e-6) continue;  // nearly dependent set: leave the row as drawn
    for (std::size_t k = 0; k < a; ++k) z[cls * a + k] = quantize(v[k] / norm);
  }

  ZslDataset ds;
  ds.regions_per_instance = config.regions_per_instance;
  ds.feature_width = config.feature_width;
  ds.semantics.z = Tensor(c, a, z);
  for (int cls = 0; cls < config.class_count; ++cls) {
    if (cls < config.seen_count) {
      ds.semantics.seen_ids.push_back(cls);
    } else {
      ds.semantics.unseen_ids.push_back(cls);
    }
  }

  // Per-class synthesis signatures: the class vector minus a boosted mean
  // over classes (see kCenterBoost above).
  std::vector<double> zbar(a, 0.0);
  for (std::size_t cls = 0; cls < c; ++cls)
    for (std::size_t k = 0; k < a; ++k) zbar[k] += z[cls * a + k] / double(c);
  std::vector<double> signature(c * a);
  std::vector<double> signature_norm(c, 0.0);
  for (std::size_t cls = 0; cls < c; ++cls) {
    for (std::size_t k = 0; k < a; ++k) {
      const double v = z[cls * a + k] - kCenterBoost * zbar[k];
      signature[cls * a + k] = v;
      signature_norm[cls] += v * v;
    }
    signature_norm[cls] = std::sqrt(signature_norm[cls]);
  }

  // Shared attribute-to-feature map, fixed per dataset. Feature column k
  // mirrors attribute k directly; every column also carries correlated
  // clutter from the other attributes, so the mapping is informative but not
  // noise-free even before the per-instance perturbations.
  std::vector<double> ground(a * h);
  const double cross = kCrossGain / std::sqrt(double(a));
  for (std::size_t k = 0; k < a; ++k) {
    for (std::size_t f = 0; f < h; ++f) {
      ground[k * h + f] = (f == k ? kFeatureGain : normal(rng) * cross);
    }
  }

  const int train_per_class =
      std::max(1, int(std::floor(kTrainFraction * config.instances_per_class)));
  const double nu = config.variability_noise;
  const std::size_t half = (r + 1) / 2;

  for (int cls = 0; cls < config.class_count; ++cls) {
    const bool seen = cls < config.seen_count;

    // Region attribute masks are drawn once per class and shared by all of
    // its instances, so zero variability means identical same-class features.
    std::vector<char> mask(r * a);
    for (auto& m : mask) m = uniform(rng) < kRegionKeepProb;

    for (int inst = 0; inst < config.instances_per_class; ++inst) {
      // Per-instance variability: diagonal transform plus additive noise.
      std::vector<double> gain(h);
      for (auto& g : gain) g = 1.0 + nu * normal(rng);

      std::vector<double> features(r * h, 0.0);
      for (std::size_t reg = 0; reg < r; ++reg) {
        std::vector<double> active(a);
        double active_norm = 0.0;
        for (std::size_t k = 0; k < a; ++k) {
          active[k] = mask[reg * a + k] ? signature[std::size_t(cls) * a + k] : 0.0;
          active_norm += active[k] * active[k];
        }
        // Rescale each region view to the full signature's energy so the
        // random mask changes *which* attributes a region sees, not how
        // strongly the class expresses itself overall.
        active_norm = std::sqrt(active_norm);
        if (active_norm > 0.0) {
          const double rescale = signature_norm[std::size_t(cls)] / active_norm;
          for (std::size_t k = 0; k < a; ++k) active[k] *= rescale;
        }
        for (std::size_t f = 0; f < h; ++f) {
          double acc = 0.0;
          for (std::size_t k = 0; k < a; ++k) acc += active[k] * ground[k * h + f];
          features[reg * h + f] = gain[f] * acc + nu * normal(rng);
        }
      }

      Corruption corruption = Corruption::none;
      if (uniform(rng) < config.conflict_rate) {
        corruption = uniform(rng) < 0.5 ? Corruption::visual : Corruption::attribute;
        const std::size_t begin = corruption == Corruption::visual ? 0 : half;
        const std::size_t end = corruption == Corruption::visual ? half : r;
        // Replace the stream with noise pegged somewhat above the
        // instance's own feature scale: a corrupted stream should carry no
        // class signal and should visibly disagree with the healthy stream,
        // without drowning it in outsized activations.
        double sq = 0.0;
        for (double v : features) sq += v * v;
        const double feature_scale = 1.45 * std::sqrt(sq / double(features.size()));
        for (std::size_t reg = begin; reg < end; ++reg) {
          for (std::size_t f = 0; f < h; ++f) {
            features[reg * h + f] = normal(rng) * feature_scale;
          }
        }
      }
      for (auto& v : features) v = quantize(v);

      Instance instance;
      instance.features = Tensor(r, h, std::move(features));
      instance.label = cls;
      if (seen) {
        instance.split = inst < train_per_class ? Split::train_seen : Split::test_seen;
      } else {
        instance.split = Split::test_unseen;
      }
      instance.corruption = corruption;
      ds.instances.push_back(std::move(instance));
    }
  }
  return ds;
}

void save_matrix_text(const Tensor& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw format_error(path + ": cannot open for writing");
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m.at(i, j));
    }
    out << '\n';
  }
}

void save_matrix_binary(const Tensor& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw format_error(path + ": cannot open for writing");
  out.write(kMatrixMagic, 8);
  write_u32(out, std::uint32_t(m.rows()));
  write_u32(out, std::uint32_t(m.cols()));
  for (double v : m.values()) write_f32(out, float(v));
}

namespace {

Tensor load_matrix_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw format_error(path + ": cannot open");
  std::vector<double> values;
  std::size_t cols = 0, rows = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() && in.eof()) break;
    std::size_t row_cols = 0;
    const char* p = line.c_str();
    while (true) {
      char* end = nullptr;
      const double v = std::strtod(p, &end);
      if (end == p) {
        throw format_error(path + ": line " + std::to_string(line_no) +
                           ": expected a number");
      }
      values.push_back(v);
      ++row_cols;
      p = end;
      while (*p == ' ') ++p;
      if (*p == '\0' || *p == '\r') break;
      if (*p != ',') {
        throw format_error(path + ": line " + std::to_string(line_no) +
                           ": expected ',' before \"" + p + "\"");
      }
      ++p;
    }
    if (rows == 0) {
      cols = row_cols;
    } else if (row_cols != cols) {
      throw format_error(path + ": line " + std::to_string(line_no) + ": row has " +
                         std::to_string(row_cols) + " values, expected " +
                         std::to_string(cols));
    }
    ++rows;
  }
  if (rows == 0) throw format_error(path + ": empty matrix file");
  return Tensor(rows, cols, std::move(values));
}

Tensor load_matrix_binary(const std::string& path, std::ifstream& in) {
  const std::uint32_t rows = read_u32(in, path, 8);
  const std::uint32_t cols = read_u32(in, path, 12);
  std::vector<double> values(std::size_t(rows) * cols);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint32_t bits = read_u32(in, path, 16 + i * 4);
    float f;
    std::memcpy(&f, &bits, 4);
    values[i] = double(f);
  }
  char extra;
  if (in.read(&extra, 1)) {
    throw format_error(path + ": trailing bytes after " + std::to_string(rows) + "x" +
                       std::to_string(cols) + " payload");
  }
  return Tensor(rows, cols, std::move(values));
}

}  // namespace

Tensor load_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw format_error(path + ": cannot open");
  char magic[8];
  if (in.read(magic, 8) && std::memcmp(magic, kMatrixMagic, 8) == 0) {
    return load_matrix_binary(path, in);
  }
  // Binary files must carry the magic; anything else is parsed as text,
  // but a partial magic match on a binary-looking file is reported.
  in.clear();
  in.seekg(0);
  bool binary_like = false;
  char probe[64];
  in.read(probe, sizeof(probe));
  for (std::streamsize i = 0; i < in.gcount(); ++i) {
    binary_like = binary_like || (probe[i] == '\0');
  }
  in.clear();
  in.seekg(0);
  if (binary_like) {
    throw format_error(path + ": bad header magic, expected \"CRSTMAT1\"");
  }
  return load_matrix_text(path);
}

void save(const ZslDataset& dataset, const std::string& dir) {
  fs::create_directories(dir);
  fs::create_directories(fs::path(dir) / "features");
  save_matrix_text(dataset.semantics.z, (fs::path(dir) / "semantics.csv").string());

  std::ofstream splits((fs::path(dir) / "splits.csv").string());
  for (std::size_t cls = 0; cls < dataset.semantics.class_count(); ++cls) {
    splits << cls << ',' << (dataset.semantics.is_seen(int(cls)) ? 1 : 0) << '\n';
  }

  std::ofstream labels((fs::path(dir) / "labels.csv").string());
  for (std::size_t i = 0; i < dataset.instances.size(); ++i) {
    const auto& inst = dataset.instances[i];
    labels << i << ',' << inst.label << ',' << split_name(inst.split) << ','
           << corruption_name(inst.corruption) << '\n';
    save_matrix_binary(inst.features,
                       (fs::path(dir) / "features" / (std::to_string(i) + ".bin")).string());
  }
}

namespace {

Split parse_split(const std::string& name, const std::string& path, std::size_t line_no) {
  if (name == "train_seen") return Split::train_seen;
  if (name == "test_seen") return Split::test_seen;
  if (name == "test_unseen") return Split::test_unseen;
  throw format_error(path + ": line " + std::to_string(line_no) + ": unknown split \"" +
                     name + "\"");
}

Corruption parse_corruption(const std::string& name, const std::string& path,
                            std::size_t line_no) {
  if (name == "none") return Corruption::none;
  if (name == "visual") return Corruption::visual;
  if (name == "attribute") return Corruption::attribute;
  throw format_error(path + ": line " + std::to_string(line_no) +
                     ": unknown corruption tag \"" + name + "\"");
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    if (!field.empty() && field.back() == '\r') field.pop_back();
    fields.push_back(field);
  }
  return fields;
}

}  // namespace

ZslDataset load(const std::string& dir) {
  ZslDataset ds;
  ds.semantics.z = load_matrix((fs::path(dir) / "semantics.csv").string());

  const std::string splits_path = (fs::path(dir) / "splits.csv").string();
  std::ifstream splits(splits_path);
  if (!splits) throw format_error(splits_path + ": cannot open");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(splits, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 2) {
      throw format_error(splits_path + ": line " + std::to_string(line_no) +
                         ": expected class_id,seen_flag");
    }
    const int cls = std::stoi(fields[0]);
    if (fields[1] == "1") {
      ds.semantics.seen_ids.push_back(cls);
    } else if (fields[1] == "0") {
      ds.semantics.unseen_ids.push_back(cls);
    } else {
      throw format_error(splits_path + ": line " + std::to_string(line_no) +
                         ": seen_flag must be 0 or 1");
    }
  }
  ds.semantics.validate();

  const std::string labels_path = (fs::path(dir) / "labels.csv").string();
  std::ifstream labels(labels_path);
  if (!labels) throw format_error(labels_path + ": cannot open");
  line_no = 0;
  while (std::getline(labels, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 4) {
      throw format_error(labels_path + ": line " + std::to_string(line_no) +
                         ": expected instance_id,class_id,split,corruption");
    }
    Instance inst;
    inst.label = std::stoi(fields[1]);
    inst.split = parse_split(fields[2], labels_path, line_no);
    inst.corruption = parse_corruption(fields[3], labels_path, line_no);
    inst.features =
        load_matrix((fs::path(dir) / "features" / (fields[0] + ".bin")).string());
    ds.instances.push_back(std::move(inst));
  }
  if (ds.instances.empty()) throw format_error(labels_path + ": no instances");
  ds.regions_per_instance = int(ds.instances.front().features.rows());
  ds.feature_width = int(ds.instances.front().features.cols());
  for (const auto& inst : ds.instances) {
    if (int(inst.features.rows()) != ds.regions_per_instance ||
        int(inst.features.cols()) != ds.feature_width) {
      throw format_error(dir + ": inconsistent feature shapes across instances");
    }
  }
  return ds;
}

}  // namespace crest
