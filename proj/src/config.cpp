#include "crest/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace crest {

void TrainConfig::validate() const {
  if (epochs < 0) throw config_error("epochs must be nonnegative");
  if (batch_size <= 0) throw config_error("batch_size must be positive");
  if (learning_rate <= 0.0 || weight_decay < 0.0) {
    throw config_error("learning_rate must be positive, weight_decay nonnegative");
  }
  if (coeffs.mu < 0.0 || coeffs.mu > 1.0) throw config_error("mu must lie in [0,1]");
  if (coeffs.lambda_cal < 0.0 || coeffs.lambda_edl < 0.0 || coeffs.delta < 0.0) {
    throw config_error("lambda_cal, lambda_edl, delta must be nonnegative");
  }
  if (edl_weights.beta < 0.0 || edl_weights.gamma < 0.0) {
    throw config_error("beta and gamma must be nonnegative");
  }
  if (tau <= 0.0) throw config_error("tau must be positive");
  if (similarity_threshold < -1.0 || similarity_threshold > 1.0) {
    throw config_error("similarity_threshold must lie in [-1,1]");
  }
  if (margin <= 0.0) throw config_error("margin must be positive");
  if (annealing_steps <= 0) throw config_error("annealing_steps must be positive");
  if (layers <= 0 || d_k <= 0 || bank_dim <= 0) {
    throw config_error("layers, d_k, bank_dim must be positive");
  }
  if (bank_size < 2) throw config_error("bank_size must be at least 2");
}

namespace {

using Setter = std::function<void(EngineConfig&, const std::string&)>;

template <typename T>
T parse_number(const std::string& value) {
  std::istringstream ss(value);
  T out;
  ss >> out;
  if (ss.fail()) throw config_error("not a number: \"" + value + "\"");
  std::string rest;
  ss >> rest;
  if (!rest.empty()) throw config_error("trailing characters: \"" + value + "\"");
  return out;
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      // generator
      {"class_count", [](EngineConfig& c, const std::string& v) { c.synth.class_count = parse_number<int>(v); }},
      {"seen_count", [](EngineConfig& c, const std::string& v) { c.synth.seen_count = parse_number<int>(v); }},
      {"attribute_count", [](EngineConfig& c, const std::string& v) { c.synth.attribute_count = parse_number<int>(v); }},
      {"regions_per_instance", [](EngineConfig& c, const std::string& v) { c.synth.regions_per_instance = parse_number<int>(v); }},
      {"feature_width", [](EngineConfig& c, const std::string& v) { c.synth.feature_width = parse_number<int>(v); }},
      {"instances_per_class", [](EngineConfig& c, const std::string& v) { c.synth.instances_per_class = parse_number<int>(v); }},
      {"imbalance_exponent", [](EngineConfig& c, const std::string& v) { c.synth.imbalance_exponent = parse_number<double>(v); }},
      {"cooccurrence_strength", [](EngineConfig& c, const std::string& v) { c.synth.cooccurrence_strength = parse_number<double>(v); }},
      {"variability_noise", [](EngineConfig& c, const std::string& v) { c.synth.variability_noise = parse_number<double>(v); }},
      {"conflict_rate", [](EngineConfig& c, const std::string& v) { c.synth.conflict_rate = parse_number<double>(v); }},
      {"seed", [](EngineConfig& c, const std::string& v) {
         c.synth.seed = parse_number<std::uint64_t>(v);
         c.train.seed = c.synth.seed;
       }},
      // trainer
      {"epochs", [](EngineConfig& c, const std::string& v) { c.train.epochs = parse_number<int>(v); }},
      {"batch_size", [](EngineConfig& c, const std::string& v) { c.train.batch_size = parse_number<int>(v); }},
      {"learning_rate", [](EngineConfig& c, const std::string& v) { c.train.learning_rate = parse_number<double>(v); }},
      {"weight_decay", [](EngineConfig& c, const std::string& v) { c.train.weight_decay = parse_number<double>(v); }},
      {"mu", [](EngineConfig& c, const std::string& v) { c.train.coeffs.mu = parse_number<double>(v); }},
      {"lambda_cal", [](EngineConfig& c, const std::string& v) { c.train.coeffs.lambda_cal = parse_number<double>(v); }},
      {"lambda_edl", [](EngineConfig& c, const std::string& v) { c.train.coeffs.lambda_edl = parse_number<double>(v); }},
      {"delta", [](EngineConfig& c, const std::string& v) { c.train.coeffs.delta = parse_number<double>(v); }},
      {"beta", [](EngineConfig& c, const std::string& v) { c.train.edl_weights.beta = parse_number<double>(v); }},
      {"gamma", [](EngineConfig& c, const std::string& v) { c.train.edl_weights.gamma = parse_number<double>(v); }},
      {"tau", [](EngineConfig& c, const std::string& v) { c.train.tau = parse_number<double>(v); }},
      {"similarity_threshold", [](EngineConfig& c, const std::string& v) { c.train.similarity_threshold = parse_number<double>(v); }},
      {"margin", [](EngineConfig& c, const std::string& v) { c.train.margin = parse_number<double>(v); }},
      {"annealing_steps", [](EngineConfig& c, const std::string& v) { c.train.annealing_steps = parse_number<int>(v); }},
      {"layers", [](EngineConfig& c, const std::string& v) { c.train.layers = parse_number<int>(v); }},
      {"d_k", [](EngineConfig& c, const std::string& v) { c.train.d_k = parse_number<int>(v); }},
      {"bank_size", [](EngineConfig& c, const std::string& v) { c.train.bank_size = parse_number<int>(v); }},
      {"bank_dim", [](EngineConfig& c, const std::string& v) { c.train.bank_dim = parse_number<int>(v); }},
      {"fusion_mode", [](EngineConfig& c, const std::string& v) {
         if (v == "weighted_average") c.train.fusion_mode = AlphaFusion::weighted_average;
         else if (v == "opinion_fusion") c.train.fusion_mode = AlphaFusion::opinion_fusion;
         else throw config_error("fusion_mode must be weighted_average or opinion_fusion");
       }},
      {"evidence_activation", [](EngineConfig& c, const std::string& v) {
         if (v == "softplus") c.train.evidence_activation = EvidenceActivation::softplus;
         else if (v == "relu") c.train.evidence_activation = EvidenceActivation::relu;
         else if (v == "exp") c.train.evidence_activation = EvidenceActivation::exp;
         else throw config_error("evidence_activation must be softplus, relu, or exp");
       }},
      {"pooling", [](EngineConfig& c, const std::string& v) {
         if (v == "mean") c.train.pooling = Pooling::mean;
         else if (v == "max") c.train.pooling = Pooling::max;
         else throw config_error("pooling must be mean or max");
       }},
  };
  return table;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  std::size_t e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

}  // namespace

EngineConfig parse_config_text(const std::string& text, const std::string& origin) {
  EngineConfig config;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw config_error(origin + ": line " + std::to_string(line_no) +
                         ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      throw config_error(origin + ": line " + std::to_string(line_no) +
                         ": unknown key \"" + key + "\"");
    }
    try {
      it->second(config, value);
    } catch (const config_error& e) {
      throw config_error(origin + ": line " + std::to_string(line_no) + ": key \"" + key +
                         "\": " + e.what());
    }
  }
  config.synth.validate();
  config.train.validate();
  return config;
}

EngineConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error(path + ": cannot open config file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path);
}

}  // namespace crest
