#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "crest/config.hpp"
#include "crest/opinion.hpp"
#include "crest/synth.hpp"
#include "crest/trainer.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitFormat = 3;

std::vector<double> parse_vector(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(item, &pos));
      while (pos < item.size() && std::isspace(static_cast<unsigned char>(item[pos]))) ++pos;
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw crest::config_error(flag + ": cannot parse \"" + item + "\" as a number");
    }
  }
  if (out.empty()) throw crest::config_error(flag + ": empty vector");
  return out;
}

void print_metric(const char* name, double value) {
  std::printf("%s=%.4f\n", name, value);
}

crest::EngineConfig load_engine_config(const std::string& path) {
  if (path.empty()) return crest::EngineConfig{};
  return crest::parse_config_file(path);
}

int cmd_gen_data(const std::string& config_path, const std::string& out_dir) {
  crest::EngineConfig config = load_engine_config(config_path);
  config.synth.validate();
  crest::ZslDataset dataset = crest::generate(config.synth);
  crest::save(dataset, out_dir);
  std::size_t train_n = dataset.split_indices(crest::Split::train_seen).size();
  std::size_t ts_n = dataset.split_indices(crest::Split::test_seen).size();
  std::size_t tu_n = dataset.split_indices(crest::Split::test_unseen).size();
  std::fprintf(stderr,
               "wrote %s: %zu classes (%zu seen), %zu instances "
               "(train %zu, test_seen %zu, test_unseen %zu)\n",
               out_dir.c_str(), dataset.semantics.class_count(),
               dataset.semantics.seen_ids.size(), dataset.instances.size(), train_n,
               ts_n, tu_n);
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_dir) {
  crest::EngineConfig config = load_engine_config(config_path);
  config.train.validate();
  crest::ZslDataset dataset = crest::load(data_dir);
  crest::TrainResult result = crest::train(dataset, config.train);
  std::filesystem::create_directories(out_dir);
  crest::save_model(result.model, out_dir + "/params.bin");
  crest::write_reports_csv(result.reports, out_dir + "/epochs.csv");
  if (!result.reports.empty()) {
    const auto& last = result.reports.back();
    print_metric("S", last.seen);
    print_metric("U", last.unseen);
    print_metric("H", last.harmonic);
    print_metric("ACC", last.acc);
  }
  std::fprintf(stderr, "wrote %s/params.bin and %s/epochs.csv (%zu epochs)\n",
               out_dir.c_str(), out_dir.c_str(), result.reports.size());
  return 0;
}

int cmd_eval(const std::string& config_path, const std::string& params_path,
             const std::string& data_dir, const std::string& mode) {
  if (mode != "czsl" && mode != "gzsl") {
    throw crest::config_error("--mode must be czsl or gzsl, got \"" + mode + "\"");
  }
  crest::EngineConfig config = load_engine_config(config_path);
  crest::ZslDataset dataset = crest::load(data_dir);
  crest::Model model = crest::load_model(params_path, dataset, config.train);
  crest::EvalResult result = crest::evaluate(model, dataset, config.train);
  if (mode == "czsl") {
    print_metric("ACC", result.czsl_acc);
  } else {
    print_metric("S", result.gzsl.seen);
    print_metric("U", result.gzsl.unseen);
    print_metric("H", result.gzsl.harmonic);
  }
  return 0;
}

void print_opinion(const char* tag, const crest::Opinion& o) {
  std::printf("%s", tag);
  for (double b : o.belief) std::printf(",%.6f", b);
  std::printf("\nu_%s,%.6f\n", tag + 2, o.uncertainty);
  std::printf("p_%s", tag + 2);
  for (double p : crest::project(o)) std::printf(",%.6f", p);
  std::printf("\n");
}

int cmd_fuse_demo(const std::string& evidence_a, const std::string& evidence_b) {
  const auto ea = parse_vector(evidence_a, "--evidence-a");
  const auto eb = parse_vector(evidence_b, "--evidence-b");
  if (ea.size() != eb.size()) {
    throw crest::config_error("evidence vectors differ in length: " +
                              std::to_string(ea.size()) + " vs " +
                              std::to_string(eb.size()));
  }
  const auto base = crest::uniform_base_rate(ea.size());
  crest::Opinion a = crest::opinion_from_evidence(ea, base);
  crest::Opinion b = crest::opinion_from_evidence(eb, base);
  crest::Opinion fused = crest::fuse(a, b);
  print_opinion("b_A", a);
  print_opinion("b_B", b);
  print_opinion("b_AB", fused);
  std::printf("conflict,%.6f\n", crest::conflict(a, b));
  return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& data_dir,
               const std::string& drop, const std::string& out_path) {
  crest::EngineConfig config = load_engine_config(config_path);
  config.train.validate();

  crest::TrainConfig ablated = config.train;
  if (drop == "edl") {
    ablated.drop_edl = true;
  } else if (drop == "vicl") {
    ablated.drop_vicl = true;
  } else if (drop == "digs") {
    ablated.drop_digs = true;
  } else if (drop == "agt") {
    ablated.force_modality = 0;  // visual path only
  } else if (drop == "vgt") {
    ablated.force_modality = 1;  // attribute path only
  } else {
    throw crest::config_error("--drop must be one of edl|vicl|digs|agt|vgt, got \"" +
                              drop + "\"");
  }

  crest::ZslDataset dataset = crest::load(data_dir);
  crest::TrainResult full = crest::train(dataset, config.train);
  crest::TrainResult variant = crest::train(dataset, ablated);
  crest::EvalResult full_eval = crest::evaluate(full.model, dataset, config.train);
  crest::EvalResult variant_eval = crest::evaluate(variant.model, dataset, ablated);

  std::ostringstream csv;
  csv << "variant,S,U,H,ACC\n";
  char buf[160];
  std::snprintf(buf, sizeof(buf), "full,%.4f,%.4f,%.4f,%.4f\n", full_eval.gzsl.seen,
                full_eval.gzsl.unseen, full_eval.gzsl.harmonic, full_eval.czsl_acc);
  csv << buf;
  std::snprintf(buf, sizeof(buf), "without_%s,%.4f,%.4f,%.4f,%.4f\n", drop.c_str(),
                variant_eval.gzsl.seen, variant_eval.gzsl.unseen,
                variant_eval.gzsl.harmonic, variant_eval.czsl_acc);
  csv << buf;

  std::fputs(csv.str().c_str(), stdout);
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw crest::format_error(out_path + ": cannot open for writing");
    out << csv.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zero-shot grounding/evidential-fusion engine"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_dir, params_path;
  std::string mode = "gzsl", drop, evidence_a, evidence_b, out_path;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  gen->add_option("--config", config_path, "key = value config file");
  gen->add_option("--out", out_dir, "output dataset directory")->required();

  auto* train = app.add_subcommand("train", "train on a dataset directory");
  train->add_option("--config", config_path, "key = value config file");
  train->add_option("--data", data_dir, "dataset directory")->required();
  train->add_option("--out", out_dir, "output directory")->required();

  auto* eval = app.add_subcommand("eval", "evaluate saved parameters");
  eval->add_option("--config", config_path, "key = value config file");
  eval->add_option("--params", params_path, "parameter file")->required();
  eval->add_option("--data", data_dir, "dataset directory")->required();
  eval->add_option("--mode", mode, "czsl or gzsl");

  auto* fuse = app.add_subcommand("fuse-demo", "fuse two evidence vectors");
  fuse->add_option("--evidence-a", evidence_a, "comma-separated evidence")->required();
  fuse->add_option("--evidence-b", evidence_b, "comma-separated evidence")->required();

  auto* ablate = app.add_subcommand("ablate", "train full and ablated variants");
  ablate->add_option("--config", config_path, "key = value config file");
  ablate->add_option("--data", data_dir, "dataset directory")->required();
  ablate->add_option("--drop", drop, "edl|vicl|digs|agt|vgt")->required();
  ablate->add_option("--out", out_path, "comparison CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(config_path, out_dir);
    if (train->parsed()) return cmd_train(config_path, data_dir, out_dir);
    if (eval->parsed()) return cmd_eval(config_path, params_path, data_dir, mode);
    if (fuse->parsed()) return cmd_fuse_demo(evidence_a, evidence_b);
    if (ablate->parsed()) return cmd_ablate(config_path, data_dir, drop, out_path);
  } catch (const crest::config_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const crest::format_error& e) {
    std::fprintf(stderr, "format error: %s\n", e.what());
    return kExitFormat;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
