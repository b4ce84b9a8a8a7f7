#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <vector>

#include "crest/config.hpp"
#include "crest/edl.hpp"
#include "crest/opinion.hpp"
#include "crest/special.hpp"
#include "crest/synth.hpp"
#include "crest/trainer.hpp"
#include "crest/vicl.hpp"

namespace py = pybind11;
using namespace crest;

namespace {

Tensor from_rows(const std::vector<std::vector<double>>& rows, const char* what) {
  if (rows.empty()) throw std::domain_error(std::string(what) + ": empty matrix");
  const std::size_t cols = rows[0].size();
  std::vector<double> flat;
  flat.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) {
      throw std::domain_error(std::string(what) + ": ragged rows");
    }
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return Tensor(rows.size(), cols, std::move(flat));
}

std::vector<std::vector<double>> to_rows(const Tensor& t) {
  std::vector<std::vector<double>> out(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i) {
    for (std::size_t j = 0; j < t.cols(); ++j) out[i][j] = t.at(i, j);
  }
  return out;
}

ClassSemanticMatrix make_semantics(const std::vector<std::vector<double>>& z,
                                   const std::vector<int>& seen,
                                   const std::vector<int>& unseen) {
  ClassSemanticMatrix sem;
  sem.z = from_rows(z, "semantics");
  sem.seen_ids = seen;
  sem.unseen_ids = unseen;
  sem.validate();
  return sem;
}

py::dict eval_to_dict(const EvalResult& e) {
  py::dict d;
  d["seen"] = e.gzsl.seen;
  d["unseen"] = e.gzsl.unseen;
  d["harmonic"] = e.gzsl.harmonic;
  d["acc"] = e.czsl_acc;
  d["mean_u_visual"] = e.mean_u_visual;
  d["mean_u_attribute"] = e.mean_u_attribute;
  d["mean_u_fused"] = e.mean_u_fused;
  d["mean_conflict"] = e.mean_conflict;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "zero-shot grounding and evidential-fusion engine";

  py::register_exception<format_error>(m, "FormatError");
  py::register_exception<config_error>(m, "ConfigError");

  py::class_<Opinion>(m, "Opinion")
      .def_readonly("belief", &Opinion::belief)
      .def_readonly("uncertainty", &Opinion::uncertainty)
      .def_readonly("base_rate", &Opinion::base_rate);

  m.def("digamma", &digamma, py::arg("x"));
  m.def("lgamma", &lgamma_pos, py::arg("x"));

  m.def(
      "opinion_from_evidence",
      [](const std::vector<double>& evidence) {
        return opinion_from_evidence(evidence, uniform_base_rate(evidence.size()));
      },
      py::arg("evidence"), "Opinion from nonnegative evidence, uniform base rate.");
  m.def("project", &project, py::arg("opinion"));
  m.def("fuse", &fuse, py::arg("a"), py::arg("b"));
  m.def("conflict", &conflict, py::arg("a"), py::arg("b"));

  m.def(
      "ace_loss",
      [](const std::vector<std::vector<double>>& alpha,
         const std::vector<std::vector<double>>& y) {
        return ace_loss(from_rows(alpha, "alpha"), from_rows(y, "labels")).item();
      },
      py::arg("alpha"), py::arg("one_hot_labels"));
  m.def(
      "kl_to_uniform",
      [](const std::vector<std::vector<double>>& alpha,
         const std::vector<std::vector<double>>& y) {
        return kl_to_uniform(from_rows(alpha, "alpha"), from_rows(y, "labels")).item();
      },
      py::arg("alpha"), py::arg("one_hot_labels"));
  m.def(
      "vicl_loss",
      [](const std::vector<std::vector<double>>& embeddings,
         const std::vector<int>& labels, double temperature, double threshold) {
        ContrastiveBatch batch{from_rows(embeddings, "embeddings"), labels, temperature,
                               threshold};
        return vicl_loss(batch).item();
      },
      py::arg("embeddings"), py::arg("labels"), py::arg("temperature") = 0.1,
      py::arg("similarity_threshold") = 0.5);
  m.def(
      "digs_loss",
      [](const std::vector<std::vector<double>>& queries,
         const std::vector<std::vector<double>>& patterns, double margin) {
        return digs_loss(from_rows(queries, "queries"), from_rows(patterns, "patterns"),
                         margin)
            .item();
      },
      py::arg("queries"), py::arg("patterns"), py::arg("margin") = 1.0);

  m.def("harmonic_mean", &harmonic_mean, py::arg("seen"), py::arg("unseen"));
  m.def(
      "predict",
      [](const std::vector<double>& fused, const std::vector<std::vector<double>>& z,
         const std::vector<int>& seen, const std::vector<int>& unseen, double delta,
         const std::string& mode) {
        FusionCoefficients coeffs;
        coeffs.delta = delta;
        return predict(fused, make_semantics(z, seen, unseen), coeffs,
                       mode == "czsl" ? EvalMode::czsl : EvalMode::gzsl);
      },
      py::arg("fused"), py::arg("class_semantics"), py::arg("seen_ids"),
      py::arg("unseen_ids"), py::arg("delta") = 1.0, py::arg("mode") = "gzsl");
  m.def(
      "gzsl_metrics",
      [](const std::vector<int>& predictions, const std::vector<int>& labels,
         const std::vector<std::vector<double>>& z, const std::vector<int>& seen,
         const std::vector<int>& unseen) {
        GzslMetrics g =
            gzsl_metrics(predictions, labels, make_semantics(z, seen, unseen));
        py::dict d;
        d["seen"] = g.seen;
        d["unseen"] = g.unseen;
        d["harmonic"] = g.harmonic;
        return d;
      },
      py::arg("predictions"), py::arg("labels"), py::arg("class_semantics"),
      py::arg("seen_ids"), py::arg("unseen_ids"));

  m.def(
      "generate_dataset",
      [](const std::string& config_text, const std::string& out_dir) {
        EngineConfig config = parse_config_text(config_text, "<python>");
        ZslDataset ds = generate(config.synth);
        if (!out_dir.empty()) save(ds, out_dir);
        py::dict d;
        d["classes"] = ds.semantics.class_count();
        d["seen_classes"] = ds.semantics.seen_ids.size();
        d["instances"] = ds.instances.size();
        return d;
      },
      py::arg("config_text") = "", py::arg("out_dir") = "");
  m.def(
      "train_on_dataset",
      [](const std::string& data_dir, const std::string& config_text,
         const std::string& out_dir) {
        EngineConfig config = parse_config_text(config_text, "<python>");
        ZslDataset ds = load(data_dir);
        TrainResult result = train(ds, config.train);
        if (!out_dir.empty()) {
          save_model(result.model, out_dir + "/params.bin");
          write_reports_csv(result.reports, out_dir + "/epochs.csv");
        }
        EvalResult eval = evaluate(result.model, ds, config.train);
        return eval_to_dict(eval);
      },
      py::arg("data_dir"), py::arg("config_text") = "", py::arg("out_dir") = "");
  m.def(
      "load_matrix",
      [](const std::string& path) { return to_rows(load_matrix(path)); },
      py::arg("path"));
}
