#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <doctest.h>

#include "crest/trainer.hpp"
#include "crest/vicl.hpp"

using namespace crest;
namespace fs = std::filesystem;

namespace {

SynthConfig tiny_synth() {
  SynthConfig config;
  config.class_count = 6;
  config.seen_count = 4;
  config.attribute_count = 8;
  config.regions_per_instance = 4;
  config.feature_width = 12;
  config.instances_per_class = 6;
  return config;
}

TrainConfig tiny_train() {
  TrainConfig config;
  config.epochs = 2;
  config.batch_size = 8;
  config.d_k = 4;
  config.bank_size = 6;
  config.bank_dim = 4;
  return config;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("crest_trainer_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("zero epochs returns the initialization and no reports") {
  ZslDataset ds = generate(tiny_synth());
  TrainConfig config = tiny_train();
  config.epochs = 0;
  TrainResult result = train(ds, config);
  CHECK(result.reports.empty());

  Model fresh = make_model(ds, config);
  const auto got = result.model.parameters();
  const auto want = fresh.parameters();
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].values() == want[i].values());
  }
}

TEST_CASE("training is bitwise deterministic per seed") {
  ZslDataset ds = generate(tiny_synth());
  TrainConfig config = tiny_train();
  TrainResult a = train(ds, config);
  TrainResult b = train(ds, config);
  const auto pa = a.model.parameters();
  const auto pb = b.model.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].values() == pb[i].values());
  REQUIRE(a.reports.size() == b.reports.size());
  for (std::size_t i = 0; i < a.reports.size(); ++i) {
    CHECK(a.reports[i].total == b.reports[i].total);
    CHECK(a.reports[i].harmonic == b.reports[i].harmonic);
  }
}

TEST_CASE("epoch reports are internally consistent") {
  ZslDataset ds = generate(tiny_synth());
  TrainResult result = train(ds, tiny_train());
  REQUIRE(result.reports.size() == 2);
  for (const auto& r : result.reports) {
    CHECK(std::isfinite(r.total));
    CHECK(r.mean_u_visual >= 0.0);
    CHECK(r.mean_u_visual <= 1.0);
    CHECK(r.mean_u_fused >= 0.0);
    CHECK(r.mean_u_fused <= 1.0);
    CHECK(r.harmonic ==
          doctest::Approx(harmonic_mean(r.seen, r.unseen)).epsilon(1e-9));
  }
}

TEST_CASE("informative initialization beats chance in CZSL before training") {
  SynthConfig synth = tiny_synth();
  synth.class_count = 10;
  synth.seen_count = 5;
  synth.instances_per_class = 30;
  ZslDataset ds = generate(synth);
  TrainConfig config = tiny_train();
  Model model = make_model(ds, config);
  EvalResult eval = evaluate(model, ds, config);
  // The grounding trunks start near-identity over coordinate-indicator
  // attribute embeddings, so the fresh model already reads out the class
  // signal; training consolidates rather than bootstraps. 5 unseen classes
  // put chance at 20%.
  CHECK(eval.czsl_acc > 0.6);
}

TEST_CASE("oracle embeddings reach perfect CZSL accuracy") {
  SynthConfig synth = tiny_synth();
  // Balanced, untied attributes keep class vectors well separated, so the
  // dot-product argmax against the true attribute vector recovers the class.
  synth.attribute_count = 32;
  synth.imbalance_exponent = 0.0;
  synth.cooccurrence_strength = 0.0;
  ZslDataset ds = generate(synth);
  FusionCoefficients coeffs;
  std::vector<int> preds, labels;
  for (std::size_t idx : ds.split_indices(Split::test_unseen)) {
    const Instance& inst = ds.instances[idx];
    std::vector<double> fused(ds.semantics.z.cols());
    for (std::size_t j = 0; j < fused.size(); ++j) {
      fused[j] = ds.semantics.z.at(std::size_t(inst.label), j);
    }
    preds.push_back(predict(fused, ds.semantics, coeffs, EvalMode::czsl));
    labels.push_back(inst.label);
  }
  CHECK(czsl_metrics(preds, labels, ds.semantics) == doctest::Approx(1.0));
}

TEST_CASE("model save/load round trip") {
  TempDir dir;
  ZslDataset ds = generate(tiny_synth());
  TrainConfig config = tiny_train();
  config.epochs = 1;
  TrainResult result = train(ds, config);
  const std::string path = (dir.path / "params.bin").string();
  save_model(result.model, path);
  Model back = load_model(path, ds, config);
  const auto pa = result.model.parameters();
  const auto pb = back.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].values() == pb[i].values());
  CHECK(back.attribute_embeddings.values() ==
        result.model.attribute_embeddings.values());

  SUBCASE("corrupted parameter file is a format error") {
    fs::resize_file(path, 40);
    CHECK_THROWS_AS(load_model(path, ds, config), format_error);
  }
  SUBCASE("wrong magic is a format error naming the expected header") {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write("BOGUSMG1", 8);
    out.close();
    CHECK_THROWS_WITH_AS(load_model(path, ds, config), doctest::Contains("CRSTPAR1"),
                         format_error);
  }
}

TEST_CASE("reports CSV is stable across reruns") {
  TempDir dir;
  ZslDataset ds = generate(tiny_synth());
  TrainConfig config = tiny_train();
  const std::string p1 = (dir.path / "a.csv").string();
  const std::string p2 = (dir.path / "b.csv").string();
  write_reports_csv(train(ds, config).reports, p1);
  write_reports_csv(train(ds, config).reports, p2);
  std::ifstream f1(p1), f2(p2);
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
  CHECK(s1.find("epoch,") == 0);
}

TEST_CASE("nearest-class-mean baseline beats chance on clean data") {
  SynthConfig synth = tiny_synth();
  synth.variability_noise = 0.05;
  ZslDataset ds = generate(synth);
  const double acc = nearest_class_mean_baseline(ds, EvalMode::czsl);
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);
}

TEST_CASE("full training objective passes a gradient check on a small batch") {
  ZslDataset ds = generate(tiny_synth());
  TrainConfig config = tiny_train();
  Model model = make_model(ds, config);
  std::vector<std::size_t> batch = {0, 1, 6, 7};
  std::vector<int> labels;
  for (std::size_t idx : batch) labels.push_back(ds.instances[idx].label);

  std::vector<double> y(batch.size() * ds.semantics.class_count(), 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    y[i * ds.semantics.class_count() + std::size_t(labels[i])] = 1.0;
  }
  Tensor yt(batch.size(), ds.semantics.class_count(), std::move(y));

  std::vector<Tensor> params = model.parameters();
  auto f = [&]() {
    BatchForward fw = forward_batch(model, ds, batch, config);
    Tensor arise = arise_loss(fw.fused, labels, ds.semantics, config.coeffs);
    ContrastiveBatch cb{fw.f_visual, labels, config.tau, config.similarity_threshold};
    Tensor vicl = vicl_loss(cb);
    Tensor digs = digs_loss(fw.bank_queries, model.bank.patterns, config.margin);
    Tensor edl = edl_total({fw.alpha_visual, fw.alpha_attribute}, yt,
                           AnnealSchedule{10, 1}, config.edl_weights,
                           config.fusion_mode);
    return total_loss(arise, vicl, digs, edl, config.coeffs.lambda_edl);
  };
  auto report = check_gradients(f, params, 1e-5, 1e-4);
  CHECK(report.pass);
}
