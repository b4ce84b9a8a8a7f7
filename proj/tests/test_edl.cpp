#include <cmath>
#include <random>

#include <doctest.h>

#include "crest/edl.hpp"
#include "crest/opinion.hpp"
#include "crest/optim.hpp"
#include "crest/special.hpp"

using namespace crest;

namespace {

Tensor random_alpha(std::mt19937_64& rng, std::size_t b, std::size_t k,
                    bool requires_grad = true) {
  std::uniform_real_distribution<double> u(0.0, 4.0);
  std::vector<double> v(b * k);
  for (auto& x : v) x = 1.0 + u(rng);
  return Tensor(b, k, std::move(v), requires_grad);
}

Tensor one_hot(std::size_t b, std::size_t k, std::size_t hot) {
  std::vector<double> v(b * k, 0.0);
  for (std::size_t i = 0; i < b; ++i) v[i * k + hot] = 1.0;
  return Tensor(b, k, std::move(v));
}

}  // namespace

TEST_CASE("ace_loss closed forms") {
  Tensor alpha(1, 2, {2, 1});
  Tensor y(1, 2, {1, 0});
  CHECK(ace_loss(alpha, y).item() == doctest::Approx(0.5).epsilon(1e-10));

  Tensor uniform(1, 3, {1, 1, 1});
  Tensor y3(1, 3, {0, 1, 0});
  CHECK(ace_loss(uniform, y3).item() == doctest::Approx(1.5).epsilon(1e-10));
}

TEST_CASE("ace_loss decreases monotonically in true-class evidence") {
  double prev = 1e300;
  for (double at : {2.0, 5.0, 20.0, 100.0, 1000.0}) {
    Tensor alpha(1, 3, {at, 2.0, 3.0});
    Tensor y(1, 3, {1, 0, 0});
    const double loss = ace_loss(alpha, y).item();
    CHECK(loss > 0.0);
    CHECK(loss < prev);
    prev = loss;
  }
}

TEST_CASE("ace_loss rejects non-one-hot labels") {
  Tensor alpha(1, 2, {2, 1});
  CHECK_THROWS_AS(ace_loss(alpha, Tensor(1, 2, {0.5, 0.5})), std::domain_error);
  CHECK_THROWS_AS(ace_loss(alpha, Tensor(1, 2, {1, 1})), std::domain_error);
}

TEST_CASE("ace gradient signs: more correct evidence lowers the loss") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor alpha = random_alpha(rng, 1, 4);
    Tensor y = one_hot(1, 4, 2);
    backward(ace_loss(alpha, y));
    CHECK(alpha.grad()[2] < 0.0);
    for (std::size_t j : {0u, 1u, 3u}) CHECK(alpha.grad()[j] > 0.0);
  }
}

TEST_CASE("kl_to_uniform zero cases and closed-form value") {
  Tensor a1(1, 3, {5, 1, 1});
  Tensor y(1, 3, {1, 0, 0});
  CHECK(kl_to_uniform(a1, y).item() == doctest::Approx(0.0).epsilon(1e-12));

  Tensor a2(1, 3, {1, 1, 1});
  CHECK(kl_to_uniform(a2, y).item() == doctest::Approx(0.0).epsilon(1e-12));

  // KL[Dir(1,3,1) || Dir(1)] = ln 6 - 7/6, by the closed-form Dirichlet KL.
  Tensor a3(1, 3, {1, 3, 1});
  const double oracle = std::log(6.0) - 7.0 / 6.0;
  CHECK(kl_to_uniform(a3, y).item() == doctest::Approx(oracle).epsilon(1e-8));

  std::mt19937_64 rng(37);
  for (int i = 0; i < 50; ++i) {
    CHECK(kl_to_uniform(random_alpha(rng, 2, 3, false), one_hot(2, 3, 1)).item() >=
          -1e-12);
  }
}

TEST_CASE("acc_loss annealing schedule") {
  Tensor alpha(1, 3, {2, 3, 1.5});
  Tensor y(1, 3, {0, 0, 1});
  const double ace = ace_loss(alpha, y).item();
  const double kl = kl_to_uniform(alpha, y).item();

  CHECK(AnnealSchedule{10, 0}.lambda() == 0.0);
  CHECK(AnnealSchedule{10, 5}.lambda() == 0.5);
  CHECK(AnnealSchedule{10, 100}.lambda() == 1.0);

  CHECK(acc_loss(alpha, y, {10, 0}).item() == doctest::Approx(ace).epsilon(1e-12));
  CHECK(acc_loss(alpha, y, {10, 5}).item() ==
        doctest::Approx(ace + 0.5 * kl).epsilon(1e-12));
  CHECK(acc_loss(alpha, y, {10, 100}).item() ==
        doctest::Approx(ace + kl).epsilon(1e-12));

  // lambda_t is nondecreasing across the schedule.
  double prev = -1.0;
  for (int t = 0; t <= 30; ++t) {
    const double l = AnnealSchedule{10, t}.lambda();
    CHECK(l >= prev);
    CHECK(l >= 0.0);
    CHECK(l <= 1.0);
    prev = l;
  }
}

TEST_CASE("consistency_loss formula") {
  Tensor a(1, 3, {4, 1, 1});
  CHECK(consistency_loss({a, a}).item() == doctest::Approx(0.0).epsilon(1e-12));

  Tensor b(1, 3, {1, 4, 1});
  DirichletParams da{{4, 1, 1}}, db{{1, 4, 1}};
  const double c = conflict(opinion_from_alpha(da), opinion_from_alpha(db));
  CHECK(consistency_loss({a, b}).item() == doctest::Approx(2.0 * c).epsilon(1e-12));

  Tensor vac(1, 3, {1, 1, 1});
  CHECK(consistency_loss({vac, vac}).item() == doctest::Approx(0.0).epsilon(1e-12));

  CHECK_THROWS_AS(consistency_loss({a}), std::domain_error);
}

TEST_CASE("fuse_alpha weighted average") {
  Tensor a(1, 3, {4, 1, 1});
  SUBCASE("idempotence in both modes") {
    for (auto mode : {AlphaFusion::weighted_average, AlphaFusion::opinion_fusion}) {
      Tensor fused = fuse_alpha({a, a}, mode);
      for (int j = 0; j < 3; ++j) {
        CHECK(fused.at(0, j) == doctest::Approx(a.at(0, j)).epsilon(1e-10));
      }
    }
  }
  SUBCASE("equal uncertainties give the plain mean") {
    Tensor b(1, 3, {1, 4, 1});  // same strength, same u
    Tensor fused = fuse_alpha({a, b}, AlphaFusion::weighted_average);
    CHECK(fused.at(0, 0) == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(fused.at(0, 1) == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(fused.at(0, 2) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("a vacuous modality is ignored") {
    Tensor vac(1, 3, {1, 1, 1});  // u = 1 -> weight 0
    Tensor fused = fuse_alpha({a, vac}, AlphaFusion::weighted_average);
    for (int j = 0; j < 3; ++j) {
      CHECK(fused.at(0, j) == doctest::Approx(a.at(0, j)).epsilon(1e-9));
    }
  }
  SUBCASE("empty input rejected") {
    CHECK_THROWS_AS(fuse_alpha({}, AlphaFusion::weighted_average), std::domain_error);
  }
}

TEST_CASE("edl_total reductions") {
  std::mt19937_64 rng(41);
  Tensor a = random_alpha(rng, 3, 4, false);
  Tensor y = one_hot(3, 4, 1);
  AnnealSchedule sched{10, 3};

  SUBCASE("beta=0, gamma=0 equals fused ACC alone") {
    Tensor b = random_alpha(rng, 3, 4, false);
    EdlWeights w{0.0, 0.0};
    Tensor fused = fuse_alpha({a, b}, AlphaFusion::weighted_average);
    const double expected = acc_loss(fused, y, sched).item();
    CHECK(edl_total({a, b}, y, sched, w, AlphaFusion::weighted_average).item() ==
          doctest::Approx(expected).epsilon(1e-10));
  }
  SUBCASE("identical modalities contribute no conflict") {
    EdlWeights w0{1.0, 0.0}, w1{1.0, 100.0};
    const double l0 = edl_total({a, a}, y, sched, w0, AlphaFusion::weighted_average).item();
    const double l1 = edl_total({a, a}, y, sched, w1, AlphaFusion::weighted_average).item();
    CHECK(l0 == doctest::Approx(l1).epsilon(1e-10));
  }
}

TEST_CASE("edl losses pass gradient checks") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 3; ++trial) {
    Tensor a = random_alpha(rng, 2, 3);
    Tensor b = random_alpha(rng, 2, 3);
    Tensor y = one_hot(2, 3, 0);
    AnnealSchedule sched{10, 4};
    EdlWeights w{1.0, 1.0};
    std::vector<Tensor> params = {a, b};

    auto ace = [&]() { return ace_loss(a, y); };
    CHECK(check_gradients(ace, params, 1e-5, 1e-4).pass);

    auto kl = [&]() { return kl_to_uniform(a, y); };
    CHECK(check_gradients(kl, params, 1e-5, 1e-4).pass);

    auto con = [&]() { return consistency_loss({a, b}); };
    CHECK(check_gradients(con, params, 1e-5, 1e-4).pass);

    auto total = [&]() {
      return edl_total({a, b}, y, sched, w, AlphaFusion::weighted_average);
    };
    CHECK(check_gradients(total, params, 1e-5, 1e-4).pass);
  }
}
