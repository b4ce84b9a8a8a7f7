#include <cmath>
#include <random>
#include <stdexcept>

#include <doctest.h>

#include "crest/opinion.hpp"

using namespace crest;

namespace {

Opinion random_opinion(std::mt19937_64& rng, std::size_t k) {
  std::uniform_real_distribution<double> u(0.0, 3.0);
  std::vector<double> e(k);
  for (auto& v : e) v = u(rng);
  return opinion_from_evidence(e, uniform_base_rate(k));
}

}  // namespace

TEST_CASE("opinion_from_evidence arithmetic") {
  auto vac = opinion_from_evidence({0, 0, 0}, uniform_base_rate(3));
  CHECK(vac.uncertainty == doctest::Approx(1.0).epsilon(1e-15));
  for (double b : vac.belief) CHECK(b == 0.0);

  auto o = opinion_from_evidence({3, 0, 0}, uniform_base_rate(3));
  CHECK(o.uncertainty == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(o.belief[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(o.belief[1] == 0.0);

  auto o2 = opinion_from_evidence({8, 0}, uniform_base_rate(2));
  CHECK(o2.uncertainty == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(o2.belief[0] == doctest::Approx(0.8).epsilon(1e-15));

  CHECK_THROWS_AS(opinion_from_evidence({-0.5, 1}, uniform_base_rate(2)),
                  std::domain_error);
}

TEST_CASE("projection") {
  auto vac = opinion_from_evidence({0, 0, 0, 0}, uniform_base_rate(4));
  for (double p : project(vac)) CHECK(p == doctest::Approx(0.25).epsilon(1e-15));

  auto o = opinion_from_evidence({3, 0, 0}, uniform_base_rate(3));
  auto p = project(o);
  CHECK(p[0] == doctest::Approx(0.5 + 1.0 / 6).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(1.0 / 6).epsilon(1e-12));

  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    auto probs = project(random_opinion(rng, 4));
    double sum = 0.0;
    for (double v : probs) sum += v;
    CHECK(std::fabs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("fuse hand example and self-fusion") {
  Opinion a{{0.8, 0.0}, 0.2, uniform_base_rate(2)};
  Opinion b{{0.0, 0.2}, 0.8, uniform_base_rate(2)};
  Opinion f = fuse(a, b);
  CHECK(f.uncertainty == doctest::Approx(0.32).epsilon(1e-12));
  CHECK(f.belief[0] == doctest::Approx(0.64).epsilon(1e-12));
  CHECK(f.belief[1] == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(f.belief[0] + f.belief[1] + f.uncertainty == doctest::Approx(1.0).epsilon(1e-12));

  std::mt19937_64 rng(9);
  Opinion w = random_opinion(rng, 3);
  Opinion self = fuse(w, w);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(self.belief[k] == doctest::Approx(w.belief[k]).epsilon(1e-12));
  }
  CHECK(self.uncertainty == doctest::Approx(w.uncertainty).epsilon(1e-12));
}

TEST_CASE("fuse rejects the doubly-dogmatic case") {
  Opinion a{{1.0, 0.0}, 0.0, uniform_base_rate(2)};
  Opinion b{{0.0, 1.0}, 0.0, uniform_base_rate(2)};
  CHECK_THROWS_AS(fuse(a, b), std::domain_error);
}

TEST_CASE("fuse properties over random pairs") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 2000; ++i) {
    Opinion a = random_opinion(rng, 3);
    Opinion b = random_opinion(rng, 3);
    Opinion f = fuse(a, b);
    Opinion g = fuse(b, a);
    double sum = f.uncertainty;
    for (double v : f.belief) sum += v;
    CHECK(std::fabs(sum - 1.0) < 1e-9);
    const double hm = 2.0 * a.uncertainty * b.uncertainty / (a.uncertainty + b.uncertainty);
    CHECK(std::fabs(f.uncertainty - hm) < 1e-12);
    CHECK(f.uncertainty >= std::min(a.uncertainty, b.uncertainty) - 1e-12);
    CHECK(f.uncertainty <= std::max(a.uncertainty, b.uncertainty) + 1e-12);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(std::fabs(f.belief[k] - g.belief[k]) < 1e-12);
    }
  }
}

TEST_CASE("fuse_many identity, idempotence, pair equivalence") {
  std::mt19937_64 rng(23);
  Opinion w = random_opinion(rng, 4);
  Opinion single = fuse_many({w});
  CHECK(single.uncertainty == w.uncertainty);

  Opinion triple = fuse_many({w, w, w});
  CHECK(triple.uncertainty == doctest::Approx(w.uncertainty).epsilon(1e-12));
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(triple.belief[k] == doctest::Approx(w.belief[k]).epsilon(1e-12));
  }

  Opinion v = random_opinion(rng, 4);
  Opinion pair = fuse_many({w, v});
  Opinion direct = fuse(w, v);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(pair.belief[k] == doctest::Approx(direct.belief[k]).epsilon(1e-14));
  }
  CHECK_THROWS_AS(fuse_many({}), std::domain_error);
}

TEST_CASE("conflict degree extremes and symmetry") {
  auto base = uniform_base_rate(2);
  Opinion same{{0.4, 0.1}, 0.5, base};
  CHECK(conflict(same, same) == doctest::Approx(0.0).epsilon(1e-15));

  Opinion vac{{0.0, 0.0}, 1.0, base};
  Opinion sure{{1.0, 0.0}, 0.0, base};
  CHECK(conflict(vac, sure) == doctest::Approx(0.0).epsilon(1e-15));

  Opinion left{{1.0, 0.0}, 0.0, base};
  Opinion right{{0.0, 1.0}, 0.0, base};
  CHECK(conflict(left, right) == doctest::Approx(1.0).epsilon(1e-12));

  std::mt19937_64 rng(29);
  for (int i = 0; i < 500; ++i) {
    Opinion a = random_opinion(rng, 3);
    Opinion b = random_opinion(rng, 3);
    const double c = conflict(a, b);
    CHECK(c >= 0.0);
    CHECK(c <= 1.0);
    CHECK(c == conflict(b, a));
  }
}
