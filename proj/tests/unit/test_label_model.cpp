#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "qanno/error.hpp"
#include "qanno/label_model.hpp"
#include "oracles.hpp"

using namespace qanno;

TEST_CASE("joint entropy on hand-computed inputs") {
  CHECK(joint_entropy(ItemProbabilities({0.5, 0.5})) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(joint_entropy(ItemProbabilities({1.0 - 1e-6})) == doctest::Approx(0.0).epsilon(1e-4));
  CHECK(joint_entropy(ItemProbabilities({0.25})) == doctest::Approx(0.811278).epsilon(1e-6));
  // h(0.9) + h(0.8) = 0.4689956 + 0.7219281
  CHECK(joint_entropy(ItemProbabilities({0.9, 0.8})) == doctest::Approx(1.1909237).epsilon(1e-7));
}

TEST_CASE("probabilities are validated and clamped") {
  const ItemProbabilities p({0.0, 1.0, 0.3});
  CHECK(p[0] == kProbEpsilon);
  CHECK(p[1] == 1.0 - kProbEpsilon);
  CHECK(p[2] == 0.3);
  CHECK_THROWS_AS(ItemProbabilities({1.5}), RangeError);
  CHECK_THROWS_AS(ItemProbabilities({-0.1}), RangeError);
  CHECK_THROWS_AS(ItemProbabilities({std::nan("")}), RangeError);
  CHECK_THROWS_AS(ItemProbabilities(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("labeling probability") {
  const ItemProbabilities p({0.9, 0.8});
  CHECK(labeling_probability(p, Labeling({1, 1})) == doctest::Approx(0.72).epsilon(1e-12));
  double total = 0.0;
  for (std::uint64_t m = 0; m < 4; ++m) total += labeling_probability(p, Labeling::from_mask(m, 2));
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  const ItemProbabilities u(std::vector<double>(7, 0.5));
  CHECK(labeling_probability(u, Labeling::from_mask(0x55, 7)) == doctest::Approx(std::ldexp(1.0, -7)));
  CHECK_THROWS_AS(labeling_probability(p, Labeling({1})), LengthMismatch);
}

TEST_CASE("labeling mask round trip") {
  const Labeling y({1, 0, 1, 1});
  CHECK(y.to_mask() == 0b1101);
  CHECK(Labeling::from_mask(0b1101, 4) == y);
}

TEST_CASE("top-k labelings") {
  const ItemProbabilities p({0.9, 0.8});
  const auto top1 = enumerate_labelings_by_probability(p, 1);
  REQUIRE(top1.size() == 1);
  CHECK(top1[0].labeling == Labeling({1, 1}));
  CHECK(top1[0].probability == doctest::Approx(0.72));

  const auto all = enumerate_labelings_by_probability(p, 4);
  REQUIRE(all.size() == 4);
  CHECK(all[0].labeling == Labeling({1, 1}));
  CHECK(all[1].labeling == Labeling({1, 0}));
  CHECK(all[2].labeling == Labeling({0, 1}));
  CHECK(all[3].labeling == Labeling({0, 0}));
  CHECK(all[1].probability == doctest::Approx(0.18));
  CHECK(all[2].probability == doctest::Approx(0.08));
  CHECK(all[3].probability == doctest::Approx(0.02));

  const auto uniform = enumerate_labelings_by_probability(ItemProbabilities({0.5, 0.5}), 4);
  REQUIRE(uniform.size() == 4);
  CHECK(uniform[0].labeling == Labeling({0, 0}));
  CHECK(uniform[1].labeling == Labeling({0, 1}));
  CHECK(uniform[2].labeling == Labeling({1, 0}));
  CHECK(uniform[3].labeling == Labeling({1, 1}));
  for (const auto& r : uniform) CHECK(r.probability == doctest::Approx(0.25));

  CHECK_THROWS_AS(enumerate_labelings_by_probability(ItemProbabilities(std::vector<double>(26, 0.3)), 1),
                  CapacityError);
  CHECK_THROWS_AS(enumerate_labelings_by_probability(p, 5), std::invalid_argument);
}

TEST_CASE("reduce certainty") {
  CHECK(reduce_certainty(ItemProbabilities({0.9}), 0.0)[0] == doctest::Approx(0.9));
  CHECK(reduce_certainty(ItemProbabilities({1.0}), 0.05)[0] == doctest::Approx(0.975).epsilon(1e-5));
  CHECK(reduce_certainty(ItemProbabilities({0.5}), 0.37)[0] == 0.5);
  CHECK_THROWS_AS(reduce_certainty(ItemProbabilities({0.5}), 1.5), RangeError);
}

TEST_CASE("property: entropy and normalization match explicit enumeration") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 200; ++trial) {
    const ItemProbabilities p = oracle::random_probs(gen, 1 + trial % 10);
    const std::vector<double> dist = oracle::explicit_distribution(p);
    double total = 0.0;
    for (double x : dist) total += x;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(joint_entropy(p) - oracle::shannon_bits(dist)) < 1e-9);
  }
}

TEST_CASE("property: top-k agrees with full sort") {
  std::mt19937_64 gen(12);
  for (int trial = 0; trial < 150; ++trial) {
    const std::size_t n = 1 + trial % 10;
    // Coarse probabilities make ties frequent.
    const ItemProbabilities p = trial % 3 == 0 ? oracle::random_grid_probs(gen, n) : oracle::random_probs(gen, n);
    const std::size_t m = std::size_t{1} << n;
    const std::size_t k = 1 + gen() % m;
    const auto got = enumerate_labelings_by_probability(p, k);
    const auto expected = oracle::sorted_labelings(p);
    REQUIRE(got.size() == k);
    for (std::size_t r = 0; r < k; ++r) {
      CHECK(got[r].probability == doctest::Approx(expected[r].second).epsilon(1e-12));
      if (r > 0) CHECK(got[r].probability <= got[r - 1].probability * (1 + 1e-12));
    }
    // Exact sequence equality whenever no near-ties straddle positions.
    if (trial % 3 == 0) {
      for (std::size_t r = 0; r < k; ++r) CHECK(got[r].labeling.to_mask() == expected[r].first.to_mask());
    }
  }
}

TEST_CASE("property: reduce_certainty moves toward one half without crossing") {
  std::mt19937_64 gen(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const double p = u(gen);
    const double a = u(gen);
    const double q = reduce_certainty(ItemProbabilities({p}), a)[0];
    const double pc = clamp_probability(p);
    CHECK(std::abs(q - 0.5) <= std::abs(pc - 0.5) + 1e-15);
    CHECK((q - 0.5) * (pc - 0.5) >= 0.0);
  }
}
