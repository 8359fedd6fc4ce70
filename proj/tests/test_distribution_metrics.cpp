// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "support.hpp"
#include "surveysim/distribution_metrics.hpp"
#include "surveysim/errors.hpp"

using namespace surveysim;
using surveysim::testing::random_distribution;
using surveysim::testing::transport_oracle;

using V = std::vector<double>;

TEST_CASE("jsd trivial cases") {
  CHECK(jsd(V{0.2, 0.3, 0.5}, V{0.2, 0.3, 0.5}) == 0.0);
  CHECK(jsd(V{1.0, 0.0}, V{0.0, 1.0}) == 1.0);
  CHECK(one_minus_jsd(V{0.4, 0.6}, V{0.4, 0.6}) == 1.0);
  CHECK(one_minus_jsd(V{1.0, 0.0}, V{0.0, 1.0}) == 0.0);
}

TEST_CASE("jsd against a 40-digit evaluation") {
  // mpmath: 1.5 - 0.75*log2(3) = 0.31127812445913283...
  CHECK(jsd(V{0.5, 0.5}, V{1.0, 0.0}) == doctest::Approx(0.3112781244591328).epsilon(1e-14));
  CHECK(one_minus_jsd(V{0.5, 0.5}, V{1.0, 0.0}) == doctest::Approx(0.6887218755408672).epsilon(1e-14));
}

TEST_CASE("jsd properties over random pairs") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 2 + rng() % 7;
    const auto p = random_distribution(rng, n);
    const auto q = random_distribution(rng, n);
    const double d = jsd(p, q);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
    CHECK(std::abs(d - jsd(q, p)) < 1e-12);
    CHECK(jsd(p, p) < 1e-9);
    // joint permutation invariance
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    V pp(n), qq(n);
    for (std::size_t i = 0; i < n; ++i) {
      pp[i] = p[perm[i]];
      qq[i] = q[perm[i]];
    }
    CHECK(std::abs(jsd(pp, qq) - d) < 1e-12);
  }
}

TEST_CASE("emd trivial and derived cases") {
  CHECK(emd(V{0.3, 0.7}, V{0.3, 0.7}) == 0.0);
  CHECK(emd(V{1, 0, 0, 0}, V{0, 0, 0, 1}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(emd(V{0.5, 0.5, 0.0}, V{0.0, 0.5, 0.5}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(transport_oracle(V{0.5, 0.5, 0.0}, V{0.0, 0.5, 0.5}) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(emd(V{1.0}, V{1.0}), ValidationError);
}

TEST_CASE("emd closed form matches the transport solver") {
  std::mt19937_64 rng(2);
  double worst = 0.0;
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 2 + rng() % 4;
    const auto p = random_distribution(rng, n);
    const auto q = random_distribution(rng, n);
    worst = std::max(worst, std::abs(emd(p, q) - transport_oracle(p, q)));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("emd reversal invariance, bounds and monotone shift") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 2 + rng() % 6;
    auto p = random_distribution(rng, n);
    auto q = random_distribution(rng, n);
    const double d = emd(p, q);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0 + 1e-12);
    V pr(p.rbegin(), p.rend()), qr(q.rbegin(), q.rend());
    CHECK(std::abs(emd(pr, qr) - d) < 1e-12);
    CHECK(emd(p, p) < 1e-12);

    // Against a point mass at 0, pushing mass one step right never lowers the distance.
    V origin(n, 0.0);
    origin[0] = 1.0;
    const std::size_t i = rng() % (n - 1);
    if (p[i] > 0.0) {
      V moved = p;
      const double amount = p[i] * 0.5;
      moved[i] -= amount;
      moved[i + 1] += amount;
      CHECK(emd(moved, origin) >= emd(p, origin) - 1e-12);
    }
  }
}

TEST_CASE("argmax and accuracy") {
  CHECK(argmax(V{0.4, 0.4, 0.2}) == 0);
  CHECK(argmax(V{0.1, 0.5, 0.4}) == 1);
  const std::vector<V> refs{{0.7, 0.3}, {0.2, 0.8}};
  CHECK(argmax_accuracy(refs, refs) == 1.0);
  CHECK(argmax_accuracy({{0.6, 0.4}, {0.6, 0.4}}, refs) == 0.5);
  CHECK_THROWS_AS(argmax_accuracy({}, {}), ValidationError);
  CHECK_THROWS_AS(argmax_accuracy({{1.0, 0.0}}, refs), ValidationError);
}

TEST_CASE("accuracy equals a recount on random pairs") {
  std::mt19937_64 rng(4);
  std::vector<V> preds, refs;
  for (int i = 0; i < 10; ++i) {
    const std::size_t n = 2 + rng() % 4;
    preds.push_back(random_distribution(rng, n, false));
    refs.push_back(random_distribution(rng, n, false));
  }
  int hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto a = std::max_element(preds[i].begin(), preds[i].end()) - preds[i].begin();
    const auto b = std::max_element(refs[i].begin(), refs[i].end()) - refs[i].begin();
    hits += a == b;
  }
  CHECK(argmax_accuracy(preds, refs) == doctest::Approx(hits / 10.0));
}

TEST_CASE("diversity profile") {
  CHECK(diversity_profile({{0.2, 0.8}, {0.2, 0.8}, {0.2, 0.8}}) == doctest::Approx(1.0));
  CHECK(diversity_profile({{1.0, 0.0}, {0.0, 1.0}}) == 0.0);
  const std::vector<V> three{{0.5, 0.5}, {1.0, 0.0}, {0.0, 1.0}};
  const double hand = (one_minus_jsd(three[0], three[1]) + one_minus_jsd(three[0], three[2]) +
                       one_minus_jsd(three[1], three[2])) /
                      3.0;
  CHECK(diversity_profile(three) == doctest::Approx(hand).epsilon(1e-15));
  // (0.68872 + 0.68872 + 0) / 3 from the 40-digit value above
  CHECK(diversity_profile(three) == doctest::Approx(0.4591479170272448).epsilon(1e-12));
  CHECK_THROWS_AS(diversity_profile({{1.0, 0.0}}), ValidationError);
}

TEST_CASE("input validation") {
  CHECK_THROWS_AS(jsd(V{0.5, 0.5}, V{0.2, 0.3, 0.5}), ValidationError);
  CHECK_THROWS_AS(jsd(V{0.5, 0.6}, V{0.5, 0.5}), ValidationError);
  CHECK_THROWS_AS(jsd(V{-0.1, 1.1}, V{0.5, 0.5}), ValidationError);
  CHECK_THROWS_AS(emd(V{}, V{}), ValidationError);
}
