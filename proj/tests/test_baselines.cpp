// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "surveysim/baselines.hpp"
#include "surveysim/distribution_metrics.hpp"
#include "surveysim/errors.hpp"
#include "surveysim/eval_harness.hpp"

using namespace surveysim;
using surveysim::testing::make_entry;
using nlohmann::json;
using V = std::vector<double>;

namespace {

std::shared_ptr<const Embedder> hashing() { return std::make_shared<HashingEmbedder>(); }

std::vector<Entry> training_set() {
  return {
      make_entry("Kenya", 1, {"Yes", "No"}, {0.8, 0.2}, "Do you trust your neighbours?"),
      make_entry("Peru", 1, {"Yes", "No"}, {0.4, 0.6}, "Do you trust your neighbours?"),
      make_entry("Kenya", 2, {"Low", "Mid", "High"}, {0.1, 0.3, 0.6}, "How important is religion in your life?"),
      make_entry("Peru", 2, {"Low", "Mid", "High"}, {0.5, 0.3, 0.2}, "How important is religion in your life?"),
      make_entry("Chile", 3, {"A", "B"}, {0.3, 0.7}, "Would you like more leisure time at weekends?"),
  };
}

/// Mock whose JSON replies are keyed by the rendered JSON prompts of `record`.
MockBackend json_mock(const PromptRecord& record, const std::string& first, const std::string& second) {
  json fixture;
  const auto tmpl = PromptTemplate::defaults();
  fixture["generations"][prompt_hash(render_json_prompt(record, tmpl, false))] = first;
  fixture["generations"][prompt_hash(render_json_prompt(record, tmpl, true))] = second;
  return MockBackend(fixture);
}

}  // namespace

TEST_CASE("hashing embedder") {
  HashingEmbedder e(64);
  const auto a = e.embed("How important is religion?");
  CHECK(a.size() == 64);
  double norm = 0.0;
  for (double v : a) norm += v * v;
  CHECK(norm == doctest::Approx(1.0));
  CHECK(a == e.embed("How important is religion?"));
  CHECK(cosine_similarity(a, a) == doctest::Approx(1.0));
  CHECK(cosine_similarity(a, e.embed("How important is religion")) >
        cosine_similarity(a, e.embed("Do you like football matches?")));
  CHECK(cosine_similarity(V{0, 0}, V{1, 0}) == 0.0);
  CHECK_THROWS_AS(cosine_similarity(V{1}, V{1, 0}), ValidationError);
}

TEST_CASE("KNN retrieves the training entry itself") {
  const auto train = training_set();
  KnnPredictor knn(train, hashing());
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto r = build_prompt(train[i]);
    CHECK(knn.nearest(r) == i);
    const auto p = knn.predict(r);
    REQUIRE(p.ok);
    CHECK(p.probs == train[i].target.probs);
  }
}

TEST_CASE("KNN ties go to the lowest training index") {
  std::vector<Entry> train{make_entry("Kenya", 1, {"Yes", "No"}, {0.9, 0.1}, "Same text?"),
                           make_entry("Kenya", 2, {"Yes", "No"}, {0.1, 0.9}, "Same text?")};
  KnnPredictor knn(train, hashing());
  const auto r = build_prompt(make_entry("Kenya", 7, {"Yes", "No"}, {0.5, 0.5}, "Same text?"));
  CHECK(knn.nearest(r) == 0);
  CHECK(knn.predict(r).probs == V{0.9, 0.1});
  std::reverse(train.begin(), train.end());
  CHECK(KnnPredictor(train, hashing()).predict(r).probs == V{0.1, 0.9});
}

TEST_CASE("KNN finds a planted neighbour") {
  auto train = training_set();
  train.push_back(make_entry("Ghana", 9, {"Yes", "No"}, {0.65, 0.35}, "Do you ever read a newspaper at breakfast?"));
  const auto r =
      build_prompt(make_entry("Ghana", 10, {"Yes", "No"}, {0.5, 0.5}, "Do you ever read the newspaper at breakfast?"));
  KnnPredictor knn(train, hashing());
  CHECK(knn.nearest(r) == train.size() - 1);
  CHECK(knn.predict(r).probs == V{0.65, 0.35});
  CHECK(knn_predict(r, train, HashingEmbedder()) == V{0.65, 0.35});
}

TEST_CASE("KNN follows the displayed option order and refuses length mismatches") {
  const auto train = training_set();
  KnnPredictor knn(train, hashing());
  const auto r = permute_options(build_prompt(train[2]), {2, 0, 1});
  CHECK(knn.predict(r).probs == V{0.6, 0.1, 0.3});

  const auto mismatch =
      build_prompt(make_entry("Kenya", 2, {"Low", "High"}, {0.5, 0.5}, "How important is religion in your life?"));
  const auto p = knn.predict(mismatch);
  CHECK_FALSE(p.ok);
  CHECK(p.probs.empty());
  CHECK(p.error.find("options") != std::string::npos);
  CHECK_THROWS_AS(knn_predict(mismatch, train, HashingEmbedder()), ValidationError);
  CHECK_THROWS_AS(KnnPredictor({}, hashing()), ValidationError);
  CHECK(knn.metadata().at("embedder") == "hashing-trigram-512");
}

TEST_CASE("Avg_Culture") {
  SUBCASE("mean of two countries") {
    const std::vector<Entry> train{make_entry("K", 1, {"a", "b"}, {0.2, 0.8}), make_entry("P", 1, {"a", "b"}, {0.4, 0.6})};
    const auto p = avg_culture_predict(build_prompt(make_entry("Z", 1, {"a", "b"}, {0.5, 0.5})), train);
    CHECK(p[0] == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(0.7).epsilon(1e-15));
  }
  SUBCASE("single country reproduces it") {
    const std::vector<Entry> train{make_entry("K", 1, {"a", "b", "c"}, {0.2, 0.5, 0.3})};
    const auto p = avg_culture_predict(build_prompt(make_entry("Z", 1, {"a", "b", "c"}, {0.3, 0.3, 0.4})), train);
    CHECK(p == V{0.2, 0.5, 0.3});
  }
  SUBCASE("unseen question is uniform") {
    const auto p = avg_culture_predict(build_prompt(make_entry("Z", 42, {"a", "b", "c", "d"}, {1, 0, 0, 0})),
                                       training_set());
    CHECK(p == V(4, 0.25));
  }
  SUBCASE("independent of training order and follows display order") {
    auto train = training_set();
    const auto r = build_prompt(make_entry("Z", 2, {"Low", "Mid", "High"}, {0.2, 0.2, 0.6}));
    const auto a = avg_culture_predict(r, train);
    std::reverse(train.begin(), train.end());
    const auto b = avg_culture_predict(r, train);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-15);
    CHECK(a[0] == doctest::Approx(0.3));
    const auto shuffled = avg_culture_predict(permute_options(r, {1, 2, 0}), train);
    CHECK(shuffled[0] == doctest::Approx(a[1]));
    CHECK(shuffled[2] == doctest::Approx(a[0]));
  }
  CHECK_THROWS_AS(AvgCulturePredictor({make_entry("K", 1, {"a", "b"}, {0.5, 0.5}),
                                       make_entry("P", 1, {"a", "b", "c"}, {0.2, 0.3, 0.5})}),
                  ValidationError);
}

TEST_CASE("JSON distribution parsing") {
  const std::vector<std::string> ab{"A", "B"};
  CHECK(*parse_json_distribution(R"({"A": 50, "B": 50})", ab) == V{0.5, 0.5});
  const auto over = *parse_json_distribution(R"({"A": 70, "B": 40})", ab);
  CHECK(over[0] == doctest::Approx(70.0 / 110.0));
  CHECK(over[1] == doctest::Approx(40.0 / 110.0));
  CHECK(std::round(over[0] * 1000) / 1000 == 0.636);
  CHECK(std::round(over[1] * 1000) / 1000 == 0.364);
  CHECK(*parse_json_distribution("Sure! {\"a\": \"30%\", \"(B)\": 10} hope that helps", ab) == V{0.75, 0.25});
  CHECK(*parse_json_distribution(R"({"A": 100})", ab) == V{1.0, 0.0});
  CHECK(*parse_json_distribution(R"({"A": -5, "B": 20})", ab) == V{0.0, 1.0});
  CHECK_FALSE(parse_json_distribution("no json here", ab));
  CHECK_FALSE(parse_json_distribution("{not json}", ab));
  CHECK_FALSE(parse_json_distribution(R"({"C": 100})", ab));
  CHECK_FALSE(parse_json_distribution(R"({"A": 0, "B": 0})", ab));
  CHECK_FALSE(parse_json_distribution(R"({"A": "lots", "B": 1})", ab));
  CHECK_FALSE(parse_json_distribution("[1, 2]", ab));
}

TEST_CASE("JSON zero-shot predictor") {
  const auto r = build_prompt(make_entry("Kenya", 1, {"Yes", "No"}, {0.8, 0.2}));
  SUBCASE("valid first reply") {
    auto mock = json_mock(r, R"({"A": 50, "B": 50})", "unused");
    const auto p = JsonZsPredictor(mock).predict(r);
    REQUIRE(p.ok);
    CHECK(p.probs == V{0.5, 0.5});
  }
  SUBCASE("retry recovers") {
    auto mock = json_mock(r, "I think most would say yes.", R"({"A": 70, "B": 40})");
    const auto p = json_zs_predict(mock, r);
    REQUIRE(p.ok);
    CHECK(p.probs[0] == doctest::Approx(70.0 / 110.0));
  }
  SUBCASE("two invalid replies fail") {
    auto mock = json_mock(r, "nope", "still nope");
    const auto p = JsonZsPredictor(mock).predict(r);
    CHECK_FALSE(p.ok);
    CHECK(p.error.find("still nope") != std::string::npos);
  }
  SUBCASE("backend errors become failures") {
    MockBackend tiny(json{{"context_length", 4}});
    CHECK_FALSE(JsonZsPredictor(tiny).predict(r).ok);
  }
}

TEST_CASE("failed JSON replies are excluded from the means") {
  const std::vector<Entry> entries{make_entry("Kenya", 1, {"Yes", "No"}, {0.8, 0.2}),
                                   make_entry("Peru", 1, {"Yes", "No"}, {0.4, 0.6}),
                                   make_entry("Chile", 1, {"Yes", "No"}, {0.5, 0.5})};
  json fixture;
  const auto tmpl = PromptTemplate::defaults();
  const std::vector<std::string> replies{R"({"A": 50, "B": 50})", "garbage", R"({"A": 10, "B": 90})"};
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto r = build_prompt(entries[i]);
    fixture["generations"][prompt_hash(render_json_prompt(r, tmpl, false))] = replies[i];
    fixture["generations"][prompt_hash(render_json_prompt(r, tmpl, true))] = replies[i];
  }
  MockBackend mock(fixture);
  JsonZsPredictor zs(mock);
  EvalOptions options;
  options.subset = "T";
  const auto out = evaluate(zs, entries, options);
  CHECK(out.result.entry_count == 2);
  CHECK(out.result.failures == 1);
  const double want = (one_minus_jsd(V{0.5, 0.5}, V{0.8, 0.2}) + one_minus_jsd(V{0.1, 0.9}, V{0.5, 0.5})) / 2.0;
  CHECK(out.result.mean_one_minus_jsd == doctest::Approx(want).epsilon(1e-15));
  // Chile: (0.5, 0.5) target has argmax A; prediction B. Kenya: both A.
  CHECK(out.result.accuracy == 0.5);
  CHECK_FALSE(out.entries[1].ok);
}

TEST_CASE("zero-shot first-token prediction") {
  const auto r = build_prompt(make_entry("Kenya", 1, {"Yes", "No", "Maybe"}, {0.8, 0.1, 0.1}));
  json fixture;
  fixture["label_logits"][prompt_hash(r.rendered_text)] = {{"A", 1.0}, {"B", 2.0}, {"C", 3.0}};
  MockBackend mock(fixture);
  const auto p = zero_shot_predict(mock, r);
  CHECK(p[0] == doctest::Approx(0.0900305731703805).epsilon(1e-14));
  CHECK(p[2] == doctest::Approx(0.6652409557748219).epsilon(1e-14));
  BackendPredictor zs(mock, "ZS");
  CHECK(zs.predict(r).probs == p);
  CHECK(zs.id() == "ZS");
  CHECK(zs.metadata().at("predictor") == "ZS");
  // Unseen prompt: all-zero logits give uniform.
  const auto other = build_prompt(make_entry("Peru", 1, {"Yes", "No"}, {0.8, 0.2}));
  CHECK(zero_shot_predict(mock, other) == V{0.5, 0.5});
}
