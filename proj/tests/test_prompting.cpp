// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "support.hpp"
#include "surveysim/distribution_metrics.hpp"
#include "surveysim/errors.hpp"
#include "surveysim/prompting.hpp"

using namespace surveysim;
using surveysim::testing::make_entry;

namespace {

Entry andorra() {
  return make_entry("Andorra", 4,
                    {"Very interested", "Somewhat interested", "Not very interested", "Not at all interested"},
                    {0.1516, 0.2902, 0.2831, 0.2751}, "How interested would you say you are in politics?", "WVS");
}

}  // namespace

TEST_CASE("default prompt for the politics item") {
  const auto r = build_prompt(andorra());
  CHECK(r.rendered_text ==
        "How would someone from Andorra answer the following question:\n"
        "How interested would you say you are in politics? Here are the options:\n"
        "(A) Very interested\n"
        "(B) Somewhat interested\n"
        "(C) Not very interested\n"
        "(D) Not at all interested\n"
        "If had to select one of the options, my answer would be (");
  CHECK(r.option_labels == std::vector<std::string>{"A", "B", "C", "D"});
  CHECK(r.record_id == "WVS/Q4/Andorra");
  CHECK(r.permutation == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(r.entry.target.probs == andorra().target.probs);
  CHECK_FALSE(r.control_country);
}

TEST_CASE("labels and option count limits") {
  const auto two = build_prompt(make_entry("X", 1, {"Yes", "No"}, {0.5, 0.5}));
  CHECK(two.option_labels == std::vector<std::string>{"A", "B"});
  CHECK(two.rendered_text.find("(C)") == std::string::npos);

  std::vector<std::string> opts;
  for (int i = 0; i < 26; ++i) opts.push_back("o" + std::to_string(i));
  const auto z = build_prompt(make_entry("X", 1, opts, std::vector<double>(26, 1.0 / 26)));
  CHECK(z.option_labels.back() == "Z");
  opts.push_back("extra");
  CHECK_THROWS_AS(build_prompt(make_entry("X", 1, opts, std::vector<double>(27, 1.0 / 27))),
                  UnsupportedQuestionError);
  CHECK_THROWS_AS(build_prompt(make_entry("X", 1, {"a", "b"}, {1.0})), ValidationError);
}

TEST_CASE("rendering is deterministic") {
  CHECK(build_prompt(andorra()).rendered_text == build_prompt(andorra()).rendered_text);
}

TEST_CASE("rendered prompts parse back") {
  const auto tmpl = PromptTemplate::defaults();
  const auto r = build_prompt(andorra());
  const auto parsed = tmpl.parse_rendered(r.rendered_text);
  REQUIRE(parsed);
  CHECK(parsed->country == "Andorra");
  CHECK(parsed->question == "How interested would you say you are in politics?");
  CHECK(parsed->labels == r.option_labels);
  CHECK(parsed->options == r.entry.question.options);
  CHECK_FALSE(tmpl.parse_rendered("hello"));
}

TEST_CASE("template files") {
  const auto tmpl = PromptTemplate::defaults();
  const auto back = PromptTemplate::parse(tmpl.serialize());
  CHECK(back.instruction == tmpl.instruction);
  CHECK(back.input == tmpl.input);
  CHECK(back.option == tmpl.option);
  CHECK(back.format == tmpl.format);
  CHECK(back.json_zs == tmpl.json_zs);
  CHECK(back.json_retry == tmpl.json_retry);
  CHECK(back.version == 1);

  const auto shipped = surveysim::testing::fixture_dir().parent_path().parent_path() / "templates" / "default.tmpl";
  const auto file = PromptTemplate::load(shipped.string());
  CHECK(build_prompt(andorra(), file).rendered_text == build_prompt(andorra()).rendered_text);

  const auto custom = PromptTemplate::parse(
      "version = 2\n[instruction]\nAs a person in {country}:\n[input]\nQ: {question}\n"
      "[option]\n{label}. {option}\n[format]\nAnswer: ");
  CHECK(custom.version == 2);
  const auto r = build_prompt(make_entry("Peru", 2, {"Yes", "No"}, {0.3, 0.7}, "Ok?"), custom);
  CHECK(r.rendered_text == "As a person in Peru:\nQ: Ok?\nA. Yes\nB. No\nAnswer: ");
  const auto parsed = custom.parse_rendered(r.rendered_text);
  REQUIRE(parsed);
  CHECK(parsed->options == std::vector<std::string>{"Yes", "No"});

  CHECK_THROWS_AS(PromptTemplate::parse("[instruction]\nno placeholder\n[input]\n{question}\n[option]\n({label}) "
                                        "{option}\n[format]\n("),
                  ConfigError);
  CHECK_THROWS_AS(PromptTemplate::parse("[instruction]\n{country}\n"), ConfigError);
  CHECK_THROWS_AS(PromptTemplate::parse("stray\n"), ConfigError);
  CHECK_THROWS_AS(PromptTemplate::load("/nonexistent/x.tmpl"), ConfigError);
}

TEST_CASE("json prompt lists the labels") {
  const auto r = build_prompt(andorra());
  const auto text = render_json_prompt(r, PromptTemplate::defaults(), false);
  CHECK(text.find("(A, B, C, D)") != std::string::npos);
  CHECK(text.find("people from Andorra") != std::string::npos);
  const auto retry = render_json_prompt(r, PromptTemplate::defaults(), true);
  CHECK(retry.size() > text.size());
  CHECK(retry.starts_with(text));
}

TEST_CASE("control permutation") {
  const auto base = build_prompt(andorra());
  SUBCASE("forced draw from a pool without the true country") {
    const auto out = apply_control_permutation({base}, {"Kenya", "Kenya"}, 9);
    REQUIRE(out.size() == 1);
    CHECK(out[0].displayed_country() == "Kenya");
    CHECK(out[0].entry.group == "Andorra");
    CHECK(out[0].entry.target.probs == base.entry.target.probs);
    CHECK(out[0].rendered_text.starts_with("How would someone from Kenya answer"));
    CHECK(out[0].rendered_text.find("Andorra") == std::string::npos);
  }
  SUBCASE("self draws occur at rate 1/|pool|") {
    // 1000 records, pool of 4 including the true country: expect 250 +- 3 sigma.
    const std::vector<std::string> pool{"Andorra", "Kenya", "Peru", "Chile"};
    const std::vector<PromptRecord> many(1000, base);
    const auto out = apply_control_permutation(many, pool, 123);
    int self = 0;
    std::map<std::string, int> counts;
    for (const auto& r : out) {
      self += r.displayed_country() == "Andorra";
      ++counts[r.displayed_country()];
    }
    const double sigma = std::sqrt(1000 * 0.25 * 0.75);
    CHECK(std::abs(self - 250) <= 3 * sigma);
    CHECK(counts.size() == 4);
  }
  SUBCASE("deterministic under a seed") {
    const std::vector<PromptRecord> many(50, base);
    const std::vector<std::string> pool{"A1", "A2", "A3"};
    const auto a = apply_control_permutation(many, pool, 5);
    const auto b = apply_control_permutation(many, pool, 5);
    const auto c = apply_control_permutation(many, pool, 6);
    bool same = true, differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      same &= a[i].rendered_text == b[i].rendered_text;
      differs |= a[i].rendered_text != c[i].rendered_text;
    }
    CHECK(same);
    CHECK(differs);
  }
  CHECK_THROWS_AS(apply_control_permutation({base}, {"Kenya"}, 1), ValidationError);
  CHECK_THROWS_AS(apply_control_permutation({base}, {}, 1), ValidationError);
}

TEST_CASE("option permutation") {
  const auto r = build_prompt(make_entry("X", 1, {"High", "Mid", "Low"}, {0.7, 0.2, 0.1}));
  SUBCASE("identity") {
    const auto same = permute_options(r, {0, 1, 2});
    CHECK(same.rendered_text == r.rendered_text);
    CHECK(same.entry.target.probs == r.entry.target.probs);
  }
  SUBCASE("reversal") {
    const auto rev = permute_options(r, {2, 1, 0});
    CHECK(rev.entry.target.probs == std::vector<double>{0.1, 0.2, 0.7});
    CHECK(rev.entry.question.options == std::vector<std::string>{"Low", "Mid", "High"});
    CHECK(rev.permutation == std::vector<std::size_t>{2, 1, 0});
    CHECK(rev.option_labels == r.option_labels);
    CHECK(rev.rendered_text.find("(A) Low\n(B) Mid\n(C) High") != std::string::npos);
  }
  SUBCASE("composition tracks source indices") {
    const auto once = permute_options(r, {1, 2, 0});
    const auto twice = permute_options(once, {1, 2, 0});
    CHECK(twice.permutation == std::vector<std::size_t>{2, 0, 1});
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(twice.entry.question.options[i] == r.entry.question.options[twice.permutation[i]]);
    }
  }
  CHECK_THROWS_AS(permute_options(r, {0, 0, 1}), ValidationError);
  CHECK_THROWS_AS(permute_options(r, {0, 1}), ValidationError);
}

TEST_CASE("shuffled options keep the distribution attached to its option") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng() % 6;
    std::vector<std::string> opts;
    for (std::size_t i = 0; i < n; ++i) opts.push_back("opt" + std::to_string(i));
    const auto probs = surveysim::testing::random_distribution(rng, n, false);
    const auto r = build_prompt(make_entry("X", 1, opts, probs));
    const auto s = shuffle_options(r, rng());
    std::set<std::size_t> seen(s.permutation.begin(), s.permutation.end());
    CHECK(seen.size() == n);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(s.entry.target.probs[i] == probs[s.permutation[i]]);
      CHECK(s.entry.question.options[i] == opts[s.permutation[i]]);
    }
    CHECK(s.entry.question.options[argmax(s.entry.target.probs)] == opts[argmax(probs)]);
  }
}

TEST_CASE("uniform_index is unbiased enough and in range") {
  std::mt19937_64 rng(3);
  std::vector<int> counts(3, 0);
  for (int i = 0; i < 30000; ++i) ++counts[uniform_index(rng, 3)];
  for (int c : counts) CHECK(std::abs(c - 10000) < 3 * std::sqrt(30000 * (1.0 / 3) * (2.0 / 3)));
  CHECK_THROWS_AS(uniform_index(rng, 0), ValidationError);
}

TEST_CASE("record json") {
  const auto j = record_to_json(with_displayed_country(build_prompt(andorra()), "Peru", PromptTemplate::defaults()));
  CHECK(j.at("country") == "Andorra");
  CHECK(j.at("displayed_country") == "Peru");
  CHECK(j.at("option_labels").size() == 4);
}
