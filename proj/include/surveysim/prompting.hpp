// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "surveysim/survey_data.hpp"

namespace surveysim {

inline constexpr std::size_t kMaxOptions = 26;

/// Instruction/input/option/format strings with named placeholders:
/// {country}, {question}, {label}, {option}, {label_list}.
struct PromptTemplate {
  int version = 1;
  std::string instruction;
  std::string input;
  std::string option;
  std::string format;
  std::string json_zs;     // appended after the options for JSON zero-shot prompting
  std::string json_retry;  // appended to the JSON prompt on the single retry

  static PromptTemplate defaults();
  /// Parses the sectioned template file format (see templates/default.tmpl).
  static PromptTemplate parse(std::string_view text);
  static PromptTemplate load(const std::string& path);
  std::string serialize() const;

  struct Parsed {
    std::string country;
    std::string question;
    std::vector<std::string> labels;
    std::vector<std::string> options;
  };
  /// Recovers the fields of a prompt rendered with this template; nullopt if
  /// the text does not follow it.
  std::optional<Parsed> parse_rendered(std::string_view text) const;
};

struct PromptRecord {
  std::string record_id;
  Entry entry;  // options and target reflect `permutation`
  std::string rendered_text;
  std::vector<std::string> option_labels;
  /// permutation[i] is the source-order index of the option shown at position i.
  std::vector<std::size_t> permutation;
  std::optional<std::string> control_country;

  const std::string& displayed_country() const {
    return control_country ? *control_country : entry.group;
  }
  std::size_t option_count() const { return option_labels.size(); }
};

std::string label_for(std::size_t index);

/// "{survey}/Q{id}/{country}".
std::string record_id_for(const Entry& entry);

/// Throws UnsupportedQuestionError for more than 26 options.
PromptRecord build_prompt(const Entry& entry, const PromptTemplate& tmpl = PromptTemplate::defaults());

std::string render_prompt(const PromptRecord& record, const PromptTemplate& tmpl);

/// Same question rendered for the JSON zero-shot baseline.
std::string render_json_prompt(const PromptRecord& record, const PromptTemplate& tmpl, bool retry);

/// Unbiased index in [0, n) from a 64-bit engine. Platform independent,
/// unlike std::uniform_int_distribution.
std::size_t uniform_index(std::mt19937_64& rng, std::size_t n);

/// Shows `country` in the prompt while keeping the original target.
PromptRecord with_displayed_country(const PromptRecord& record, const std::string& country,
                                    const PromptTemplate& tmpl);

/// Replaces each record's displayed country with a uniform draw (with
/// replacement, self allowed) from `pool`. Targets are untouched.
/// Throws ValidationError when the pool has fewer than two countries.
std::vector<PromptRecord> apply_control_permutation(const std::vector<PromptRecord>& records,
                                                    const std::vector<std::string>& pool,
                                                    std::uint64_t seed,
                                                    const PromptTemplate& tmpl = PromptTemplate::defaults());

/// Reorders options and target by `order` (order[i] = current index shown at i).
PromptRecord permute_options(const PromptRecord& record, const std::vector<std::size_t>& order,
                             const PromptTemplate& tmpl = PromptTemplate::defaults());

/// Uniformly random option order drawn from `seed`.
PromptRecord shuffle_options(const PromptRecord& record, std::uint64_t seed,
                             const PromptTemplate& tmpl = PromptTemplate::defaults());

nlohmann::json record_to_json(const PromptRecord& record);

}  // namespace surveysim
