// SPDX-License-Identifier: Apache-2.0
//
// Survey ingestion: respondent-level microdata (CSV + JSON codebook) or
// pre-aggregated per-country distributions (JSON), normalized into one option
// distribution per (country, question), then filtered, cleaned of
// validity-check options, and partitioned into country/question splits.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "surveysim/csv.hpp"

namespace surveysim {

struct SurveyQuestion {
  int question_id = 0;
  std::string text;
  std::vector<std::string> options;  // order as given by the source survey
  std::string dimension;
  std::string survey_id;

  bool operator==(const SurveyQuestion&) const = default;
};

struct ResponseDistribution {
  std::string group;  // country name
  int question_id = 0;
  std::vector<double> probs;
  long respondent_count = 0;  // valid answers to this question

  bool operator==(const ResponseDistribution&) const = default;
};

struct Entry {
  SurveyQuestion question;
  std::string group;
  ResponseDistribution target;
};

/// Non-fatal findings gathered while building a dataset.
struct ReportItem {
  std::string kind;  // e.g. "unknown_code", "question_dropped"
  std::string detail;
};

struct DataReport {
  std::vector<ReportItem> items;
  long skipped_answers = 0;  // unknown codes, counted once per cell
  long ignored_answers = 0;  // codes listed as missing-value markers

  void add(std::string kind, std::string detail) {
    items.push_back({std::move(kind), std::move(detail)});
  }
  std::size_t count(std::string_view kind) const;
};

struct SurveyData {
  std::string survey_id;
  std::vector<SurveyQuestion> questions;            // sorted by question_id
  std::vector<ResponseDistribution> distributions;  // sorted by (question_id, group)
  std::map<std::string, long> group_respondents;    // total respondents per country
  DataReport report;

  const SurveyQuestion* find_question(int question_id) const;
};

// ---------------------------------------------------------------------------
// Microdata ingestion

struct CodebookOption {
  std::string code;
  std::string label;
};

struct CodebookQuestion {
  int id = 0;
  std::string column;
  std::string text;
  std::string dimension;
  std::vector<CodebookOption> options;
};

struct Codebook {
  std::string survey_id = "WVS";
  std::string country_column = "country";
  std::map<std::string, std::string> country_names;  // optional code -> name
  std::vector<std::string> ignore_codes;             // missing-value markers, skipped silently
  std::vector<CodebookQuestion> questions;

  static Codebook from_json(const nlohmann::json& j);
};

/// Tallies answer codes per (country, question). Unknown codes are skipped
/// with a report entry; questions with fewer than two options are dropped.
SurveyData parse_survey(const CsvTable& raw, const Codebook& codebook);

SurveyData load_microdata(const std::string& csv_path, const std::string& codebook_path);

/// Pre-aggregated input: {"survey_id", "group_respondents"?, "questions": [
///   {"id", "text", "dimension", "options": [...],
///    "distributions": {country: [p...]}, "respondents"?: {country: n}}]}
SurveyData parse_aggregated(const nlohmann::json& j);
SurveyData load_aggregated(const std::string& path);

// ---------------------------------------------------------------------------
// Cleaning

/// Keeps only countries whose total respondent count is strictly greater than
/// `min_respondents`.
SurveyData filter_countries(const SurveyData& data, long min_respondents);

/// Option labels treated as validity checks. Matching is case-insensitive
/// after trimming whitespace.
struct InvalidOptionPolicy {
  std::vector<std::string> labels{"not applicable", "refuse to answer"};

  /// Adds "don't know" and "no answer" to the default pair.
  static InvalidOptionPolicy extended();
  bool is_invalid(std::string_view option) const;
};

struct StripResult {
  SurveyQuestion question;
  std::vector<ResponseDistribution> distributions;
};

/// Removes invalid options and renormalizes the remaining mass. Returns
/// nullopt (with a report entry) when fewer than two options survive or no
/// distribution keeps any mass.
std::optional<StripResult> strip_invalid_options(const SurveyQuestion& question,
                                                 const std::vector<ResponseDistribution>& dists,
                                                 const InvalidOptionPolicy& policy,
                                                 DataReport& report);

SurveyData strip_invalid_options(const SurveyData& data, const InvalidOptionPolicy& policy);

// ---------------------------------------------------------------------------
// Splits

struct SplitConfig {
  std::vector<std::string> c1;  // empty: complement of C2 and C3
  std::vector<std::string> c2;
  std::vector<std::string> c3;
  std::vector<int> q1;  // empty: complement of Q2, Q3 and exclusions
  std::vector<int> q2;
  std::vector<int> q3;
  std::vector<int> exclude_questions;

  static SplitConfig from_json(const nlohmann::json& j);
};

struct SubsetAssignment {
  std::string name;
  std::string country_set;
  std::string question_set;
};

struct DatasetSplits {
  std::map<std::string, std::vector<std::string>> country_sets;
  std::map<std::string, std::vector<int>> question_sets;
  std::vector<SubsetAssignment> assignments;  // train, valid, then the five tests

  /// The fixed assignment table: train=(C1,Q1), valid=(C1,Q2), tests
  /// (C1,Q3), (C2,Q1), (C2,Q3), (C3,Q1), (C3,Q3).
  static std::vector<SubsetAssignment> standard_assignments();
};

inline const std::vector<std::string> kTestSubsets{"C1-Q3", "C2-Q1", "C2-Q3", "C3-Q1", "C3-Q3"};

struct SplitResult {
  DatasetSplits splits;
  std::map<std::string, std::vector<Entry>> subsets;
  DataReport report;

  std::size_t entry_count(const std::string& subset) const;
};

/// Partitions countries and questions. C2 and C3 may overlap; neither may
/// intersect C1, and question sets must be pairwise disjoint (ConfigError).
/// Entries are ordered by country name then question id; (country, question)
/// pairs without data are absent.
SplitResult build_splits(const SurveyData& data, const SplitConfig& config);

/// Every (country, question) entry for the listed countries, in the same
/// order build_splits uses. Used for unseen-survey groups.
std::vector<Entry> build_group_entries(const SurveyData& data,
                                       const std::vector<std::string>& countries);

// ---------------------------------------------------------------------------
// Canonical dataset file (JSON Lines)

struct DatasetRow {
  std::string subset;
  Entry entry;
};

nlohmann::json entry_to_json(const Entry& entry, const std::string& subset);
DatasetRow entry_from_json(const nlohmann::json& j);

/// One line per entry, subsets in assignment order.
std::string write_dataset_jsonl(const SplitResult& result);
std::vector<DatasetRow> read_dataset_jsonl(const std::string& text);

/// Regroups dataset rows by subset, preserving file order.
std::map<std::string, std::vector<Entry>> group_by_subset(const std::vector<DatasetRow>& rows);

}  // namespace surveysim
