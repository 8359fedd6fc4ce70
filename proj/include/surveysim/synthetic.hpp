// SPDX-License-Identifier: Apache-2.0
//
// Seeded generator of fake surveys with a known latent structure. Each
// country has a hidden feature vector; answer logits for a question are a
// question-specific linear function of those features plus a component
// shared by all questions.
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "surveysim/csv.hpp"
#include "surveysim/survey_data.hpp"

namespace surveysim {

struct SyntheticConfig {
  std::string survey_id = "SYN";
  int countries = 8;
  int questions = 30;
  int min_options = 3;
  int max_options = 5;
  int feature_dim = 4;
  int respondents = 1200;
  double question_scale = 1.0;  // spread of question-specific weights
  double shared_scale = 0.8;    // spread of the shared country component
  double bias_scale = 0.5;
  std::uint64_t seed = 7;

  // Dirt planted for ingestion tests.
  double missing_rate = 0.0;       // answers replaced by an ignore code
  double unknown_code_rate = 0.0;  // answers replaced by a code absent from the codebook
  int not_applicable_questions = 0;  // questions given an extra "Not applicable" option
  int single_option_questions = 0;   // extra questions with one option (dropped on ingest)
  std::vector<int> small_country_respondents;  // extra countries with these respondent counts
  /// (country index, question id) cells where every answer is the ignore code.
  std::vector<std::pair<int, int>> blank_cells;
  /// Cells where every answer is "Not applicable" (the question must have that option).
  std::vector<std::pair<int, int>> not_applicable_cells;

  static SyntheticConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct SyntheticSurvey {
  SyntheticConfig config;
  std::vector<std::string> countries;               // regular countries first, then small ones
  std::vector<std::vector<double>> features;        // one per country
  std::vector<int> question_ids;                    // regular questions (excludes single-option ones)
  CsvTable microdata;
  nlohmann::json codebook;

  /// Toy embedding backend fixture carrying the country features.
  nlohmann::json toy_fixture() const;
  /// Parses the generated microdata through the regular ingestion path.
  SurveyData ingest() const;
};

SyntheticSurvey generate_survey(const SyntheticConfig& config);

std::string country_name(int index);

/// Writes microdata.csv, codebook.json and toy_backend.json into `dir`.
void write_survey_files(const SyntheticSurvey& survey, const std::string& dir);

}  // namespace surveysim
