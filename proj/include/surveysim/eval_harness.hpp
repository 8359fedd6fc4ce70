// SPDX-License-Identifier: Apache-2.0
//
// Runs predictors over test subsets under the normal, control (country
// replaced in the prompt) and shuffled-option variants, and aggregates the
// results into tables, CSV and plots.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "surveysim/baselines.hpp"
#include "surveysim/prompting.hpp"
#include "surveysim/survey_data.hpp"

namespace surveysim {

enum class Variant { kNormal, kCtrl, kShuffled };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& name);

struct EvalResult {
  std::string predictor_id;
  std::string subset;
  Variant variant = Variant::kNormal;
  double mean_one_minus_jsd = 0.0;
  double mean_emd = 0.0;
  double accuracy = 0.0;
  long entry_count = 0;  // successes
  long failures = 0;
  std::string status = "ok";  // "ok" | "unavailable"
  nlohmann::json run_metadata = nlohmann::json::object();

  /// Row label used in tables, e.g. "ZS [ctrl]".
  std::string row_label() const;
};

/// One line of predictions.jsonl.
struct EntryPrediction {
  std::string record_id;
  std::string subset;
  Variant variant = Variant::kNormal;
  std::string predictor_id;
  std::string displayed_country;
  std::vector<std::size_t> permutation;
  std::vector<double> target;
  std::vector<double> probs;
  bool ok = true;
  std::string error;
  double one_minus_jsd = 0.0;
  double emd = 0.0;
  bool correct = false;

  nlohmann::json to_json() const;
  static EntryPrediction from_json(const nlohmann::json& j);
};

struct EvalOutcome {
  EvalResult result;
  std::vector<EntryPrediction> entries;
};

struct EvalOptions {
  std::string subset;
  Variant variant = Variant::kNormal;
  std::uint64_t seed = 0;
  std::vector<std::string> country_pool;  // ctrl draws; defaults to the countries in `entries`
  PromptTemplate prompt_template = PromptTemplate::defaults();
  int parallelism = 1;
};

/// Scores every entry against its original country's target (also under
/// ctrl). Means and accuracy cover successful predictions only. Throws
/// ValidationError when no prediction succeeds.
EvalOutcome evaluate(Predictor& predictor, const std::vector<Entry>& entries, const EvalOptions& options);

/// Recomputes an EvalResult from per-entry predictions.
EvalResult aggregate(const std::vector<EntryPrediction>& entries, const std::string& predictor_id,
                     const std::string& subset, Variant variant);

// ---------------------------------------------------------------------------

/// The record's own target. Scores perfectly whenever the displayed country
/// is the target country.
class OraclePredictor final : public Predictor {
 public:
  std::string id() const override { return "oracle"; }
  Prediction predict(const PromptRecord& record) override { return {record.entry.target.probs, true, {}}; }
  bool reentrant() const override { return true; }
};

class UniformPredictor final : public Predictor {
 public:
  std::string id() const override { return "uniform"; }
  Prediction predict(const PromptRecord& record) override;
  bool reentrant() const override { return true; }
};

/// Returns the human distribution of the country shown in the prompt for
/// the record's question, in display order. Fails when unknown.
class DisplayedCountryOracle final : public Predictor {
 public:
  explicit DisplayedCountryOracle(const std::vector<Entry>& entries);
  std::string id() const override { return "displayed-country-oracle"; }
  Prediction predict(const PromptRecord& record) override;
  bool reentrant() const override { return true; }

 private:
  std::map<std::pair<std::string, int>, std::vector<double>> targets_;
};

// ---------------------------------------------------------------------------

struct MatrixCell {
  std::string method;  // "ZS" or "FT"
  Variant variant;
};

struct MatrixReport {
  std::vector<EvalResult> results;  // row-major: ZS [ctrl], ZS, FT [ctrl], FT × subsets
  std::vector<EvalResult> averages;  // one per row, subset "Avg."
  std::vector<EntryPrediction> entries;
};

/// Unweighted mean over subsets of each metric; status "unavailable" if any
/// cell is unavailable.
EvalResult average_row(const std::vector<EvalResult>& row);

/// {ZS [ctrl], ZS, FT [ctrl], FT} × subsets. A null `fine_tuned` marks the
/// FT rows unavailable.
MatrixReport run_matrix(Predictor& zero_shot, Predictor* fine_tuned,
                        const std::map<std::string, std::vector<Entry>>& subsets,
                        const std::vector<std::string>& subset_order, const EvalOptions& base);

// ---------------------------------------------------------------------------

struct QuestionDiversity {
  int question_id = 0;
  std::size_t countries = 0;
  double human = 0.0;
  double model = 0.0;
};

struct DiversityReport {
  std::string predictor_id;
  std::vector<QuestionDiversity> questions;  // ascending question id
  std::vector<std::string> skipped;
  double human_mean = 0.0;
  double model_mean = 0.0;
};

/// Per-question mean pairwise 1-JSD across countries, for human targets and
/// for the predictor's outputs. Questions with fewer than two countries (or
/// failed predictions) are skipped and listed.
DiversityReport diversity_report(Predictor& predictor, const std::vector<Entry>& entries,
                                 const PromptTemplate& tmpl = PromptTemplate::defaults());

/// Table-5 shaped evaluation on an unseen survey: one result per country group.
std::pair<EvalResult, EvalResult> pew_generalization(Predictor& predictor, const std::vector<Entry>& c1_prime,
                                                     const std::vector<Entry>& c3, const EvalOptions& base);

// ---------------------------------------------------------------------------

/// Markdown grid: rows by (predictor, variant) in first-seen order, columns
/// by subset in `subset_order`, one block per metric.
std::string results_markdown(const std::vector<EvalResult>& results, const std::vector<std::string>& subset_order,
                             const std::string& title);

std::string results_csv(const std::vector<EvalResult>& results);
std::vector<EvalResult> read_results_csv(const std::string& text);

std::string predictions_jsonl(const std::vector<EntryPrediction>& entries);
std::vector<EntryPrediction> read_predictions_jsonl(const std::string& text);

/// Grouped bars of argmax accuracy per subset (one bar per row label).
std::string accuracy_svg(const std::vector<EvalResult>& results, const std::vector<std::string>& subset_order);
/// Human vs model diversity per question, questions sorted by human value,
/// with the band between the two series shaded.
std::string diversity_svg(const DiversityReport& report);

struct ReportFiles {
  std::vector<std::string> written;
};

/// Writes results in `format` ∈ {markdown, csv, svg, all} into `out_dir`.
/// Throws ConfigError on an unknown format or an empty result list.
ReportFiles emit_report(const std::vector<EvalResult>& results, const std::string& format, const std::string& out_dir,
                        const std::vector<std::string>& subset_order, const std::string& title = "Results",
                        const std::optional<DiversityReport>& diversity = std::nullopt);

}  // namespace surveysim
