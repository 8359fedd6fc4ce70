// SPDX-License-Identifier: Apache-2.0
//
// Reference predictors that involve no fine-tuning.
#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "surveysim/model_backend.hpp"
#include "surveysim/prompting.hpp"
#include "surveysim/survey_data.hpp"

namespace surveysim {

/// Outcome of one prediction: a distribution, or an explicit failure.
struct Prediction {
  std::vector<double> probs;
  bool ok = true;
  std::string error;

  static Prediction failure(std::string why) { return {{}, false, std::move(why)}; }
};

/// Anything that maps a rendered record to an option distribution.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::string id() const = 0;
  virtual Prediction predict(const PromptRecord& record) = 0;
  virtual nlohmann::json metadata() const { return {{"predictor", id()}}; }
  /// True when predict() may run concurrently on one instance.
  virtual bool reentrant() const { return false; }
};

/// softmax(index_option_logits(backend, record)).
std::vector<double> zero_shot_predict(Backend& backend, const PromptRecord& record);

/// First-token prediction through a backend: ZS when untrained, FT once an
/// adapter is loaded.
class BackendPredictor final : public Predictor {
 public:
  BackendPredictor(Backend& backend, std::string id) : backend_(backend), id_(std::move(id)) {}
  std::string id() const override { return id_; }
  Prediction predict(const PromptRecord& record) override;
  nlohmann::json metadata() const override;

 private:
  Backend& backend_;
  std::string id_;
};

// ---------------------------------------------------------------------------

/// Text embedding provider for KNN retrieval.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::string identifier() const = 0;
  virtual std::vector<double> embed(const std::string& text) const = 0;
};

/// Deterministic embedder: character trigrams hashed into `dim` buckets,
/// L2-normalized. Needs no model download.
class HashingEmbedder final : public Embedder {
 public:
  explicit HashingEmbedder(std::size_t dim = 512) : dim_(dim) {}
  std::string identifier() const override { return "hashing-trigram-" + std::to_string(dim_); }
  std::vector<double> embed(const std::string& text) const override;

 private:
  std::size_t dim_;
};

/// Text the KNN embedder sees for an entry (question text plus country).
std::string knn_key_text(const std::string& question_text, const std::string& country);

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

/// Top-1 nearest training entry by cosine similarity; ties go to the lowest
/// training index. Length mismatch with the record's option count yields a
/// failure, never a truncated vector.
class KnnPredictor final : public Predictor {
 public:
  KnnPredictor(std::vector<Entry> train_entries, std::shared_ptr<const Embedder> embedder);
  std::string id() const override { return "KNN"; }
  Prediction predict(const PromptRecord& record) override;
  nlohmann::json metadata() const override;
  bool reentrant() const override { return true; }
  /// Index of the nearest training entry.
  std::size_t nearest(const PromptRecord& record) const;

 private:
  std::vector<Entry> train_;
  std::shared_ptr<const Embedder> embedder_;
  std::vector<std::vector<double>> keys_;
};

std::vector<double> knn_predict(const PromptRecord& record, const std::vector<Entry>& train_entries,
                                const Embedder& embedder);

/// Mean training-country distribution per known question, renormalized;
/// uniform over the record's options for unknown questions.
class AvgCulturePredictor final : public Predictor {
 public:
  explicit AvgCulturePredictor(const std::vector<Entry>& train_entries);
  std::string id() const override { return "Avg_Culture"; }
  Prediction predict(const PromptRecord& record) override;
  bool reentrant() const override { return true; }

 private:
  // Keyed by (survey, question id); means are over the question's source option order.
  std::map<std::pair<std::string, int>, std::vector<double>> means_;
  std::map<std::pair<std::string, int>, std::vector<std::string>> options_;
};

std::vector<double> avg_culture_predict(const PromptRecord& record, const std::vector<Entry>& train_entries);

/// Parses a JSON reply mapping labels to percentages into a distribution over
/// the record's labels: negatives clip to 0, missing labels count as 0, then
/// renormalize. nullopt when unparseable or all-zero.
std::optional<std::vector<double>> parse_json_distribution(const std::string& reply,
                                                           const std::vector<std::string>& labels);

/// Asks the backend to write the distribution as JSON; one retry with a
/// stricter instruction, then the entry is marked failed.
class JsonZsPredictor final : public Predictor {
 public:
  JsonZsPredictor(Backend& backend, PromptTemplate tmpl = PromptTemplate::defaults(),
                  std::size_t max_new_tokens = 256)
      : backend_(backend), template_(std::move(tmpl)), max_new_tokens_(max_new_tokens) {}
  std::string id() const override { return "JSON-ZS"; }
  Prediction predict(const PromptRecord& record) override;
  nlohmann::json metadata() const override;

 private:
  Backend& backend_;
  PromptTemplate template_;
  std::size_t max_new_tokens_;
};

Prediction json_zs_predict(Backend& backend, const PromptRecord& record,
                           const PromptTemplate& tmpl = PromptTemplate::defaults());

}  // namespace surveysim
