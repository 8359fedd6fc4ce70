// SPDX-License-Identifier: Apache-2.0
#include "surveysim/baselines.hpp"

#include <cctype>
#include <cmath>

#include "surveysim/alignment_trainer.hpp"
#include "surveysim/errors.hpp"
#include "surveysim/hashing.hpp"

namespace surveysim {

using nlohmann::json;

std::vector<double> zero_shot_predict(Backend& backend, const PromptRecord& record) {
  return softmax_normalize(index_option_logits(backend, record), record.record_id);
}

Prediction BackendPredictor::predict(const PromptRecord& record) {
  try {
    return {zero_shot_predict(backend_, record), true, {}};
  } catch (const BackendError& e) {
    return Prediction::failure(e.what());
  }
}

json BackendPredictor::metadata() const {
  return {{"predictor", id_}, {"backend", backend_.descriptor().to_json()}};
}

// ---------------------------------------------------------------------------

std::vector<double> HashingEmbedder::embed(const std::string& text) const {
  std::string s = " ";
  for (char c : text) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  s.push_back(' ');
  std::vector<double> v(dim_, 0.0);
  for (std::size_t i = 0; i + 3 <= s.size(); ++i) {
    const auto h = fnv1a64(std::string_view(s).substr(i, 3));
    v[h % dim_] += (h >> 63) ? 1.0 : -1.0;
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& x : v) x /= norm;
  }
  return v;
}

std::string knn_key_text(const std::string& question_text, const std::string& country) {
  return question_text + " | " + country;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ValidationError("cosine similarity of vectors with different lengths");
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

KnnPredictor::KnnPredictor(std::vector<Entry> train_entries, std::shared_ptr<const Embedder> embedder)
    : train_(std::move(train_entries)), embedder_(std::move(embedder)) {
  if (train_.empty()) throw ValidationError("KNN needs a non-empty training set");
  keys_.reserve(train_.size());
  for (const auto& e : train_) keys_.push_back(embedder_->embed(knn_key_text(e.question.text, e.group)));
}

std::size_t KnnPredictor::nearest(const PromptRecord& record) const {
  const auto query = embedder_->embed(knn_key_text(record.entry.question.text, record.displayed_country()));
  std::size_t best = 0;
  double best_sim = -2.0;
  for (std::size_t i = 0; i < keys_.size(); ++i) {
    const double sim = cosine_similarity(query, keys_[i]);
    if (sim > best_sim) {
      best_sim = sim;
      best = i;
    }
  }
  return best;
}

Prediction KnnPredictor::predict(const PromptRecord& record) {
  const auto& neighbor = train_[nearest(record)];
  if (neighbor.target.probs.size() != record.option_count()) {
    return Prediction::failure("KNN neighbor " + record_id_for(neighbor) + " has " +
                               std::to_string(neighbor.target.probs.size()) + " options, record has " +
                               std::to_string(record.option_count()));
  }
  // The neighbor's distribution is in its source order; follow the record's display order.
  std::vector<double> probs(record.option_count());
  for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = neighbor.target.probs[record.permutation[i]];
  return {probs, true, {}};
}

json KnnPredictor::metadata() const {
  return {{"predictor", id()}, {"embedder", embedder_->identifier()}, {"k", 1}};
}

std::vector<double> knn_predict(const PromptRecord& record, const std::vector<Entry>& train_entries,
                                const Embedder& embedder) {
  KnnPredictor knn(train_entries, std::shared_ptr<const Embedder>(&embedder, [](const Embedder*) {}));
  auto p = knn.predict(record);
  if (!p.ok) throw ValidationError(p.error);
  return p.probs;
}

// ---------------------------------------------------------------------------

AvgCulturePredictor::AvgCulturePredictor(const std::vector<Entry>& train_entries) {
  std::map<std::pair<std::string, int>, std::size_t> counts;
  for (const auto& e : train_entries) {
    const auto key = std::make_pair(e.question.survey_id, e.question.question_id);
    auto& mean = means_[key];
    if (mean.empty()) {
      mean.assign(e.target.probs.size(), 0.0);
      options_[key] = e.question.options;
    }
    if (mean.size() != e.target.probs.size()) {
      throw ValidationError("Avg_Culture: inconsistent option count for " + record_id_for(e));
    }
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += e.target.probs[i];
    ++counts[key];
  }
  for (auto& [key, mean] : means_) {
    double sum = 0.0;
    for (double& v : mean) sum += v;
    for (double& v : mean) v /= sum;
  }
}

Prediction AvgCulturePredictor::predict(const PromptRecord& record) {
  const std::size_t n = record.option_count();
  const auto key = std::make_pair(record.entry.question.survey_id, record.entry.question.question_id);
  const auto it = means_.find(key);
  if (it == means_.end() || it->second.size() != n) {
    return {std::vector<double>(n, 1.0 / static_cast<double>(n)), true, {}};
  }
  std::vector<double> probs(n);
  for (std::size_t i = 0; i < n; ++i) probs[i] = it->second[record.permutation[i]];
  return {probs, true, {}};
}

std::vector<double> avg_culture_predict(const PromptRecord& record, const std::vector<Entry>& train_entries) {
  return AvgCulturePredictor(train_entries).predict(record).probs;
}

// ---------------------------------------------------------------------------

namespace {

std::string normalize_label(std::string key) {
  std::string out;
  for (char c : key) {
    if (std::isalpha(static_cast<unsigned char>(c))) out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  return out;
}

std::optional<double> as_number(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    std::erase(s, '%');
    try {
      std::size_t used = 0;
      const double d = std::stod(s, &used);
      return d;
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::vector<double>> parse_json_distribution(const std::string& reply,
                                                           const std::vector<std::string>& labels) {
  const auto open = reply.find('{');
  const auto close = reply.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) return std::nullopt;
  json j;
  try {
    j = json::parse(reply.substr(open, close - open + 1));
  } catch (const json::parse_error&) {
    return std::nullopt;
  }
  if (!j.is_object()) return std::nullopt;
  std::vector<double> probs(labels.size(), 0.0);
  bool any_label = false;
  for (const auto& [key, value] : j.items()) {
    const std::string label = normalize_label(key);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != label) continue;
      const auto v = as_number(value);
      if (!v || !std::isfinite(*v)) return std::nullopt;
      probs[i] = std::max(*v, 0.0);
      any_label = true;
    }
  }
  if (!any_label) return std::nullopt;
  double sum = 0.0;
  for (double p : probs) sum += p;
  if (!(sum > 0.0)) return std::nullopt;
  for (double& p : probs) p /= sum;
  return probs;
}

Prediction JsonZsPredictor::predict(const PromptRecord& record) {
  std::string last;
  for (bool retry : {false, true}) {
    try {
      last = backend_.generate_text(render_json_prompt(record, template_, retry), max_new_tokens_);
    } catch (const BackendError& e) {
      return Prediction::failure(e.what());
    }
    if (auto probs = parse_json_distribution(last, record.option_labels)) return {*probs, true, {}};
  }
  return Prediction::failure("unparseable JSON reply after retry: " + last.substr(0, 120));
}

json JsonZsPredictor::metadata() const {
  return {{"predictor", id()}, {"backend", backend_.descriptor().to_json()}, {"max_new_tokens", max_new_tokens_}};
}

Prediction json_zs_predict(Backend& backend, const PromptRecord& record, const PromptTemplate& tmpl) {
  return JsonZsPredictor(backend, tmpl).predict(record);
}

}  // namespace surveysim
