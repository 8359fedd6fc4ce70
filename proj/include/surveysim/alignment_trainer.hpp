// SPDX-License-Identifier: Apache-2.0
//
// First-token alignment: restrict the next-token logits to the option label
// tokens, softmax them into an option distribution, and fit that
// distribution to the human one by minimizing a divergence.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "surveysim/model_backend.hpp"
#include "surveysim/prompting.hpp"

namespace surveysim {

struct OptionLogits {
  std::vector<double> values;          // one logit per option label, label order
  std::vector<int> label_token_ids;
};

/// Clamp applied to model probabilities inside log terms.
inline constexpr double kLogClamp = 1e-12;

/// exp(z_i) / Σ exp(z_j), stabilized by subtracting the max. Throws
/// ValidationError naming `record_id` on a non-finite logit.
std::vector<double> softmax_normalize(std::span<const double> logits, const std::string& record_id = "");
std::vector<double> softmax_normalize(const OptionLogits& logits, const std::string& record_id = "");

/// Token ids of the record's option labels, each tokenized after "(".
/// Throws ConfigError when two labels share a first token.
std::vector<int> option_label_ids(Backend& backend, const PromptRecord& record);

/// Next-token logits at the prompt's end restricted to the label tokens.
OptionLogits index_option_logits(Backend& backend, const PromptRecord& record);

enum class LossKind { kKL, kJS, kWA, kCE };

std::string to_string(LossKind kind);
LossKind loss_from_string(const std::string& name);

/// Σ p log(p / max(q, ε)), natural log. KL(human ‖ model).
double kl_loss(std::span<const double> p_human, std::span<const double> p_model);
/// Jensen-Shannon divergence, natural log.
double js_loss(std::span<const double> p_human, std::span<const double> p_model);
/// Σ |CDF_p − CDF_q| over option positions; divided by (n−1) when `normalized`.
double wa_loss(std::span<const double> p_human, std::span<const double> p_model, bool normalized = false);
/// −Σ p log max(q, ε).
double ce_loss(std::span<const double> p_human, std::span<const double> p_model);

double loss_value(LossKind kind, std::span<const double> p_human, std::span<const double> p_model,
                  bool wa_normalized = false);

struct LossAndGradient {
  double value = 0.0;
  std::vector<double> grad_logits;  // d loss / d option logits
};

/// Loss of softmax(logits) against `p_human` and its analytic gradient with
/// respect to the logits.
LossAndGradient loss_and_gradient(LossKind kind, std::span<const double> p_human, std::span<const double> logits,
                                  bool wa_normalized = false);

// ---------------------------------------------------------------------------

struct TrainConfig {
  LossKind loss = LossKind::kKL;
  double learning_rate = 1e-4;
  int batch_size = 16;
  int adapter_rank = 8;
  double adapter_alpha = 32.0;
  double adapter_dropout = 0.05;
  int max_epochs = 20;
  std::string early_stop_metric = "valid_one_minus_jsd";
  int patience = 3;
  std::uint64_t seed = 0;
  std::string optimizer = "adamw";
  double weight_decay = 0.0;
  bool wa_normalized = false;

  static TrainConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  /// Throws ConfigError naming the offending field.
  void validate() const;
  OptimizerConfig optimizer_config() const;
  /// Fields the toy backend reads (rank, alpha, dropout, seed).
  nlohmann::json adapter_overrides() const;
};

struct EpochRecord {
  int epoch = 0;
  double mean_train_loss = 0.0;
  std::optional<double> valid_one_minus_jsd;
  bool improved = false;
};

struct StepRecord {
  int epoch = 0;
  int step = 0;
  double loss = 0.0;
};

struct TrainingLog {
  nlohmann::json config;
  std::string log_base = "natural";
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  std::string status;  // "completed" | "early_stopped" | "diverged"
  int best_epoch = 0;
  std::optional<double> best_valid_one_minus_jsd;
  double wall_clock_seconds = 0.0;
  std::string adapter_path;

  /// JSON Lines: a header, one line per step and per epoch, then a summary.
  /// Wall clock is written only when `include_wall_clock`.
  std::string to_jsonl(bool include_wall_clock = true) const;
  static TrainingLog from_jsonl(const std::string& text);
  std::vector<double> step_losses() const;
};

struct TrainHooks {
  /// Called after each epoch; return false to stop.
  std::function<bool(const EpochRecord&)> on_epoch;
};

/// Mean 1-JSD of the backend's first-token predictions over `records`.
double mean_one_minus_jsd(Backend& backend, const std::vector<PromptRecord>& records);

/// Fits the backend's adapter parameters. Batches are drawn from a seeded
/// shuffle each epoch; the adapter with the best validation mean 1-JSD is
/// restored at the end (last epoch when there is no validation set). A NaN
/// loss aborts and restores the last good checkpoint.
TrainingLog train(Backend& backend, const std::vector<PromptRecord>& train_records,
                  const std::vector<PromptRecord>& valid_records, const TrainConfig& config,
                  const TrainHooks& hooks = {});

/// Sidecar written next to an adapter checkpoint.
nlohmann::json adapter_metadata(const TrainConfig& config, const std::string& dataset_hash,
                                const BackendDescriptor& backend);

}  // namespace surveysim
