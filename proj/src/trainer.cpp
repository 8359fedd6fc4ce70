// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <chrono>
#include <limits>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "surveysim/alignment_trainer.hpp"
#include "surveysim/distribution_metrics.hpp"
#include "surveysim/errors.hpp"
#include "surveysim/hashing.hpp"

namespace surveysim {

using nlohmann::json;

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  try {
    if (j.contains("loss")) c.loss = loss_from_string(j.at("loss").get<std::string>());
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.adapter_rank = j.value("adapter_rank", c.adapter_rank);
    c.adapter_alpha = j.value("adapter_alpha", c.adapter_alpha);
    c.adapter_dropout = j.value("adapter_dropout", c.adapter_dropout);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.early_stop_metric = j.value("early_stop_metric", c.early_stop_metric);
    c.patience = j.value("patience", c.patience);
    c.seed = j.value("seed", c.seed);
    c.optimizer = j.value("optimizer", c.optimizer);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.wa_normalized = j.value("wa_normalized", c.wa_normalized);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
  c.validate();
  return c;
}

json TrainConfig::to_json() const {
  return {{"loss", to_string(loss)},
          {"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"adapter_rank", adapter_rank},
          {"adapter_alpha", adapter_alpha},
          {"adapter_dropout", adapter_dropout},
          {"max_epochs", max_epochs},
          {"early_stop_metric", early_stop_metric},
          {"patience", patience},
          {"seed", seed},
          {"optimizer", optimizer},
          {"weight_decay", weight_decay},
          {"wa_normalized", wa_normalized}};
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (adapter_rank < 1) throw ConfigError("train.adapter_rank must be >= 1");
  if (!(adapter_dropout >= 0.0 && adapter_dropout <= 1.0)) throw ConfigError("train.adapter_dropout must lie in [0,1]");
  if (max_epochs < 1) throw ConfigError("train.max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("train.patience must be >= 1");
  if (early_stop_metric != "valid_one_minus_jsd") {
    throw ConfigError("train.early_stop_metric: only valid_one_minus_jsd is supported");
  }
  if (optimizer != "adamw" && optimizer != "sgd") throw ConfigError("train.optimizer must be adamw or sgd");
  if (weight_decay < 0.0) throw ConfigError("train.weight_decay must be >= 0");
}

OptimizerConfig TrainConfig::optimizer_config() const {
  OptimizerConfig o;
  o.name = optimizer;
  o.learning_rate = learning_rate;
  o.weight_decay = weight_decay;
  return o;
}

json TrainConfig::adapter_overrides() const {
  return {{"adapter_rank", adapter_rank},
          {"adapter_alpha", adapter_alpha},
          {"adapter_dropout", adapter_dropout},
          {"seed", seed}};
}

// ---------------------------------------------------------------------------

std::string TrainingLog::to_jsonl(bool include_wall_clock) const {
  std::ostringstream os;
  os << json{{"type", "header"}, {"config", config}, {"log_base", log_base}}.dump() << '\n';
  for (const auto& s : steps) {
    os << json{{"type", "step"}, {"epoch", s.epoch}, {"step", s.step}, {"loss", s.loss}}.dump() << '\n';
  }
  for (const auto& e : epochs) {
    json j{{"type", "epoch"}, {"epoch", e.epoch}, {"mean_train_loss", e.mean_train_loss}, {"improved", e.improved}};
    j["valid_one_minus_jsd"] = e.valid_one_minus_jsd ? json(*e.valid_one_minus_jsd) : json(nullptr);
    os << j.dump() << '\n';
  }
  json summary{{"type", "summary"}, {"status", status}, {"best_epoch", best_epoch}, {"adapter_path", adapter_path}};
  summary["best_valid_one_minus_jsd"] =
      best_valid_one_minus_jsd ? json(*best_valid_one_minus_jsd) : json(nullptr);
  if (include_wall_clock) summary["wall_clock_seconds"] = wall_clock_seconds;
  os << summary.dump() << '\n';
  return os.str();
}

TrainingLog TrainingLog::from_jsonl(const std::string& text) {
  TrainingLog log;
  std::istringstream in(text);
  std::string line;
  try {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (type == "header") {
        log.config = j.at("config");
        log.log_base = j.value("log_base", log.log_base);
      } else if (type == "step") {
        log.steps.push_back({j.at("epoch").get<int>(), j.at("step").get<int>(), j.at("loss").get<double>()});
      } else if (type == "epoch") {
        EpochRecord e;
        e.epoch = j.at("epoch").get<int>();
        e.mean_train_loss = j.at("mean_train_loss").get<double>();
        e.improved = j.at("improved").get<bool>();
        if (!j.at("valid_one_minus_jsd").is_null()) e.valid_one_minus_jsd = j.at("valid_one_minus_jsd").get<double>();
        log.epochs.push_back(e);
      } else if (type == "summary") {
        log.status = j.at("status").get<std::string>();
        log.best_epoch = j.at("best_epoch").get<int>();
        log.adapter_path = j.value("adapter_path", "");
        if (!j.at("best_valid_one_minus_jsd").is_null()) {
          log.best_valid_one_minus_jsd = j.at("best_valid_one_minus_jsd").get<double>();
        }
        log.wall_clock_seconds = j.value("wall_clock_seconds", 0.0);
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("training log: ") + e.what());
  }
  return log;
}

std::vector<double> TrainingLog::step_losses() const {
  std::vector<double> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.loss);
  return out;
}

// ---------------------------------------------------------------------------

double mean_one_minus_jsd(Backend& backend, const std::vector<PromptRecord>& records) {
  if (records.empty()) throw ValidationError("mean 1-JSD over an empty record set");
  double sum = 0.0;
  for (const auto& r : records) {
    const auto probs = softmax_normalize(index_option_logits(backend, r), r.record_id);
    sum += one_minus_jsd(probs, r.entry.target.probs);
  }
  return sum / static_cast<double>(records.size());
}

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

TrainingLog train(Backend& backend, const std::vector<PromptRecord>& train_records,
                  const std::vector<PromptRecord>& valid_records, const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  if (!backend.trainable()) throw CapabilityError("train: backend '" + backend.descriptor().identifier + "' is not trainable");
  if (train_records.empty()) throw ValidationError("train: empty training set");

  const auto started = std::chrono::steady_clock::now();
  TrainingLog log;
  log.config = config.to_json();

  auto optimizer = make_optimizer(config.optimizer_config());
  std::vector<std::vector<int>> label_ids;
  label_ids.reserve(train_records.size());
  for (const auto& r : train_records) label_ids.push_back(option_label_ids(backend, r));

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(train_records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  json best = backend.snapshot();
  double best_score = -1.0;
  int epochs_without_improvement = 0;
  int step = 0;
  log.status = "completed";

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    backend.set_training(true);
    backend.zero_grad();

    double epoch_loss = 0.0;
    bool diverged = false;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const double inv_n = 1.0 / static_cast<double>(end - start);
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const auto& rec = train_records[order[k]];
        backend.accumulate_gradient(rec.rendered_text, label_ids[order[k]], [&](std::span<const double> z) {
          if (!all_finite(z)) {
            batch_loss = std::numeric_limits<double>::quiet_NaN();
            return std::vector<double>(z.size(), 0.0);
          }
          auto lg = loss_and_gradient(config.loss, rec.entry.target.probs, z, config.wa_normalized);
          batch_loss += lg.value;
          for (double& g : lg.grad_logits) g *= inv_n;
          if (!all_finite(lg.grad_logits)) {
            batch_loss = std::numeric_limits<double>::quiet_NaN();
            std::fill(lg.grad_logits.begin(), lg.grad_logits.end(), 0.0);
          }
          return lg.grad_logits;
        });
      }
      if (!std::isfinite(batch_loss)) {
        diverged = true;
        break;
      }
      backend.gradient_step(*optimizer);
      ++step;
      log.steps.push_back({epoch, step, batch_loss * inv_n});
      epoch_loss += batch_loss;
    }
    backend.set_training(false);
    if (diverged) {
      backend.zero_grad();
      backend.restore(best);
      log.status = "diverged";
      break;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_train_loss = epoch_loss / static_cast<double>(order.size());
    if (!valid_records.empty()) {
      rec.valid_one_minus_jsd = mean_one_minus_jsd(backend, valid_records);
      if (*rec.valid_one_minus_jsd > best_score) {
        rec.improved = true;
        best_score = *rec.valid_one_minus_jsd;
        best = backend.snapshot();
        log.best_epoch = epoch;
        log.best_valid_one_minus_jsd = best_score;
        epochs_without_improvement = 0;
      } else {
        ++epochs_without_improvement;
      }
    } else {
      rec.improved = true;
      best = backend.snapshot();
      log.best_epoch = epoch;
    }
    log.epochs.push_back(rec);
    if (hooks.on_epoch && !hooks.on_epoch(rec)) break;
    if (epochs_without_improvement >= config.patience) {
      log.status = "early_stopped";
      break;
    }
  }
  backend.restore(best);
  log.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return log;
}

json adapter_metadata(const TrainConfig& config, const std::string& dataset_hash, const BackendDescriptor& backend) {
  return {{"config_hash", hash_hex(config.to_json().dump())},
          {"config", config.to_json()},
          {"dataset_hash", dataset_hash},
          {"seed", config.seed},
          {"backend", backend.to_json()}};
}

}  // namespace surveysim
