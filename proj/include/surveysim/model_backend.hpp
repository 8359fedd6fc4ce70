// SPDX-License-Identifier: Apache-2.0
//
// Anything that can score the first generated token: a deterministic mock,
// trainable toy models for desk-scale experiments, and an HTTP client for a
// real language model served out of process.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "surveysim/prompting.hpp"

namespace surveysim {

enum class BackendKind { kRealLm, kMock, kToyTable };

std::string to_string(BackendKind kind);

struct BackendDescriptor {
  BackendKind kind = BackendKind::kMock;
  std::string identifier;  // model name or fixture path
  std::string variant;     // toy: "table" or "embedding"
  bool trainable = false;
  bool deterministic = true;
  nlohmann::json inference_flags = nlohmann::json::object();

  nlohmann::json to_json() const;
};

// ---------------------------------------------------------------------------
// Optimizers over a flat parameter vector.

struct OptimizerConfig {
  std::string name = "adamw";  // "adamw" or "sgd"
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;

  nlohmann::json to_json() const;
};

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  /// Updates `params` in place. State grows if the parameter vector grew.
  virtual void step(std::span<double> params, std::span<const double> grads) = 0;
  virtual const OptimizerConfig& config() const = 0;
};

/// Adam with decoupled weight decay.
class AdamW final : public Optimizer {
 public:
  explicit AdamW(OptimizerConfig config) : config_(std::move(config)) {}
  void step(std::span<double> params, std::span<const double> grads) override;
  const OptimizerConfig& config() const override { return config_; }

 private:
  OptimizerConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::vector<long> t_;  // per parameter, so lazily added parameters start fresh
};

class Sgd final : public Optimizer {
 public:
  explicit Sgd(OptimizerConfig config) : config_(std::move(config)) {}
  void step(std::span<double> params, std::span<const double> grads) override;
  const OptimizerConfig& config() const override { return config_; }

 private:
  OptimizerConfig config_;
};

std::unique_ptr<Optimizer> make_optimizer(const OptimizerConfig& config);

// ---------------------------------------------------------------------------

/// Maps d(loss)/d(label logits) given the label logits of one record.
using LogitGradientFn = std::function<std::vector<double>(std::span<const double> label_logits)>;

class Backend {
 public:
  virtual ~Backend() = default;

  virtual BackendDescriptor descriptor() const = 0;
  virtual std::size_t vocab_size() const = 0;
  virtual std::size_t context_length() const = 0;

  /// Logits for the token following `prompt`. Throws BackendError on context overflow.
  virtual std::vector<double> next_token_logits(std::string_view prompt) = 0;

  /// Logits at `token_ids` only. The default slices next_token_logits.
  virtual std::vector<double> token_logits(std::string_view prompt, std::span<const int> token_ids);

  /// First token id of `label` when it follows `context` (e.g. "(").
  /// Throws BackendError when the tokenizer cannot represent it.
  virtual int label_token_id(std::string_view label, std::string_view context) = 0;
  virtual std::string decode_token(int token_id) = 0;

  /// Greedy decoding. max_new_tokens == 0 returns "".
  virtual std::string generate_text(std::string_view prompt, std::size_t max_new_tokens) = 0;

  // Training surface. Only adapter (or toy table) parameters ever change.
  virtual bool trainable() const { return false; }
  virtual void set_training(bool training);
  /// Runs the forward pass for one record, asks `grad_fn` for the loss
  /// gradient w.r.t. the label logits, and accumulates parameter gradients.
  /// Returns the label logits it used.
  virtual std::vector<double> accumulate_gradient(std::string_view prompt, std::span<const int> token_ids,
                                                  const LogitGradientFn& grad_fn);
  /// Applies the optimizer to the accumulated gradient and clears it.
  virtual void gradient_step(Optimizer& optimizer);
  virtual void zero_grad();

  /// In-memory copy of the adapter parameters, restorable with restore().
  virtual nlohmann::json snapshot() const;
  virtual void restore(const nlohmann::json& state);
  /// Native adapter checkpoint.
  virtual void save_adapter(const std::string& path) const;
  virtual void load_adapter(const std::string& path);
  /// Hash of the frozen base weights.
  virtual std::string base_weights_hash() const = 0;
};

/// Single-character tokenizer shared by the mock and toy backends:
/// "<unk>", "(", ")", "A".."Z", " ", "{", "}", then any extra tokens.
class ToyTokenizer {
 public:
  ToyTokenizer();
  explicit ToyTokenizer(std::vector<std::string> vocab);

  std::size_t size() const { return vocab_.size(); }
  const std::vector<std::string>& vocab() const { return vocab_; }
  /// Id of the first token of `text`; -1 when unknown.
  int first_token(std::string_view text) const;
  std::string decode(int id) const;
  /// Prompt length in tokens (one per byte).
  std::size_t count(std::string_view text) const { return text.size(); }

 private:
  std::vector<std::string> vocab_;
  std::map<std::string, int> ids_;
};

// ---------------------------------------------------------------------------

/// Deterministic fixture-driven backend. Fixture JSON:
/// {"vocab"?: [...], "default_logits"?: [...], "logits"?: {prompt_hash: [...]},
///  "label_logits"?: {prompt_hash: {"A": z, ...}}, "label_tokens"?: {"A": id},
///  "generations"?: {prompt_hash: [reply, ...]}, "default_generation"?: "...",
///  "context_length"?: n}
/// Replies for one prompt are served in order; the last one repeats.
class MockBackend final : public Backend {
 public:
  explicit MockBackend(nlohmann::json fixture, std::string identifier = "mock");
  static std::unique_ptr<MockBackend> load(const std::string& path);

  BackendDescriptor descriptor() const override;
  std::size_t vocab_size() const override { return tokenizer_.size(); }
  std::size_t context_length() const override { return context_length_; }
  std::vector<double> next_token_logits(std::string_view prompt) override;
  int label_token_id(std::string_view label, std::string_view context) override;
  std::string decode_token(int token_id) override { return tokenizer_.decode(token_id); }
  std::string generate_text(std::string_view prompt, std::size_t max_new_tokens) override;
  std::string base_weights_hash() const override;

 private:
  nlohmann::json fixture_;
  std::string identifier_;
  ToyTokenizer tokenizer_;
  std::size_t context_length_ = 1 << 16;
  std::map<std::string, std::size_t> reply_cursor_;
};

/// Key of a prompt in the mock fixture tables.
std::string prompt_hash(std::string_view prompt);

// ---------------------------------------------------------------------------

/// Frozen settings of the toy models. In the embedding variant every country
/// has a fixed feature vector standing in for pretrained knowledge.
struct ToyModelSpec {
  std::string variant = "table";  // "table" | "embedding"
  std::map<std::string, std::vector<double>> country_features;
  std::vector<double> base_bias;  // frozen logits over the vocabulary; empty = zeros
  std::size_t adapter_rank = 8;
  double adapter_alpha = 32.0;
  double adapter_dropout = 0.05;
  std::uint64_t seed = 0;
  PromptTemplate prompt_template = PromptTemplate::defaults();

  static ToyModelSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Trainable stand-in model.
///
/// table:     logits(c, q) = base + T[c, q]
/// embedding: logits(c, q) = base + s + b[q] + (alpha / rank) * (B[q] A[q] + Bs As) * f(c)
///
/// T, s, b and the low-rank pairs are the adapter; f(c) and base are frozen.
/// A factors start from a seeded Gaussian, B factors at zero, so an
/// untrained model predicts uniformly over labels (when base is zero).
/// Unknown countries have f = 0; unknown keys contribute nothing.
class ToyBackend final : public Backend {
 public:
  explicit ToyBackend(ToyModelSpec spec, std::string identifier = "toy");
  static std::unique_ptr<ToyBackend> load(const std::string& fixture_path, const nlohmann::json& overrides);

  BackendDescriptor descriptor() const override;
  std::size_t vocab_size() const override { return tokenizer_.size(); }
  std::size_t context_length() const override { return context_length_; }
  std::vector<double> next_token_logits(std::string_view prompt) override;
  int label_token_id(std::string_view label, std::string_view context) override;
  std::string decode_token(int token_id) override { return tokenizer_.decode(token_id); }
  std::string generate_text(std::string_view prompt, std::size_t max_new_tokens) override;

  bool trainable() const override { return true; }
  void set_training(bool training) override { training_ = training; }
  std::vector<double> accumulate_gradient(std::string_view prompt, std::span<const int> token_ids,
                                          const LogitGradientFn& grad_fn) override;
  void gradient_step(Optimizer& optimizer) override;
  void zero_grad() override;
  nlohmann::json snapshot() const override;
  void restore(const nlohmann::json& state) override;
  void save_adapter(const std::string& path) const override;
  void load_adapter(const std::string& path) override;
  std::string base_weights_hash() const override;

  const ToyModelSpec& spec() const { return spec_; }
  std::size_t parameter_count() const { return params_.size(); }
  std::span<const double> parameters() const { return params_; }
  std::span<double> mutable_parameters() { return params_; }
  std::span<const double> gradients() const { return grads_; }

 private:
  struct Slot {
    std::size_t offset = 0;
  };
  struct Key {
    std::string country;
    std::string question;
  };

  Key key_of(std::string_view prompt) const;
  std::size_t feature_dim() const;
  std::size_t question_block_size() const;
  const Slot* find_slot(const std::string& name) const;
  const Slot& ensure_slot(const std::string& name, std::size_t size, bool low_rank);
  std::vector<double> features_for(const std::string& country) const;
  std::vector<double> forward(const Key& key, const std::vector<double>& features) const;

  ToyModelSpec spec_;
  std::string identifier_;
  ToyTokenizer tokenizer_;
  std::size_t context_length_ = 1 << 16;
  bool training_ = false;
  std::mt19937_64 dropout_rng_;
  std::map<std::string, Slot> slots_;
  std::vector<double> params_;
  std::vector<double> grads_;
};

// ---------------------------------------------------------------------------

/// Client for an out-of-process model server speaking JSON over HTTP.
/// Endpoints: GET /info; POST /logits, /token_id, /decode, /generate,
/// /forward, /backward, /zero_grad, /step, /train_mode, /snapshot, /restore,
/// /save, /load, /base_hash. HTTP 501 means the server lacks the capability.
class RemoteBackend final : public Backend {
 public:
  RemoteBackend(std::string base_url, std::string model, double timeout_seconds = 600.0);
  ~RemoteBackend() override;

  BackendDescriptor descriptor() const override;
  std::size_t vocab_size() const override;
  std::size_t context_length() const override;
  std::vector<double> next_token_logits(std::string_view prompt) override;
  std::vector<double> token_logits(std::string_view prompt, std::span<const int> token_ids) override;
  int label_token_id(std::string_view label, std::string_view context) override;
  std::string decode_token(int token_id) override;
  std::string generate_text(std::string_view prompt, std::size_t max_new_tokens) override;

  bool trainable() const override;
  void set_training(bool training) override;
  std::vector<double> accumulate_gradient(std::string_view prompt, std::span<const int> token_ids,
                                          const LogitGradientFn& grad_fn) override;
  void gradient_step(Optimizer& optimizer) override;
  void zero_grad() override;
  nlohmann::json snapshot() const override;
  void restore(const nlohmann::json& state) override;
  void save_adapter(const std::string& path) const override;
  void load_adapter(const std::string& path) override;
  std::string base_weights_hash() const override;

 private:
  nlohmann::json post(const std::string& path, const nlohmann::json& body) const;
  const nlohmann::json& info() const;

  struct Client;
  std::unique_ptr<Client> client_;
  std::string base_url_;
  std::string model_;
  mutable nlohmann::json info_;
  std::map<std::string, int> label_cache_;
};

/// Builds a backend from the "backend" config section:
/// {"kind": "mock"|"toy_table"|"toy_embedding"|"remote", "fixture"?, "url"?, "model"?, ...}.
/// `train_overrides` carries adapter rank/alpha/dropout/seed for toy models.
std::unique_ptr<Backend> make_backend(const nlohmann::json& section, const nlohmann::json& train_overrides,
                                      const std::string& base_dir);

}  // namespace surveysim
