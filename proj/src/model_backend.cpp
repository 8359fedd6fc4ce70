// SPDX-License-Identifier: Apache-2.0
#include "surveysim/model_backend.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "surveysim/errors.hpp"
#include "surveysim/hashing.hpp"
#include "surveysim/random.hpp"

namespace surveysim {

using nlohmann::json;

std::string to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::kRealLm:
      return "real_lm";
    case BackendKind::kMock:
      return "mock";
    case BackendKind::kToyTable:
      return "toy_table";
  }
  return "unknown";
}

json BackendDescriptor::to_json() const {
  return {{"kind", to_string(kind)},
          {"identifier", identifier},
          {"variant", variant},
          {"trainable", trainable},
          {"deterministic", deterministic},
          {"inference_flags", inference_flags}};
}

// ---------------------------------------------------------------------------

json OptimizerConfig::to_json() const {
  return {{"name", name},   {"learning_rate", learning_rate}, {"beta1", beta1},
          {"beta2", beta2}, {"epsilon", epsilon},             {"weight_decay", weight_decay}};
}

void AdamW::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != grads.size()) throw ValidationError("AdamW: parameter/gradient size mismatch");
  if (m_.size() < params.size()) {
    m_.resize(params.size(), 0.0);
    v_.resize(params.size(), 0.0);
    t_.resize(params.size(), 0);
  }
  const auto& c = config_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const long t = ++t_[i];
    params[i] -= c.learning_rate * c.weight_decay * params[i];
    m_[i] = c.beta1 * m_[i] + (1.0 - c.beta1) * grads[i];
    v_[i] = c.beta2 * v_[i] + (1.0 - c.beta2) * grads[i] * grads[i];
    const double m_hat = m_[i] / (1.0 - std::pow(c.beta1, static_cast<double>(t)));
    const double v_hat = v_[i] / (1.0 - std::pow(c.beta2, static_cast<double>(t)));
    params[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

void Sgd::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != grads.size()) throw ValidationError("SGD: parameter/gradient size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i] -= config_.learning_rate * (grads[i] + config_.weight_decay * params[i]);
  }
}

std::unique_ptr<Optimizer> make_optimizer(const OptimizerConfig& config) {
  if (!(config.learning_rate >= 0.0)) throw ConfigError("optimizer: learning rate must be >= 0");
  if (config.name == "adamw") return std::make_unique<AdamW>(config);
  if (config.name == "sgd") return std::make_unique<Sgd>(config);
  throw ConfigError("unknown optimizer: " + config.name);
}

// ---------------------------------------------------------------------------

std::vector<double> Backend::token_logits(std::string_view prompt, std::span<const int> token_ids) {
  const auto full = next_token_logits(prompt);
  std::vector<double> out;
  out.reserve(token_ids.size());
  for (int id : token_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= full.size()) {
      throw BackendError("token id " + std::to_string(id) + " outside vocabulary");
    }
    out.push_back(full[static_cast<std::size_t>(id)]);
  }
  return out;
}

namespace {

[[noreturn]] void not_trainable(const Backend& b) {
  throw CapabilityError("backend '" + b.descriptor().identifier + "' (" + to_string(b.descriptor().kind) +
                        ") is not trainable");
}

void check_context(std::size_t used, std::size_t limit) {
  if (used > limit) {
    throw BackendError("context overflow: prompt has " + std::to_string(used) + " tokens, limit " +
                       std::to_string(limit));
  }
}

void write_text(const std::string& path, const std::string& text) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace

void Backend::set_training(bool) {}
std::vector<double> Backend::accumulate_gradient(std::string_view, std::span<const int>,
                                                 const LogitGradientFn&) {
  not_trainable(*this);
}
void Backend::gradient_step(Optimizer&) { not_trainable(*this); }
void Backend::zero_grad() {}
json Backend::snapshot() const { return json::object(); }
void Backend::restore(const json&) {}
void Backend::save_adapter(const std::string&) const { not_trainable(*this); }
void Backend::load_adapter(const std::string&) { not_trainable(*this); }

// ---------------------------------------------------------------------------

ToyTokenizer::ToyTokenizer() {
  std::vector<std::string> v{"<unk>", "(", ")"};
  for (char c = 'A'; c <= 'Z'; ++c) v.emplace_back(1, c);
  v.insert(v.end(), {" ", "{", "}"});
  *this = ToyTokenizer(std::move(v));
}

ToyTokenizer::ToyTokenizer(std::vector<std::string> vocab) : vocab_(std::move(vocab)) {
  for (std::size_t i = 0; i < vocab_.size(); ++i) ids_.emplace(vocab_[i], static_cast<int>(i));
}

int ToyTokenizer::first_token(std::string_view text) const {
  // Longest vocabulary entry that prefixes the text.
  int best = -1;
  std::size_t best_len = 0;
  for (const auto& [tok, id] : ids_) {
    if (!tok.empty() && tok.size() > best_len && text.starts_with(tok)) {
      best = id;
      best_len = tok.size();
    }
  }
  return best;
}

std::string ToyTokenizer::decode(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= vocab_.size()) return "<unk>";
  return vocab_[static_cast<std::size_t>(id)];
}

// ---------------------------------------------------------------------------

std::string prompt_hash(std::string_view prompt) { return hash_hex(prompt); }

MockBackend::MockBackend(json fixture, std::string identifier)
    : fixture_(std::move(fixture)), identifier_(std::move(identifier)) {
  try {
    if (fixture_.contains("vocab")) tokenizer_ = ToyTokenizer(fixture_.at("vocab").get<std::vector<std::string>>());
    context_length_ = fixture_.value("context_length", context_length_);
    if (fixture_.contains("default_logits") &&
        fixture_.at("default_logits").size() != tokenizer_.size()) {
      throw ConfigError("mock fixture: default_logits length differs from vocabulary");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("mock fixture: ") + e.what());
  }
}

std::unique_ptr<MockBackend> MockBackend::load(const std::string& path) {
  return std::make_unique<MockBackend>(read_json(path), path);
}

BackendDescriptor MockBackend::descriptor() const {
  BackendDescriptor d;
  d.kind = BackendKind::kMock;
  d.identifier = identifier_;
  d.trainable = false;
  d.deterministic = true;
  return d;
}

std::vector<double> MockBackend::next_token_logits(std::string_view prompt) {
  check_context(tokenizer_.count(prompt), context_length_);
  const std::string key = prompt_hash(prompt);
  if (fixture_.contains("logits") && fixture_.at("logits").contains(key)) {
    auto v = fixture_.at("logits").at(key).get<std::vector<double>>();
    if (v.size() != tokenizer_.size()) throw BackendError("mock fixture: logits length differs from vocabulary");
    return v;
  }
  std::vector<double> out = fixture_.contains("default_logits")
                                ? fixture_.at("default_logits").get<std::vector<double>>()
                                : std::vector<double>(tokenizer_.size(), 0.0);
  if (fixture_.contains("label_logits") && fixture_.at("label_logits").contains(key)) {
    for (const auto& [label, z] : fixture_.at("label_logits").at(key).items()) {
      const int id = label_token_id(label, "(");
      out[static_cast<std::size_t>(id)] = z.get<double>();
    }
  }
  return out;
}

int MockBackend::label_token_id(std::string_view label, std::string_view) {
  if (fixture_.contains("label_tokens")) {
    const auto& table = fixture_.at("label_tokens");
    const std::string l(label);
    if (table.contains(l)) return table.at(l).get<int>();
  }
  const int id = tokenizer_.first_token(label);
  if (id <= 0) throw BackendError("label '" + std::string(label) + "' unknown to mock tokenizer");
  return id;
}

std::string MockBackend::generate_text(std::string_view prompt, std::size_t max_new_tokens) {
  check_context(tokenizer_.count(prompt), context_length_);
  if (max_new_tokens == 0) return "";
  std::string reply = fixture_.value("default_generation", "");
  const std::string key = prompt_hash(prompt);
  if (fixture_.contains("generations") && fixture_.at("generations").contains(key)) {
    const auto& replies = fixture_.at("generations").at(key);
    if (replies.is_string()) {
      reply = replies.get<std::string>();
    } else if (!replies.empty()) {
      auto& cursor = reply_cursor_[key];
      reply = replies.at(std::min(cursor, replies.size() - 1)).get<std::string>();
      ++cursor;
    }
  }
  if (reply.size() > max_new_tokens) reply.resize(max_new_tokens);
  return reply;
}

std::string MockBackend::base_weights_hash() const { return hash_hex(fixture_.dump()); }

// ---------------------------------------------------------------------------

ToyModelSpec ToyModelSpec::from_json(const json& j) {
  ToyModelSpec s;
  try {
    s.variant = j.value("variant", s.variant);
    if (j.contains("country_features")) {
      for (const auto& [c, f] : j.at("country_features").items()) {
        s.country_features[c] = f.get<std::vector<double>>();
      }
    }
    s.base_bias = j.value("base_bias", s.base_bias);
    s.adapter_rank = j.value("adapter_rank", s.adapter_rank);
    s.adapter_alpha = j.value("adapter_alpha", s.adapter_alpha);
    s.adapter_dropout = j.value("adapter_dropout", s.adapter_dropout);
    s.seed = j.value("seed", s.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("toy backend spec: ") + e.what());
  }
  if (s.variant != "table" && s.variant != "embedding") {
    throw ConfigError("toy backend variant must be 'table' or 'embedding'");
  }
  if (s.adapter_rank < 1) throw ConfigError("adapter_rank must be >= 1");
  if (!(s.adapter_dropout >= 0.0 && s.adapter_dropout < 1.0)) {
    throw ConfigError("adapter_dropout must lie in [0, 1)");
  }
  std::size_t dim = 0;
  for (const auto& [c, f] : s.country_features) {
    if (dim == 0) dim = f.size();
    if (f.size() != dim || dim == 0) throw ConfigError("country feature vectors must share a nonzero length");
  }
  if (s.variant == "embedding" && s.country_features.empty()) {
    throw ConfigError("embedding toy backend needs country_features");
  }
  return s;
}

json ToyModelSpec::to_json() const {
  json features = json::object();
  for (const auto& [c, f] : country_features) features[c] = f;
  return {{"variant", variant},
          {"country_features", features},
          {"base_bias", base_bias},
          {"adapter_rank", adapter_rank},
          {"adapter_alpha", adapter_alpha},
          {"adapter_dropout", adapter_dropout},
          {"seed", seed}};
}

ToyBackend::ToyBackend(ToyModelSpec spec, std::string identifier)
    : spec_(std::move(spec)), identifier_(std::move(identifier)), dropout_rng_(spec_.seed ^ 0x9e3779b97f4a7c15ULL) {
  if (!spec_.base_bias.empty() && spec_.base_bias.size() != tokenizer_.size()) {
    throw ConfigError("toy backend: base_bias length must equal vocabulary size " +
                      std::to_string(tokenizer_.size()));
  }
}

std::unique_ptr<ToyBackend> ToyBackend::load(const std::string& fixture_path, const json& overrides) {
  json j = fixture_path.empty() ? json::object() : read_json(fixture_path);
  for (const auto& [k, v] : overrides.items()) j[k] = v;
  return std::make_unique<ToyBackend>(ToyModelSpec::from_json(j), fixture_path.empty() ? "toy" : fixture_path);
}

BackendDescriptor ToyBackend::descriptor() const {
  BackendDescriptor d;
  d.kind = BackendKind::kToyTable;
  d.identifier = identifier_;
  d.variant = spec_.variant;
  d.trainable = true;
  d.deterministic = true;
  d.inference_flags = {{"adapter_rank", spec_.adapter_rank},
                       {"adapter_alpha", spec_.adapter_alpha},
                       {"adapter_dropout", spec_.adapter_dropout}};
  return d;
}

ToyBackend::Key ToyBackend::key_of(std::string_view prompt) const {
  const auto parsed = spec_.prompt_template.parse_rendered(prompt);
  if (!parsed) throw BackendError("toy backend: prompt does not follow the prompt template");
  return {parsed->country, parsed->question};
}

std::size_t ToyBackend::feature_dim() const {
  return spec_.country_features.empty() ? 0 : spec_.country_features.begin()->second.size();
}

const ToyBackend::Slot* ToyBackend::find_slot(const std::string& name) const {
  const auto it = slots_.find(name);
  return it == slots_.end() ? nullptr : &it->second;
}

// A low-rank slot is laid out as B (V x r, zero) followed by A (r x d, Gaussian).
const ToyBackend::Slot& ToyBackend::ensure_slot(const std::string& name, std::size_t size, bool low_rank) {
  if (const auto it = slots_.find(name); it != slots_.end()) return it->second;
  Slot slot{params_.size()};
  params_.resize(params_.size() + size, 0.0);
  grads_.resize(params_.size(), 0.0);
  if (low_rank) {
    const std::size_t b_size = vocab_size() * spec_.adapter_rank;
    std::mt19937_64 rng(spec_.seed ^ fnv1a64(name));
    const double sd = 1.0 / std::sqrt(static_cast<double>(feature_dim()));
    for (std::size_t i = b_size; i < size; ++i) params_[slot.offset + i] = sd * standard_normal(rng);
  }
  return slots_.emplace(name, slot).first->second;
}

std::vector<double> ToyBackend::features_for(const std::string& country) const {
  const auto it = spec_.country_features.find(country);
  if (it == spec_.country_features.end()) return std::vector<double>(feature_dim(), 0.0);
  return it->second;
}

std::vector<double> ToyBackend::forward(const Key& key, const std::vector<double>& f) const {
  const std::size_t V = vocab_size();
  std::vector<double> z = spec_.base_bias.empty() ? std::vector<double>(V, 0.0) : spec_.base_bias;
  auto add_vector = [&](const Slot* s) {
    if (!s) return;
    for (std::size_t v = 0; v < V; ++v) z[v] += params_[s->offset + v];
  };
  if (spec_.variant == "table") {
    add_vector(find_slot("T|" + key.country + "|" + key.question));
    return z;
  }
  const std::size_t r = spec_.adapter_rank;
  const std::size_t d = feature_dim();
  const double scale = spec_.adapter_alpha / static_cast<double>(r);
  auto add_low_rank = [&](const Slot* s) {
    if (!s) return;
    const double* B = &params_[s->offset];
    const double* A = B + V * r;
    std::vector<double> h(r, 0.0);
    for (std::size_t k = 0; k < r; ++k) {
      for (std::size_t j = 0; j < d; ++j) h[k] += A[k * d + j] * f[j];
    }
    for (std::size_t v = 0; v < V; ++v) {
      double acc = 0.0;
      for (std::size_t k = 0; k < r; ++k) acc += B[v * r + k] * h[k];
      z[v] += scale * acc;
    }
  };
  add_vector(find_slot("s"));
  add_vector(find_slot("b|" + key.question));
  add_low_rank(find_slot("L|" + key.question));
  add_low_rank(find_slot("Ls"));
  return z;
}

std::vector<double> ToyBackend::next_token_logits(std::string_view prompt) {
  check_context(tokenizer_.count(prompt), context_length_);
  const Key key = key_of(prompt);
  return forward(key, features_for(key.country));
}

int ToyBackend::label_token_id(std::string_view label, std::string_view) {
  const int id = tokenizer_.first_token(label);
  if (id <= 0) throw BackendError("label '" + std::string(label) + "' unknown to toy tokenizer");
  return id;
}

std::string ToyBackend::generate_text(std::string_view prompt, std::size_t max_new_tokens) {
  if (max_new_tokens == 0) return "";
  // The toy model conditions only on (country, question): emit the greedy
  // label token and stop.
  const auto z = next_token_logits(prompt);
  std::size_t best = 3;
  for (std::size_t i = 3; i < 3 + 26 && i < z.size(); ++i) {
    if (z[i] > z[best]) best = i;
  }
  return tokenizer_.decode(static_cast<int>(best));
}

std::vector<double> ToyBackend::accumulate_gradient(std::string_view prompt, std::span<const int> token_ids,
                                                    const LogitGradientFn& grad_fn) {
  check_context(tokenizer_.count(prompt), context_length_);
  const Key key = key_of(prompt);
  const std::size_t V = vocab_size();
  const std::size_t r = spec_.adapter_rank;
  const std::size_t d = feature_dim();

  if (spec_.variant == "table") {
    ensure_slot("T|" + key.country + "|" + key.question, V, false);
  } else {
    ensure_slot("s", V, false);
    ensure_slot("b|" + key.question, V, false);
    ensure_slot("L|" + key.question, V * r + r * d, true);
    ensure_slot("Ls", V * r + r * d, true);
  }

  std::vector<double> f = features_for(key.country);
  if (training_ && spec_.adapter_dropout > 0.0) {
    const double keep = 1.0 - spec_.adapter_dropout;
    for (double& x : f) {
      const double u = uniform01(dropout_rng_);
      x = u < keep ? x / keep : 0.0;
    }
  }
  const auto z = forward(key, f);
  std::vector<double> label_z;
  for (int id : token_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= V) throw BackendError("token id outside vocabulary");
    label_z.push_back(z[static_cast<std::size_t>(id)]);
  }
  const auto g_label = grad_fn(label_z);
  if (g_label.size() != token_ids.size()) throw ValidationError("gradient length differs from label count");
  std::vector<double> gz(V, 0.0);
  for (std::size_t i = 0; i < token_ids.size(); ++i) gz[static_cast<std::size_t>(token_ids[i])] += g_label[i];

  auto add_vector_grad = [&](const std::string& name) {
    const Slot* s = find_slot(name);
    for (std::size_t v = 0; v < V; ++v) grads_[s->offset + v] += gz[v];
  };
  if (spec_.variant == "table") {
    add_vector_grad("T|" + key.country + "|" + key.question);
    return label_z;
  }
  const double scale = spec_.adapter_alpha / static_cast<double>(r);
  auto add_low_rank_grad = [&](const std::string& name) {
    const Slot* s = find_slot(name);
    const double* B = &params_[s->offset];
    const double* A = B + V * r;
    double* gB = &grads_[s->offset];
    double* gA = gB + V * r;
    std::vector<double> h(r, 0.0);
    for (std::size_t k = 0; k < r; ++k) {
      for (std::size_t j = 0; j < d; ++j) h[k] += A[k * d + j] * f[j];
    }
    std::vector<double> gh(r, 0.0);
    for (std::size_t v = 0; v < V; ++v) {
      if (gz[v] == 0.0) continue;
      for (std::size_t k = 0; k < r; ++k) {
        gB[v * r + k] += scale * gz[v] * h[k];
        gh[k] += scale * gz[v] * B[v * r + k];
      }
    }
    for (std::size_t k = 0; k < r; ++k) {
      for (std::size_t j = 0; j < d; ++j) gA[k * d + j] += gh[k] * f[j];
    }
  };
  add_vector_grad("s");
  add_vector_grad("b|" + key.question);
  add_low_rank_grad("L|" + key.question);
  add_low_rank_grad("Ls");
  return label_z;
}

void ToyBackend::gradient_step(Optimizer& optimizer) {
  optimizer.step(params_, grads_);
  zero_grad();
}

void ToyBackend::zero_grad() { std::fill(grads_.begin(), grads_.end(), 0.0); }

json ToyBackend::snapshot() const {
  json slots = json::object();
  for (const auto& [name, s] : slots_) slots[name] = s.offset;
  return {{"format", "surveysim-toy-adapter-v1"},
          {"variant", spec_.variant},
          {"adapter_rank", spec_.adapter_rank},
          {"vocab_size", vocab_size()},
          {"feature_dim", feature_dim()},
          {"slots", slots},
          {"params", params_}};
}

void ToyBackend::restore(const json& state) {
  try {
    if (state.at("format") != "surveysim-toy-adapter-v1") throw ConfigError("toy adapter: unknown format");
    if (state.at("variant") != spec_.variant || state.at("adapter_rank").get<std::size_t>() != spec_.adapter_rank ||
        state.at("vocab_size").get<std::size_t>() != vocab_size() ||
        state.at("feature_dim").get<std::size_t>() != feature_dim()) {
      throw ConfigError("toy adapter: shape does not match this backend");
    }
    std::map<std::string, Slot> slots;
    for (const auto& [name, off] : state.at("slots").items()) slots[name] = Slot{off.get<std::size_t>()};
    auto params = state.at("params").get<std::vector<double>>();
    slots_ = std::move(slots);
    params_ = std::move(params);
    grads_.assign(params_.size(), 0.0);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("toy adapter: ") + e.what());
  }
}

void ToyBackend::save_adapter(const std::string& path) const { write_text(path, snapshot().dump() + "\n"); }

void ToyBackend::load_adapter(const std::string& path) { restore(read_json(path)); }

std::string ToyBackend::base_weights_hash() const {
  json frozen = spec_.to_json();
  frozen.erase("adapter_dropout");
  return hash_hex(frozen.dump());
}

// ---------------------------------------------------------------------------

std::unique_ptr<Backend> make_backend(const json& section, const json& train_overrides,
                                      const std::string& base_dir) {
  const std::string kind = section.value("kind", "");
  auto resolve = [&](const std::string& p) {
    if (p.empty() || std::filesystem::path(p).is_absolute()) return p;
    return (std::filesystem::path(base_dir) / p).string();
  };
  if (kind == "mock") {
    if (section.contains("fixture_inline")) return std::make_unique<MockBackend>(section.at("fixture_inline"));
    return MockBackend::load(resolve(section.value("fixture", "")));
  }
  if (kind == "toy_table" || kind == "toy_embedding") {
    json overrides = train_overrides;
    overrides["variant"] = kind == "toy_table" ? "table" : "embedding";
    return ToyBackend::load(resolve(section.value("fixture", "")), overrides);
  }
  if (kind == "remote" || kind == "real_lm") {
    return std::make_unique<RemoteBackend>(section.value("url", "http://127.0.0.1:8765"), section.value("model", ""),
                                           section.value("timeout_seconds", 600.0));
  }
  throw ConfigError("backend.kind must be one of mock, toy_table, toy_embedding, remote (got '" + kind + "')");
}

}  // namespace surveysim
