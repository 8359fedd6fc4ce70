// SPDX-License-Identifier: Apache-2.0
#include <httplib.h>

#include "surveysim/errors.hpp"
#include "surveysim/model_backend.hpp"

namespace surveysim {

using nlohmann::json;

struct RemoteBackend::Client {
  explicit Client(const std::string& url) : http(url) {}
  mutable httplib::Client http;
};

RemoteBackend::RemoteBackend(std::string base_url, std::string model, double timeout_seconds)
    : client_(std::make_unique<Client>(base_url)), base_url_(std::move(base_url)), model_(std::move(model)) {
  const auto secs = static_cast<time_t>(timeout_seconds);
  client_->http.set_read_timeout(secs, 0);
  client_->http.set_write_timeout(secs, 0);
  client_->http.set_connection_timeout(10, 0);
}

RemoteBackend::~RemoteBackend() = default;

json RemoteBackend::post(const std::string& path, const json& body) const {
  auto res = client_->http.Post(path, body.dump(), "application/json");
  if (!res) {
    throw BackendError("model server " + base_url_ + path + ": " + httplib::to_string(res.error()));
  }
  json reply;
  try {
    reply = res->body.empty() ? json::object() : json::parse(res->body);
  } catch (const json::parse_error&) {
    throw BackendError("model server " + path + ": reply is not JSON (HTTP " + std::to_string(res->status) + ")");
  }
  if (res->status == 501) throw CapabilityError("model server " + path + ": " + reply.value("error", "not supported"));
  if (res->status != 200) {
    throw BackendError("model server " + path + " (HTTP " + std::to_string(res->status) +
                       "): " + reply.value("error", res->body));
  }
  return reply;
}

const json& RemoteBackend::info() const {
  if (info_.is_null()) {
    auto res = client_->http.Get("/info");
    if (!res) throw BackendError("model server " + base_url_ + "/info: " + httplib::to_string(res.error()));
    if (res->status != 200) throw BackendError("model server /info: HTTP " + std::to_string(res->status));
    try {
      info_ = json::parse(res->body);
    } catch (const json::parse_error&) {
      throw BackendError("model server /info: reply is not JSON");
    }
    if (!model_.empty() && info_.value("model", "") != model_) {
      throw BackendError("model server serves '" + info_.value("model", "") + "', config asks for '" + model_ + "'");
    }
  }
  return info_;
}

BackendDescriptor RemoteBackend::descriptor() const {
  BackendDescriptor d;
  d.kind = BackendKind::kRealLm;
  d.identifier = model_;
  d.trainable = false;
  d.deterministic = false;
  d.inference_flags = {{"url", base_url_}};
  try {
    const auto& i = info();
    d.identifier = i.value("model", model_);
    d.trainable = i.value("trainable", false);
    d.deterministic = i.value("deterministic", false);
    d.inference_flags = i.value("flags", json::object());
    d.inference_flags["url"] = base_url_;
    if (i.contains("chat_template")) d.inference_flags["chat_template"] = i.at("chat_template");
  } catch (const BackendError&) {
    // Descriptor stays usable for error reporting when the server is down.
  }
  return d;
}

std::size_t RemoteBackend::vocab_size() const { return info().at("vocab_size").get<std::size_t>(); }

std::size_t RemoteBackend::context_length() const { return info().at("context_length").get<std::size_t>(); }

std::vector<double> RemoteBackend::next_token_logits(std::string_view prompt) {
  return post("/logits", {{"prompt", prompt}}).at("logits").get<std::vector<double>>();
}

std::vector<double> RemoteBackend::token_logits(std::string_view prompt, std::span<const int> token_ids) {
  auto logits = post("/logits", {{"prompt", prompt}, {"token_ids", std::vector<int>(token_ids.begin(), token_ids.end())}})
                    .at("logits")
                    .get<std::vector<double>>();
  if (logits.size() != token_ids.size()) throw BackendError("model server returned wrong number of logits");
  return logits;
}

int RemoteBackend::label_token_id(std::string_view label, std::string_view context) {
  const std::string key = std::string(context) + '\x1f' + std::string(label);
  if (const auto it = label_cache_.find(key); it != label_cache_.end()) return it->second;
  const int id = post("/token_id", {{"label", label}, {"context", context}}).at("token_id").get<int>();
  if (id < 0) throw BackendError("label '" + std::string(label) + "' unknown to the server tokenizer");
  label_cache_[key] = id;
  return id;
}

std::string RemoteBackend::decode_token(int token_id) {
  return post("/decode", {{"token_id", token_id}}).at("text").get<std::string>();
}

std::string RemoteBackend::generate_text(std::string_view prompt, std::size_t max_new_tokens) {
  if (max_new_tokens == 0) return "";
  return post("/generate", {{"prompt", prompt}, {"max_new_tokens", max_new_tokens}, {"greedy", true}})
      .at("text")
      .get<std::string>();
}

bool RemoteBackend::trainable() const { return info().value("trainable", false); }

void RemoteBackend::set_training(bool training) { post("/train_mode", {{"training", training}}); }

std::vector<double> RemoteBackend::accumulate_gradient(std::string_view prompt, std::span<const int> token_ids,
                                                       const LogitGradientFn& grad_fn) {
  const auto fwd =
      post("/forward", {{"prompt", prompt}, {"token_ids", std::vector<int>(token_ids.begin(), token_ids.end())}});
  const auto logits = fwd.at("logits").get<std::vector<double>>();
  const auto grad = grad_fn(logits);
  post("/backward", {{"handle", fwd.at("handle")}, {"grad", grad}});
  return logits;
}

void RemoteBackend::gradient_step(Optimizer& optimizer) { post("/step", {{"optimizer", optimizer.config().to_json()}}); }

void RemoteBackend::zero_grad() { post("/zero_grad", json::object()); }

json RemoteBackend::snapshot() const { return post("/snapshot", json::object()); }

void RemoteBackend::restore(const json& state) { post("/restore", state); }

void RemoteBackend::save_adapter(const std::string& path) const { post("/save", {{"path", path}}); }

void RemoteBackend::load_adapter(const std::string& path) { post("/load", {{"path", path}}); }

std::string RemoteBackend::base_weights_hash() const {
  return post("/base_hash", json::object()).at("hash").get<std::string>();
}

}  // namespace surveysim
