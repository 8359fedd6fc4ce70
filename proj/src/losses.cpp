// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <set>

#include "surveysim/alignment_trainer.hpp"
#include "surveysim/errors.hpp"

namespace surveysim {

std::vector<double> softmax_normalize(std::span<const double> logits, const std::string& record_id) {
  if (logits.empty()) throw ValidationError("softmax of empty logits" + (record_id.empty() ? "" : " for " + record_id));
  for (double z : logits) {
    if (!std::isfinite(z)) {
      throw ValidationError("non-finite logit" + (record_id.empty() ? std::string() : " for record " + record_id));
    }
  }
  const double max_z = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - max_z);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

std::vector<double> softmax_normalize(const OptionLogits& logits, const std::string& record_id) {
  return softmax_normalize(logits.values, record_id);
}

std::vector<int> option_label_ids(Backend& backend, const PromptRecord& record) {
  std::vector<int> ids;
  ids.reserve(record.option_labels.size());
  std::set<int> seen;
  for (const auto& label : record.option_labels) {
    const int id = backend.label_token_id(label, "(");
    if (!seen.insert(id).second) {
      throw ConfigError(record.record_id + ": option labels share first token id " + std::to_string(id) +
                        "; choose labels that tokenize distinctly");
    }
    ids.push_back(id);
  }
  return ids;
}

OptionLogits index_option_logits(Backend& backend, const PromptRecord& record) {
  OptionLogits out;
  out.label_token_ids = option_label_ids(backend, record);
  try {
    out.values = backend.token_logits(record.rendered_text, out.label_token_ids);
  } catch (const BackendError& e) {
    throw BackendError(record.record_id + ": " + e.what());
  }
  if (out.values.size() != record.option_count()) {
    throw BackendError(record.record_id + ": backend returned " + std::to_string(out.values.size()) + " logits");
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kKL:
      return "KL";
    case LossKind::kJS:
      return "JS";
    case LossKind::kWA:
      return "WA";
    case LossKind::kCE:
      return "CE";
  }
  return "?";
}

LossKind loss_from_string(const std::string& name) {
  if (name == "KL") return LossKind::kKL;
  if (name == "JS") return LossKind::kJS;
  if (name == "WA") return LossKind::kWA;
  if (name == "CE") return LossKind::kCE;
  throw ConfigError("unknown loss '" + name + "' (expected KL, JS, WA or CE)");
}

namespace {

void check_pair(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw ValidationError("loss shape mismatch: " + std::to_string(p.size()) + " vs " + std::to_string(q.size()));
  }
  if (p.empty()) throw ValidationError("loss of empty distributions");
}

double clamp_log(double q) { return std::log(std::max(q, kLogClamp)); }

// d loss / d q for each loss, given q = softmax(z).
std::vector<double> grad_wrt_probs(LossKind kind, std::span<const double> p, std::span<const double> q,
                                   bool wa_normalized) {
  const std::size_t n = p.size();
  std::vector<double> g(n, 0.0);
  switch (kind) {
    case LossKind::kKL:
    case LossKind::kCE:
      for (std::size_t j = 0; j < n; ++j) {
        if (q[j] >= kLogClamp) g[j] = -p[j] / q[j];
      }
      break;
    case LossKind::kJS:
      // d/dq_j of ½KL(p‖m) + ½KL(q‖m) reduces to ½ log(q_j / m_j).
      for (std::size_t j = 0; j < n; ++j) {
        const double m = 0.5 * (p[j] + q[j]);
        g[j] = 0.5 * (clamp_log(q[j]) - clamp_log(m));
      }
      break;
    case LossKind::kWA: {
      const double scale = wa_normalized && n > 1 ? 1.0 / static_cast<double>(n - 1) : 1.0;
      double cp = 0.0;
      double cq = 0.0;
      std::vector<double> sign(n, 0.0);
      for (std::size_t i = 0; i + 1 < n; ++i) {
        cp += p[i];
        cq += q[i];
        sign[i] = cq > cp ? 1.0 : (cq < cp ? -1.0 : 0.0);
      }
      // q_j enters every CDF term i >= j.
      double tail = 0.0;
      for (std::size_t j = n; j-- > 0;) {
        if (j + 1 < n) tail += sign[j];
        g[j] = scale * tail;
      }
      break;
    }
  }
  return g;
}

}  // namespace

double kl_loss(std::span<const double> p, std::span<const double> q) {
  check_pair(p, q);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) sum += p[i] * (std::log(p[i]) - clamp_log(q[i]));
  }
  return std::max(sum, 0.0);
}

double js_loss(std::span<const double> p, std::span<const double> q) {
  check_pair(p, q);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) sum += 0.5 * p[i] * std::log(p[i] / m);
    if (q[i] > 0.0) sum += 0.5 * q[i] * std::log(q[i] / m);
  }
  return std::max(sum, 0.0);
}

double wa_loss(std::span<const double> p, std::span<const double> q, bool normalized) {
  check_pair(p, q);
  double cp = 0.0;
  double cq = 0.0;
  double work = 0.0;
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    cp += p[i];
    cq += q[i];
    work += std::abs(cp - cq);
  }
  if (normalized && p.size() > 1) work /= static_cast<double>(p.size() - 1);
  return work;
}

double ce_loss(std::span<const double> p, std::span<const double> q) {
  check_pair(p, q);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) sum -= p[i] * clamp_log(q[i]);
  }
  return sum;
}

double loss_value(LossKind kind, std::span<const double> p, std::span<const double> q, bool wa_normalized) {
  switch (kind) {
    case LossKind::kKL:
      return kl_loss(p, q);
    case LossKind::kJS:
      return js_loss(p, q);
    case LossKind::kWA:
      return wa_loss(p, q, wa_normalized);
    case LossKind::kCE:
      return ce_loss(p, q);
  }
  return 0.0;
}

LossAndGradient loss_and_gradient(LossKind kind, std::span<const double> p_human, std::span<const double> logits,
                                  bool wa_normalized) {
  check_pair(p_human, logits);
  const auto q = softmax_normalize(logits);
  LossAndGradient out;
  out.value = loss_value(kind, p_human, q, wa_normalized);
  const auto g = grad_wrt_probs(kind, p_human, q, wa_normalized);
  double mean = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) mean += q[j] * g[j];
  out.grad_logits.resize(q.size());
  for (std::size_t k = 0; k < q.size(); ++k) out.grad_logits[k] = q[k] * (g[k] - mean);
  return out;
}

}  // namespace surveysim
