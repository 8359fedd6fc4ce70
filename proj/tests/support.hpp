// SPDX-License-Identifier: Apache-2.0
//
// Shared helpers for the unit and acceptance tests, including oracles that
// recompute quantities without going through the library.
#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "surveysim/survey_data.hpp"

namespace surveysim::testing {

#ifndef SURVEYSIM_FIXTURE_DIR
#define SURVEYSIM_FIXTURE_DIR "tests/fixtures"
#endif

inline std::filesystem::path fixture_dir() { return SURVEYSIM_FIXTURE_DIR; }

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("surveysim-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline Entry make_entry(const std::string& country, int qid, std::vector<std::string> options, std::vector<double> probs,
                        const std::string& text = "", const std::string& survey = "T") {
  Entry e;
  e.question.question_id = qid;
  e.question.text = text.empty() ? "Question number " + std::to_string(qid) + "?" : text;
  e.question.options = std::move(options);
  e.question.survey_id = survey;
  e.question.dimension = "test";
  e.group = country;
  e.target.group = country;
  e.target.question_id = qid;
  e.target.probs = std::move(probs);
  e.target.respondent_count = 100;
  return e;
}

/// Random distribution with some exact zeros.
inline std::vector<double> random_distribution(std::mt19937_64& rng, std::size_t n, bool allow_zeros = true) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(n);
  double s = 0.0;
  for (auto& v : p) {
    v = (allow_zeros && u(rng) < 0.2) ? 0.0 : u(rng);
    s += v;
  }
  if (s == 0.0) {
    p[0] = 1.0;
    s = 1.0;
  }
  for (auto& v : p) v /= s;
  return p;
}

// ---------------------------------------------------------------------------
// Oracles

/// Optimal transport cost between histograms on positions 0..n-1 with ground
/// distance |i-j|/(n-1), solved as a min-cost flow by successive shortest
/// paths (Bellman-Ford on the residual graph). Shares no code with the
/// closed form.
inline double transport_oracle(const std::vector<double>& p, const std::vector<double>& q) {
  const std::size_t n = p.size();
  if (n < 2) return 0.0;
  std::vector<double> supply = p;
  std::vector<double> demand = q;
  std::vector<std::vector<double>> flow(n, std::vector<double>(n, 0.0));
  auto cost = [&](std::size_t i, std::size_t j) {
    return std::abs(static_cast<double>(i) - static_cast<double>(j)) / static_cast<double>(n - 1);
  };
  // Nodes: sources 0..n-1, sinks n..2n-1.
  const double eps = 1e-15;
  for (int iter = 0; iter < 1000; ++iter) {
    double left = 0.0;
    for (double s : supply) left += s;
    if (left <= eps) break;
    const std::size_t N = 2 * n;
    std::vector<double> dist(N, std::numeric_limits<double>::infinity());
    std::vector<long> prev(N, -1);
    for (std::size_t i = 0; i < n; ++i) {
      if (supply[i] > eps) dist[i] = 0.0;
    }
    for (std::size_t round = 0; round < N; ++round) {
      bool changed = false;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          // forward edge source i -> sink j (uncapacitated)
          if (dist[i] + cost(i, j) < dist[n + j] - 1e-18) {
            dist[n + j] = dist[i] + cost(i, j);
            prev[n + j] = static_cast<long>(i);
            changed = true;
          }
          // residual edge sink j -> source i
          if (flow[i][j] > eps && dist[n + j] - cost(i, j) < dist[i] - 1e-18) {
            dist[i] = dist[n + j] - cost(i, j);
            prev[i] = static_cast<long>(n + j);
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    std::size_t best = N;
    for (std::size_t j = 0; j < n; ++j) {
      if (demand[j] > eps && (best == N || dist[n + j] < dist[best])) best = n + j;
    }
    if (best == N || !std::isfinite(dist[best])) break;
    // Bottleneck along the path.
    double amount = demand[best - n];
    std::size_t v = best;
    while (prev[v] != -1) {
      const auto u = static_cast<std::size_t>(prev[v]);
      if (u >= n) amount = std::min(amount, flow[v][u - n]);  // residual sink->source
      v = u;
    }
    amount = std::min(amount, supply[v]);
    const std::size_t start = v;
    v = best;
    while (prev[v] != -1) {
      const auto u = static_cast<std::size_t>(prev[v]);
      if (u < n) {
        flow[u][v - n] += amount;
      } else {
        flow[v][u - n] -= amount;
      }
      v = u;
    }
    supply[start] -= amount;
    demand[best - n] -= amount;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) total += flow[i][j] * cost(i, j);
  }
  return total;
}

/// Norm-relative error max-normalized, with an absolute floor for tiny vectors.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::max({std::sqrt(na), std::sqrt(nb), 1e-8});
  return std::sqrt(diff) / scale;
}

/// Central differences of f at x.
template <typename F>
std::vector<double> numeric_gradient(F&& f, std::vector<double> x, double h = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// exp-normalize without max shift; only for moderate logits.
inline std::vector<double> naive_softmax(const std::vector<double>& z) {
  std::vector<double> p(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += p[i] = std::exp(z[i]);
  for (auto& v : p) v /= s;
  return p;
}

}  // namespace surveysim::testing
