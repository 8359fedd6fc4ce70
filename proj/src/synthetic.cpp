// SPDX-License-Identifier: Apache-2.0
#include "surveysim/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "surveysim/errors.hpp"
#include "surveysim/random.hpp"

namespace surveysim {

using nlohmann::json;

namespace {

double normal(std::mt19937_64& rng) { return standard_normal(rng); }

std::size_t categorical(std::mt19937_64& rng, const std::vector<double>& probs) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return probs.size() - 1;
}

const char* kNames[] = {"Aldovia", "Borsk",   "Calmera", "Dunmoor", "Estrava", "Fenmark",
                        "Galdor",  "Hestova", "Ithmar",  "Jorvale", "Kestria", "Lunara"};

const char* kTopics[] = {"family",  "work",     "religion", "politics", "leisure",  "friends",
                         "science", "tradition", "the environment", "neighbours", "security", "money"};

std::vector<std::string> scale_labels(int n) {
  switch (n) {
    case 2:
      return {"Yes", "No"};
    case 3:
      return {"Agree", "Neither agree nor disagree", "Disagree"};
    case 4:
      return {"Very important", "Rather important", "Not very important", "Not at all important"};
    case 5:
      return {"Strongly agree", "Agree", "Neither agree nor disagree", "Disagree", "Strongly disagree"};
    default: {
      std::vector<std::string> out;
      for (int i = 1; i <= n; ++i) out.push_back("Level " + std::to_string(i));
      return out;
    }
  }
}

std::vector<double> softmax(const std::vector<double>& z) {
  double m = z[0];
  for (double v : z) m = std::max(m, v);
  std::vector<double> p(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += p[i] = std::exp(z[i] - m);
  for (double& v : p) v /= s;
  return p;
}

}  // namespace

std::string country_name(int index) {
  if (index < static_cast<int>(std::size(kNames))) return kNames[index];
  char buf[32];
  std::snprintf(buf, sizeof(buf), "Region %02d", index + 1);
  return buf;
}

SyntheticConfig SyntheticConfig::from_json(const json& j) {
  SyntheticConfig c;
  try {
    c.survey_id = j.value("survey_id", c.survey_id);
    c.countries = j.value("countries", c.countries);
    c.questions = j.value("questions", c.questions);
    c.min_options = j.value("min_options", c.min_options);
    c.max_options = j.value("max_options", c.max_options);
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    c.respondents = j.value("respondents", c.respondents);
    c.question_scale = j.value("question_scale", c.question_scale);
    c.shared_scale = j.value("shared_scale", c.shared_scale);
    c.bias_scale = j.value("bias_scale", c.bias_scale);
    c.seed = j.value("seed", c.seed);
    c.missing_rate = j.value("missing_rate", c.missing_rate);
    c.unknown_code_rate = j.value("unknown_code_rate", c.unknown_code_rate);
    c.not_applicable_questions = j.value("not_applicable_questions", c.not_applicable_questions);
    c.single_option_questions = j.value("single_option_questions", c.single_option_questions);
    c.small_country_respondents = j.value("small_country_respondents", c.small_country_respondents);
    c.blank_cells = j.value("blank_cells", c.blank_cells);
    c.not_applicable_cells = j.value("not_applicable_cells", c.not_applicable_cells);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synthetic: ") + e.what());
  }
  if (c.countries < 1 || c.questions < 1) throw ConfigError("synthetic: need at least one country and question");
  if (c.min_options < 2 || c.max_options < c.min_options || c.max_options > 25) {
    throw ConfigError("synthetic: option counts must satisfy 2 <= min <= max <= 25");
  }
  if (c.feature_dim < 1 || c.respondents < 1) throw ConfigError("synthetic: feature_dim and respondents must be >= 1");
  for (const auto& cell : c.not_applicable_cells) {
    if (cell.second < 1 || cell.second > c.not_applicable_questions) {
      throw ConfigError("synthetic: not_applicable_cells must name a question with a Not applicable option");
    }
  }
  return c;
}

json SyntheticConfig::to_json() const {
  return {{"survey_id", survey_id},
          {"countries", countries},
          {"questions", questions},
          {"min_options", min_options},
          {"max_options", max_options},
          {"feature_dim", feature_dim},
          {"respondents", respondents},
          {"question_scale", question_scale},
          {"shared_scale", shared_scale},
          {"bias_scale", bias_scale},
          {"seed", seed},
          {"missing_rate", missing_rate},
          {"unknown_code_rate", unknown_code_rate},
          {"not_applicable_questions", not_applicable_questions},
          {"single_option_questions", single_option_questions},
          {"small_country_respondents", small_country_respondents},
          {"blank_cells", blank_cells},
          {"not_applicable_cells", not_applicable_cells}};
}

SyntheticSurvey generate_survey(const SyntheticConfig& config) {
  SyntheticSurvey s;
  s.config = config;
  std::mt19937_64 rng(config.seed);
  const int total_countries = config.countries + static_cast<int>(config.small_country_respondents.size());
  const auto d = static_cast<std::size_t>(config.feature_dim);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  for (int c = 0; c < total_countries; ++c) {
    s.countries.push_back(country_name(c));
    std::vector<double> f(d);
    for (double& v : f) v = normal(rng);
    s.features.push_back(std::move(f));
  }

  // Shared component: one weight row per option position.
  const auto max_opts = static_cast<std::size_t>(config.max_options) + 1;
  std::vector<std::vector<double>> shared(max_opts, std::vector<double>(d));
  std::vector<double> position_bias(max_opts);
  for (std::size_t i = 0; i < max_opts; ++i) {
    position_bias[i] = config.bias_scale * normal(rng);
    for (double& w : shared[i]) w = config.shared_scale * normal(rng);
  }

  struct GenQuestion {
    int id;
    std::string column;
    std::vector<std::string> labels;
    bool has_na;
    std::vector<std::vector<double>> probs;  // per country
  };
  std::vector<GenQuestion> questions;
  const int span = config.max_options - config.min_options + 1;
  for (int q = 0; q < config.questions; ++q) {
    GenQuestion g;
    g.id = q + 1;
    g.column = "Q" + std::to_string(g.id);
    const int n = config.min_options + static_cast<int>(rng() % static_cast<std::uint64_t>(span));
    g.labels = scale_labels(n);
    g.has_na = q < config.not_applicable_questions;
    std::vector<double> bias(static_cast<std::size_t>(n));
    std::vector<std::vector<double>> w(static_cast<std::size_t>(n), std::vector<double>(d));
    for (int i = 0; i < n; ++i) {
      bias[static_cast<std::size_t>(i)] = config.bias_scale * normal(rng);
      for (double& v : w[static_cast<std::size_t>(i)]) v = config.question_scale * normal(rng);
    }
    for (int c = 0; c < total_countries; ++c) {
      const auto& f = s.features[static_cast<std::size_t>(c)];
      std::vector<double> z(static_cast<std::size_t>(n));
      for (std::size_t i = 0; i < z.size(); ++i) {
        double acc = position_bias[i] + bias[i];
        for (std::size_t k = 0; k < d; ++k) acc += (w[i][k] + shared[i][k]) * f[k] * inv_sqrt_d;
        z[i] = acc;
      }
      auto p = softmax(z);
      if (g.has_na) {
        for (double& v : p) v *= 0.95;
        p.push_back(0.05);
      }
      g.probs.push_back(std::move(p));
    }
    if (g.has_na) g.labels.push_back("Not applicable");
    s.question_ids.push_back(g.id);
    questions.push_back(std::move(g));
  }
  for (int k = 0; k < config.single_option_questions; ++k) {
    GenQuestion g;
    g.id = config.questions + k + 1;
    g.column = "Q" + std::to_string(g.id);
    g.labels = {"Yes"};
    g.has_na = false;
    g.probs.assign(static_cast<std::size_t>(total_countries), std::vector<double>{1.0});
    questions.push_back(std::move(g));
  }

  // Codebook.
  json cb{{"survey_id", config.survey_id}, {"country_column", "country"}, {"ignore_codes", {"-1"}}};
  json qs = json::array();
  for (const auto& g : questions) {
    json opts = json::array();
    for (std::size_t i = 0; i < g.labels.size(); ++i) opts.push_back({{"code", std::to_string(i + 1)}, {"label", g.labels[i]}});
    const std::string topic = kTopics[static_cast<std::size_t>(g.id - 1) % std::size(kTopics)];
    qs.push_back({{"id", g.id},
                  {"column", g.column},
                  {"text", "Item " + std::to_string(g.id) + ": how do you feel about " + topic + " in daily life?"},
                  {"dimension", topic},
                  {"options", opts}});
  }
  cb["questions"] = qs;
  s.codebook = cb;

  // Respondent rows.
  s.microdata.header.push_back("country");
  for (const auto& g : questions) s.microdata.header.push_back(g.column);
  for (int c = 0; c < total_countries; ++c) {
    const int n_resp = c < config.countries
                           ? config.respondents
                           : config.small_country_respondents[static_cast<std::size_t>(c - config.countries)];
    for (int r = 0; r < n_resp; ++r) {
      std::vector<std::string> row{s.countries[static_cast<std::size_t>(c)]};
      for (const auto& g : questions) {
        const std::size_t choice = categorical(rng, g.probs[static_cast<std::size_t>(c)]);
        const double u = uniform01(rng);
        const std::pair<int, int> cell{c, g.id};
        if (std::find(config.blank_cells.begin(), config.blank_cells.end(), cell) != config.blank_cells.end()) {
          row.push_back("-1");
        } else if (std::find(config.not_applicable_cells.begin(), config.not_applicable_cells.end(), cell) !=
                   config.not_applicable_cells.end()) {
          row.push_back(std::to_string(g.labels.size()));
        } else if (u < config.missing_rate) {
          row.push_back("-1");
        } else if (u < config.missing_rate + config.unknown_code_rate) {
          row.push_back("99");
        } else {
          row.push_back(std::to_string(choice + 1));
        }
      }
      s.microdata.rows.push_back(std::move(row));
    }
  }
  return s;
}

json SyntheticSurvey::toy_fixture() const {
  json features = json::object();
  for (std::size_t c = 0; c < countries.size(); ++c) features[countries[c]] = this->features[c];
  return {{"variant", "embedding"}, {"country_features", features}};
}

SurveyData SyntheticSurvey::ingest() const { return parse_survey(microdata, Codebook::from_json(codebook)); }

void write_survey_files(const SyntheticSurvey& survey, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream out(fs::path(dir) / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (fs::path(dir) / name).string());
    return out;
  };
  {
    auto out = open("microdata.csv");
    auto write_row = [&](const std::vector<std::string>& row) {
      for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << csv_escape(row[i]);
      out << '\n';
    };
    write_row(survey.microdata.header);
    for (const auto& row : survey.microdata.rows) write_row(row);
  }
  open("codebook.json") << survey.codebook.dump(2) << '\n';
  open("toy_backend.json") << survey.toy_fixture().dump(2) << '\n';
}

}  // namespace surveysim
