// SPDX-License-Identifier: Apache-2.0
#include "surveysim/survey_data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "surveysim/errors.hpp"

namespace surveysim {

namespace {

using nlohmann::json;

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Codes may be written as JSON numbers or strings; both compare as text.
std::string code_string(const json& v) {
  if (v.is_string()) return trim(v.get<std::string>());
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) {
    std::ostringstream os;
    os << v.get<double>();
    return os.str();
  }
  throw ConfigError("codebook: answer code must be a string or number");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json parse_json_file(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void sort_data(SurveyData& data) {
  std::sort(data.questions.begin(), data.questions.end(),
            [](const auto& a, const auto& b) { return a.question_id < b.question_id; });
  std::sort(data.distributions.begin(), data.distributions.end(), [](const auto& a, const auto& b) {
    return std::tie(a.question_id, a.group) < std::tie(b.question_id, b.group);
  });
}

void normalize(std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  for (double& x : v) x /= sum;
}

template <typename T>
bool contains(const std::vector<T>& v, const T& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

}  // namespace

std::size_t DataReport::count(std::string_view kind) const {
  return static_cast<std::size_t>(
      std::count_if(items.begin(), items.end(), [&](const ReportItem& i) { return i.kind == kind; }));
}

const SurveyQuestion* SurveyData::find_question(int question_id) const {
  for (const auto& q : questions) {
    if (q.question_id == question_id) return &q;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------

Codebook Codebook::from_json(const json& j) {
  Codebook cb;
  try {
    cb.survey_id = j.value("survey_id", cb.survey_id);
    cb.country_column = j.value("country_column", cb.country_column);
    if (j.contains("country_names")) {
      for (const auto& [code, name] : j.at("country_names").items()) {
        cb.country_names[trim(code)] = trim(name.get<std::string>());
      }
    }
    if (j.contains("ignore_codes")) {
      for (const auto& c : j.at("ignore_codes")) cb.ignore_codes.push_back(code_string(c));
    }
    for (const auto& qj : j.at("questions")) {
      CodebookQuestion q;
      q.id = qj.at("id").get<int>();
      q.column = qj.value("column", "Q" + std::to_string(q.id));
      q.text = qj.at("text").get<std::string>();
      q.dimension = qj.value("dimension", "");
      for (const auto& oj : qj.at("options")) {
        q.options.push_back({code_string(oj.at("code")), oj.at("label").get<std::string>()});
      }
      cb.questions.push_back(std::move(q));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("codebook: ") + e.what());
  }
  return cb;
}

SurveyData parse_survey(const CsvTable& raw, const Codebook& codebook) {
  SurveyData data;
  data.survey_id = codebook.survey_id;
  const std::size_t country_col = raw.column(codebook.country_column);

  auto country_of = [&](const std::string& cell) {
    const std::string code = trim(cell);
    const auto it = codebook.country_names.find(code);
    return it == codebook.country_names.end() ? code : it->second;
  };

  for (const auto& row : raw.rows) {
    const std::string country = country_of(row[country_col]);
    if (!country.empty()) ++data.group_respondents[country];
  }

  for (const auto& cq : codebook.questions) {
    std::set<std::string> labels;
    std::set<std::string> codes;
    bool duplicate = false;
    for (const auto& o : cq.options) {
      const std::string label = trim(o.label);
      duplicate |= label.empty() || !labels.insert(label).second || !codes.insert(o.code).second;
    }
    if (duplicate) {
      data.report.add("question_dropped",
                      "Q" + std::to_string(cq.id) + ": empty or duplicate option label/code");
      continue;
    }
    if (cq.options.size() < 2) {
      data.report.add("question_dropped", "Q" + std::to_string(cq.id) + ": fewer than 2 options");
      continue;
    }
    std::size_t col = 0;
    try {
      col = raw.column(cq.column);
    } catch (const ValidationError&) {
      data.report.add("question_dropped", "Q" + std::to_string(cq.id) + ": column " + cq.column +
                                              " missing from raw data");
      continue;
    }

    std::map<std::string, std::size_t> index_of;
    for (std::size_t i = 0; i < cq.options.size(); ++i) index_of[cq.options[i].code] = i;

    std::map<std::string, std::vector<long>> counts;
    for (std::size_t r = 0; r < raw.rows.size(); ++r) {
      const auto& row = raw.rows[r];
      const std::string country = country_of(row[country_col]);
      if (country.empty()) continue;
      const std::string code = trim(row[col]);
      if (code.empty()) continue;
      const auto it = index_of.find(code);
      if (it == index_of.end()) {
        if (contains(codebook.ignore_codes, code)) {
          ++data.report.ignored_answers;
        } else {
          ++data.report.skipped_answers;
          data.report.add("unknown_code", "row " + std::to_string(r + 2) + " Q" +
                                              std::to_string(cq.id) + ": code '" + code + "'");
        }
        continue;
      }
      auto& c = counts[country];
      if (c.empty()) c.assign(cq.options.size(), 0);
      ++c[it->second];
    }

    SurveyQuestion q;
    q.question_id = cq.id;
    q.text = trim(cq.text);
    q.dimension = cq.dimension;
    q.survey_id = codebook.survey_id;
    for (const auto& o : cq.options) q.options.push_back(trim(o.label));
    data.questions.push_back(q);

    for (const auto& [country, c] : counts) {
      long total = 0;
      for (long v : c) total += v;
      ResponseDistribution d;
      d.group = country;
      d.question_id = cq.id;
      d.respondent_count = total;
      d.probs.reserve(c.size());
      for (long v : c) d.probs.push_back(static_cast<double>(v) / static_cast<double>(total));
      data.distributions.push_back(std::move(d));
    }
  }
  sort_data(data);
  return data;
}

SurveyData load_microdata(const std::string& csv_path, const std::string& codebook_path) {
  return parse_survey(read_csv_file(csv_path), Codebook::from_json(parse_json_file(codebook_path)));
}

SurveyData parse_aggregated(const json& j) {
  SurveyData data;
  try {
    data.survey_id = j.value("survey_id", "PEW");
    for (const auto& qj : j.at("questions")) {
      SurveyQuestion q;
      q.question_id = qj.at("id").get<int>();
      q.text = trim(qj.at("text").get<std::string>());
      q.dimension = qj.value("dimension", "");
      q.survey_id = data.survey_id;
      for (const auto& o : qj.at("options")) q.options.push_back(trim(o.get<std::string>()));
      const std::set<std::string> unique(q.options.begin(), q.options.end());
      if (q.options.size() < 2 || unique.size() != q.options.size() || unique.contains("")) {
        data.report.add("question_dropped",
                        "Q" + std::to_string(q.question_id) + ": fewer than 2 distinct options");
        continue;
      }
      for (const auto& [country_raw, pj] : qj.at("distributions").items()) {
        const std::string country = trim(country_raw);
        auto probs = pj.get<std::vector<double>>();
        if (probs.size() != q.options.size()) {
          data.report.add("distribution_dropped", "Q" + std::to_string(q.question_id) + " " +
                                                      country + ": length mismatch");
          continue;
        }
        double sum = 0.0;
        bool bad = false;
        for (double v : probs) {
          bad |= !(v >= 0.0) || !std::isfinite(v);
          sum += v;
        }
        if (bad || sum <= 0.0) {
          data.report.add("distribution_dropped", "Q" + std::to_string(q.question_id) + " " +
                                                      country + ": invalid probabilities");
          continue;
        }
        normalize(probs);
        ResponseDistribution d;
        d.group = country;
        d.question_id = q.question_id;
        d.probs = std::move(probs);
        if (qj.contains("respondents") && qj.at("respondents").contains(country_raw)) {
          d.respondent_count = qj.at("respondents").at(country_raw).get<long>();
        }
        data.distributions.push_back(std::move(d));
      }
      data.questions.push_back(std::move(q));
    }
    if (j.contains("group_respondents")) {
      for (const auto& [country, n] : j.at("group_respondents").items()) {
        data.group_respondents[trim(country)] = n.get<long>();
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("aggregated survey: ") + e.what());
  }
  // Without explicit totals a group's size is its largest per-question count.
  for (const auto& d : data.distributions) {
    if (j.contains("group_respondents") && j.at("group_respondents").contains(d.group)) continue;
    auto& total = data.group_respondents[d.group];
    total = std::max(total, d.respondent_count);
  }
  sort_data(data);
  return data;
}

SurveyData load_aggregated(const std::string& path) { return parse_aggregated(parse_json_file(path)); }

// ---------------------------------------------------------------------------

SurveyData filter_countries(const SurveyData& data, long min_respondents) {
  SurveyData out;
  out.survey_id = data.survey_id;
  out.questions = data.questions;
  out.report = data.report;
  for (const auto& [group, n] : data.group_respondents) {
    if (n > min_respondents) {
      out.group_respondents[group] = n;
    } else {
      out.report.add("country_filtered",
                     group + ": " + std::to_string(n) + " respondents, need more than " +
                         std::to_string(min_respondents));
    }
  }
  for (const auto& d : data.distributions) {
    if (out.group_respondents.contains(d.group)) out.distributions.push_back(d);
  }
  if (out.group_respondents.empty()) out.report.add("empty_result", "no country passed the filter");
  return out;
}

InvalidOptionPolicy InvalidOptionPolicy::extended() {
  InvalidOptionPolicy p;
  p.labels.push_back("don't know");
  p.labels.push_back("no answer");
  return p;
}

bool InvalidOptionPolicy::is_invalid(std::string_view option) const {
  const std::string needle = lower(trim(option));
  return std::any_of(labels.begin(), labels.end(),
                     [&](const std::string& l) { return lower(trim(l)) == needle; });
}

std::optional<StripResult> strip_invalid_options(const SurveyQuestion& question,
                                                 const std::vector<ResponseDistribution>& dists,
                                                 const InvalidOptionPolicy& policy,
                                                 DataReport& report) {
  const std::string qname = "Q" + std::to_string(question.question_id);
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < question.options.size(); ++i) {
    if (!policy.is_invalid(question.options[i])) keep.push_back(i);
  }
  if (keep.size() < 2) {
    report.add("question_dropped", qname + ": fewer than 2 valid options");
    return std::nullopt;
  }

  StripResult result;
  result.question = question;
  result.question.options.clear();
  for (std::size_t i : keep) result.question.options.push_back(question.options[i]);

  for (const auto& d : dists) {
    ResponseDistribution cleaned = d;
    cleaned.probs.clear();
    double mass = 0.0;
    for (std::size_t i : keep) {
      cleaned.probs.push_back(d.probs.at(i));
      mass += d.probs.at(i);
    }
    if (!(mass > 0.0)) {
      report.add("distribution_dropped", qname + " " + d.group + ": no mass on valid options");
      continue;
    }
    normalize(cleaned.probs);
    result.distributions.push_back(std::move(cleaned));
  }
  if (result.distributions.empty() && !dists.empty()) {
    report.add("question_dropped", qname + ": no distribution keeps mass on valid options");
    return std::nullopt;
  }
  return result;
}

SurveyData strip_invalid_options(const SurveyData& data, const InvalidOptionPolicy& policy) {
  SurveyData out;
  out.survey_id = data.survey_id;
  out.group_respondents = data.group_respondents;
  out.report = data.report;
  for (const auto& q : data.questions) {
    std::vector<ResponseDistribution> dists;
    for (const auto& d : data.distributions) {
      if (d.question_id == q.question_id) dists.push_back(d);
    }
    auto stripped = strip_invalid_options(q, dists, policy, out.report);
    if (!stripped) continue;
    out.questions.push_back(std::move(stripped->question));
    for (auto& d : stripped->distributions) out.distributions.push_back(std::move(d));
  }
  sort_data(out);
  return out;
}

// ---------------------------------------------------------------------------

SplitConfig SplitConfig::from_json(const json& j) {
  SplitConfig c;
  try {
    c.c1 = j.value("C1", std::vector<std::string>{});
    c.c2 = j.value("C2", std::vector<std::string>{});
    c.c3 = j.value("C3", std::vector<std::string>{});
    c.q1 = j.value("Q1", std::vector<int>{});
    c.q2 = j.value("Q2", std::vector<int>{});
    c.q3 = j.value("Q3", std::vector<int>{});
    c.exclude_questions = j.value("exclude_questions", std::vector<int>{});
  } catch (const json::exception& e) {
    throw ConfigError(std::string("splits: ") + e.what());
  }
  return c;
}

std::vector<SubsetAssignment> DatasetSplits::standard_assignments() {
  return {{"train", "C1", "Q1"},  {"valid", "C1", "Q2"}, {"C1-Q3", "C1", "Q3"}, {"C2-Q1", "C2", "Q1"},
          {"C2-Q3", "C2", "Q3"}, {"C3-Q1", "C3", "Q1"}, {"C3-Q3", "C3", "Q3"}};
}

std::size_t SplitResult::entry_count(const std::string& subset) const {
  const auto it = subsets.find(subset);
  return it == subsets.end() ? 0 : it->second.size();
}

namespace {

std::vector<std::string> present_countries(const std::vector<std::string>& listed,
                                           const std::set<std::string>& available,
                                           const std::string& set_name, DataReport& report) {
  std::set<std::string> out;
  for (const auto& raw : listed) {
    const std::string c = trim(raw);
    if (available.contains(c)) {
      out.insert(c);
    } else {
      report.add("country_missing", set_name + ": " + c + " has no data");
    }
  }
  return {out.begin(), out.end()};
}

std::vector<int> present_questions(const std::vector<int>& listed, const std::set<int>& available,
                                   const std::string& set_name, DataReport& report) {
  std::set<int> out;
  for (int id : listed) {
    if (available.contains(id)) {
      out.insert(id);
    } else {
      report.add("question_missing", set_name + ": Q" + std::to_string(id) + " has no data");
    }
  }
  return {out.begin(), out.end()};
}

template <typename T>
bool intersects(const std::vector<T>& a, const std::vector<T>& b) {
  return std::any_of(a.begin(), a.end(), [&](const T& x) { return contains(b, x); });
}

}  // namespace

SplitResult build_splits(const SurveyData& data, const SplitConfig& config) {
  SplitResult result;
  std::set<std::string> countries;
  for (const auto& d : data.distributions) countries.insert(d.group);
  std::set<int> question_ids;
  for (const auto& q : data.questions) question_ids.insert(q.question_id);

  for (const auto& name : config.c1) {
    if (contains(config.c2, name) || contains(config.c3, name)) {
      throw ConfigError("splits: " + name + " is listed in C1 and in C2/C3");
    }
  }
  const auto excluded = [&](int id) { return contains(config.exclude_questions, id); };
  for (const auto* pair : {&config.q2, &config.q3, &config.q1}) {
    for (int id : *pair) {
      if (excluded(id)) throw ConfigError("splits: Q" + std::to_string(id) + " is excluded and assigned");
    }
  }
  if (intersects(config.q2, config.q3) || intersects(config.q1, config.q2) ||
      intersects(config.q1, config.q3)) {
    throw ConfigError("splits: question sets must be pairwise disjoint");
  }

  auto c2 = present_countries(config.c2, countries, "C2", result.report);
  auto c3 = present_countries(config.c3, countries, "C3", result.report);
  std::vector<std::string> c1;
  if (config.c1.empty()) {
    for (const auto& c : countries) {
      if (!contains(c2, c) && !contains(c3, c)) c1.push_back(c);
    }
  } else {
    c1 = present_countries(config.c1, countries, "C1", result.report);
  }

  auto q2 = present_questions(config.q2, question_ids, "Q2", result.report);
  auto q3 = present_questions(config.q3, question_ids, "Q3", result.report);
  std::vector<int> q1;
  if (config.q1.empty()) {
    for (int id : question_ids) {
      if (!contains(q2, id) && !contains(q3, id) && !excluded(id)) q1.push_back(id);
    }
  } else {
    q1 = present_questions(config.q1, question_ids, "Q1", result.report);
  }

  auto& s = result.splits;
  s.country_sets = {{"C1", c1}, {"C2", c2}, {"C3", c3}};
  s.question_sets = {{"Q1", q1}, {"Q2", q2}, {"Q3", q3}};
  s.assignments = DatasetSplits::standard_assignments();

  std::map<std::pair<std::string, int>, const ResponseDistribution*> lookup;
  for (const auto& d : data.distributions) lookup[{d.group, d.question_id}] = &d;

  for (const auto& a : s.assignments) {
    auto& entries = result.subsets[a.name];
    for (const auto& country : s.country_sets.at(a.country_set)) {
      for (int qid : s.question_sets.at(a.question_set)) {
        const auto it = lookup.find({country, qid});
        if (it == lookup.end()) continue;
        entries.push_back({*data.find_question(qid), country, *it->second});
      }
    }
  }
  return result;
}

std::vector<Entry> build_group_entries(const SurveyData& data,
                                       const std::vector<std::string>& countries) {
  std::set<std::string> wanted;
  for (const auto& c : countries) wanted.insert(trim(c));
  std::map<std::pair<std::string, int>, const ResponseDistribution*> lookup;
  for (const auto& d : data.distributions) {
    if (wanted.contains(d.group)) lookup[{d.group, d.question_id}] = &d;
  }
  std::vector<Entry> entries;
  for (const auto& [key, d] : lookup) {
    entries.push_back({*data.find_question(key.second), key.first, *d});
  }
  return entries;
}

// ---------------------------------------------------------------------------

json entry_to_json(const Entry& e, const std::string& subset) {
  json j;
  j["survey_id"] = e.question.survey_id;
  j["question_id"] = e.question.question_id;
  j["country"] = e.group;
  j["question_text"] = e.question.text;
  j["options"] = e.question.options;
  j["target_probs"] = e.target.probs;
  j["dimension"] = e.question.dimension;
  j["subset"] = subset;
  return j;
}

DatasetRow entry_from_json(const json& j) {
  DatasetRow row;
  try {
    row.subset = j.at("subset").get<std::string>();
    auto& q = row.entry.question;
    q.survey_id = j.at("survey_id").get<std::string>();
    q.question_id = j.at("question_id").get<int>();
    q.text = j.at("question_text").get<std::string>();
    q.options = j.at("options").get<std::vector<std::string>>();
    q.dimension = j.value("dimension", "");
    row.entry.group = j.at("country").get<std::string>();
    row.entry.target.group = row.entry.group;
    row.entry.target.question_id = q.question_id;
    row.entry.target.probs = j.at("target_probs").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("dataset row: ") + e.what());
  }
  if (row.entry.target.probs.size() != row.entry.question.options.size()) {
    throw ValidationError("dataset row: target_probs length differs from options");
  }
  return row;
}

std::string write_dataset_jsonl(const SplitResult& result) {
  std::string out;
  for (const auto& a : result.splits.assignments) {
    const auto it = result.subsets.find(a.name);
    if (it == result.subsets.end()) continue;
    for (const auto& e : it->second) {
      out += entry_to_json(e, a.name).dump();
      out += '\n';
    }
  }
  return out;
}

std::vector<DatasetRow> read_dataset_jsonl(const std::string& text) {
  std::vector<DatasetRow> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      rows.push_back(entry_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw ConfigError("dataset line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

std::map<std::string, std::vector<Entry>> group_by_subset(const std::vector<DatasetRow>& rows) {
  std::map<std::string, std::vector<Entry>> out;
  for (const auto& r : rows) out[r.subset].push_back(r.entry);
  return out;
}

}  // namespace surveysim
