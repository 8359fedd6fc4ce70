// SPDX-License-Identifier: Apache-2.0
#include "surveysim/eval_harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "surveysim/csv.hpp"
#include "surveysim/distribution_metrics.hpp"
#include "surveysim/errors.hpp"

namespace surveysim {

using nlohmann::json;

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kNormal:
      return "normal";
    case Variant::kCtrl:
      return "ctrl";
    case Variant::kShuffled:
      return "shuffled";
  }
  return "?";
}

Variant variant_from_string(const std::string& name) {
  if (name == "normal") return Variant::kNormal;
  if (name == "ctrl") return Variant::kCtrl;
  if (name == "shuffled") return Variant::kShuffled;
  throw ConfigError("unknown variant '" + name + "' (expected normal, ctrl or shuffled)");
}

std::string EvalResult::row_label() const {
  switch (variant) {
    case Variant::kNormal:
      return predictor_id;
    case Variant::kCtrl:
      return predictor_id + " [ctrl]";
    case Variant::kShuffled:
      return predictor_id + " [shuffled]";
  }
  return predictor_id;
}

json EntryPrediction::to_json() const {
  json j{{"record_id", record_id},
         {"subset", subset},
         {"variant", surveysim::to_string(variant)},
         {"predictor", predictor_id},
         {"displayed_country", displayed_country},
         {"permutation", permutation},
         {"target", target},
         {"status", ok ? "ok" : "failed"}};
  if (ok) {
    j["probs"] = probs;
    j["one_minus_jsd"] = one_minus_jsd;
    j["emd"] = emd;
    j["correct"] = correct;
  } else {
    j["error"] = error;
  }
  return j;
}

EntryPrediction EntryPrediction::from_json(const json& j) {
  EntryPrediction e;
  try {
    e.record_id = j.at("record_id").get<std::string>();
    e.subset = j.at("subset").get<std::string>();
    e.variant = variant_from_string(j.at("variant").get<std::string>());
    e.predictor_id = j.at("predictor").get<std::string>();
    e.displayed_country = j.at("displayed_country").get<std::string>();
    e.permutation = j.at("permutation").get<std::vector<std::size_t>>();
    e.target = j.at("target").get<std::vector<double>>();
    e.ok = j.at("status").get<std::string>() == "ok";
    if (e.ok) {
      e.probs = j.at("probs").get<std::vector<double>>();
      e.one_minus_jsd = j.at("one_minus_jsd").get<double>();
      e.emd = j.at("emd").get<double>();
      e.correct = j.at("correct").get<bool>();
    } else {
      e.error = j.value("error", "");
    }
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("prediction line: ") + ex.what());
  }
  return e;
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

EntryPrediction score(const PromptRecord& record, Prediction prediction, const std::string& subset, Variant variant,
                      const std::string& predictor_id) {
  EntryPrediction e;
  e.record_id = record.record_id;
  e.subset = subset;
  e.variant = variant;
  e.predictor_id = predictor_id;
  e.displayed_country = record.displayed_country();
  e.permutation = record.permutation;
  e.target = record.entry.target.probs;
  if (prediction.ok) {
    try {
      if (prediction.probs.size() != e.target.size()) {
        throw ValidationError("prediction has " + std::to_string(prediction.probs.size()) + " options, expected " +
                              std::to_string(e.target.size()));
      }
      validate_distribution(prediction.probs, 1e-6);
      e.one_minus_jsd = one_minus_jsd(prediction.probs, e.target);
      e.emd = emd(prediction.probs, e.target);
      e.correct = argmax(prediction.probs) == argmax(e.target);
      e.probs = std::move(prediction.probs);
    } catch (const ValidationError& ex) {
      prediction.ok = false;
      prediction.error = std::string("invalid prediction: ") + ex.what();
    }
  }
  e.ok = prediction.ok;
  if (!e.ok) {
    e.error = prediction.error;
    e.probs.clear();
  }
  return e;
}

Prediction safe_predict(Predictor& predictor, const PromptRecord& record) {
  try {
    return predictor.predict(record);
  } catch (const BackendError& e) {
    return Prediction::failure(e.what());
  } catch (const ValidationError& e) {
    return Prediction::failure(e.what());
  }
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace

EvalResult aggregate(const std::vector<EntryPrediction>& entries, const std::string& predictor_id,
                     const std::string& subset, Variant variant) {
  EvalResult r;
  r.predictor_id = predictor_id;
  r.subset = subset;
  r.variant = variant;
  double jsd_sum = 0.0;
  double emd_sum = 0.0;
  long hits = 0;
  for (const auto& e : entries) {
    if (!e.ok) {
      ++r.failures;
      continue;
    }
    ++r.entry_count;
    jsd_sum += e.one_minus_jsd;
    emd_sum += e.emd;
    hits += e.correct ? 1 : 0;
  }
  if (r.entry_count == 0) {
    throw ValidationError("no successful predictions for " + predictor_id + " on " + subset);
  }
  const auto n = static_cast<double>(r.entry_count);
  r.mean_one_minus_jsd = jsd_sum / n;
  r.mean_emd = emd_sum / n;
  r.accuracy = static_cast<double>(hits) / n;
  return r;
}

EvalOutcome evaluate(Predictor& predictor, const std::vector<Entry>& entries, const EvalOptions& options) {
  if (entries.empty()) throw ValidationError("evaluate: empty subset " + options.subset);
  std::vector<PromptRecord> records;
  records.reserve(entries.size());
  for (const auto& e : entries) records.push_back(build_prompt(e, options.prompt_template));

  std::vector<std::string> pool = options.country_pool;
  if (pool.empty()) {
    std::set<std::string> countries;
    for (const auto& e : entries) countries.insert(e.group);
    pool.assign(countries.begin(), countries.end());
  }
  if (options.variant == Variant::kCtrl) {
    records = apply_control_permutation(records, pool, options.seed, options.prompt_template);
  } else if (options.variant == Variant::kShuffled) {
    for (std::size_t i = 0; i < records.size(); ++i) {
      records[i] = shuffle_options(records[i], mix_seed(options.seed, i), options.prompt_template);
    }
  }

  std::vector<Prediction> predictions(records.size());
  const std::size_t workers =
      predictor.reentrant() ? std::clamp<std::size_t>(static_cast<std::size_t>(std::max(options.parallelism, 1)), 1,
                                                     records.size())
                            : 1;
  if (workers <= 1) {
    for (std::size_t i = 0; i < records.size(); ++i) predictions[i] = safe_predict(predictor, records[i]);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        for (std::size_t i = w; i < records.size(); i += workers) predictions[i] = safe_predict(predictor, records[i]);
      });
    }
    for (auto& t : threads) t.join();
  }

  EvalOutcome out;
  out.entries.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    out.entries.push_back(score(records[i], std::move(predictions[i]), options.subset, options.variant, predictor.id()));
  }
  out.result = aggregate(out.entries, predictor.id(), options.subset, options.variant);
  out.result.run_metadata = predictor.metadata();
  out.result.run_metadata["seed"] = options.seed;
  out.result.run_metadata["variant"] = to_string(options.variant);
  out.result.run_metadata["template_version"] = options.prompt_template.version;
  if (options.variant == Variant::kCtrl) {
    out.result.run_metadata["ctrl_scoring"] = "original country target";
    out.result.run_metadata["ctrl_pool_size"] = pool.size();
    out.result.run_metadata["ctrl_self_draws_allowed"] = true;
  }
  return out;
}

// ---------------------------------------------------------------------------

Prediction UniformPredictor::predict(const PromptRecord& record) {
  const std::size_t n = record.option_count();
  return {std::vector<double>(n, 1.0 / static_cast<double>(n)), true, {}};
}

DisplayedCountryOracle::DisplayedCountryOracle(const std::vector<Entry>& entries) {
  for (const auto& e : entries) targets_[{e.group, e.question.question_id}] = e.target.probs;
}

Prediction DisplayedCountryOracle::predict(const PromptRecord& record) {
  const auto it = targets_.find({record.displayed_country(), record.entry.question.question_id});
  if (it == targets_.end() || it->second.size() != record.option_count()) {
    return Prediction::failure("no target for " + record.displayed_country());
  }
  std::vector<double> probs(record.option_count());
  for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = it->second[record.permutation[i]];
  return {probs, true, {}};
}

// ---------------------------------------------------------------------------

EvalResult average_row(const std::vector<EvalResult>& row) {
  if (row.empty()) throw ValidationError("average of empty row");
  EvalResult avg;
  avg.predictor_id = row.front().predictor_id;
  avg.variant = row.front().variant;
  avg.subset = "Avg.";
  avg.run_metadata = {{"aggregation", "unweighted mean of subset means"}};
  for (const auto& r : row) {
    if (r.status != "ok") {
      avg.status = "unavailable";
      return avg;
    }
    avg.mean_one_minus_jsd += r.mean_one_minus_jsd;
    avg.mean_emd += r.mean_emd;
    avg.accuracy += r.accuracy;
    avg.entry_count += r.entry_count;
    avg.failures += r.failures;
  }
  const auto n = static_cast<double>(row.size());
  avg.mean_one_minus_jsd /= n;
  avg.mean_emd /= n;
  avg.accuracy /= n;
  return avg;
}

MatrixReport run_matrix(Predictor& zero_shot, Predictor* fine_tuned,
                        const std::map<std::string, std::vector<Entry>>& subsets,
                        const std::vector<std::string>& subset_order, const EvalOptions& base) {
  MatrixReport report;
  const std::vector<MatrixCell> rows{
      {"ZS", Variant::kCtrl}, {"ZS", Variant::kNormal}, {"FT", Variant::kCtrl}, {"FT", Variant::kNormal}};
  for (const auto& cell : rows) {
    Predictor* predictor = cell.method == "ZS" ? &zero_shot : fine_tuned;
    std::vector<EvalResult> row;
    for (const auto& subset : subset_order) {
      EvalResult r;
      r.predictor_id = cell.method;
      r.subset = subset;
      r.variant = cell.variant;
      const auto it = subsets.find(subset);
      if (predictor == nullptr || it == subsets.end() || it->second.empty()) {
        r.status = "unavailable";
        r.run_metadata = {{"reason", predictor == nullptr ? "no adapter" : "empty subset"}};
      } else {
        EvalOptions opts = base;
        opts.subset = subset;
        opts.variant = cell.variant;
        auto outcome = evaluate(*predictor, it->second, opts);
        r = outcome.result;
        r.predictor_id = cell.method;
        for (auto& e : outcome.entries) {
          e.predictor_id = cell.method;
          report.entries.push_back(std::move(e));
        }
      }
      row.push_back(r);
      report.results.push_back(r);
    }
    report.averages.push_back(average_row(row));
  }
  return report;
}

// ---------------------------------------------------------------------------

DiversityReport diversity_report(Predictor& predictor, const std::vector<Entry>& entries, const PromptTemplate& tmpl) {
  DiversityReport report;
  report.predictor_id = predictor.id();
  std::map<int, std::vector<const Entry*>> by_question;
  for (const auto& e : entries) by_question[e.question.question_id].push_back(&e);
  double human_sum = 0.0;
  double model_sum = 0.0;
  for (const auto& [qid, group] : by_question) {
    if (group.size() < 2) {
      report.skipped.push_back("Q" + std::to_string(qid) + ": fewer than 2 countries");
      continue;
    }
    std::vector<std::vector<double>> human;
    std::vector<std::vector<double>> model;
    bool failed = false;
    for (const Entry* e : group) {
      const auto record = build_prompt(*e, tmpl);
      auto p = safe_predict(predictor, record);
      if (!p.ok || p.probs.size() != record.option_count()) {
        failed = true;
        break;
      }
      human.push_back(e->target.probs);
      model.push_back(std::move(p.probs));
    }
    if (failed) {
      report.skipped.push_back("Q" + std::to_string(qid) + ": prediction failed");
      continue;
    }
    QuestionDiversity q{qid, group.size(), diversity_profile(human), diversity_profile(model)};
    human_sum += q.human;
    model_sum += q.model;
    report.questions.push_back(q);
  }
  if (!report.questions.empty()) {
    report.human_mean = human_sum / static_cast<double>(report.questions.size());
    report.model_mean = model_sum / static_cast<double>(report.questions.size());
  }
  return report;
}

std::pair<EvalResult, EvalResult> pew_generalization(Predictor& predictor, const std::vector<Entry>& c1_prime,
                                                     const std::vector<Entry>& c3, const EvalOptions& base) {
  EvalOptions a = base;
  a.subset = "Pew-C1'";
  EvalOptions b = base;
  b.subset = "Pew-C3";
  return {evaluate(predictor, c1_prime, a).result, evaluate(predictor, c3, b).result};
}

// ---------------------------------------------------------------------------

std::string results_markdown(const std::vector<EvalResult>& results, const std::vector<std::string>& subset_order,
                             const std::string& title) {
  std::vector<std::string> rows;
  std::map<std::pair<std::string, std::string>, const EvalResult*> cells;
  std::vector<std::string> columns = subset_order;
  for (const auto& r : results) {
    const auto label = r.row_label();
    if (std::find(rows.begin(), rows.end(), label) == rows.end()) rows.push_back(label);
    if (std::find(columns.begin(), columns.end(), r.subset) == columns.end()) columns.push_back(r.subset);
    cells[{label, r.subset}] = &r;
  }
  std::ostringstream os;
  os << "# " << title << "\n";
  struct Metric {
    const char* name;
    double EvalResult::*field;
  };
  for (const Metric m : {Metric{"1-JSD (higher is better)", &EvalResult::mean_one_minus_jsd},
                         Metric{"EMD (lower is better)", &EvalResult::mean_emd},
                         Metric{"Argmax accuracy", &EvalResult::accuracy}}) {
    os << "\n## " << m.name << "\n\n| Method |";
    for (const auto& c : columns) os << ' ' << c << " |";
    os << "\n|---|";
    for (std::size_t i = 0; i < columns.size(); ++i) os << "---:|";
    os << '\n';
    for (const auto& row : rows) {
      os << "| " << row << " |";
      for (const auto& c : columns) {
        const auto it = cells.find({row, c});
        if (it == cells.end()) {
          os << " |";
        } else if (it->second->status != "ok") {
          os << " n/a |";
        } else {
          os << ' ' << fmt3(it->second->*m.field) << " |";
        }
      }
      os << '\n';
    }
  }
  os << "\nAvg. is the unweighted mean of the subset means. Under [ctrl] the prompt shows a randomly drawn "
        "country while scores use the original country's distribution.\n";
  return os.str();
}

std::string results_csv(const std::vector<EvalResult>& results) {
  std::ostringstream os;
  os << "predictor_id,subset,variant,mean_one_minus_jsd,mean_emd,accuracy,entry_count,failures,status\n";
  for (const auto& r : results) {
    os << csv_escape(r.predictor_id) << ',' << csv_escape(r.subset) << ',' << to_string(r.variant) << ','
       << fmt_double(r.mean_one_minus_jsd) << ',' << fmt_double(r.mean_emd) << ',' << fmt_double(r.accuracy) << ','
       << r.entry_count << ',' << r.failures << ',' << r.status << '\n';
  }
  return os.str();
}

std::vector<EvalResult> read_results_csv(const std::string& text) {
  std::istringstream in(text);
  const auto table = read_csv(in);
  std::vector<EvalResult> out;
  try {
    const auto c_pred = table.column("predictor_id");
    const auto c_subset = table.column("subset");
    const auto c_variant = table.column("variant");
    const auto c_jsd = table.column("mean_one_minus_jsd");
    const auto c_emd = table.column("mean_emd");
    const auto c_acc = table.column("accuracy");
    const auto c_n = table.column("entry_count");
    const auto c_fail = table.column("failures");
    const auto c_status = table.column("status");
    for (const auto& row : table.rows) {
      EvalResult r;
      r.predictor_id = row[c_pred];
      r.subset = row[c_subset];
      r.variant = variant_from_string(row[c_variant]);
      r.mean_one_minus_jsd = std::stod(row[c_jsd]);
      r.mean_emd = std::stod(row[c_emd]);
      r.accuracy = std::stod(row[c_acc]);
      r.entry_count = std::stol(row[c_n]);
      r.failures = std::stol(row[c_fail]);
      r.status = row[c_status];
      out.push_back(std::move(r));
    }
  } catch (const std::invalid_argument& e) {
    throw ValidationError(std::string("results.csv: bad number: ") + e.what());
  }
  return out;
}

std::string predictions_jsonl(const std::vector<EntryPrediction>& entries) {
  std::string out;
  for (const auto& e : entries) {
    out += e.to_json().dump();
    out += '\n';
  }
  return out;
}

std::vector<EntryPrediction> read_predictions_jsonl(const std::string& text) {
  std::vector<EntryPrediction> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(EntryPrediction::from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("predictions.jsonl: ") + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

const char* kPalette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7"};

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '&':
        out += "&amp;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::string accuracy_svg(const std::vector<EvalResult>& results, const std::vector<std::string>& subset_order) {
  std::vector<std::string> rows;
  std::vector<std::string> columns = subset_order;
  std::map<std::pair<std::string, std::string>, double> value;
  for (const auto& r : results) {
    if (r.status != "ok") continue;
    const auto label = r.row_label();
    if (std::find(rows.begin(), rows.end(), label) == rows.end()) rows.push_back(label);
    if (std::find(columns.begin(), columns.end(), r.subset) == columns.end()) columns.push_back(r.subset);
    value[{label, r.subset}] = r.accuracy;
  }
  const double width = 120.0 * static_cast<double>(std::max<std::size_t>(columns.size(), 1)) + 160.0;
  const double height = 320.0;
  const double plot_h = 240.0;
  const double group_w = 120.0;
  const double bar_w = rows.empty() ? 0.0 : 90.0 / static_cast<double>(rows.size());
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  os << "<text x=\"10\" y=\"16\" font-size=\"13\">Argmax accuracy vs human majority option</text>\n";
  os << "<line x1=\"40\" y1=\"" << 20 + plot_h << "\" x2=\"" << 40 + group_w * columns.size() << "\" y2=\""
     << 20 + plot_h << "\" stroke=\"black\"/>\n";
  for (std::size_t c = 0; c < columns.size(); ++c) {
    const double gx = 40.0 + group_w * static_cast<double>(c) + 15.0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto it = value.find({rows[r], columns[c]});
      if (it == value.end()) continue;
      const double h = plot_h * it->second;
      os << "<rect x=\"" << gx + bar_w * static_cast<double>(r) << "\" y=\"" << 20 + plot_h - h << "\" width=\""
         << bar_w * 0.9 << "\" height=\"" << h << "\" fill=\"" << kPalette[r % 8] << "\"><title>"
         << xml_escape(rows[r]) << ' ' << xml_escape(columns[c]) << ": " << fmt3(it->second) << "</title></rect>\n";
    }
    os << "<text x=\"" << gx << "\" y=\"" << 36 + plot_h << "\" font-size=\"11\">" << xml_escape(columns[c])
       << "</text>\n";
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double lx = 50.0 + group_w * static_cast<double>(columns.size());
    os << "<rect x=\"" << lx << "\" y=\"" << 30 + 16 * r << "\" width=\"10\" height=\"10\" fill=\"" << kPalette[r % 8]
       << "\"/><text x=\"" << lx + 14 << "\" y=\"" << 39 + 16 * r << "\" font-size=\"11\">" << xml_escape(rows[r])
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string diversity_svg(const DiversityReport& report) {
  auto qs = report.questions;
  std::stable_sort(qs.begin(), qs.end(), [](const auto& a, const auto& b) { return a.human < b.human; });
  const double width = 640.0;
  const double height = 320.0;
  const double plot_w = 560.0;
  const double plot_h = 240.0;
  auto x_of = [&](std::size_t i) {
    return 50.0 + (qs.size() > 1 ? plot_w * static_cast<double>(i) / static_cast<double>(qs.size() - 1) : 0.0);
  };
  auto y_of = [&](double v) { return 20.0 + plot_h * (1.0 - v); };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  os << "<text x=\"10\" y=\"16\" font-size=\"13\">Cross-country diversity per question (mean pairwise 1-JSD; "
        "lower = more diverse)</text>\n";
  if (!qs.empty()) {
    os << "<polygon fill=\"#bab0ac\" fill-opacity=\"0.4\" points=\"";
    for (std::size_t i = 0; i < qs.size(); ++i) os << x_of(i) << ',' << y_of(qs[i].human) << ' ';
    for (std::size_t i = qs.size(); i-- > 0;) os << x_of(i) << ',' << y_of(qs[i].model) << ' ';
    os << "\"/>\n";
    for (const auto& [name, color, is_human] :
         {std::tuple<std::string, std::string, bool>{"human", "#4e79a7", true},
          std::tuple<std::string, std::string, bool>{xml_escape(report.predictor_id), "#e15759", false}}) {
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
      for (std::size_t i = 0; i < qs.size(); ++i) os << x_of(i) << ',' << y_of(is_human ? qs[i].human : qs[i].model) << ' ';
      os << "\"><title>" << name << "</title></polyline>\n";
    }
  }
  os << "<text x=\"50\" y=\"" << 40 + plot_h << "\" font-size=\"11\">human mean " << fmt3(report.human_mean)
     << ", model mean " << fmt3(report.model_mean) << "</text>\n";
  os << "</svg>\n";
  return os.str();
}

ReportFiles emit_report(const std::vector<EvalResult>& results, const std::string& format, const std::string& out_dir,
                        const std::vector<std::string>& subset_order, const std::string& title,
                        const std::optional<DiversityReport>& diversity) {
  static const std::set<std::string> kFormats{"markdown", "csv", "svg", "all"};
  if (!kFormats.contains(format)) throw ConfigError("unknown report format '" + format + "'");
  if (results.empty()) throw ConfigError("emit_report: no results");
  std::filesystem::create_directories(out_dir);
  ReportFiles files;
  auto write = [&](const std::string& name, const std::string& text) {
    const auto path = (std::filesystem::path(out_dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << text;
    files.written.push_back(path);
  };
  const bool all = format == "all";
  if (all || format == "markdown") write("report.md", results_markdown(results, subset_order, title));
  if (all || format == "csv") write("results.csv", results_csv(results));
  if (all || format == "svg") {
    write("accuracy.svg", accuracy_svg(results, subset_order));
    if (diversity) write("diversity.svg", diversity_svg(*diversity));
  }
  return files;
}

}  // namespace surveysim
