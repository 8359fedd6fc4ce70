// SPDX-License-Identifier: Apache-2.0
#include "surveysim/cli.hpp"

#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "surveysim/alignment_trainer.hpp"
#include "surveysim/baselines.hpp"
#include "surveysim/errors.hpp"
#include "surveysim/eval_harness.hpp"
#include "surveysim/hashing.hpp"
#include "surveysim/model_backend.hpp"
#include "surveysim/prompting.hpp"
#include "surveysim/survey_data.hpp"
#include "surveysim/synthetic.hpp"

namespace surveysim::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string command;
  std::string config_path;
  std::string out_dir;
  std::string adapter;
  std::string predictors = "knn,avg_culture,uniform";
  std::string losses = "KL,JS,WA,CE";
  std::string results_path;
  std::string format = "all";
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
};

const std::set<std::string> kSections{"data", "splits", "prompting", "backend", "train", "eval", "out_dir"};

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Inputs produced by earlier runs; a missing one is a runtime failure.
std::string read_artifact(const fs::path& p) {
  if (!fs::exists(p)) throw ValidationError("missing input " + p.string());
  return read_text(p);
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
}

/// `a.b.c=value`; the value is parsed as JSON when possible, else kept as a string.
void apply_set(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &config;
  std::string part;
  std::istringstream parts(key);
  std::vector<std::string> path;
  while (std::getline(parts, part, '.')) path.push_back(part);
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    if (!node->contains(path[i])) (*node)[path[i]] = json::object();
    node = &(*node)[path[i]];
    if (!node->is_object()) throw ConfigError("--set " + key + ": '" + path[i] + "' is not a section");
  }
  (*node)[path.back()] = value;
}

struct Run {
  std::string command;
  json config;
  fs::path base_dir;
  fs::path out_dir;
  PromptTemplate tmpl = PromptTemplate::defaults();
  TrainConfig train;
  std::optional<SyntheticSurvey> synthetic;
  SplitResult split;
  std::vector<std::string> countries;  // every country with data, sorted
  std::string dataset_jsonl;
  std::string dataset_hash;
  std::shared_ptr<spdlog::logger> log;

  fs::path resolve(const std::string& p) const {
    if (p.empty() || fs::path(p).is_absolute()) return p;
    return base_dir / p;
  }
};

json load_config(const Options& opt) {
  if (opt.config_path.empty()) throw ConfigError("--config is required");
  json config;
  try {
    config = json::parse(read_text(opt.config_path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + opt.config_path + ": " + e.what());
  }
  if (!config.is_object()) throw ConfigError("config: top level must be an object");
  for (const auto& s : opt.sets) apply_set(config, s);
  if (opt.seed) {
    config["train"]["seed"] = *opt.seed;
    config["eval"]["seed"] = *opt.seed;
  }
  if (!opt.out_dir.empty()) config["out_dir"] = opt.out_dir;
  for (const auto& [k, v] : config.items()) {
    if (!kSections.contains(k)) throw ConfigError("config: unknown section '" + k + "'");
    if (k != "out_dir" && !v.is_object()) throw ConfigError("config: section '" + k + "' must be an object");
  }
  return config;
}

InvalidOptionPolicy policy_from(const json& j) {
  if (j.is_null() || j == "default") return InvalidOptionPolicy{};
  if (j == "extended") return InvalidOptionPolicy::extended();
  if (j == "none") return InvalidOptionPolicy{{}};
  if (j.is_array()) {
    InvalidOptionPolicy p{{}};
    for (const auto& v : j) p.labels.push_back(v.get<std::string>());
    return p;
  }
  throw ConfigError("data.invalid_options must be default, extended, none or a list of labels");
}

void load_dataset(Run& run) {
  const json data = run.config.value("data", json::object());
  const std::string kind = data.value("kind", "");
  if (kind == "dataset") {
    const auto rows = read_dataset_jsonl(read_text(run.resolve(data.value("path", ""))));
    run.split.subsets = group_by_subset(rows);
  } else {
    SurveyData survey;
    if (kind == "microdata") {
      survey = load_microdata(run.resolve(data.value("microdata", "")).string(),
                              run.resolve(data.value("codebook", "")).string());
    } else if (kind == "aggregated") {
      survey = load_aggregated(run.resolve(data.value("path", "")).string());
    } else if (kind == "synthetic") {
      run.synthetic = generate_survey(SyntheticConfig::from_json(data.value("synthetic", json::object())));
      survey = run.synthetic->ingest();
    } else {
      throw ConfigError("data.kind must be microdata, aggregated, synthetic or dataset (got '" + kind + "')");
    }
    long min_respondents = 0;
    try {
      min_respondents = data.value("min_respondents", 0L);
    } catch (const json::exception&) {
      throw ConfigError("data.min_respondents must be an integer");
    }
    survey = filter_countries(survey, min_respondents);
    survey = strip_invalid_options(survey, policy_from(data.value("invalid_options", json())));
    run.split = build_splits(survey, SplitConfig::from_json(run.config.value("splits", json::object())));
    for (const auto& item : survey.report.items) run.log->info("data {}: {}", item.kind, item.detail);
    for (const auto& item : run.split.report.items) run.log->info("split {}: {}", item.kind, item.detail);
  }
  std::set<std::string> countries;
  for (const auto& [name, entries] : run.split.subsets) {
    for (const auto& e : entries) countries.insert(e.group);
  }
  run.countries.assign(countries.begin(), countries.end());
  std::string text;
  std::vector<std::string> order;
  for (const auto& a : DatasetSplits::standard_assignments()) order.push_back(a.name);
  for (const auto& [name, entries] : run.split.subsets) {
    if (std::find(order.begin(), order.end(), name) == order.end()) order.push_back(name);
  }
  for (const auto& name : order) {
    const auto it = run.split.subsets.find(name);
    if (it == run.split.subsets.end()) continue;
    for (const auto& e : it->second) text += entry_to_json(e, name).dump() + "\n";
  }
  run.dataset_jsonl = std::move(text);
  run.dataset_hash = hash_hex(run.dataset_jsonl);
}

Run prepare(const Options& opt) {
  Run run;
  run.command = opt.command;
  run.config = load_config(opt);
  run.base_dir = fs::absolute(opt.config_path).parent_path();
  run.out_dir = run.resolve(run.config.value("out_dir", "out"));
  fs::create_directories(run.out_dir);

  std::vector<spdlog::sink_ptr> sinks;
  auto file_sink = std::make_shared<spdlog::sinks::basic_file_sink_mt>((run.out_dir / "run.log").string(), true);
  file_sink->set_level(spdlog::level::info);
  auto err_sink = std::make_shared<spdlog::sinks::stderr_sink_mt>();
  err_sink->set_level(spdlog::level::warn);
  sinks.push_back(file_sink);
  sinks.push_back(err_sink);
  run.log = std::make_shared<spdlog::logger>("surveysim", sinks.begin(), sinks.end());
  run.log->set_level(spdlog::level::info);
  run.log->flush_on(spdlog::level::info);
  run.log->info("command {} config {}", opt.command, opt.config_path);

  const json prompting = run.config.value("prompting", json::object());
  if (prompting.contains("template")) run.tmpl = PromptTemplate::load(run.resolve(prompting.at("template")).string());
  run.train = TrainConfig::from_json(run.config.value("train", json::object()));
  return run;
}

std::unique_ptr<Backend> make_run_backend(const Run& run) {
  const json section = run.config.value("backend", json::object());
  const std::string kind = section.value("kind", "");
  if (kind != "toy_table" && kind != "toy_embedding") {
    return make_backend(section, run.train.adapter_overrides(), run.base_dir.string());
  }
  json spec = json::object();
  if (section.contains("fixture")) {
    try {
      spec = json::parse(read_text(run.resolve(section.at("fixture").get<std::string>())));
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("backend.fixture: ") + e.what());
    }
  } else if (section.contains("fixture_inline")) {
    spec = section.at("fixture_inline");
  }
  if (run.synthetic && !spec.contains("country_features")) spec["country_features"] = run.synthetic->toy_fixture()["country_features"];
  const json overrides = run.train.adapter_overrides();
  for (const auto& [k, v] : overrides.items()) spec[k] = v;
  for (const char* key : {"adapter_rank", "adapter_alpha", "adapter_dropout"}) {
    if (section.contains(key)) spec[key] = section.at(key);
  }
  spec["variant"] = kind == "toy_table" ? "table" : "embedding";
  auto model = ToyModelSpec::from_json(spec);
  model.prompt_template = run.tmpl;
  return std::make_unique<ToyBackend>(std::move(model), section.value("fixture", kind));
}

std::vector<PromptRecord> records_for(const Run& run, const std::string& subset) {
  std::vector<PromptRecord> out;
  const auto it = run.split.subsets.find(subset);
  if (it == run.split.subsets.end()) return out;
  for (const auto& e : it->second) out.push_back(build_prompt(e, run.tmpl));
  return out;
}

std::vector<std::string> eval_subsets(const Run& run) {
  const json ev = run.config.value("eval", json::object());
  if (ev.contains("subsets")) return ev.at("subsets").get<std::vector<std::string>>();
  return kTestSubsets;
}

EvalOptions base_eval_options(const Run& run) {
  const json ev = run.config.value("eval", json::object());
  EvalOptions o;
  o.seed = ev.value("seed", std::uint64_t{0});
  o.parallelism = ev.value("parallelism", 1);
  o.prompt_template = run.tmpl;
  o.country_pool = run.countries;
  return o;
}

json base_metadata(const Run& run) {
  const char* cache = std::getenv(kModelCacheEnv);
  return {{"command", run.command},
          {"config", run.config},
          {"config_hash", hash_hex(run.config.dump())},
          {"dataset_hash", run.dataset_hash},
          {"prompt_template", {{"version", run.tmpl.version}, {"hash", hash_hex(run.tmpl.serialize())}}},
          {"model_cache_env", kModelCacheEnv},
          {"model_cache_dir", cache ? json(cache) : json(nullptr)},
          {"avg_column", "unweighted mean of subset means"},
          {"ctrl_scoring", "original country target"}};
}

void write_outputs(const Run& run, const std::vector<EvalResult>& results, const std::vector<EntryPrediction>& preds,
                   const std::vector<std::string>& subset_order, const std::string& title, json metadata,
                   const std::optional<DiversityReport>& diversity) {
  write_text(run.out_dir / "predictions.jsonl", predictions_jsonl(preds));
  emit_report(results, "all", run.out_dir.string(), subset_order, title, diversity);
  if (diversity) {
    json d{{"predictor", diversity->predictor_id},
           {"human_mean", diversity->human_mean},
           {"model_mean", diversity->model_mean},
           {"skipped", diversity->skipped}};
    json qs = json::array();
    for (const auto& q : diversity->questions) {
      qs.push_back({{"question_id", q.question_id}, {"countries", q.countries}, {"human", q.human}, {"model", q.model}});
    }
    d["questions"] = qs;
    write_text(run.out_dir / "diversity.json", d.dump(2) + "\n");
  }
  json per_result = json::array();
  for (const auto& r : results) {
    per_result.push_back({{"row", r.row_label()}, {"subset", r.subset}, {"status", r.status}, {"metadata", r.run_metadata}});
  }
  metadata["results"] = per_result;
  write_text(run.out_dir / "run_metadata.json", metadata.dump(2) + "\n");
}

// ---------------------------------------------------------------------------

int cmd_build_data(const Options& opt) {
  Run run = prepare(opt);
  load_dataset(run);
  write_text(run.out_dir / "dataset.jsonl", run.dataset_jsonl);
  json summary{{"countries", json::object()}, {"questions", json::object()}, {"entries", json::object()}};
  for (const auto& [name, list] : run.split.splits.country_sets) summary["countries"][name] = list.size();
  for (const auto& [name, list] : run.split.splits.question_sets) summary["questions"][name] = list.size();
  for (const auto& [name, entries] : run.split.subsets) summary["entries"][name] = entries.size();
  write_text(run.out_dir / "split_summary.json", summary.dump(2) + "\n");
  json meta = base_metadata(run);
  meta["split_summary"] = summary;
  write_text(run.out_dir / "run_metadata.json", meta.dump(2) + "\n");

  std::cout << "set      size\n";
  for (const auto& [name, n] : summary["countries"].items()) std::cout << name << "       " << n.get<std::size_t>() << " countries\n";
  for (const auto& [name, n] : summary["questions"].items()) std::cout << name << "       " << n.get<std::size_t>() << " questions\n";
  std::cout << "subset   entries\n";
  for (const auto& a : DatasetSplits::standard_assignments()) {
    std::cout << a.name << "  " << run.split.entry_count(a.name) << '\n';
  }
  std::cout << "wrote " << (run.out_dir / "dataset.jsonl").string() << '\n';
  return 0;
}

TrainingLog train_one(Run& run, Backend& backend, const TrainConfig& config) {
  const auto train_records = records_for(run, "train");
  const auto valid_records = records_for(run, "valid");
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochRecord& e) {
    run.log->info("epoch {} loss {:.6f} valid 1-JSD {}", e.epoch, e.mean_train_loss,
                  e.valid_one_minus_jsd ? std::to_string(*e.valid_one_minus_jsd) : "n/a");
    return true;
  };
  auto log = train(backend, train_records, valid_records, config, hooks);
  run.log->info("training {} after {} epochs (best epoch {})", log.status, log.epochs.size(), log.best_epoch);
  return log;
}

int cmd_train(const Options& opt) {
  Run run = prepare(opt);
  load_dataset(run);
  auto backend = make_run_backend(run);
  auto log = train_one(run, *backend, run.train);
  const fs::path adapter = run.out_dir / "adapter.json";
  backend->save_adapter(adapter.string());
  log.adapter_path = "adapter.json";
  write_text(run.out_dir / "training_log.jsonl", log.to_jsonl(false));
  json meta = base_metadata(run);
  meta["adapter"] = adapter_metadata(run.train, run.dataset_hash, backend->descriptor());
  meta["base_weights_hash"] = backend->base_weights_hash();
  meta["training"] = {{"status", log.status}, {"best_epoch", log.best_epoch}, {"wall_clock_seconds", log.wall_clock_seconds}};
  write_text(run.out_dir / "adapter_meta.json", meta["adapter"].dump(2) + "\n");
  write_text(run.out_dir / "run_metadata.json", meta.dump(2) + "\n");
  std::cout << "training " << log.status << ", best epoch " << log.best_epoch;
  if (log.best_valid_one_minus_jsd) std::cout << ", valid 1-JSD " << *log.best_valid_one_minus_jsd;
  std::cout << "\nwrote " << adapter.string() << '\n';
  return 0;
}

std::vector<Entry> diversity_entries(const Run& run, const std::vector<std::string>& subsets) {
  std::vector<Entry> out;
  std::set<std::pair<std::string, int>> seen;
  for (const auto& name : subsets) {
    const auto it = run.split.subsets.find(name);
    if (it == run.split.subsets.end()) continue;
    for (const auto& e : it->second) {
      if (seen.insert({e.group, e.question.question_id}).second) out.push_back(e);
    }
  }
  return out;
}

int cmd_eval(const Options& opt) {
  Run run = prepare(opt);
  load_dataset(run);
  const json ev = run.config.value("eval", json::object());
  auto zs_backend = make_run_backend(run);
  BackendPredictor zs(*zs_backend, "ZS");

  std::string adapter = opt.adapter.empty() ? ev.value("adapter", "") : opt.adapter;
  if (adapter.empty() && fs::exists(run.out_dir / "adapter.json")) adapter = (run.out_dir / "adapter.json").string();
  std::unique_ptr<Backend> ft_backend;
  std::unique_ptr<BackendPredictor> ft;
  if (!adapter.empty()) {
    ft_backend = make_run_backend(run);
    ft_backend->load_adapter(run.resolve(adapter).string());
    ft = std::make_unique<BackendPredictor>(*ft_backend, "FT");
  } else {
    run.log->warn("no adapter given; FT rows are unavailable");
  }

  const auto subsets = eval_subsets(run);
  const auto base = base_eval_options(run);
  auto matrix = run_matrix(zs, ft.get(), run.split.subsets, subsets, base);
  std::vector<EvalResult> results;
  const std::size_t width = subsets.size();
  for (std::size_t r = 0; r < matrix.averages.size(); ++r) {
    for (std::size_t c = 0; c < width; ++c) results.push_back(matrix.results[r * width + c]);
    results.push_back(matrix.averages[r]);
  }
  auto entries = std::move(matrix.entries);
  Predictor& best = ft ? static_cast<Predictor&>(*ft) : static_cast<Predictor&>(zs);

  if (ev.value("shuffled", false)) {
    std::vector<EvalResult> row;
    for (const auto& subset : subsets) {
      const auto it = run.split.subsets.find(subset);
      if (it == run.split.subsets.end() || it->second.empty()) continue;
      EvalOptions o = base;
      o.subset = subset;
      o.variant = Variant::kShuffled;
      auto outcome = evaluate(best, it->second, o);
      row.push_back(outcome.result);
      entries.insert(entries.end(), outcome.entries.begin(), outcome.entries.end());
    }
    if (!row.empty()) {
      results.insert(results.end(), row.begin(), row.end());
      results.push_back(average_row(row));
    }
  }

  if (ev.contains("pew")) {
    const json pew = ev.at("pew");
    const auto survey = load_aggregated(run.resolve(pew.value("path", "")).string());
    const auto c1p = build_group_entries(survey, pew.value("c1_prime", std::vector<std::string>{}));
    const auto c3 = build_group_entries(survey, pew.value("c3", std::vector<std::string>{}));
    EvalOptions o = base;
    for (Predictor* p : {static_cast<Predictor*>(&zs), static_cast<Predictor*>(ft.get())}) {
      if (p == nullptr) continue;
      auto [a, b] = pew_generalization(*p, c1p, c3, o);
      results.push_back(a);
      results.push_back(b);
    }
  }

  std::optional<DiversityReport> diversity;
  if (ev.value("diversity", true)) {
    const auto div_entries = diversity_entries(run, subsets);
    if (!div_entries.empty()) diversity = diversity_report(best, div_entries, run.tmpl);
  }
  json meta = base_metadata(run);
  meta["adapter"] = adapter.empty() ? json(nullptr) : json(adapter);
  meta["backend"] = zs_backend->descriptor().to_json();
  write_outputs(run, results, entries, subsets, "Evaluation", meta, diversity);
  std::cout << results_markdown(results, subsets, "Evaluation");
  std::cout << "wrote " << run.out_dir.string() << '\n';
  return 0;
}

int cmd_baseline(const Options& opt) {
  Run run = prepare(opt);
  load_dataset(run);
  const auto train_it = run.split.subsets.find("train");
  const std::vector<Entry> train_entries = train_it == run.split.subsets.end() ? std::vector<Entry>{} : train_it->second;
  std::unique_ptr<Backend> backend;
  std::vector<std::unique_ptr<Predictor>> predictors;
  std::string name;
  std::istringstream list(opt.predictors);
  while (std::getline(list, name, ',')) {
    if (name == "knn") {
      predictors.push_back(std::make_unique<KnnPredictor>(train_entries, std::make_shared<HashingEmbedder>()));
    } else if (name == "avg_culture") {
      predictors.push_back(std::make_unique<AvgCulturePredictor>(train_entries));
    } else if (name == "uniform") {
      predictors.push_back(std::make_unique<UniformPredictor>());
    } else if (name == "json_zs" || name == "zs") {
      if (!backend) backend = make_run_backend(run);
      if (name == "json_zs") {
        predictors.push_back(std::make_unique<JsonZsPredictor>(*backend, run.tmpl));
      } else {
        predictors.push_back(std::make_unique<BackendPredictor>(*backend, "ZS"));
      }
    } else {
      throw ConfigError("--predictor: unknown baseline '" + name + "' (knn, avg_culture, uniform, json_zs, zs)");
    }
  }
  const auto subsets = eval_subsets(run);
  const auto base = base_eval_options(run);
  std::vector<EvalResult> results;
  std::vector<EntryPrediction> entries;
  for (auto& p : predictors) {
    std::vector<EvalResult> row;
    for (const auto& subset : subsets) {
      const auto it = run.split.subsets.find(subset);
      EvalResult r;
      r.predictor_id = p->id();
      r.subset = subset;
      if (it == run.split.subsets.end() || it->second.empty()) {
        r.status = "unavailable";
      } else {
        EvalOptions o = base;
        o.subset = subset;
        try {
          auto outcome = evaluate(*p, it->second, o);
          r = outcome.result;
          entries.insert(entries.end(), outcome.entries.begin(), outcome.entries.end());
        } catch (const ValidationError& e) {
          run.log->warn("{} on {}: {}", p->id(), subset, e.what());
          r.status = "unavailable";
          r.run_metadata = {{"reason", e.what()}};
        }
      }
      row.push_back(r);
    }
    results.insert(results.end(), row.begin(), row.end());
    results.push_back(average_row(row));
  }
  json meta = base_metadata(run);
  meta["predictors"] = json::array();
  for (const auto& p : predictors) meta["predictors"].push_back(p->metadata());
  write_outputs(run, results, entries, subsets, "Baselines", meta, std::nullopt);
  std::cout << results_markdown(results, subsets, "Baselines");
  return 0;
}

int cmd_ablate(const Options& opt) {
  Run run = prepare(opt);
  load_dataset(run);
  std::vector<LossKind> losses;
  std::string name;
  std::istringstream list(opt.losses);
  while (std::getline(list, name, ',')) {
    if (!name.empty()) losses.push_back(loss_from_string(name));
  }
  if (losses.empty()) throw ConfigError("--losses: empty list");
  const auto subsets = eval_subsets(run);
  const auto base = base_eval_options(run);
  std::vector<EvalResult> results;
  std::vector<EntryPrediction> entries;
  json logs = json::object();

  auto evaluate_row = [&](Predictor& predictor, Variant variant) {
    std::vector<EvalResult> row;
    for (const auto& subset : subsets) {
      const auto it = run.split.subsets.find(subset);
      if (it == run.split.subsets.end() || it->second.empty()) continue;
      EvalOptions o = base;
      o.subset = subset;
      o.variant = variant;
      auto outcome = evaluate(predictor, it->second, o);
      row.push_back(outcome.result);
      entries.insert(entries.end(), outcome.entries.begin(), outcome.entries.end());
    }
    if (row.empty()) throw ValidationError("ablate: no evaluation subsets with entries");
    results.insert(results.end(), row.begin(), row.end());
    results.push_back(average_row(row));
  };

  std::unique_ptr<Backend> first_backend;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    TrainConfig config = run.train;
    config.loss = losses[i];
    auto backend = make_run_backend(run);
    run.log->info("ablation: training with {} loss", to_string(losses[i]));
    auto log = train_one(run, *backend, config);
    const std::string tag = to_string(losses[i]);
    write_text(run.out_dir / ("training_log_" + tag + ".jsonl"), log.to_jsonl(false));
    logs[tag] = {{"status", log.status}, {"best_epoch", log.best_epoch}};
    BackendPredictor predictor(*backend, "FT-" + tag);
    evaluate_row(predictor, Variant::kNormal);
    if (i == 0) first_backend = std::move(backend);
  }
  BackendPredictor shuffled(*first_backend, "FT-" + to_string(losses[0]));
  evaluate_row(shuffled, Variant::kShuffled);

  json meta = base_metadata(run);
  meta["ablation"] = logs;
  write_outputs(run, results, entries, subsets, "Ablation (1-JSD per loss; shuffled options on the first loss)", meta,
                std::nullopt);
  std::cout << results_markdown(results, subsets, "Ablation");
  return 0;
}

int cmd_report(const Options& opt) {
  if (opt.results_path.empty()) throw ConfigError("report: --results is required");
  const auto results = read_results_csv(read_artifact(opt.results_path));
  std::vector<std::string> order;
  for (const auto& r : results) {
    if (r.subset != "Avg." && std::find(order.begin(), order.end(), r.subset) == order.end()) order.push_back(r.subset);
  }
  const std::string out = opt.out_dir.empty() ? fs::path(opt.results_path).parent_path().string() : opt.out_dir;
  const auto files = emit_report(results, opt.format, out.empty() ? "." : out, order, "Results");
  for (const auto& f : files.written) std::cout << "wrote " << f << '\n';
  return 0;
}

}  // namespace

std::string usage() {
  return "usage: surveysim <command> --config <file.json> [options]\n"
         "\n"
         "commands:\n"
         "  build-data   ingest, clean and split a survey; writes dataset.jsonl\n"
         "  train        fine-tune the configured backend on the train split\n"
         "  eval         ZS/FT x normal/[ctrl] matrix over the test subsets\n"
         "  baseline     run reference predictors (--predictor knn,avg_culture,uniform,json_zs,zs)\n"
         "  ablate       train once per loss (--losses KL,JS,WA,CE) plus a shuffled-option row\n"
         "  report       re-emit tables and plots from results.csv (--results, --format)\n"
         "\n"
         "common options:\n"
         "  --config FILE     JSON config with sections data, splits, prompting, backend, train, eval\n"
         "  --out DIR         output directory (overrides out_dir)\n"
         "  --seed N          overrides train.seed and eval.seed\n"
         "  --set KEY=VALUE   overrides a config key, e.g. --set train.learning_rate=0.05\n"
         "\n"
         "exit codes: 0 ok, 1 runtime failure (see run.log), 2 bad command line or config\n";
}

int dispatch(const std::vector<std::string>& args) {
  Options opt;
  CLI::App app{"surveysim"};
  app.set_help_flag();
  app.require_subcommand(1);
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path);
    sub->add_option("--out", opt.out_dir);
    sub->add_option("--seed", opt.seed);
    sub->add_option("--set", opt.sets);
  };
  auto* build = app.add_subcommand("build-data");
  auto* train_cmd = app.add_subcommand("train");
  auto* eval_cmd = app.add_subcommand("eval");
  auto* baseline = app.add_subcommand("baseline");
  auto* ablate = app.add_subcommand("ablate");
  auto* report = app.add_subcommand("report");
  for (auto* sub : {build, train_cmd, eval_cmd, baseline, ablate}) add_common(sub);
  eval_cmd->add_option("--adapter", opt.adapter);
  baseline->add_option("--predictor", opt.predictors);
  ablate->add_option("--losses", opt.losses);
  report->add_option("--results", opt.results_path);
  report->add_option("--format", opt.format);
  report->add_option("--out", opt.out_dir);

  if (args.empty() || args[0] == "-h" || args[0] == "--help" || args[0] == "help") {
    std::cout << usage();
    return args.empty() ? kExitConfig : 0;
  }
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << usage();
    return kExitConfig;
  }
  opt.command = app.get_subcommands().front()->get_name();

  std::string log_hint;
  try {
    if (opt.command == "build-data") return cmd_build_data(opt);
    if (opt.command == "train") return cmd_train(opt);
    if (opt.command == "eval") return cmd_eval(opt);
    if (opt.command == "baseline") return cmd_baseline(opt);
    if (opt.command == "ablate") return cmd_ablate(opt);
    return cmd_report(opt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::string out = opt.out_dir;
    if (out.empty() && !opt.config_path.empty()) {
      try {
        const auto cfg = json::parse(read_text(opt.config_path));
        out = (fs::absolute(opt.config_path).parent_path() / cfg.value("out_dir", "out")).string();
      } catch (const std::exception&) {
      }
    }
    std::cerr << "error: " << e.what() << '\n';
    if (!out.empty()) std::cerr << "log: " << (fs::path(out) / "run.log").string() << '\n';
    return kExitRuntime;
  }
}

}  // namespace surveysim::cli
