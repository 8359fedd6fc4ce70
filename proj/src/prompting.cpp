// SPDX-License-Identifier: Apache-2.0
#include "surveysim/prompting.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "surveysim/errors.hpp"

namespace surveysim {

namespace {

std::string replace_all(std::string text, std::string_view key, std::string_view value) {
  std::size_t pos = 0;
  while ((pos = text.find(key, pos)) != std::string::npos) {
    text.replace(pos, key.size(), value);
    pos += value.size();
  }
  return text;
}

std::string fill(std::string text, const std::map<std::string, std::string>& values) {
  for (const auto& [k, v] : values) text = replace_all(std::move(text), "{" + k + "}", v);
  return text;
}

// Splits a one-placeholder template into the literal text before and after it.
std::optional<std::pair<std::string, std::string>> split_at(const std::string& tmpl,
                                                            std::string_view placeholder) {
  const auto pos = tmpl.find(placeholder);
  if (pos == std::string::npos) return std::nullopt;
  return std::make_pair(tmpl.substr(0, pos), tmpl.substr(pos + placeholder.size()));
}

std::optional<std::string> extract(const std::string& tmpl, std::string_view placeholder,
                                   std::string_view line) {
  const auto parts = split_at(tmpl, placeholder);
  if (!parts) return std::nullopt;
  const auto& [prefix, suffix] = *parts;
  if (line.size() < prefix.size() + suffix.size()) return std::nullopt;
  if (!line.starts_with(prefix) || !line.ends_with(suffix)) return std::nullopt;
  return std::string(line.substr(prefix.size(), line.size() - prefix.size() - suffix.size()));
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (true) {
    const auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.emplace_back(text.substr(start));
      break;
    }
    lines.emplace_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

std::string label_list(const PromptRecord& r) {
  std::string out;
  for (std::size_t i = 0; i < r.option_labels.size(); ++i) {
    if (i) out += ", ";
    out += r.option_labels[i];
  }
  return out;
}

std::string render_body(const PromptRecord& r, const PromptTemplate& t) {
  std::string text = fill(t.instruction, {{"country", r.displayed_country()}});
  text += '\n';
  text += fill(t.input, {{"question", r.entry.question.text}});
  for (std::size_t i = 0; i < r.option_labels.size(); ++i) {
    text += '\n';
    text += fill(t.option, {{"label", r.option_labels[i]}, {"option", r.entry.question.options[i]}});
  }
  return text;
}

}  // namespace

PromptTemplate PromptTemplate::defaults() {
  PromptTemplate t;
  t.instruction = "How would someone from {country} answer the following question:";
  t.input = "{question} Here are the options:";
  t.option = "({label}) {option}";
  t.format = "If had to select one of the options, my answer would be (";
  t.json_zs =
      "Estimate what percentage of people from {country} would choose each option. "
      "Answer only with a JSON object that maps each option letter ({label_list}) to a percentage.";
  t.json_retry = "Reply with the JSON object only, for example {\"A\": 40, \"B\": 60}.";
  return t;
}

PromptTemplate PromptTemplate::parse(std::string_view text) {
  PromptTemplate t;
  std::map<std::string, std::string> sections;
  std::string current;
  std::vector<std::string> body;
  auto flush = [&] {
    if (current.empty()) return;
    while (!body.empty() && body.back().empty()) body.pop_back();
    std::string joined;
    for (std::size_t i = 0; i < body.size(); ++i) {
      if (i) joined += '\n';
      joined += body[i];
    }
    sections[current] = joined;
    body.clear();
  };
  for (auto line : split_lines(text)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.size() > 2 && line.front() == '[' && line.back() == ']') {
      flush();
      current = line.substr(1, line.size() - 2);
      continue;
    }
    if (current.empty()) {
      if (line.empty() || line.front() == '#') continue;
      if (line.starts_with("version")) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("template: malformed version line");
        try {
          t.version = std::stoi(line.substr(eq + 1));
        } catch (const std::exception&) {
          throw ConfigError("template: malformed version line");
        }
        continue;
      }
      throw ConfigError("template: text outside a section: " + line);
    }
    body.push_back(line);
  }
  flush();
  const auto take = [&](const char* name, bool required) {
    const auto it = sections.find(name);
    if (it == sections.end()) {
      if (required) throw ConfigError(std::string("template: missing section [") + name + "]");
      return std::string();
    }
    return it->second;
  };
  const auto defaults = PromptTemplate::defaults();
  t.instruction = take("instruction", true);
  t.input = take("input", true);
  t.option = take("option", true);
  t.format = take("format", true);
  t.json_zs = sections.contains("json_zs") ? take("json_zs", false) : defaults.json_zs;
  t.json_retry = sections.contains("json_retry") ? take("json_retry", false) : defaults.json_retry;
  if (t.instruction.find("{country}") == std::string::npos) {
    throw ConfigError("template: [instruction] needs {country}");
  }
  if (t.input.find("{question}") == std::string::npos) {
    throw ConfigError("template: [input] needs {question}");
  }
  if (t.option.find("{label}") == std::string::npos || t.option.find("{option}") == std::string::npos) {
    throw ConfigError("template: [option] needs {label} and {option}");
  }
  return t;
}

PromptTemplate PromptTemplate::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open template " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse(os.str());
}

std::string PromptTemplate::serialize() const {
  std::ostringstream os;
  os << "version = " << version << "\n";
  os << "[instruction]\n" << instruction << "\n";
  os << "[input]\n" << input << "\n";
  os << "[option]\n" << option << "\n";
  os << "[format]\n" << format << "\n";
  os << "[json_zs]\n" << json_zs << "\n";
  os << "[json_retry]\n" << json_retry << "\n";
  return os.str();
}

std::optional<PromptTemplate::Parsed> PromptTemplate::parse_rendered(std::string_view text) const {
  const auto lines = split_lines(text);
  if (lines.size() < 4) return std::nullopt;
  Parsed parsed;
  auto country = extract(instruction, "{country}", lines[0]);
  auto question = extract(input, "{question}", lines[1]);
  if (!country || !question) return std::nullopt;
  parsed.country = std::move(*country);
  parsed.question = std::move(*question);

  // Option template "…{label}…{option}…": the label is one uppercase letter.
  const auto label_pos = option.find("{label}");
  const auto option_pos = option.find("{option}");
  if (label_pos > option_pos) return std::nullopt;
  const std::string head = option.substr(0, label_pos);
  const std::string mid = option.substr(label_pos + 7, option_pos - label_pos - 7);
  const std::string tail = option.substr(option_pos + 8);

  std::size_t i = 2;
  for (; i < lines.size(); ++i) {
    const std::string_view line = lines[i];
    const std::size_t fixed = head.size() + 1 + mid.size() + tail.size();
    if (line.size() < fixed || !line.starts_with(head)) break;
    const char label = line[head.size()];
    if (label < 'A' || label > 'Z') break;
    const auto rest = line.substr(head.size() + 1);
    if (!rest.starts_with(mid) || !rest.ends_with(tail)) break;
    parsed.labels.emplace_back(1, label);
    parsed.options.emplace_back(rest.substr(mid.size(), rest.size() - mid.size() - tail.size()));
  }
  if (parsed.options.empty()) return std::nullopt;
  return parsed;
}

// ---------------------------------------------------------------------------

std::string label_for(std::size_t index) {
  if (index >= kMaxOptions) throw UnsupportedQuestionError("option index beyond Z");
  return std::string(1, static_cast<char>('A' + index));
}

std::string record_id_for(const Entry& entry) {
  return entry.question.survey_id + "/Q" + std::to_string(entry.question.question_id) + "/" +
         entry.group;
}

std::string render_prompt(const PromptRecord& record, const PromptTemplate& tmpl) {
  return render_body(record, tmpl) + '\n' + tmpl.format;
}

std::string render_json_prompt(const PromptRecord& record, const PromptTemplate& tmpl, bool retry) {
  std::string text = render_body(record, tmpl);
  text += '\n';
  text += fill(tmpl.json_zs, {{"country", record.displayed_country()}, {"label_list", label_list(record)}});
  if (retry) {
    text += '\n';
    text += tmpl.json_retry;
  }
  return text;
}

PromptRecord build_prompt(const Entry& entry, const PromptTemplate& tmpl) {
  const std::size_t n = entry.question.options.size();
  if (n > kMaxOptions) {
    throw UnsupportedQuestionError(record_id_for(entry) + ": " + std::to_string(n) +
                                   " options, at most 26 supported");
  }
  if (entry.target.probs.size() != n) {
    throw ValidationError(record_id_for(entry) + ": target length differs from option count");
  }
  PromptRecord r;
  r.record_id = record_id_for(entry);
  r.entry = entry;
  for (std::size_t i = 0; i < n; ++i) r.option_labels.push_back(label_for(i));
  r.permutation.resize(n);
  std::iota(r.permutation.begin(), r.permutation.end(), std::size_t{0});
  r.rendered_text = render_prompt(r, tmpl);
  return r;
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  if (n == 0) throw ValidationError("uniform_index over empty range");
  const std::uint64_t range = n;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              (std::numeric_limits<std::uint64_t>::max() % range);
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return static_cast<std::size_t>(v % range);
}

PromptRecord with_displayed_country(const PromptRecord& record, const std::string& country,
                                    const PromptTemplate& tmpl) {
  PromptRecord out = record;
  out.control_country = country;
  out.rendered_text = render_prompt(out, tmpl);
  return out;
}

std::vector<PromptRecord> apply_control_permutation(const std::vector<PromptRecord>& records,
                                                    const std::vector<std::string>& pool,
                                                    std::uint64_t seed, const PromptTemplate& tmpl) {
  if (pool.size() < 2) throw ValidationError("control permutation needs a pool of at least 2 countries");
  std::mt19937_64 rng(seed);
  std::vector<PromptRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(with_displayed_country(r, pool[uniform_index(rng, pool.size())], tmpl));
  return out;
}

PromptRecord permute_options(const PromptRecord& record, const std::vector<std::size_t>& order,
                             const PromptTemplate& tmpl) {
  const std::size_t n = record.option_count();
  if (order.size() != n) throw ValidationError("permutation length differs from option count");
  std::vector<bool> seen(n, false);
  for (std::size_t i : order) {
    if (i >= n || seen[i]) throw ValidationError("not a permutation");
    seen[i] = true;
  }
  PromptRecord out = record;
  for (std::size_t i = 0; i < n; ++i) {
    out.entry.question.options[i] = record.entry.question.options[order[i]];
    out.entry.target.probs[i] = record.entry.target.probs[order[i]];
    out.permutation[i] = record.permutation[order[i]];
  }
  out.rendered_text = render_prompt(out, tmpl);
  return out;
}

PromptRecord shuffle_options(const PromptRecord& record, std::uint64_t seed, const PromptTemplate& tmpl) {
  std::vector<std::size_t> order(record.option_count());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Fisher-Yates with the portable index draw.
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
  return permute_options(record, order, tmpl);
}

nlohmann::json record_to_json(const PromptRecord& r) {
  nlohmann::json j;
  j["record_id"] = r.record_id;
  j["country"] = r.entry.group;
  j["displayed_country"] = r.displayed_country();
  j["question_id"] = r.entry.question.question_id;
  j["option_labels"] = r.option_labels;
  j["options"] = r.entry.question.options;
  j["permutation"] = r.permutation;
  j["target_probs"] = r.entry.target.probs;
  j["rendered_text"] = r.rendered_text;
  return j;
}

}  // namespace surveysim
