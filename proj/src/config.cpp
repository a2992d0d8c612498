#include "vuldat/config.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "vuldat/embedding.hpp"
#include "vuldat/error.hpp"
#include "vuldat/evaluation.hpp"
#include "vuldat/feeds.hpp"
#include "vuldat/file_util.hpp"
#include "vuldat/preprocess.hpp"
#include "vuldat/retrieval.hpp"
#include "vuldat/snapshot.hpp"

namespace vuldat {

namespace {

enum class Kind { kString, kDouble, kSize, kUnsigned };

struct Field {
  const char* section;
  const char* key;
  Kind kind;
  std::function<void*(RunConfig&)> member;
};

template <typename T>
std::function<void*(RunConfig&)> at(T RunConfig::*m) {
  return [m](RunConfig& c) -> void* { return &(c.*m); };
}

// Order here is the order of the canonical file form.
const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"feeds", "attack", Kind::kString, at(&RunConfig::attack_feed)},
      {"feeds", "attack_format", Kind::kString, at(&RunConfig::attack_format)},
      {"feeds", "capec", Kind::kString, at(&RunConfig::capec_feed)},
      {"feeds", "capec_format", Kind::kString, at(&RunConfig::capec_format)},
      {"feeds", "cwe", Kind::kString, at(&RunConfig::cwe_feed)},
      {"feeds", "cwe_format", Kind::kString, at(&RunConfig::cwe_format)},
      {"feeds", "cve", Kind::kString, at(&RunConfig::cve_feed)},
      {"feeds", "cve_format", Kind::kString, at(&RunConfig::cve_format)},
      {"feeds", "snapshot_date", Kind::kString, at(&RunConfig::snapshot_date)},
      {"paths", "snapshot", Kind::kString, at(&RunConfig::snapshot_dir)},
      {"paths", "mapping", Kind::kString, at(&RunConfig::mapping_path)},
      {"paths", "clean", Kind::kString, at(&RunConfig::clean_path)},
      {"paths", "stores", Kind::kString, at(&RunConfig::stores_dir)},
      {"paths", "detections", Kind::kString, at(&RunConfig::detections_dir)},
      {"paths", "reports", Kind::kString, at(&RunConfig::reports_dir)},
      {"preprocess", "mode", Kind::kString, at(&RunConfig::mode)},
      {"preprocess", "stopwords", Kind::kString, at(&RunConfig::stopwords)},
      {"preprocess", "lemma_table", Kind::kString, at(&RunConfig::lemma_table)},
      {"embedding", "model", Kind::kString, at(&RunConfig::model)},
      {"embedding", "backend", Kind::kString, at(&RunConfig::backend)},
      {"embedding", "endpoint", Kind::kString, at(&RunConfig::endpoint)},
      {"embedding", "fixture", Kind::kString, at(&RunConfig::fixture)},
      {"retrieval", "threshold", Kind::kDouble, at(&RunConfig::threshold)},
      {"retrieval", "top_n", Kind::kSize, at(&RunConfig::top_n)},
      {"retrieval", "workers", Kind::kUnsigned, at(&RunConfig::workers)},
      {"evaluation", "disjoint_policy", Kind::kString, at(&RunConfig::disjoint_policy)},
  };
  return table;
}

template <typename T>
T parse_number(const std::string& raw, const std::string& key) {
  T value{};
  const auto* end = raw.data() + raw.size();
  auto [ptr, ec] = std::from_chars(raw.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config key '" + key + "' expects a number, got '" + raw + "'");
  }
  return value;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + '"';
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  std::string s = buf;
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  std::map<std::string, const Field*> by_key;
  for (const auto& f : fields()) by_key[std::string(f.section) + "." + f.key] = &f;

  std::istringstream in{std::string(text)};
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_config(in);
  } catch (const CLI::Error& e) {
    throw ConfigError(std::string("config syntax error: ") + e.what());
  }

  RunConfig config;
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    std::string key;
    for (const auto& p : item.parents) key += p + ".";
    key += item.name;
    auto it = by_key.find(key);
    if (it == by_key.end()) throw ConfigError("unknown config key '" + key + "'");
    if (item.inputs.size() != 1) throw ConfigError("config key '" + key + "' needs one value");
    const std::string& raw = item.inputs.front();
    void* target = it->second->member(config);
    switch (it->second->kind) {
      case Kind::kString: *static_cast<std::string*>(target) = raw; break;
      case Kind::kDouble: *static_cast<double*>(target) = parse_number<double>(raw, key); break;
      case Kind::kSize:
        *static_cast<std::size_t*>(target) = parse_number<std::size_t>(raw, key);
        break;
      case Kind::kUnsigned:
        *static_cast<unsigned*>(target) = parse_number<unsigned>(raw, key);
        break;
    }
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  try {
    return parse_config(read_file(path));
  } catch (const IoError& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
}

std::string to_toml(const RunConfig& config) {
  RunConfig copy = config;
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    if (section != f.section) {
      if (!section.empty()) out += '\n';
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += std::string(f.key) + " = ";
    void* v = f.member(copy);
    switch (f.kind) {
      case Kind::kString: out += quote(*static_cast<std::string*>(v)); break;
      case Kind::kDouble: out += format_double(*static_cast<double*>(v)); break;
      case Kind::kSize: out += std::to_string(*static_cast<std::size_t*>(v)); break;
      case Kind::kUnsigned: out += std::to_string(*static_cast<unsigned*>(v)); break;
    }
    out += '\n';
  }
  return out;
}

std::string config_hash(const RunConfig& config) {
  return "fnv1a64:" + hex64(fnv1a64(to_toml(config)));
}

void validate(const RunConfig& config) {
  feeds::parse_format(config.attack_format);
  feeds::parse_format(config.capec_format);
  feeds::parse_format(config.cwe_format);
  feeds::parse_format(config.cve_format);
  if (!config.snapshot_date.empty() && !is_iso_date(config.snapshot_date)) {
    throw ConfigError("snapshot_date must be YYYY-MM-DD, got '" + config.snapshot_date + "'");
  }
  text::parse_mode(config.mode);
  embed::find_model(config.model);
  if (config.backend != "test-hash" && config.backend != "fixture" && config.backend != "remote") {
    throw ConfigError("unknown backend '" + config.backend + "' (expected test-hash|fixture|remote)");
  }
  if (config.backend == "fixture" && config.fixture.empty()) {
    throw ConfigError("the fixture backend needs a fixture path");
  }
  retrieval::RetrievalConfig{config.threshold, config.top_n}.validate();
  eval::parse_disjoint_policy(config.disjoint_policy);
  if (config.stopwords.empty() != config.lemma_table.empty()) {
    throw ConfigError("stopwords and lemma_table must be given together");
  }

  for (const std::string* input : {&config.attack_feed, &config.capec_feed, &config.cwe_feed,
                                   &config.cve_feed, &config.stopwords, &config.lemma_table}) {
    if (!input->empty() && !std::filesystem::is_regular_file(*input)) {
      throw ConfigError("input file does not exist: " + *input);
    }
  }
  if (!config.fixture.empty() && !std::filesystem::exists(embed::header_path(config.fixture))) {
    throw ConfigError("fixture does not exist: " + config.fixture);
  }
}

}  // namespace vuldat
