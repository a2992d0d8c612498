#include "vuldat/snapshot.hpp"

#include <nlohmann/json.hpp>

#include "vuldat/error.hpp"
#include "vuldat/file_util.hpp"

namespace vuldat {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kTechniqueFile = "technique.jsonl";
constexpr const char* kCapecFile = "capec.jsonl";
constexpr const char* kCweFile = "cwe.jsonl";
constexpr const char* kCveFile = "cve.jsonl";
constexpr const char* kManifestFile = "manifest.json";

template <typename Record>
std::string render_lines(const std::vector<Record>& records) {
  std::string out;
  for (const auto& r : records) {
    out += to_jsonl(r);
    out.push_back('\n');
  }
  return out;
}

std::string get_string(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw CorruptionError(where + ": missing string field '" + key + "'");
  }
  return it->get<std::string>();
}

std::vector<std::string> get_list(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_array()) {
    throw CorruptionError(where + ": missing array field '" + key + "'");
  }
  std::vector<std::string> out;
  for (const auto& v : *it) {
    if (!v.is_string()) throw CorruptionError(where + ": non-string entry in '" + key + "'");
    out.push_back(v.get<std::string>());
  }
  return out;
}

// Decodes a JSONL file in file order.
template <typename Decode>
auto read_lines(const fs::path& path, Decode decode) {
  const std::string raw = read_file(path);
  std::vector<decltype(decode(json{}, std::string{}))> out;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < raw.size()) {
    std::size_t end = raw.find('\n', start);
    if (end == std::string::npos) end = raw.size();
    ++line_no;
    const std::string where = path.filename().string() + ":" + std::to_string(line_no);
    std::string_view line(raw.data() + start, end - start);
    if (!line.empty()) {
      json value;
      try {
        value = json::parse(line.begin(), line.end());
      } catch (const json::parse_error& e) {
        throw CorruptionError(where + ": " + e.what());
      }
      if (!value.is_object()) throw CorruptionError(where + ": record is not an object");
      out.push_back(decode(value, where));
    }
    start = end + 1;
  }
  return out;
}

}  // namespace

bool is_iso_date(std::string_view date) {
  if (date.size() != 10 || date[4] != '-' || date[7] != '-') return false;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9}) {
    if (date[i] < '0' || date[i] > '9') return false;
  }
  const int year = std::stoi(std::string(date.substr(0, 4)));
  const int month = std::stoi(std::string(date.substr(5, 2)));
  const int day = std::stoi(std::string(date.substr(8, 2)));
  if (month < 1 || month > 12 || day < 1) return false;
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
  const int max_day = kDays[month - 1] + (month == 2 && leap ? 1 : 0);
  return day <= max_day;
}

std::string to_jsonl(const AttackTechnique& t) {
  ordered_json j;
  j["technique_id"] = t.technique_id;
  j["name"] = t.name;
  j["description"] = t.description;
  j["capec_refs"] = t.capec_refs;
  return j.dump();
}

std::string to_jsonl(const CapecPattern& c) {
  ordered_json j;
  j["capec_id"] = c.capec_id;
  j["name"] = c.name;
  j["description"] = c.description;
  j["cwe_refs"] = c.cwe_refs;
  return j.dump();
}

std::string to_jsonl(const CweEntry& c) {
  ordered_json j;
  j["cwe_id"] = c.cwe_id;
  j["name"] = c.name;
  j["description"] = c.description;
  j["cve_refs"] = c.cve_refs;
  return j.dump();
}

std::string to_jsonl(const CveRecord& c) {
  ordered_json j;
  j["cve_id"] = c.cve_id;
  j["description"] = c.description;
  j["published_year"] = c.published_year;
  return j.dump();
}

void write_snapshot(const CorpusSnapshot& snapshot, const fs::path& dir) {
  validate(snapshot);
  if (!is_iso_date(snapshot.snapshot_date)) {
    throw ConsistencyError("snapshot_date '" + snapshot.snapshot_date + "' is not YYYY-MM-DD");
  }

  write_file(dir / kTechniqueFile, render_lines(snapshot.techniques));
  write_file(dir / kCapecFile, render_lines(snapshot.capecs));
  write_file(dir / kCweFile, render_lines(snapshot.cwes));
  write_file(dir / kCveFile, render_lines(snapshot.cves));

  json manifest;
  manifest["schema_version"] = kSnapshotSchemaVersion;
  manifest["snapshot_date"] = snapshot.snapshot_date;
  manifest["source_versions"] = snapshot.source_versions;
  manifest["counts"] = {{"technique", snapshot.techniques.size()},
                        {"capec", snapshot.capecs.size()},
                        {"cwe", snapshot.cwes.size()},
                        {"cve", snapshot.cves.size()}};
  write_file(dir / kManifestFile, manifest.dump(2) + "\n");
}

SnapshotManifest read_manifest(const fs::path& dir) {
  const fs::path path = dir / kManifestFile;
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw CorruptionError(path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw CorruptionError(path.string() + ": manifest is not an object");

  auto version = j.find("schema_version");
  if (version == j.end() || !version->is_number_integer()) {
    throw CorruptionError(path.string() + ": missing schema_version");
  }
  SnapshotManifest m;
  m.schema_version = version->get<int>();
  if (m.schema_version != kSnapshotSchemaVersion) {
    throw SchemaError("snapshot schema_version " + std::to_string(m.schema_version) +
                          " is not supported (expected " +
                          std::to_string(kSnapshotSchemaVersion) + ")",
                      m.schema_version);
  }
  m.snapshot_date = get_string(j, "snapshot_date", path.string());
  if (!is_iso_date(m.snapshot_date)) {
    throw CorruptionError(path.string() + ": snapshot_date is not YYYY-MM-DD");
  }
  try {
    m.source_versions = j.at("source_versions").get<std::map<std::string, std::string>>();
    m.counts = j.at("counts").get<std::map<std::string, std::size_t>>();
  } catch (const json::exception& e) {
    throw CorruptionError(path.string() + ": " + e.what());
  }
  return m;
}

CorpusSnapshot read_snapshot(const fs::path& dir) {
  const SnapshotManifest manifest = read_manifest(dir);

  CorpusSnapshot s;
  s.snapshot_date = manifest.snapshot_date;
  s.source_versions = manifest.source_versions;
  s.techniques = read_lines(dir / kTechniqueFile, [](const json& j, const std::string& where) {
    return AttackTechnique{get_string(j, "technique_id", where), get_string(j, "name", where),
                           get_string(j, "description", where),
                           get_list(j, "capec_refs", where)};
  });
  s.capecs = read_lines(dir / kCapecFile, [](const json& j, const std::string& where) {
    return CapecPattern{get_string(j, "capec_id", where), get_string(j, "name", where),
                        get_string(j, "description", where), get_list(j, "cwe_refs", where)};
  });
  s.cwes = read_lines(dir / kCweFile, [](const json& j, const std::string& where) {
    return CweEntry{get_string(j, "cwe_id", where), get_string(j, "name", where),
                    get_string(j, "description", where), get_list(j, "cve_refs", where)};
  });
  s.cves = read_lines(dir / kCveFile, [](const json& j, const std::string& where) {
    auto year = j.find("published_year");
    if (year == j.end() || !year->is_number_integer()) {
      throw CorruptionError(where + ": missing integer field 'published_year'");
    }
    return CveRecord{get_string(j, "cve_id", where), get_string(j, "description", where),
                     year->get<int>()};
  });

  auto expect = [&](const char* key, std::size_t actual) {
    auto it = manifest.counts.find(key);
    if (it == manifest.counts.end() || it->second != actual) {
      throw CorruptionError(std::string("manifest count for '") + key +
                            "' does not match record file (" + std::to_string(actual) +
                            " records)");
    }
  };
  expect("technique", s.techniques.size());
  expect("capec", s.capecs.size());
  expect("cwe", s.cwes.size());
  expect("cve", s.cves.size());

  validate(s);
  return s;
}

}  // namespace vuldat
