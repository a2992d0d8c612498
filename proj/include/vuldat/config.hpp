#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>

namespace vuldat {

/// Everything a pipeline run depends on. The file form is a TOML subset:
/// one [section] per group below, `key = value` lines, '#' comments.
struct RunConfig {
  // [feeds]
  std::string attack_feed;
  std::string attack_format = "stix";
  std::string capec_feed;
  std::string capec_format = "xml";
  std::string cwe_feed;
  std::string cwe_format = "xml";
  std::string cve_feed;
  std::string cve_format = "nvd";
  std::string snapshot_date;

  // [paths]
  std::string snapshot_dir;
  std::string mapping_path;
  std::string clean_path;
  std::string stores_dir;
  std::string detections_dir;
  std::string reports_dir;

  // [preprocess]
  std::string mode = "partial";
  std::string stopwords;    // empty: built-in list
  std::string lemma_table;  // empty: built-in table

  // [embedding]
  std::string model = "test-hash";
  std::string backend = "test-hash";
  std::string endpoint;  // empty: $VULDAT_EMBED_URL
  std::string fixture;

  // [retrieval]
  double threshold = 0.60;
  std::size_t top_n = 150;
  unsigned workers = 0;

  // [evaluation]
  std::string disjoint_policy = "fp";

  bool operator==(const RunConfig&) const = default;
};

/// Throws ConfigError on unknown keys, bad values or syntax errors.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// Canonical file form; parse_config(to_toml(c)) == c.
std::string to_toml(const RunConfig& config);

/// "fnv1a64:<hex>" of the canonical form.
std::string config_hash(const RunConfig& config);

/// Checks enumerated values and ranges, and that every configured input file
/// (feeds, lexicon files, fixture) exists. Throws ConfigError.
void validate(const RunConfig& config);

}  // namespace vuldat
