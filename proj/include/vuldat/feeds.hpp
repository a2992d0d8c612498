#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "vuldat/corpus.hpp"

namespace vuldat::feeds {

enum class FeedFormat {
  kStix,     // ATT&CK STIX 2.1 bundle
  kNvdJson,  // NVD JSON 1.1 feed or 2.0 API response
  kXml,      // CAPEC / CWE XML catalog
  kJsonl,    // normalized JSON Lines
};

/// Maps a tag ("stix", "nvd", "xml", "jsonl") to a format. Throws ConfigError.
FeedFormat parse_format(std::string_view tag);
const char* to_string(FeedFormat format) noexcept;

/// Parser output. `input_objects` counts source objects of the parsed type, so
/// records.size() + dropped == input_objects always holds.
template <typename Record>
struct ParseResult {
  std::vector<Record> records;
  std::size_t dropped = 0;
  std::size_t input_objects = 0;
};

// All parsers are pure: output is sorted by identifier and reference lists are
// deduplicated in first-seen order. Malformed input throws ParseError carrying
// a byte offset; a format the feed does not support throws ConfigError.

/// Revoked and deprecated attack-pattern objects are dropped.
ParseResult<AttackTechnique> parse_attack_feed(std::string_view raw, FeedFormat format);

/// Deprecated catalog entries are dropped.
ParseResult<CapecPattern> parse_capec_feed(std::string_view raw, FeedFormat format);
ParseResult<CweEntry> parse_cwe_feed(std::string_view raw, FeedFormat format);

/// Keeps the English description. Rejected entries and entries without an
/// English description are dropped.
ParseResult<CveRecord> parse_cve_feed(std::string_view raw, FeedFormat format);

}  // namespace vuldat::feeds
