#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "vuldat/corpus.hpp"

namespace vuldat {

inline constexpr int kSnapshotSchemaVersion = 1;

/// Snapshot container layout: a directory holding technique.jsonl,
/// capec.jsonl, cwe.jsonl, cve.jsonl and manifest.json. The manifest is
/// written last.
struct SnapshotManifest {
  int schema_version = kSnapshotSchemaVersion;
  std::string snapshot_date;
  std::map<std::string, std::string> source_versions;
  std::map<std::string, std::size_t> counts;
};

/// Throws ConsistencyError if the snapshot does not validate, IoError on
/// filesystem failures.
void write_snapshot(const CorpusSnapshot& snapshot, const std::filesystem::path& dir);

/// Loads and validates a snapshot directory. Nothing is returned unless every
/// file loads. Throws SchemaError on an unknown schema_version,
/// CorruptionError when manifest counts disagree with the record files.
CorpusSnapshot read_snapshot(const std::filesystem::path& dir);

SnapshotManifest read_manifest(const std::filesystem::path& dir);

/// True for a calendar-valid YYYY-MM-DD string.
bool is_iso_date(std::string_view date);

// Single-record JSONL serializers, exposed for tools that emit records.
std::string to_jsonl(const AttackTechnique& t);
std::string to_jsonl(const CapecPattern& c);
std::string to_jsonl(const CweEntry& c);
std::string to_jsonl(const CveRecord& c);

}  // namespace vuldat
