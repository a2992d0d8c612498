#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace vuldat {

using TechniqueId = std::string;
using CapecId = std::string;
using CweId = std::string;
using CveId = std::string;

// Identifier syntax checks.
bool is_technique_id(std::string_view id);  // T1234 or T1234.001
bool is_capec_id(std::string_view id);      // CAPEC-123
bool is_cwe_id(std::string_view id);        // CWE-79
bool is_cve_id(std::string_view id);        // CVE-2020-12345

struct AttackTechnique {
  TechniqueId technique_id;
  std::string name;
  std::string description;
  std::vector<CapecId> capec_refs;

  bool operator==(const AttackTechnique&) const = default;
};

struct CapecPattern {
  CapecId capec_id;
  std::string name;
  std::string description;
  std::vector<CweId> cwe_refs;

  bool operator==(const CapecPattern&) const = default;
};

struct CweEntry {
  CweId cwe_id;
  std::string name;
  std::string description;
  std::vector<CveId> cve_refs;

  bool operator==(const CweEntry&) const = default;
};

struct CveRecord {
  CveId cve_id;
  std::string description;
  int published_year = 0;

  bool operator==(const CveRecord&) const = default;
};

struct CorpusSnapshot {
  std::vector<AttackTechnique> techniques;
  std::vector<CapecPattern> capecs;
  std::vector<CweEntry> cwes;
  std::vector<CveRecord> cves;
  std::string snapshot_date;  // YYYY-MM-DD
  std::map<std::string, std::string> source_versions;

  bool operator==(const CorpusSnapshot&) const = default;
};

/// Checks identifier syntax, identifier uniqueness, reference syntax and the
/// non-empty description rules. Throws ConsistencyError on the first violation.
/// Dangling references are legal and not reported here.
void validate(const CorpusSnapshot& snapshot);

/// Sorts every collection by identifier.
void canonicalize(CorpusSnapshot& snapshot);

/// Removes repeated IDs while keeping first occurrences in place.
std::vector<std::string> dedup_preserving_order(std::vector<std::string> ids);

}  // namespace vuldat
