#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "vuldat/corpus.hpp"

namespace vuldat::link {

/// technique_id -> set of CVE ids. Every technique of the snapshot has an
/// entry, possibly empty.
using AttackCveMap = std::map<TechniqueId, std::set<CveId>>;

/// One complete technique -> CAPEC -> CWE -> CVE path.
struct LinkChain {
  TechniqueId technique_id;
  CapecId capec_id;
  CweId cwe_id;
  CveId cve_id;

  auto operator<=>(const LinkChain&) const = default;
};

struct RepositoryStats {
  std::size_t linked = 0;
  std::size_t not_linked = 0;
  std::size_t total = 0;

  bool operator==(const RepositoryStats&) const = default;
};

/// Linked/not-linked rows per repository. An entity is linked iff it takes
/// part in at least one complete LinkChain. The two extra CWE counts are the
/// weaker one-hop readings: referenced by a present CAPEC, or referencing a
/// present CVE.
struct LinkStats {
  RepositoryStats techniques;
  RepositoryStats capecs;
  RepositoryStats cwes;
  RepositoryStats cves;
  std::size_t cwe_linked_upward = 0;
  std::size_t cwe_linked_downward = 0;

  bool operator==(const LinkStats&) const = default;
};

struct DanglingReference {
  std::string from_id;
  std::string to_id;
  std::string relation;  // "technique->capec", "capec->cwe" or "cwe->cve"

  auto operator<=>(const DanglingReference&) const = default;
};

struct MappingDataset {
  AttackCveMap mapping;
  std::vector<LinkChain> chains;  // sorted
  LinkStats stats;
  std::vector<DanglingReference> dangling;  // sorted
};

/// Joins the snapshot along technique -> CAPEC -> CWE -> CVE. References to
/// IDs absent from the snapshot produce no chain and are listed in `dangling`.
MappingDataset build_mapping(const CorpusSnapshot& snapshot);

/// Recomputes the statistics. Throws ConsistencyError when the mapping was not
/// built from this snapshot (technique sets differ or a chain does not verify).
LinkStats compute_stats(const MappingDataset& mapping, const CorpusSnapshot& snapshot);

/// Writes mapping_chains.csv, mapping.json and link_diagnostics.json into `dir`.
void export_mapping(const MappingDataset& mapping, const std::filesystem::path& dir);

std::string chains_csv(const MappingDataset& mapping);
std::string mapping_json(const AttackCveMap& mapping);
std::string diagnostics_json(const MappingDataset& mapping);

/// Reads a mapping.json file. Throws CorruptionError on malformed content.
AttackCveMap load_mapping(const std::filesystem::path& path);

/// Plain-text table of the statistics, one row per repository.
std::string render_stats_table(const LinkStats& stats);

}  // namespace vuldat::link
