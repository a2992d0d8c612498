#include "vuldat/link_graph.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "vuldat/error.hpp"
#include "vuldat/file_util.hpp"

namespace vuldat::link {

using nlohmann::json;

namespace {

struct Index {
  std::unordered_map<std::string_view, const CapecPattern*> capecs;
  std::unordered_map<std::string_view, const CweEntry*> cwes;
  std::unordered_set<std::string_view> cves;

  explicit Index(const CorpusSnapshot& s) {
    for (const auto& c : s.capecs) capecs.emplace(c.capec_id, &c);
    for (const auto& c : s.cwes) cwes.emplace(c.cwe_id, &c);
    for (const auto& c : s.cves) cves.insert(c.cve_id);
  }
};

bool contains(const std::vector<std::string>& v, const std::string& id) {
  return std::find(v.begin(), v.end(), id) != v.end();
}

RepositoryStats row(std::size_t linked, std::size_t total) {
  return {linked, total - linked, total};
}

}  // namespace

MappingDataset build_mapping(const CorpusSnapshot& snapshot) {
  const Index index(snapshot);
  MappingDataset out;

  for (const auto& t : snapshot.techniques) {
    auto& cves = out.mapping[t.technique_id];
    for (const auto& capec_id : t.capec_refs) {
      auto capec = index.capecs.find(capec_id);
      if (capec == index.capecs.end()) {
        out.dangling.push_back({t.technique_id, capec_id, "technique->capec"});
        continue;
      }
      for (const auto& cwe_id : capec->second->cwe_refs) {
        auto cwe = index.cwes.find(cwe_id);
        if (cwe == index.cwes.end()) continue;  // recorded below, once per CAPEC
        for (const auto& cve_id : cwe->second->cve_refs) {
          if (!index.cves.contains(cve_id)) continue;
          out.chains.push_back({t.technique_id, capec_id, cwe_id, cve_id});
          cves.insert(cve_id);
        }
      }
    }
  }

  // Dangling references are reported per edge, independent of reachability.
  for (const auto& c : snapshot.capecs) {
    for (const auto& cwe_id : c.cwe_refs) {
      if (!index.cwes.contains(cwe_id)) out.dangling.push_back({c.capec_id, cwe_id, "capec->cwe"});
    }
  }
  for (const auto& c : snapshot.cwes) {
    for (const auto& cve_id : c.cve_refs) {
      if (!index.cves.contains(cve_id)) out.dangling.push_back({c.cwe_id, cve_id, "cwe->cve"});
    }
  }

  std::sort(out.chains.begin(), out.chains.end());
  out.chains.erase(std::unique(out.chains.begin(), out.chains.end()), out.chains.end());
  std::sort(out.dangling.begin(), out.dangling.end());
  out.dangling.erase(std::unique(out.dangling.begin(), out.dangling.end()), out.dangling.end());
  out.stats = compute_stats(out, snapshot);
  return out;
}

LinkStats compute_stats(const MappingDataset& mapping, const CorpusSnapshot& snapshot) {
  const Index index(snapshot);

  if (mapping.mapping.size() != snapshot.techniques.size()) {
    throw ConsistencyError("mapping covers " + std::to_string(mapping.mapping.size()) +
                           " techniques but the snapshot has " +
                           std::to_string(snapshot.techniques.size()));
  }
  std::unordered_map<std::string_view, const AttackTechnique*> techniques;
  for (const auto& t : snapshot.techniques) {
    techniques.emplace(t.technique_id, &t);
    if (!mapping.mapping.contains(t.technique_id)) {
      throw ConsistencyError("technique " + t.technique_id + " missing from mapping");
    }
  }

  std::set<std::string_view> linked_t, linked_capec, linked_cwe, linked_cve;
  AttackCveMap from_chains;
  for (const auto& c : mapping.chains) {
    auto t = techniques.find(c.technique_id);
    auto capec = index.capecs.find(c.capec_id);
    auto cwe = index.cwes.find(c.cwe_id);
    const bool sound = t != techniques.end() && capec != index.capecs.end() &&
                       cwe != index.cwes.end() && index.cves.contains(c.cve_id) &&
                       contains(t->second->capec_refs, c.capec_id) &&
                       contains(capec->second->cwe_refs, c.cwe_id) &&
                       contains(cwe->second->cve_refs, c.cve_id);
    if (!sound) {
      throw ConsistencyError("chain " + c.technique_id + " -> " + c.capec_id + " -> " + c.cwe_id +
                             " -> " + c.cve_id + " does not verify against the snapshot");
    }
    linked_t.insert(c.technique_id);
    linked_capec.insert(c.capec_id);
    linked_cwe.insert(c.cwe_id);
    linked_cve.insert(c.cve_id);
    from_chains[c.technique_id].insert(c.cve_id);
  }
  for (const auto& [technique, cves] : mapping.mapping) {
    auto it = from_chains.find(technique);
    const bool same = it == from_chains.end() ? cves.empty() : it->second == cves;
    if (!same) throw ConsistencyError("mapping entry for " + technique + " disagrees with chains");
  }

  LinkStats stats;
  stats.techniques = row(linked_t.size(), snapshot.techniques.size());
  stats.capecs = row(linked_capec.size(), snapshot.capecs.size());
  stats.cwes = row(linked_cwe.size(), snapshot.cwes.size());
  stats.cves = row(linked_cve.size(), snapshot.cves.size());

  std::unordered_set<std::string_view> referenced_by_capec;
  for (const auto& c : snapshot.capecs) {
    for (const auto& cwe_id : c.cwe_refs) referenced_by_capec.insert(cwe_id);
  }
  for (const auto& c : snapshot.cwes) {
    if (referenced_by_capec.contains(c.cwe_id)) ++stats.cwe_linked_upward;
    if (std::any_of(c.cve_refs.begin(), c.cve_refs.end(),
                    [&](const std::string& id) { return index.cves.contains(id); })) {
      ++stats.cwe_linked_downward;
    }
  }
  return stats;
}

std::string chains_csv(const MappingDataset& mapping) {
  std::string out = "technique_id,capec_id,cwe_id,cve_id\n";
  for (const auto& c : mapping.chains) {
    out += c.technique_id + ',' + c.capec_id + ',' + c.cwe_id + ',' + c.cve_id + '\n';
  }
  return out;
}

std::string mapping_json(const AttackCveMap& mapping) {
  json j = json::object();
  for (const auto& [technique, cves] : mapping) j[technique] = cves;
  return j.dump(2) + "\n";
}

namespace {

json stats_json(const LinkStats& s) {
  auto r = [](const RepositoryStats& row) {
    return json{{"linked", row.linked}, {"not_linked", row.not_linked}, {"total", row.total}};
  };
  return json{{"technique", r(s.techniques)},
              {"capec", r(s.capecs)},
              {"cwe", r(s.cwes)},
              {"cve", r(s.cves)},
              {"cwe_linked_upward", s.cwe_linked_upward},
              {"cwe_linked_downward", s.cwe_linked_downward}};
}

}  // namespace

std::string diagnostics_json(const MappingDataset& mapping) {
  json dangling = json::array();
  for (const auto& d : mapping.dangling) {
    dangling.push_back({{"from", d.from_id}, {"to", d.to_id}, {"relation", d.relation}});
  }
  json j;
  j["dangling_references"] = std::move(dangling);
  j["dangling_count"] = mapping.dangling.size();
  j["chain_count"] = mapping.chains.size();
  j["stats"] = stats_json(mapping.stats);
  return j.dump(2) + "\n";
}

void export_mapping(const MappingDataset& mapping, const std::filesystem::path& dir) {
  write_file(dir / "mapping_chains.csv", chains_csv(mapping));
  write_file(dir / "mapping.json", mapping_json(mapping.mapping));
  write_file(dir / "link_diagnostics.json", diagnostics_json(mapping));
}

AttackCveMap load_mapping(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw CorruptionError(path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw CorruptionError(path.string() + ": mapping is not an object");
  AttackCveMap out;
  for (const auto& [technique, cves] : j.items()) {
    if (!is_technique_id(technique) || !cves.is_array()) {
      throw CorruptionError(path.string() + ": bad entry for '" + technique + "'");
    }
    auto& set = out[technique];
    for (const auto& c : cves) {
      if (!c.is_string() || !is_cve_id(c.get<std::string>())) {
        throw CorruptionError(path.string() + ": bad CVE id under '" + technique + "'");
      }
      set.insert(c.get<std::string>());
    }
  }
  return out;
}

std::string render_stats_table(const LinkStats& s) {
  std::string out;
  char line[128];
  std::snprintf(line, sizeof(line), "%-18s %10s %12s %10s\n", "", "Linked", "Not linked",
                "Total");
  out += line;
  auto add = [&](const char* label, const RepositoryStats& r) {
    std::snprintf(line, sizeof(line), "%-18s %10zu %12zu %10zu\n", label, r.linked, r.not_linked,
                  r.total);
    out += line;
  };
  add("Attack Techniques", s.techniques);
  add("Attack Patterns", s.capecs);
  add("CWE reports", s.cwes);
  add("CVE reports", s.cves);
  std::snprintf(line, sizeof(line), "CWE linked upward (to CAPEC): %zu\n", s.cwe_linked_upward);
  out += line;
  std::snprintf(line, sizeof(line), "CWE linked downward (to CVE): %zu\n", s.cwe_linked_downward);
  out += line;
  return out;
}

}  // namespace vuldat::link
