#include "vuldat/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <unordered_set>

#include "vuldat/error.hpp"

namespace vuldat {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kSchema: return "schema";
    case ErrorKind::kCorruption: return "corruption";
    case ErrorKind::kConsistency: return "consistency";
    case ErrorKind::kEncoding: return "encoding";
    case ErrorKind::kDegenerate: return "degenerate";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kTransport: return "transport";
    case ErrorKind::kProtocol: return "protocol";
  }
  return "unknown";
}

namespace {

bool all_digits(std::string_view s) {
  return !s.empty() &&
         std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c) != 0; });
}

bool has_numeric_suffix(std::string_view id, std::string_view prefix) {
  return id.size() > prefix.size() && id.substr(0, prefix.size()) == prefix &&
         all_digits(id.substr(prefix.size()));
}

}  // namespace

bool is_technique_id(std::string_view id) {
  if (id.size() != 5 && id.size() != 9) return false;
  if (id[0] != 'T' || !all_digits(id.substr(1, 4))) return false;
  if (id.size() == 5) return true;
  return id[5] == '.' && all_digits(id.substr(6, 3));
}

bool is_capec_id(std::string_view id) { return has_numeric_suffix(id, "CAPEC-"); }

bool is_cwe_id(std::string_view id) { return has_numeric_suffix(id, "CWE-"); }

bool is_cve_id(std::string_view id) {
  // CVE-YYYY-NNNN with at least four sequence digits.
  if (id.size() < 13 || id.substr(0, 4) != "CVE-") return false;
  if (!all_digits(id.substr(4, 4)) || id[8] != '-') return false;
  auto seq = id.substr(9);
  return seq.size() >= 4 && all_digits(seq);
}

std::vector<std::string> dedup_preserving_order(std::vector<std::string> ids) {
  std::unordered_set<std::string> seen;
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (auto& id : ids) {
    if (seen.insert(id).second) out.push_back(std::move(id));
  }
  return out;
}

namespace {

template <typename Record, typename IdOf, typename CheckId>
void check_collection(const std::vector<Record>& records, std::string_view kind, IdOf id_of,
                      CheckId check_id) {
  std::set<std::string_view> seen;
  for (const auto& r : records) {
    const std::string& id = id_of(r);
    if (!check_id(id)) {
      throw ConsistencyError(std::string(kind) + " has malformed identifier '" + id + "'");
    }
    if (!seen.insert(id).second) {
      throw ConsistencyError(std::string(kind) + " identifier '" + id + "' is not unique");
    }
  }
}

void check_refs(const std::vector<std::string>& refs, const std::string& owner,
                bool (*check)(std::string_view)) {
  for (const auto& ref : refs) {
    if (!check(ref)) {
      throw ConsistencyError(owner + " carries malformed reference '" + ref + "'");
    }
  }
}

}  // namespace

void validate(const CorpusSnapshot& snapshot) {
  check_collection(snapshot.techniques, "technique",
                   [](const AttackTechnique& t) -> const std::string& { return t.technique_id; },
                   is_technique_id);
  check_collection(snapshot.capecs, "capec",
                   [](const CapecPattern& c) -> const std::string& { return c.capec_id; },
                   is_capec_id);
  check_collection(snapshot.cwes, "cwe",
                   [](const CweEntry& c) -> const std::string& { return c.cwe_id; }, is_cwe_id);
  check_collection(snapshot.cves, "cve",
                   [](const CveRecord& c) -> const std::string& { return c.cve_id; }, is_cve_id);

  for (const auto& t : snapshot.techniques) {
    if (t.description.empty()) {
      throw ConsistencyError("technique " + t.technique_id + " has an empty description");
    }
    check_refs(t.capec_refs, t.technique_id, is_capec_id);
  }
  for (const auto& c : snapshot.capecs) check_refs(c.cwe_refs, c.capec_id, is_cwe_id);
  for (const auto& c : snapshot.cwes) check_refs(c.cve_refs, c.cwe_id, is_cve_id);
  for (const auto& c : snapshot.cves) {
    if (c.description.empty()) {
      throw ConsistencyError("cve " + c.cve_id + " has an empty description");
    }
  }
}

void canonicalize(CorpusSnapshot& snapshot) {
  auto by = [](auto member) {
    return [member](const auto& a, const auto& b) { return a.*member < b.*member; };
  };
  std::sort(snapshot.techniques.begin(), snapshot.techniques.end(),
            by(&AttackTechnique::technique_id));
  std::sort(snapshot.capecs.begin(), snapshot.capecs.end(), by(&CapecPattern::capec_id));
  std::sort(snapshot.cwes.begin(), snapshot.cwes.end(), by(&CweEntry::cwe_id));
  std::sort(snapshot.cves.begin(), snapshot.cves.end(), by(&CveRecord::cve_id));
}

}  // namespace vuldat
