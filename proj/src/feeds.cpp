#include "vuldat/feeds.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <string>
#include <unordered_set>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <nlohmann/json.hpp>

#include "vuldat/error.hpp"
#include "vuldat/utf8.hpp"

namespace vuldat::feeds {

using nlohmann::json;
namespace pt = boost::property_tree;

FeedFormat parse_format(std::string_view tag) {
  if (tag == "stix") return FeedFormat::kStix;
  if (tag == "nvd") return FeedFormat::kNvdJson;
  if (tag == "xml") return FeedFormat::kXml;
  if (tag == "jsonl") return FeedFormat::kJsonl;
  throw ConfigError("unknown feed format '" + std::string(tag) + "' (expected stix|nvd|xml|jsonl)");
}

const char* to_string(FeedFormat format) noexcept {
  switch (format) {
    case FeedFormat::kStix: return "stix";
    case FeedFormat::kNvdJson: return "nvd";
    case FeedFormat::kXml: return "xml";
    case FeedFormat::kJsonl: return "jsonl";
  }
  return "unknown";
}

namespace {

[[noreturn]] void unsupported(const char* feed, FeedFormat format) {
  throw ConfigError(std::string(feed) + " feed does not support format '" + to_string(format) +
                    "'");
}

json parse_json_document(std::string_view raw) {
  try {
    return json::parse(raw.begin(), raw.end());
  } catch (const json::parse_error& e) {
    throw ParseError(e.what(), e.byte == 0 ? 0 : e.byte - 1);
  }
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(c);
    }
  }
  return out;
}

template <typename Record, typename IdOf>
void finish(ParseResult<Record>& result, IdOf id_of) {
  std::stable_sort(result.records.begin(), result.records.end(),
                   [&](const Record& a, const Record& b) { return id_of(a) < id_of(b); });
  // Repeated identifiers keep their first occurrence; later copies are drops.
  auto last = std::unique(result.records.begin(), result.records.end(),
                          [&](const Record& a, const Record& b) { return id_of(a) == id_of(b); });
  result.dropped += static_cast<std::size_t>(std::distance(last, result.records.end()));
  result.records.erase(last, result.records.end());
}

std::string string_field(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) return {};
  return it->get<std::string>();
}

// ---------------------------------------------------------------------------
// JSON Lines

struct JsonLine {
  json value;
  std::size_t offset;
};

std::vector<JsonLine> split_jsonl(std::string_view raw) {
  std::vector<JsonLine> lines;
  std::size_t start = 0;
  while (start < raw.size()) {
    std::size_t end = raw.find('\n', start);
    if (end == std::string_view::npos) end = raw.size();
    std::string_view line = raw.substr(start, end - start);
    if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
      try {
        lines.push_back({json::parse(line.begin(), line.end()), start});
      } catch (const json::parse_error& e) {
        throw ParseError(e.what(), start + (e.byte == 0 ? 0 : e.byte - 1));
      }
      if (!lines.back().value.is_object()) {
        throw ParseError("JSONL line is not an object", start);
      }
    }
    start = end + 1;
  }
  return lines;
}

std::string required_string(const JsonLine& line, const char* key) {
  auto it = line.value.find(key);
  if (it == line.value.end() || !it->is_string()) {
    throw ParseError(std::string("missing string field '") + key + "'", line.offset);
  }
  return it->get<std::string>();
}

std::vector<std::string> required_id_list(const JsonLine& line, const char* key,
                                          bool (*check)(std::string_view)) {
  auto it = line.value.find(key);
  if (it == line.value.end() || !it->is_array()) {
    throw ParseError(std::string("missing array field '") + key + "'", line.offset);
  }
  std::vector<std::string> ids;
  for (const auto& v : *it) {
    if (!v.is_string() || !check(v.get<std::string>())) {
      throw ParseError(std::string("malformed identifier in '") + key + "'", line.offset);
    }
    ids.push_back(v.get<std::string>());
  }
  return dedup_preserving_order(std::move(ids));
}

std::string required_id(const JsonLine& line, const char* key, bool (*check)(std::string_view)) {
  std::string id = required_string(line, key);
  if (!check(id)) throw ParseError("malformed identifier '" + id + "'", line.offset);
  return id;
}

// ---------------------------------------------------------------------------
// XML catalogs

std::size_t line_to_offset(std::string_view raw, unsigned long line) {
  std::size_t offset = 0;
  for (unsigned long l = 1; l < line && offset < raw.size(); ++l) {
    std::size_t nl = raw.find('\n', offset);
    if (nl == std::string_view::npos) return raw.size();
    offset = nl + 1;
  }
  return offset;
}

pt::ptree parse_xml_document(std::string_view raw) {
  if (auto bad = utf8::find_invalid(raw)) throw ParseError("invalid UTF-8 in XML", *bad);
  pt::ptree tree;
  std::istringstream in{std::string(raw)};
  try {
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError(e.message(), line_to_offset(raw, e.line()));
  }
  return tree;
}

std::string_view local_name(std::string_view name) {
  auto colon = name.find(':');
  return colon == std::string_view::npos ? name : name.substr(colon + 1);
}

const pt::ptree* child(const pt::ptree& node, std::string_view name) {
  for (const auto& [key, value] : node) {
    if (local_name(key) == name) return &value;
  }
  return nullptr;
}

std::string attribute(const pt::ptree& node, const char* name) {
  return node.get<std::string>(pt::ptree::path_type(std::string("<xmlattr>/") + name, '/'), "");
}

void gather_text(const pt::ptree& node, std::string& out) {
  out += node.data();
  for (const auto& [key, value] : node) {
    if (key == "<xmlattr>" || key == "<xmlcomment>") continue;
    out.push_back(' ');
    gather_text(value, out);
  }
}

std::string element_text(const pt::ptree* node) {
  if (node == nullptr) return {};
  std::string out;
  gather_text(*node, out);
  return collapse_whitespace(out);
}

// Visits every element called `item` below root/<container>.
template <typename Visit>
void for_each_entry(const pt::ptree& tree, std::string_view root, std::string_view container,
                    std::string_view item, Visit visit) {
  const pt::ptree* catalog = child(tree, root);
  if (catalog == nullptr) {
    throw ParseError("missing <" + std::string(root) + "> root element", 0);
  }
  const pt::ptree* list = child(*catalog, container);
  if (list == nullptr) return;
  for (const auto& [key, value] : *list) {
    if (local_name(key) == item) visit(value);
  }
}

bool is_deprecated_status(const std::string& status) {
  return status == "Deprecated" || status == "Obsolete";
}

// ---------------------------------------------------------------------------
// Rejection markers used by NVD for withdrawn CVE identifiers.

bool is_rejected_text(std::string_view text) {
  return text.rfind("** REJECT **", 0) == 0 || text.rfind("Rejected reason:", 0) == 0;
}

int year_prefix(std::string_view date) {
  if (date.size() < 4) return 0;
  int year = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(date[i]))) return 0;
    year = year * 10 + (date[i] - '0');
  }
  return year;
}

std::string english_description(const json& descriptions, const char* text_key) {
  if (!descriptions.is_array()) return {};
  for (const auto& d : descriptions) {
    if (d.is_object() && string_field(d, "lang").rfind("en", 0) == 0) {
      return collapse_whitespace(string_field(d, text_key));
    }
  }
  return {};
}

}  // namespace

// ---------------------------------------------------------------------------

ParseResult<AttackTechnique> parse_attack_feed(std::string_view raw, FeedFormat format) {
  ParseResult<AttackTechnique> result;
  if (format == FeedFormat::kJsonl) {
    for (const auto& line : split_jsonl(raw)) {
      ++result.input_objects;
      AttackTechnique t;
      t.technique_id = required_id(line, "technique_id", is_technique_id);
      t.name = required_string(line, "name");
      t.description = required_string(line, "description");
      t.capec_refs = required_id_list(line, "capec_refs", is_capec_id);
      if (t.description.empty()) {
        ++result.dropped;
        continue;
      }
      result.records.push_back(std::move(t));
    }
  } else if (format == FeedFormat::kStix) {
    const json doc = parse_json_document(raw);
    if (!doc.is_object() || string_field(doc, "type") != "bundle") {
      throw ParseError("STIX document is not a bundle", 0);
    }
    auto objects = doc.find("objects");
    if (objects == doc.end()) return result;
    if (!objects->is_array()) throw ParseError("bundle 'objects' is not an array", 0);
    for (const auto& obj : *objects) {
      if (!obj.is_object() || string_field(obj, "type") != "attack-pattern") continue;
      ++result.input_objects;
      if (obj.value("revoked", false) || obj.value("x_mitre_deprecated", false)) {
        ++result.dropped;
        continue;
      }
      AttackTechnique t;
      t.name = string_field(obj, "name");
      t.description = string_field(obj, "description");
      std::vector<std::string> capecs;
      if (auto refs = obj.find("external_references"); refs != obj.end() && refs->is_array()) {
        for (const auto& ref : *refs) {
          if (!ref.is_object()) continue;
          const std::string source = string_field(ref, "source_name");
          const std::string ext_id = string_field(ref, "external_id");
          if (source == "mitre-attack" && t.technique_id.empty()) {
            t.technique_id = ext_id;
          } else if (source == "capec" && is_capec_id(ext_id)) {
            capecs.push_back(ext_id);
          }
        }
      }
      t.capec_refs = dedup_preserving_order(std::move(capecs));
      if (!is_technique_id(t.technique_id) || t.description.empty()) {
        ++result.dropped;
        continue;
      }
      result.records.push_back(std::move(t));
    }
  } else {
    unsupported("attack", format);
  }
  finish(result, [](const AttackTechnique& t) -> const std::string& { return t.technique_id; });
  return result;
}

ParseResult<CapecPattern> parse_capec_feed(std::string_view raw, FeedFormat format) {
  ParseResult<CapecPattern> result;
  if (format == FeedFormat::kJsonl) {
    for (const auto& line : split_jsonl(raw)) {
      ++result.input_objects;
      CapecPattern c;
      c.capec_id = required_id(line, "capec_id", is_capec_id);
      c.name = required_string(line, "name");
      c.description = required_string(line, "description");
      c.cwe_refs = required_id_list(line, "cwe_refs", is_cwe_id);
      result.records.push_back(std::move(c));
    }
  } else if (format == FeedFormat::kXml) {
    const pt::ptree tree = parse_xml_document(raw);
    for_each_entry(tree, "Attack_Pattern_Catalog", "Attack_Patterns", "Attack_Pattern",
                   [&](const pt::ptree& node) {
                     ++result.input_objects;
                     CapecPattern c;
                     c.capec_id = "CAPEC-" + attribute(node, "ID");
                     c.name = attribute(node, "Name");
                     c.description = element_text(child(node, "Description"));
                     if (is_deprecated_status(attribute(node, "Status")) ||
                         !is_capec_id(c.capec_id)) {
                       ++result.dropped;
                       return;
                     }
                     std::vector<std::string> cwes;
                     if (const auto* related = child(node, "Related_Weaknesses")) {
                       for (const auto& [key, rw] : *related) {
                         if (local_name(key) != "Related_Weakness") continue;
                         std::string id = "CWE-" + attribute(rw, "CWE_ID");
                         if (is_cwe_id(id)) cwes.push_back(std::move(id));
                       }
                     }
                     c.cwe_refs = dedup_preserving_order(std::move(cwes));
                     result.records.push_back(std::move(c));
                   });
  } else {
    unsupported("capec", format);
  }
  finish(result, [](const CapecPattern& c) -> const std::string& { return c.capec_id; });
  return result;
}

ParseResult<CweEntry> parse_cwe_feed(std::string_view raw, FeedFormat format) {
  ParseResult<CweEntry> result;
  if (format == FeedFormat::kJsonl) {
    for (const auto& line : split_jsonl(raw)) {
      ++result.input_objects;
      CweEntry c;
      c.cwe_id = required_id(line, "cwe_id", is_cwe_id);
      c.name = required_string(line, "name");
      c.description = required_string(line, "description");
      c.cve_refs = required_id_list(line, "cve_refs", is_cve_id);
      result.records.push_back(std::move(c));
    }
  } else if (format == FeedFormat::kXml) {
    const pt::ptree tree = parse_xml_document(raw);
    for_each_entry(tree, "Weakness_Catalog", "Weaknesses", "Weakness", [&](const pt::ptree& node) {
      ++result.input_objects;
      CweEntry c;
      c.cwe_id = "CWE-" + attribute(node, "ID");
      c.name = attribute(node, "Name");
      c.description = element_text(child(node, "Description"));
      if (is_deprecated_status(attribute(node, "Status")) || !is_cwe_id(c.cwe_id)) {
        ++result.dropped;
        return;
      }
      std::vector<std::string> cves;
      if (const auto* examples = child(node, "Observed_Examples")) {
        for (const auto& [key, example] : *examples) {
          if (local_name(key) != "Observed_Example") continue;
          std::string id = element_text(child(example, "Reference"));
          if (is_cve_id(id)) cves.push_back(std::move(id));
        }
      }
      c.cve_refs = dedup_preserving_order(std::move(cves));
      result.records.push_back(std::move(c));
    });
  } else {
    unsupported("cwe", format);
  }
  finish(result, [](const CweEntry& c) -> const std::string& { return c.cwe_id; });
  return result;
}

ParseResult<CveRecord> parse_cve_feed(std::string_view raw, FeedFormat format) {
  ParseResult<CveRecord> result;
  auto keep = [&](CveRecord r, bool rejected) {
    if (rejected || r.description.empty() || is_rejected_text(r.description) ||
        !is_cve_id(r.cve_id)) {
      ++result.dropped;
      return;
    }
    if (r.published_year == 0) r.published_year = year_prefix(std::string_view(r.cve_id).substr(4));
    result.records.push_back(std::move(r));
  };

  if (format == FeedFormat::kJsonl) {
    for (const auto& line : split_jsonl(raw)) {
      ++result.input_objects;
      CveRecord r;
      r.cve_id = required_id(line, "cve_id", is_cve_id);
      r.description = required_string(line, "description");
      auto year = line.value.find("published_year");
      if (year == line.value.end() || !year->is_number_integer()) {
        throw ParseError("missing integer field 'published_year'", line.offset);
      }
      r.published_year = year->get<int>();
      keep(std::move(r), false);
    }
  } else if (format == FeedFormat::kNvdJson) {
    const json doc = parse_json_document(raw);
    if (!doc.is_object()) throw ParseError("NVD document is not an object", 0);
    if (auto items = doc.find("CVE_Items"); items != doc.end()) {
      // NVD JSON 1.1 feed.
      if (!items->is_array()) throw ParseError("'CVE_Items' is not an array", 0);
      for (const auto& item : *items) {
        ++result.input_objects;
        CveRecord r;
        const json cve = item.value("cve", json::object());
        r.cve_id = string_field(cve.value("CVE_data_meta", json::object()), "ID");
        r.description = english_description(
            cve.value("description", json::object()).value("description_data", json::array()),
            "value");
        r.published_year = year_prefix(string_field(item, "publishedDate"));
        keep(std::move(r), false);
      }
    } else if (auto vulns = doc.find("vulnerabilities"); vulns != doc.end()) {
      // NVD API 2.0 response.
      if (!vulns->is_array()) throw ParseError("'vulnerabilities' is not an array", 0);
      for (const auto& v : *vulns) {
        ++result.input_objects;
        const json cve = v.value("cve", json::object());
        CveRecord r;
        r.cve_id = string_field(cve, "id");
        r.description = english_description(cve.value("descriptions", json::array()), "value");
        r.published_year = year_prefix(string_field(cve, "published"));
        keep(std::move(r), string_field(cve, "vulnStatus") == "Rejected");
      }
    } else {
      throw ParseError("NVD document has neither 'CVE_Items' nor 'vulnerabilities'", 0);
    }
  } else {
    unsupported("cve", format);
  }
  finish(result, [](const CveRecord& r) -> const std::string& { return r.cve_id; });
  return result;
}

}  // namespace vuldat::feeds
