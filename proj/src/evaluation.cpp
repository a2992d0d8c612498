#include "vuldat/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <nlohmann/json.hpp>

#include "vuldat/embedding.hpp"
#include "vuldat/error.hpp"

namespace vuldat::eval {

using nlohmann::ordered_json;

DetectionSets to_sets(const std::map<std::string, retrieval::DetectionList>& lists) {
  DetectionSets out;
  for (const auto& [id, list] : lists) {
    auto& set = out[id];
    for (const auto& hit : list.hits) set.insert(hit.cve_id);
  }
  return out;
}

const char* to_string(OutcomeClass c) noexcept {
  switch (c) {
    case OutcomeClass::kTruePositive: return "TP";
    case OutcomeClass::kFalsePositive: return "FP";
    case OutcomeClass::kFalseNegative: return "FN";
    case OutcomeClass::kTrueNegative: return "TN";
    case OutcomeClass::kDisjoint: return "Disjoint";
  }
  return "?";
}

DisjointPolicy parse_disjoint_policy(std::string_view tag) {
  if (tag == "fp") return DisjointPolicy::kFalsePositive;
  if (tag == "fp-and-fn") return DisjointPolicy::kFalsePositiveAndNegative;
  if (tag == "exclude") return DisjointPolicy::kExclude;
  throw ConfigError("unknown disjoint policy '" + std::string(tag) +
                    "' (expected fp|fp-and-fn|exclude)");
}

const char* to_string(DisjointPolicy policy) noexcept {
  switch (policy) {
    case DisjointPolicy::kFalsePositive: return "fp";
    case DisjointPolicy::kFalsePositiveAndNegative: return "fp-and-fn";
    case DisjointPolicy::kExclude: return "exclude";
  }
  return "?";
}

namespace {

std::size_t intersection_size(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::size_t n = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++n;
      ++ia;
      ++ib;
    }
  }
  return n;
}

void check_same_attacks(const DetectionSets& detections, const link::AttackCveMap& mapping) {
  if (detections.size() != mapping.size()) {
    throw ConsistencyError("detections cover " + std::to_string(detections.size()) +
                           " attacks but the mapping covers " + std::to_string(mapping.size()));
  }
  for (auto d = detections.begin(), m = mapping.begin(); d != detections.end(); ++d, ++m) {
    if (d->first != m->first) {
      throw ConsistencyError("attack sets differ: " + d->first + " vs " + m->first);
    }
  }
}

double ratio(std::size_t num, std::size_t den) {
  return static_cast<double>(num) / static_cast<double>(den);
}

double quantile(const std::vector<double>& sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

std::vector<AttackOutcome> classify(const DetectionSets& detections,
                                    const link::AttackCveMap& mapping) {
  check_same_attacks(detections, mapping);
  std::vector<AttackOutcome> out;
  out.reserve(mapping.size());
  for (const auto& [id, actual] : mapping) {
    const auto& detected = detections.at(id);
    AttackOutcome o{id, detected.size(), actual.size(), intersection_size(detected, actual),
                    OutcomeClass::kTrueNegative};
    if (o.overlap > 0) {
      o.outcome = OutcomeClass::kTruePositive;
    } else if (o.detected > 0 && o.actual == 0) {
      o.outcome = OutcomeClass::kFalsePositive;
    } else if (o.detected == 0 && o.actual > 0) {
      o.outcome = OutcomeClass::kFalseNegative;
    } else if (o.detected == 0 && o.actual == 0) {
      o.outcome = OutcomeClass::kTrueNegative;
    } else {
      o.outcome = OutcomeClass::kDisjoint;
    }
    out.push_back(std::move(o));
  }
  return out;
}

OutcomeCounts count(const std::vector<AttackOutcome>& outcomes) {
  OutcomeCounts c;
  for (const auto& o : outcomes) {
    switch (o.outcome) {
      case OutcomeClass::kTruePositive: ++c.tp; break;
      case OutcomeClass::kFalsePositive: ++c.fp; break;
      case OutcomeClass::kFalseNegative: ++c.fn; break;
      case OutcomeClass::kTrueNegative: ++c.tn; break;
      case OutcomeClass::kDisjoint: ++c.disjoint; break;
    }
  }
  return c;
}

PrfResult prf(const OutcomeCounts& counts, DisjointPolicy policy) {
  std::size_t fp = counts.fp;
  std::size_t fn = counts.fn;
  if (policy == DisjointPolicy::kFalsePositive) {
    fp += counts.disjoint;
  } else if (policy == DisjointPolicy::kFalsePositiveAndNegative) {
    fp += counts.disjoint;
    fn += counts.disjoint;
  }

  PrfResult r;
  if (counts.tp + fp == 0) {
    r.precision_degenerate = true;
  } else {
    r.precision = ratio(counts.tp, counts.tp + fp);
  }
  if (counts.tp + fn == 0) {
    r.recall_degenerate = true;
  } else {
    r.recall = ratio(counts.tp, counts.tp + fn);
  }
  if (r.precision + r.recall == 0.0) {
    r.f1_degenerate = true;
  } else {
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  }
  return r;
}

PrfResult prf(const std::vector<AttackOutcome>& outcomes, DisjointPolicy policy) {
  return prf(count(outcomes), policy);
}

std::vector<AttackAccuracy> accuracies(const DetectionSets& detections,
                                       const link::AttackCveMap& mapping) {
  check_same_attacks(detections, mapping);
  std::vector<AttackAccuracy> out;
  out.reserve(mapping.size());
  for (const auto& [id, actual] : mapping) {
    const auto& detected = detections.at(id);
    const std::size_t inter = intersection_size(detected, actual);
    const std::size_t uni = detected.size() + actual.size() - inter;
    AttackAccuracy a;
    a.technique_id = id;
    if (uni > 0) a.jaccard = ratio(inter, uni);
    if (!actual.empty()) a.mapping_accuracy = ratio(inter, actual.size());
    if (!detected.empty()) a.detection_accuracy = ratio(inter, detected.size());
    out.push_back(std::move(a));
  }
  return out;
}

DistributionSummary summarize(const std::vector<double>& values, std::size_t excluded) {
  DistributionSummary s;
  s.count = values.size();
  s.excluded = excluded;
  if (values.empty()) return s;

  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  s.min = sorted.front();
  s.max = sorted.back();
  s.q1 = quantile(sorted, 0.25);
  s.median = quantile(sorted, 0.5);
  s.q3 = quantile(sorted, 0.75);
  double sum = 0.0;
  for (double v : sorted) sum += v;
  s.mean = sum / static_cast<double>(sorted.size());

  const double iqr = s.q3 - s.q1;
  const double lo_fence = s.q1 - 1.5 * iqr;
  const double hi_fence = s.q3 + 1.5 * iqr;
  s.lower_whisker = s.max;
  s.upper_whisker = s.min;
  for (double v : sorted) {
    if (v < lo_fence || v > hi_fence) {
      ++s.outliers;
      continue;
    }
    s.lower_whisker = std::min(s.lower_whisker, v);
    s.upper_whisker = std::max(s.upper_whisker, v);
  }
  return s;
}

EvaluationReport aggregate(std::vector<AttackOutcome> outcomes,
                           std::vector<AttackAccuracy> accuracies, DisjointPolicy policy,
                           RunMetadata metadata) {
  EvaluationReport r;
  r.counts = count(outcomes);
  r.prf = prf(r.counts, policy);
  r.disjoint_policy = policy;

  std::vector<double> j, m, d;
  std::size_t j_undef = 0, m_undef = 0, d_undef = 0;
  for (const auto& a : accuracies) {
    a.jaccard ? j.push_back(*a.jaccard) : void(++j_undef);
    a.mapping_accuracy ? m.push_back(*a.mapping_accuracy) : void(++m_undef);
    a.detection_accuracy ? d.push_back(*a.detection_accuracy) : void(++d_undef);
  }
  r.jaccard = summarize(j, j_undef);
  r.mapping_accuracy = summarize(m, m_undef);
  r.detection_accuracy = summarize(d, d_undef);

  r.outcomes = std::move(outcomes);
  r.accuracies = std::move(accuracies);
  r.metadata = std::move(metadata);
  return r;
}

EvaluationReport evaluate(const DetectionSets& detections, const link::AttackCveMap& mapping,
                          DisjointPolicy policy, RunMetadata metadata) {
  return aggregate(classify(detections, mapping), accuracies(detections, mapping), policy,
                   std::move(metadata));
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

ordered_json optional_number(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

ordered_json summary_json(const DistributionSummary& s) {
  ordered_json j;
  j["count"] = s.count;
  j["excluded"] = s.excluded;
  if (s.count == 0) {
    for (const char* key : {"min", "q1", "median", "q3", "max", "mean", "lower_whisker",
                            "upper_whisker"}) {
      j[key] = nullptr;
    }
    j["outliers"] = 0;
    return j;
  }
  j["min"] = s.min;
  j["q1"] = s.q1;
  j["median"] = s.median;
  j["q3"] = s.q3;
  j["max"] = s.max;
  j["mean"] = s.mean;
  j["lower_whisker"] = s.lower_whisker;
  j["upper_whisker"] = s.upper_whisker;
  j["outliers"] = s.outliers;
  return j;
}

std::string csv_number(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", *v);
  return buf;
}

}  // namespace

std::string report_json(const EvaluationReport& report, std::string_view run_manifest) {
  ordered_json j;
  ordered_json meta;
  meta["model"] = report.metadata.model;
  meta["mode"] = report.metadata.mode;
  meta["threshold"] = report.metadata.threshold;
  meta["top_n"] = report.metadata.top_n;
  meta["disjoint_policy"] = to_string(report.disjoint_policy);
  meta["attack_count"] = report.outcomes.size();
  if (!report.metadata.snapshot_manifest_json.empty()) {
    meta["snapshot_manifest"] = ordered_json::parse(report.metadata.snapshot_manifest_json);
  } else {
    meta["snapshot_manifest"] = nullptr;
  }
  j["metadata"] = std::move(meta);
  if (!run_manifest.empty()) j["run_manifest"] = std::string(run_manifest);

  j["counts"] = {{"TP", report.counts.tp},
                 {"FP", report.counts.fp},
                 {"FN", report.counts.fn},
                 {"TN", report.counts.tn},
                 {"Disjoint", report.counts.disjoint}};
  ordered_json metrics;
  metrics["precision"] = report.prf.precision;
  metrics["recall"] = report.prf.recall;
  metrics["f1"] = report.prf.f1;
  metrics["precision_degenerate"] = report.prf.precision_degenerate;
  metrics["recall_degenerate"] = report.prf.recall_degenerate;
  metrics["f1_degenerate"] = report.prf.f1_degenerate;
  j["metrics"] = std::move(metrics);

  j["distributions"] = {{"jaccard", summary_json(report.jaccard)},
                        {"mapping_accuracy", summary_json(report.mapping_accuracy)},
                        {"detection_accuracy", summary_json(report.detection_accuracy)}};

  ordered_json attacks = ordered_json::array();
  for (std::size_t i = 0; i < report.outcomes.size(); ++i) {
    const auto& o = report.outcomes[i];
    const auto& a = report.accuracies[i];
    ordered_json row;
    row["technique_id"] = o.technique_id;
    row["class"] = to_string(o.outcome);
    row["detected"] = o.detected;
    row["actual"] = o.actual;
    row["overlap"] = o.overlap;
    row["jaccard"] = optional_number(a.jaccard);
    row["mapping_accuracy"] = optional_number(a.mapping_accuracy);
    row["detection_accuracy"] = optional_number(a.detection_accuracy);
    attacks.push_back(std::move(row));
  }
  j["attacks"] = std::move(attacks);
  return j.dump(2) + "\n";
}

std::string report_csv(const EvaluationReport& report) {
  std::string out =
      "technique_id,class,detected,actual,overlap,jaccard,mapping_accuracy,detection_accuracy\n";
  for (std::size_t i = 0; i < report.outcomes.size(); ++i) {
    const auto& o = report.outcomes[i];
    const auto& a = report.accuracies[i];
    out += o.technique_id + ',' + to_string(o.outcome) + ',' + std::to_string(o.detected) + ',' +
           std::to_string(o.actual) + ',' + std::to_string(o.overlap) + ',' +
           csv_number(a.jaccard) + ',' + csv_number(a.mapping_accuracy) + ',' +
           csv_number(a.detection_accuracy) + '\n';
  }
  return out;
}

ModelRun model_run_from_report_json(std::string_view json_text) {
  try {
    const auto j = nlohmann::json::parse(json_text.begin(), json_text.end());
    ModelRun run;
    run.model = j.at("metadata").at("model").get<std::string>();
    run.mode = j.at("metadata").at("mode").get<std::string>();
    const auto& m = j.at("metrics");
    run.prf.precision = m.at("precision").get<double>();
    run.prf.recall = m.at("recall").get<double>();
    run.prf.f1 = m.at("f1").get<double>();
    run.prf.precision_degenerate = m.value("precision_degenerate", false);
    run.prf.recall_degenerate = m.value("recall_degenerate", false);
    run.prf.f1_degenerate = m.value("f1_degenerate", false);
    return run;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(std::string("malformed evaluation report: ") + e.what());
  }
}

ComparisonTable compare_models(const std::vector<ModelRun>& runs) {
  std::map<std::pair<std::string, std::string>, PrfResult> cells;
  std::set<std::string> models;
  for (const auto& r : runs) {
    if (r.mode != "partial" && r.mode != "full") {
      throw ConsistencyError("run for " + r.model + " has unknown mode '" + r.mode + "'");
    }
    if (!cells.emplace(std::make_pair(r.model, r.mode), r.prf).second) {
      throw ConsistencyError("two runs for " + r.model + " / " + r.mode);
    }
    models.insert(r.model);
  }

  std::vector<std::string> ordered(models.begin(), models.end());
  auto position = [](const std::string& name) {
    try {
      return embed::registry_position(name);
    } catch (const ConfigError&) {
      return std::numeric_limits<std::size_t>::max();
    }
  };
  std::stable_sort(ordered.begin(), ordered.end(), [&](const std::string& a, const std::string& b) {
    return position(a) < position(b);
  });

  ComparisonTable table;
  for (const auto& model : ordered) {
    for (const char* mode : {"partial", "full"}) {
      ComparisonRow row{model, mode, std::nullopt, false};
      if (auto it = cells.find({model, mode}); it != cells.end()) row.prf = it->second;
      table.rows.push_back(std::move(row));
    }
  }

  for (const auto& row : table.rows) {
    if (row.prf && (!table.best_f1 || row.prf->f1 > *table.best_f1)) table.best_f1 = row.prf->f1;
  }
  std::size_t best_count = 0;
  for (auto& row : table.rows) {
    if (row.prf && table.best_f1 && row.prf->f1 == *table.best_f1) {
      row.best = true;
      ++best_count;
    }
  }
  table.tie = best_count > 1;
  return table;
}

std::string comparison_csv(const ComparisonTable& table) {
  std::string out = "model,mode,status,precision,recall,f1,best\n";
  for (const auto& row : table.rows) {
    out += row.model + ',' + row.mode + ',';
    if (!row.prf) {
      out += "absent,,,,\n";
      continue;
    }
    out += "present," + csv_number(row.prf->precision) + ',' + csv_number(row.prf->recall) + ',' +
           csv_number(row.prf->f1) + ',';
    out += row.best ? (table.tie ? "best-tie" : "best") : "";
    out += '\n';
  }
  return out;
}

}  // namespace vuldat::eval
