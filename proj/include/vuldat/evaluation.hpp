#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "vuldat/link_graph.hpp"
#include "vuldat/retrieval.hpp"

namespace vuldat::eval {

/// technique_id -> detected CVE set (the Detection List without scores).
using DetectionSets = std::map<std::string, std::set<std::string>>;

DetectionSets to_sets(const std::map<std::string, retrieval::DetectionList>& lists);

enum class OutcomeClass {
  kTruePositive,   // overlap > 0
  kFalsePositive,  // detected > 0, actual == 0
  kFalseNegative,  // detected == 0, actual > 0
  kTrueNegative,   // detected == 0, actual == 0
  kDisjoint,       // detected > 0, actual > 0, overlap == 0
};

const char* to_string(OutcomeClass c) noexcept;

struct AttackOutcome {
  std::string technique_id;
  std::size_t detected = 0;
  std::size_t actual = 0;
  std::size_t overlap = 0;
  OutcomeClass outcome = OutcomeClass::kTrueNegative;

  bool operator==(const AttackOutcome&) const = default;
};

/// Undefined values are nullopt: jaccard when both sets are empty,
/// mapping_accuracy when the actual set is empty, detection_accuracy when the
/// detected set is empty.
struct AttackAccuracy {
  std::string technique_id;
  std::optional<double> jaccard;
  std::optional<double> mapping_accuracy;
  std::optional<double> detection_accuracy;

  bool operator==(const AttackAccuracy&) const = default;
};

/// How Disjoint attacks enter precision and recall.
enum class DisjointPolicy {
  kFalsePositive,             // "fp": counted as FP
  kFalsePositiveAndNegative,  // "fp-and-fn": counted as both FP and FN
  kExclude,                   // "exclude": ignored
};

DisjointPolicy parse_disjoint_policy(std::string_view tag);
const char* to_string(DisjointPolicy policy) noexcept;

struct OutcomeCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0, disjoint = 0;

  std::size_t total() const { return tp + fp + fn + tn + disjoint; }
  bool operator==(const OutcomeCounts&) const = default;
};

/// Zero denominators produce 0 with the matching flag set.
struct PrfResult {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_degenerate = false;
  bool recall_degenerate = false;
  bool f1_degenerate = false;

  bool degenerate() const { return precision_degenerate || recall_degenerate || f1_degenerate; }
};

/// Box-plot statistics over the defined values of one measure. Quartiles use
/// linear interpolation between order statistics; whiskers reach the most
/// extreme values within 1.5 IQR of the quartiles.
struct DistributionSummary {
  std::size_t count = 0;
  std::size_t excluded = 0;
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0, mean = 0.0;
  double lower_whisker = 0.0, upper_whisker = 0.0;
  std::size_t outliers = 0;
};

struct RunMetadata {
  std::string model;
  std::string mode;
  double threshold = 0.0;
  std::size_t top_n = 0;
  std::string snapshot_manifest_json;  // verbatim manifest.json contents, may be empty
};

struct EvaluationReport {
  std::vector<AttackOutcome> outcomes;
  std::vector<AttackAccuracy> accuracies;
  OutcomeCounts counts;
  DisjointPolicy disjoint_policy = DisjointPolicy::kFalsePositive;
  PrfResult prf;
  DistributionSummary jaccard;
  DistributionSummary mapping_accuracy;
  DistributionSummary detection_accuracy;
  RunMetadata metadata;
};

/// One outcome per attack, ordered by technique_id. Throws ConsistencyError
/// when the two maps do not cover the same attacks.
std::vector<AttackOutcome> classify(const DetectionSets& detections,
                                    const link::AttackCveMap& mapping);

OutcomeCounts count(const std::vector<AttackOutcome>& outcomes);

PrfResult prf(const OutcomeCounts& counts, DisjointPolicy policy);
PrfResult prf(const std::vector<AttackOutcome>& outcomes, DisjointPolicy policy);

std::vector<AttackAccuracy> accuracies(const DetectionSets& detections,
                                       const link::AttackCveMap& mapping);

/// `excluded` records how many undefined values were dropped.
DistributionSummary summarize(const std::vector<double>& values, std::size_t excluded = 0);

EvaluationReport aggregate(std::vector<AttackOutcome> outcomes,
                           std::vector<AttackAccuracy> accuracies, DisjointPolicy policy,
                           RunMetadata metadata);

/// classify + accuracies + aggregate.
EvaluationReport evaluate(const DetectionSets& detections, const link::AttackCveMap& mapping,
                          DisjointPolicy policy, RunMetadata metadata);

std::string report_json(const EvaluationReport& report, std::string_view run_manifest = {});
std::string report_csv(const EvaluationReport& report);

/// Reads the summary part of an evaluation_report.json (model, mode and
/// precision/recall/f1). Throws CorruptionError.
struct ModelRun {
  std::string model;
  std::string mode;
  PrfResult prf;
};
ModelRun model_run_from_report_json(std::string_view json_text);

struct ComparisonRow {
  std::string model;
  std::string mode;
  std::optional<PrfResult> prf;  // nullopt: cell absent from the run matrix
  bool best = false;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;
  std::optional<double> best_f1;
  bool tie = false;
};

/// Rows follow the model registry order (unknown models after, by name),
/// partial before full. Every present cell with the maximal F1 is flagged.
/// Throws ConsistencyError for two runs of the same cell.
ComparisonTable compare_models(const std::vector<ModelRun>& runs);
std::string comparison_csv(const ComparisonTable& table);

}  // namespace vuldat::eval
