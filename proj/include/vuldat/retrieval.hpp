#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vuldat/embedding.hpp"

namespace vuldat::retrieval {

struct SimilarityHit {
  std::string cve_id;
  double score = 0.0;

  bool operator==(const SimilarityHit&) const = default;
};

/// Hits must score strictly above `threshold` (raw cosine, not rescaled).
struct RetrievalConfig {
  double threshold = 0.60;
  std::size_t top_n = 150;

  /// Throws ConfigError unless 0 <= threshold <= 1 and top_n >= 1.
  void validate() const;
};

/// Ranked, thresholded matches for one query. Hits are ordered by score
/// descending, ties by cve_id ascending.
struct DetectionList {
  std::string query_id;  // technique id, or a free-query tag
  std::vector<SimilarityHit> hits;
  double threshold = 0.60;
  std::size_t top_n = 150;
  std::string model;
  text::PreprocessMode mode = text::PreprocessMode::kPartial;

  bool operator==(const DetectionList&) const = default;
};

/// u.v / (|u| |v|) accumulated in double. Throws DegenerateInputError for a
/// zero vector and ConsistencyError for a length mismatch.
double cosine(std::span<const float> u, std::span<const float> v);
double cosine(const embed::EmbeddingVector& u, const embed::EmbeddingVector& v);

/// Exhaustive scan of `store`. Zero vectors in the store never match.
/// Throws ConfigError when the query model differs from the store model.
DetectionList retrieve(const embed::EmbeddingVector& query, const embed::EmbeddingStore& store,
                       const RetrievalConfig& config);

/// retrieve() for every vector of `techniques`, spread over `workers` threads
/// (0 = hardware concurrency). The result does not depend on `workers`.
std::map<std::string, DetectionList> retrieve_all(const embed::EmbeddingStore& techniques,
                                                  const embed::EmbeddingStore& cves,
                                                  const RetrievalConfig& config,
                                                  unsigned workers = 0);

/// JSON rendering; `run_manifest` is added as a field when non-empty.
std::string to_json(const DetectionList& list, std::string_view run_manifest = {});
/// Throws CorruptionError on malformed input.
DetectionList detection_from_json(std::string_view json_text);

}  // namespace vuldat::retrieval
