#include "vuldat/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <nlohmann/json.hpp>

#include "vuldat/error.hpp"

namespace vuldat::retrieval {

void RetrievalConfig::validate() const {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ConfigError("threshold must lie in [0, 1], got " + std::to_string(threshold));
  }
  if (top_n < 1) throw ConfigError("top_n must be at least 1");
}

namespace {

double squared_norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * static_cast<double>(x);
  return s;
}

double dot(std::span<const float> u, std::span<const float> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    s += static_cast<double>(u[i]) * static_cast<double>(v[i]);
  }
  return s;
}

// sqrt(a*b) rather than sqrt(a)*sqrt(b): for u == v this gives exactly 1.
double cosine_with_norms(std::span<const float> u, double uu, std::span<const float> v, double vv) {
  return dot(u, v) / std::sqrt(uu * vv);
}

bool ranks_before(const SimilarityHit& a, const SimilarityHit& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.cve_id < b.cve_id;
}

struct PreparedStore {
  const embed::EmbeddingStore& store;
  std::vector<double> squared_norms;

  explicit PreparedStore(const embed::EmbeddingStore& s) : store(s) {
    squared_norms.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) squared_norms.push_back(squared_norm(s.vector(i)));
  }
};

DetectionList scan(std::string query_id, std::span<const float> query, const PreparedStore& prepared,
                   const RetrievalConfig& config) {
  const double qq = squared_norm(query);
  if (qq == 0.0) throw DegenerateInputError("query vector for '" + query_id + "' is zero");

  DetectionList out;
  out.query_id = std::move(query_id);
  out.threshold = config.threshold;
  out.top_n = config.top_n;
  out.model = prepared.store.model().model_name;
  out.mode = prepared.store.mode();

  std::vector<SimilarityHit> candidates;
  for (std::size_t i = 0; i < prepared.store.size(); ++i) {
    if (prepared.squared_norms[i] == 0.0) continue;
    const double score =
        cosine_with_norms(query, qq, prepared.store.vector(i), prepared.squared_norms[i]);
    if (score > config.threshold) candidates.push_back({prepared.store.id(i), score});
  }
  const std::size_t keep = std::min(candidates.size(), config.top_n);
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                    candidates.end(), ranks_before);
  candidates.resize(keep);
  out.hits = std::move(candidates);
  return out;
}

}  // namespace

double cosine(std::span<const float> u, std::span<const float> v) {
  if (u.size() != v.size()) {
    throw ConsistencyError("cosine of vectors with different dimensions (" +
                           std::to_string(u.size()) + " vs " + std::to_string(v.size()) + ")");
  }
  const double uu = squared_norm(u);
  const double vv = squared_norm(v);
  if (uu == 0.0 || vv == 0.0) throw DegenerateInputError("cosine of a zero vector");
  return cosine_with_norms(u, uu, v, vv);
}

double cosine(const embed::EmbeddingVector& u, const embed::EmbeddingVector& v) {
  return cosine(std::span<const float>(u.values), std::span<const float>(v.values));
}

DetectionList retrieve(const embed::EmbeddingVector& query, const embed::EmbeddingStore& store,
                       const RetrievalConfig& config) {
  config.validate();
  if (!(query.model == store.model())) {
    throw ConfigError("query embedded with " + query.model.model_name + " but the store holds " +
                      store.model().model_name + " vectors");
  }
  if (query.values.size() != store.dimension()) {
    throw ConsistencyError("query dimension does not match the store");
  }
  return scan(query.source_id, query.values, PreparedStore(store), config);
}

std::map<std::string, DetectionList> retrieve_all(const embed::EmbeddingStore& techniques,
                                                  const embed::EmbeddingStore& cves,
                                                  const RetrievalConfig& config,
                                                  unsigned workers) {
  config.validate();
  if (!(techniques.model() == cves.model())) {
    throw ConfigError("technique store holds " + techniques.model().model_name +
                      " vectors but the CVE store holds " + cves.model().model_name);
  }
  if (techniques.mode() != cves.mode()) {
    throw ConfigError("technique and CVE stores use different preprocessing modes");
  }

  const PreparedStore prepared(cves);
  const std::size_t n = techniques.size();
  std::vector<DetectionList> results(n);

  if (workers == 0) workers = std::max(1U, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(n, 1)));

  // Static striping keeps each slot owned by exactly one thread.
  std::vector<std::exception_ptr> errors(workers);
  auto work = [&](unsigned w) {
    try {
      for (std::size_t i = w; i < n; i += workers) {
        results[i] = scan(techniques.id(i), techniques.vector(i), prepared, config);
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (workers <= 1) {
    work(0);
  } else {
    std::vector<std::jthread> threads;
    threads.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) threads.emplace_back(work, w);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::map<std::string, DetectionList> out;
  for (auto& r : results) {
    std::string id = r.query_id;
    out.emplace(std::move(id), std::move(r));
  }
  return out;
}

std::string to_json(const DetectionList& list, std::string_view run_manifest) {
  nlohmann::ordered_json j;
  j["query"] = list.query_id;
  j["model"] = list.model;
  j["mode"] = text::to_string(list.mode);
  j["threshold"] = list.threshold;
  j["top_n"] = list.top_n;
  nlohmann::ordered_json hits = nlohmann::ordered_json::array();
  for (const auto& h : list.hits) {
    nlohmann::ordered_json hit;
    hit["cve_id"] = h.cve_id;
    hit["score"] = h.score;
    hits.push_back(std::move(hit));
  }
  j["hits"] = std::move(hits);
  if (!run_manifest.empty()) j["run_manifest"] = std::string(run_manifest);
  return j.dump(2) + "\n";
}

DetectionList detection_from_json(std::string_view json_text) {
  try {
    const auto j = nlohmann::json::parse(json_text.begin(), json_text.end());
    DetectionList list;
    list.query_id = j.at("query").get<std::string>();
    list.model = j.at("model").get<std::string>();
    list.mode = text::parse_mode(j.at("mode").get<std::string>());
    list.threshold = j.at("threshold").get<double>();
    list.top_n = j.at("top_n").get<std::size_t>();
    for (const auto& h : j.at("hits")) {
      list.hits.push_back({h.at("cve_id").get<std::string>(), h.at("score").get<double>()});
    }
    return list;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(std::string("malformed detection list: ") + e.what());
  }
}

}  // namespace vuldat::retrieval
