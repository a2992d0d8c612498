#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vuldat/preprocess.hpp"

namespace vuldat::embed {

struct ModelSpec {
  std::string model_name;
  std::size_t dimension = 0;
  int size_hint_mb = 0;

  bool operator==(const ModelSpec&) const = default;
};

inline constexpr std::string_view kTestHashModel = "test-hash";
inline constexpr std::size_t kTestHashDimension = 64;

/// The nine pretrained sentence-embedding models followed by "test-hash", in
/// the order used for comparison tables.
const std::vector<ModelSpec>& model_registry();

/// Throws ConfigError for names outside the registry.
const ModelSpec& find_model(std::string_view name);
std::size_t registry_position(std::string_view name);

struct EmbeddingVector {
  std::vector<float> values;
  ModelSpec model;
  std::string source_id;
};

/// Immutable-after-build collection of vectors for one model and one
/// preprocessing mode. Vectors are kept contiguous, in insertion order.
class EmbeddingStore {
 public:
  EmbeddingStore(ModelSpec model, text::PreprocessMode mode);

  /// Throws ConsistencyError for a repeated id, ProtocolError for a wrong
  /// length or a non-finite entry.
  void add(std::string source_id, std::span<const float> values, std::string text = {});

  const ModelSpec& model() const { return model_; }
  text::PreprocessMode mode() const { return mode_; }
  std::size_t size() const { return ids_.size(); }
  std::size_t dimension() const { return model_.dimension; }
  bool empty() const { return ids_.empty(); }

  const std::string& id(std::size_t i) const { return ids_[i]; }
  const std::string& text(std::size_t i) const { return texts_[i]; }
  std::span<const float> vector(std::size_t i) const {
    return {data_.data() + i * model_.dimension, model_.dimension};
  }

  std::optional<std::size_t> index_of(std::string_view source_id) const;
  std::optional<std::size_t> index_of_text(std::string_view text) const;
  EmbeddingVector get(std::size_t i) const;

  bool has_texts() const;

 private:
  ModelSpec model_;
  text::PreprocessMode mode_;
  std::vector<std::string> ids_;
  std::vector<std::string> texts_;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

// On-disk format: `<stem>.embjson` holds a JSON header
//   {format, schema_version, model_name, dimension, mode, count, dtype, ids[, texts]}
// and `<stem>.embbin` holds count * dimension little-endian IEEE-754 float32
// values, row-major, rows in `ids` order.

/// `path` may name the .embjson file or the bare stem.
void save_store(const EmbeddingStore& store, const std::filesystem::path& path);

/// Throws CorruptionError when header and payload disagree (counts, sizes,
/// truncation) and ConfigError for an unknown model. Never returns a partial
/// store.
EmbeddingStore load_store(const std::filesystem::path& path);

std::filesystem::path header_path(const std::filesystem::path& path);
std::filesystem::path payload_path(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Backends

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::string name() const = 0;

  /// One vector per input, in input order.
  virtual std::vector<std::vector<float>> embed_batch(std::span<const text::CleanText> texts,
                                                      const ModelSpec& model) = 0;

  /// Largest batch the backend accepts per call.
  virtual std::size_t max_batch() const { return 256; }
};

/// Deterministic feature-hashing embedder. Features are token unigrams,
/// token bigrams and boundary-marked character trigrams of each token; each
/// feature adds a signed weight to one of 64 buckets chosen by FNV-1a, and
/// the result is L2-normalized. Empty text yields the zero vector.
class TestHashBackend final : public EmbeddingBackend {
 public:
  std::string name() const override { return "test-hash"; }
  std::vector<std::vector<float>> embed_batch(std::span<const text::CleanText> texts,
                                              const ModelSpec& model) override;

  static std::vector<float> embed_text(std::string_view clean_text);
};

/// Serves recorded vectors, looked up by source_id and then by exact text.
class FixtureBackend final : public EmbeddingBackend {
 public:
  explicit FixtureBackend(EmbeddingStore fixture) : fixture_(std::move(fixture)) {}

  std::string name() const override { return "fixture"; }
  std::vector<std::vector<float>> embed_batch(std::span<const text::CleanText> texts,
                                              const ModelSpec& model) override;

 private:
  EmbeddingStore fixture_;
};

struct RemoteOptions {
  int max_attempts = 3;
  int backoff_ms = 200;
  int timeout_s = 120;
  std::size_t batch_size = 256;
};

/// Client for the embedding sidecar: POST {base}/embed with
/// {"model_name": ..., "texts": [...]} and GET {base}/models.
class RemoteBackend final : public EmbeddingBackend {
 public:
  explicit RemoteBackend(std::string base_url, RemoteOptions options = {});

  std::string name() const override { return "remote"; }
  std::vector<std::vector<float>> embed_batch(std::span<const text::CleanText> texts,
                                              const ModelSpec& model) override;
  std::size_t max_batch() const override { return options_.batch_size; }

  /// Registry served by the sidecar.
  std::vector<ModelSpec> list_models();

  const std::string& base_url() const { return base_url_; }

 private:
  std::string post(const std::string& path, const std::string& body);
  std::string get(const std::string& path);

  std::string base_url_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  RemoteOptions options_;
};

/// Embeds `texts` in order, batching per backend limits. Every text must be in
/// `mode` (ConsistencyError); a backend answer with the wrong count or
/// dimension raises ProtocolError.
EmbeddingStore embed(std::span<const text::CleanText> texts, EmbeddingBackend& backend,
                     const ModelSpec& model, text::PreprocessMode mode);

}  // namespace vuldat::embed
