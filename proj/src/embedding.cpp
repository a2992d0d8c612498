#include "vuldat/embedding.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>

#include <nlohmann/json.hpp>

#include "vuldat/error.hpp"
#include "vuldat/file_util.hpp"

namespace vuldat::embed {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

const std::vector<ModelSpec>& model_registry() {
  static const std::vector<ModelSpec> registry = {
      {"multi-qa-MiniLM-L6-cos-v1", 384, 80},
      {"multi-qa-distilbert-cos-v1", 768, 250},
      {"all-MiniLM-L12-v2", 384, 120},
      {"all-distilroberta-v1", 768, 290},
      {"multi-qa-mpnet-base-dot-v1", 768, 420},
      {"all-MiniLM-L6-v2", 384, 80},
      {"paraphrase-multilingual-MiniLM-L12-v2", 384, 420},
      {"all-mpnet-base-v2", 768, 420},
      {"paraphrase-MiniLM-L6-v2", 384, 61},
      {std::string(kTestHashModel), kTestHashDimension, 0},
  };
  return registry;
}

std::size_t registry_position(std::string_view name) {
  const auto& registry = model_registry();
  for (std::size_t i = 0; i < registry.size(); ++i) {
    if (registry[i].model_name == name) return i;
  }
  throw ConfigError("unknown embedding model '" + std::string(name) + "'");
}

const ModelSpec& find_model(std::string_view name) {
  return model_registry()[registry_position(name)];
}

// ---------------------------------------------------------------------------
// EmbeddingStore

EmbeddingStore::EmbeddingStore(ModelSpec model, text::PreprocessMode mode)
    : model_(std::move(model)), mode_(mode) {
  if (model_.dimension == 0) throw ConfigError("embedding dimension must be positive");
}

void EmbeddingStore::add(std::string source_id, std::span<const float> values, std::string text) {
  if (values.size() != model_.dimension) {
    throw ProtocolError("vector for " + source_id + " has " + std::to_string(values.size()) +
                        " entries, model " + model_.model_name + " expects " +
                        std::to_string(model_.dimension));
  }
  for (float v : values) {
    if (!std::isfinite(v)) throw ProtocolError("vector for " + source_id + " is not finite");
  }
  if (by_id_.contains(source_id)) {
    throw ConsistencyError("duplicate source_id " + source_id + " in embedding store");
  }
  by_id_.emplace(source_id, ids_.size());
  ids_.push_back(std::move(source_id));
  texts_.push_back(std::move(text));
  data_.insert(data_.end(), values.begin(), values.end());
}

std::optional<std::size_t> EmbeddingStore::index_of(std::string_view source_id) const {
  auto it = by_id_.find(std::string(source_id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> EmbeddingStore::index_of_text(std::string_view text) const {
  for (std::size_t i = 0; i < texts_.size(); ++i) {
    if (!texts_[i].empty() && texts_[i] == text) return i;
  }
  return std::nullopt;
}

EmbeddingVector EmbeddingStore::get(std::size_t i) const {
  auto v = vector(i);
  return EmbeddingVector{{v.begin(), v.end()}, model_, ids_[i]};
}

bool EmbeddingStore::has_texts() const {
  for (const auto& t : texts_) {
    if (!t.empty()) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Persistence

fs::path header_path(const fs::path& path) {
  fs::path p = path;
  if (p.extension() == ".embjson" || p.extension() == ".embbin") p.replace_extension();
  p += ".embjson";
  return p;
}

fs::path payload_path(const fs::path& path) {
  fs::path p = path;
  if (p.extension() == ".embjson" || p.extension() == ".embbin") p.replace_extension();
  p += ".embbin";
  return p;
}

namespace {

constexpr const char* kFormatTag = "vuldat-embeddings";
constexpr int kStoreSchemaVersion = 1;

void put_f32_le(std::string& out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<char>((bits >> shift) & 0xFF));
}

float get_f32_le(const char* p) {
  std::uint32_t bits = 0;
  for (int i = 3; i >= 0; --i) bits = (bits << 8) | static_cast<unsigned char>(p[i]);
  return std::bit_cast<float>(bits);
}

}  // namespace

void save_store(const EmbeddingStore& store, const fs::path& path) {
  ordered_json header;
  header["format"] = kFormatTag;
  header["schema_version"] = kStoreSchemaVersion;
  header["model_name"] = store.model().model_name;
  header["dimension"] = store.dimension();
  header["mode"] = text::to_string(store.mode());
  header["count"] = store.size();
  header["dtype"] = "float32-le";
  json ids = json::array();
  for (std::size_t i = 0; i < store.size(); ++i) ids.push_back(store.id(i));
  header["ids"] = std::move(ids);
  if (store.has_texts()) {
    json texts = json::array();
    for (std::size_t i = 0; i < store.size(); ++i) texts.push_back(store.text(i));
    header["texts"] = std::move(texts);
  }

  std::string payload;
  payload.reserve(store.size() * store.dimension() * 4);
  for (std::size_t i = 0; i < store.size(); ++i) {
    for (float v : store.vector(i)) put_f32_le(payload, v);
  }
  write_file(payload_path(path), payload);
  write_file(header_path(path), header.dump(2) + "\n");
}

EmbeddingStore load_store(const fs::path& path) {
  const fs::path hpath = header_path(path);
  json header;
  try {
    header = json::parse(read_file(hpath));
  } catch (const json::parse_error& e) {
    throw CorruptionError(hpath.string() + ": " + e.what());
  }

  std::string model_name, mode, dtype;
  std::size_t dimension = 0, count = 0;
  std::vector<std::string> ids, texts;
  try {
    if (header.at("format").get<std::string>() != kFormatTag) {
      throw CorruptionError(hpath.string() + ": not an embedding store header");
    }
    const int version = header.at("schema_version").get<int>();
    if (version != kStoreSchemaVersion) {
      throw SchemaError(hpath.string() + ": unsupported store schema_version " +
                            std::to_string(version),
                        version);
    }
    model_name = header.at("model_name").get<std::string>();
    dimension = header.at("dimension").get<std::size_t>();
    mode = header.at("mode").get<std::string>();
    count = header.at("count").get<std::size_t>();
    dtype = header.at("dtype").get<std::string>();
    ids = header.at("ids").get<std::vector<std::string>>();
    if (header.contains("texts")) texts = header.at("texts").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw CorruptionError(hpath.string() + ": " + e.what());
  }

  if (dtype != "float32-le") throw CorruptionError(hpath.string() + ": unsupported dtype " + dtype);
  if (ids.size() != count) {
    throw CorruptionError(hpath.string() + ": header count " + std::to_string(count) +
                          " but " + std::to_string(ids.size()) + " ids");
  }
  if (!texts.empty() && texts.size() != count) {
    throw CorruptionError(hpath.string() + ": texts array does not match count");
  }
  const ModelSpec& model = find_model(model_name);
  if (model.dimension != dimension) {
    throw CorruptionError(hpath.string() + ": dimension " + std::to_string(dimension) +
                          " does not match model " + model_name);
  }

  const fs::path ppath = payload_path(path);
  const std::string payload = read_file(ppath);
  const std::size_t expected = count * dimension * 4;
  if (payload.size() != expected) {
    throw CorruptionError(ppath.string() + ": expected " + std::to_string(expected) +
                          " bytes, found " + std::to_string(payload.size()));
  }

  EmbeddingStore store(model, text::parse_mode(mode));
  std::vector<float> row(dimension);
  for (std::size_t i = 0; i < count; ++i) {
    const char* base = payload.data() + i * dimension * 4;
    for (std::size_t d = 0; d < dimension; ++d) row[d] = get_f32_le(base + d * 4);
    try {
      store.add(ids[i], row, texts.empty() ? std::string{} : texts[i]);
    } catch (const Error& e) {
      throw CorruptionError(ppath.string() + ": " + e.what());
    }
  }
  return store;
}

// ---------------------------------------------------------------------------
// Backends

std::vector<float> TestHashBackend::embed_text(std::string_view clean_text) {
  std::vector<double> acc(kTestHashDimension, 0.0);
  auto add = [&](std::string_view feature, double weight) {
    const std::uint64_t h = fnv1a64(feature);
    const std::size_t bucket = h % kTestHashDimension;
    const double sign = ((h >> 32) & 1U) != 0 ? -1.0 : 1.0;
    acc[bucket] += sign * weight;
  };

  std::vector<std::string_view> tokens;
  std::size_t pos = 0;
  while (pos < clean_text.size()) {
    const std::size_t end = std::min(clean_text.find(' ', pos), clean_text.size());
    if (end > pos) tokens.push_back(clean_text.substr(pos, end - pos));
    pos = end + 1;
  }

  std::string feature;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    feature = "u:";
    feature += tokens[i];
    add(feature, 1.0);
    if (i + 1 < tokens.size()) {
      feature = "b:";
      feature += tokens[i];
      feature += ' ';
      feature += tokens[i + 1];
      add(feature, 1.0);
    }
    const std::string marked = "<" + std::string(tokens[i]) + ">";
    for (std::size_t c = 0; c + 3 <= marked.size(); ++c) {
      feature = "c:";
      feature += marked.substr(c, 3);
      add(feature, 0.25);
    }
  }

  double norm = 0.0;
  for (double v : acc) norm += v * v;
  norm = std::sqrt(norm);
  std::vector<float> out(kTestHashDimension, 0.0F);
  if (norm == 0.0) return out;
  for (std::size_t i = 0; i < kTestHashDimension; ++i) out[i] = static_cast<float>(acc[i] / norm);
  return out;
}

std::vector<std::vector<float>> TestHashBackend::embed_batch(
    std::span<const text::CleanText> texts, const ModelSpec& model) {
  if (model.model_name != kTestHashModel || model.dimension != kTestHashDimension) {
    throw ConfigError("test-hash backend only serves the test-hash model, not " +
                      model.model_name);
  }
  std::vector<std::vector<float>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_text(t.text));
  return out;
}

std::vector<std::vector<float>> FixtureBackend::embed_batch(
    std::span<const text::CleanText> texts, const ModelSpec& model) {
  if (!(fixture_.model() == model)) {
    throw ConfigError("fixture holds " + fixture_.model().model_name + " vectors, not " +
                      model.model_name);
  }
  std::vector<std::vector<float>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    auto idx = fixture_.index_of(t.source_id);
    if (!idx && !t.text.empty()) idx = fixture_.index_of_text(t.text);
    if (!idx) {
      throw ConfigError("fixture has no vector for '" +
                        (t.source_id.empty() ? t.text : t.source_id) + "'");
    }
    auto v = fixture_.vector(*idx);
    out.emplace_back(v.begin(), v.end());
  }
  return out;
}

EmbeddingStore embed(std::span<const text::CleanText> texts, EmbeddingBackend& backend,
                     const ModelSpec& model, text::PreprocessMode mode) {
  for (const auto& t : texts) {
    if (t.mode != mode) {
      throw ConsistencyError("text " + t.source_id + " was cleaned in " + text::to_string(t.mode) +
                             " mode, expected " + text::to_string(mode));
    }
  }
  EmbeddingStore store(model, mode);
  const std::size_t batch = std::max<std::size_t>(1, backend.max_batch());
  for (std::size_t start = 0; start < texts.size(); start += batch) {
    const auto chunk = texts.subspan(start, std::min(batch, texts.size() - start));
    auto vectors = backend.embed_batch(chunk, model);
    if (vectors.size() != chunk.size()) {
      throw ProtocolError(backend.name() + " backend returned " + std::to_string(vectors.size()) +
                          " vectors for " + std::to_string(chunk.size()) + " texts");
    }
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      store.add(chunk[i].source_id, vectors[i], chunk[i].text);
    }
  }
  return store;
}

}  // namespace vuldat::embed
