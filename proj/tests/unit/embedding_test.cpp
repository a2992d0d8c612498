#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "test_util.hpp"
#include "vuldat/embedding.hpp"
#include "vuldat/error.hpp"
#include "vuldat/file_util.hpp"
#include "vuldat/retrieval.hpp"

namespace vuldat::embed {
namespace {

using text::CleanText;
using text::PreprocessMode;
using vuldat::testing::TempDir;

const ModelSpec& hash_model() { return find_model(kTestHashModel); }

CleanText clean(std::string id, std::string text) {
  return CleanText{std::move(text), PreprocessMode::kPartial, std::move(id)};
}

TEST(Registry, NineModelsPlusTestHash) {
  const auto& r = model_registry();
  ASSERT_EQ(r.size(), 10u);
  EXPECT_EQ(r[4].model_name, "multi-qa-mpnet-base-dot-v1");
  EXPECT_EQ(r[4].dimension, 768u);
  EXPECT_EQ(r[8].model_name, "paraphrase-MiniLM-L6-v2");
  EXPECT_EQ(r[8].size_hint_mb, 61);
  for (std::size_t i = 0; i + 1 < r.size(); ++i) {
    EXPECT_TRUE(r[i].dimension == 384 || r[i].dimension == 768) << r[i].model_name;
  }
  EXPECT_EQ(find_model("all-MiniLM-L6-v2").dimension, 384u);
  EXPECT_EQ(registry_position("all-mpnet-base-v2"), 7u);
  EXPECT_THROW(find_model("bert-base-uncased"), ConfigError);
}

TEST(TestHash, DeterministicUnitVectors) {
  const auto a = TestHashBackend::embed_text("adversari steal web session cooki");
  const auto b = TestHashBackend::embed_text("adversari steal web session cooki");
  ASSERT_EQ(a.size(), kTestHashDimension);
  EXPECT_EQ(a, b);
  double norm = 0.0;
  for (float v : a) norm += static_cast<double>(v) * v;
  EXPECT_NEAR(norm, 1.0, 1e-6);
  EXPECT_DOUBLE_EQ(retrieval::cosine(a, a), 1.0);
}

TEST(TestHash, EmptyTextIsZeroVector) {
  const auto z = TestHashBackend::embed_text("");
  for (float v : z) EXPECT_EQ(v, 0.0F);
}

TEST(TestHash, SharedTokensRaiseSimilarity) {
  const auto q = TestHashBackend::embed_text("steal web session cooki");
  const auto near = TestHashBackend::embed_text("session cooki theft web");
  const auto far = TestHashBackend::embed_text("buffer overflow imag parser");
  EXPECT_GT(retrieval::cosine(q, near), retrieval::cosine(q, far));
}

TEST(TestHash, NoCollisionsAmongHundredWords) {
  std::vector<std::vector<float>> vecs;
  for (int i = 0; i < 100; ++i) {
    vecs.push_back(TestHashBackend::embed_text("word" + std::to_string(i * 7919)));
  }
  for (std::size_t i = 0; i < vecs.size(); ++i) {
    for (std::size_t j = i + 1; j < vecs.size(); ++j) {
      ASSERT_LT(retrieval::cosine(vecs[i], vecs[j]), 0.999) << i << " vs " << j;
    }
  }
}

TEST(TestHash, OnlyServesItsOwnModel) {
  TestHashBackend backend;
  const std::vector<CleanText> texts{clean("T1001", "x")};
  EXPECT_THROW(backend.embed_batch(texts, find_model("all-MiniLM-L6-v2")), ConfigError);
}

TEST(Store, RejectsBadVectors) {
  EmbeddingStore store(hash_model(), PreprocessMode::kPartial);
  std::vector<float> ok(kTestHashDimension, 0.1F);
  store.add("CVE-2020-0001", ok);
  EXPECT_THROW(store.add("CVE-2020-0001", ok), ConsistencyError);
  EXPECT_THROW(store.add("CVE-2020-0002", std::vector<float>(3, 0.0F)), ProtocolError);
  auto nan = ok;
  nan[5] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(store.add("CVE-2020-0003", nan), ProtocolError);
  EXPECT_EQ(store.size(), 1u);
}

EmbeddingStore sample_store(bool with_texts) {
  EmbeddingStore store(hash_model(), PreprocessMode::kFull);
  const char* texts[] = {"session fixat", "sql inject", "buffer overflow", ""};
  for (int i = 0; i < 4; ++i) {
    const std::string text = texts[i];
    auto v = text.empty() ? std::vector<float>(kTestHashDimension, 0.0F)
                          : TestHashBackend::embed_text(text);
    store.add("CVE-2020-000" + std::to_string(i + 1), v, with_texts ? text : "");
  }
  return store;
}

void expect_same(const EmbeddingStore& a, const EmbeddingStore& b) {
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(a.model(), b.model());
  EXPECT_EQ(a.mode(), b.mode());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.id(i), b.id(i));
    EXPECT_EQ(a.text(i), b.text(i));
    const auto va = a.vector(i);
    const auto vb = b.vector(i);
    ASSERT_TRUE(std::equal(va.begin(), va.end(), vb.begin())) << a.id(i);  // bit-exact
  }
}

TEST(Store, RoundTrip) {
  TempDir dir;
  for (bool with_texts : {true, false}) {
    const auto store = sample_store(with_texts);
    save_store(store, dir / "cves");
    EXPECT_TRUE(std::filesystem::exists(dir / "cves.embjson"));
    EXPECT_TRUE(std::filesystem::exists(dir / "cves.embbin"));
    expect_same(load_store(dir / "cves"), store);
    expect_same(load_store(dir / "cves.embjson"), store);
  }
}

TEST(Store, PayloadIsLittleEndianFloat32) {
  TempDir dir;
  EmbeddingStore store(hash_model(), PreprocessMode::kPartial);
  std::vector<float> v(kTestHashDimension, 0.0F);
  v[0] = 1.0F;
  v[1] = -2.0F;
  store.add("T1001", v);
  save_store(store, dir / "s");
  const std::string bin = read_file(dir / "s.embbin");
  ASSERT_EQ(bin.size(), kTestHashDimension * 4);
  EXPECT_EQ(bin.substr(0, 8), std::string("\x00\x00\x80\x3f\x00\x00\x00\xc0", 8));

  const auto header = nlohmann::json::parse(read_file(dir / "s.embjson"));
  EXPECT_EQ(header.at("format"), "vuldat-embeddings");
  EXPECT_EQ(header.at("dtype"), "float32-le");
  EXPECT_EQ(header.at("count"), 1);
  EXPECT_EQ(header.at("dimension"), 64);
  EXPECT_EQ(header.at("mode"), "partial");
}

TEST(Store, TruncatedPayload) {
  TempDir dir;
  save_store(sample_store(true), dir / "s");
  std::string bin = read_file(dir / "s.embbin");
  bin.resize(bin.size() - 4);
  write_file(dir / "s.embbin", bin);
  EXPECT_THROW(load_store(dir / "s"), CorruptionError);
}

TEST(Store, HeaderMismatches) {
  TempDir dir;
  save_store(sample_store(true), dir / "s");
  auto header = nlohmann::json::parse(read_file(dir / "s.embjson"));

  auto bad = header;
  bad["count"] = 5;
  write_file(dir / "s.embjson", bad.dump());
  EXPECT_THROW(load_store(dir / "s"), CorruptionError);

  bad = header;
  bad["dimension"] = 32;
  write_file(dir / "s.embjson", bad.dump());
  EXPECT_THROW(load_store(dir / "s"), CorruptionError);

  write_file(dir / "s.embjson", "{not json");
  EXPECT_THROW(load_store(dir / "s"), CorruptionError);

  EXPECT_THROW(load_store(dir / "absent"), IoError);
}

TEST(Fixture, LooksUpByIdThenText) {
  FixtureBackend backend(sample_store(true));
  const std::vector<CleanText> texts{clean("CVE-2020-0002", "ignored"), clean("query", "sql inject")};
  const auto out = backend.embed_batch(texts, hash_model());
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0], TestHashBackend::embed_text("sql inject"));
  EXPECT_EQ(out[1], TestHashBackend::embed_text("sql inject"));

  const std::vector<CleanText> missing{clean("query", "unknown text")};
  EXPECT_THROW(backend.embed_batch(missing, hash_model()), ConfigError);
  EXPECT_THROW(backend.embed_batch(texts, find_model("all-MiniLM-L6-v2")), ConfigError);
}

class CountingBackend final : public EmbeddingBackend {
 public:
  std::string name() const override { return "counting"; }
  std::size_t max_batch() const override { return 3; }
  std::vector<std::vector<float>> embed_batch(std::span<const CleanText> texts,
                                              const ModelSpec&) override {
    ++calls;
    std::vector<std::vector<float>> out;
    for (const auto& t : texts) out.push_back(TestHashBackend::embed_text(t.text));
    if (drop_one) out.pop_back();
    return out;
  }
  int calls = 0;
  bool drop_one = false;
};

TEST(Embed, BatchesAndPreservesOrder) {
  std::vector<CleanText> texts;
  for (int i = 0; i < 10; ++i) texts.push_back(clean("T10" + std::to_string(10 + i), "word" + std::to_string(i)));
  CountingBackend backend;
  const auto store = embed(texts, backend, hash_model(), PreprocessMode::kPartial);
  EXPECT_EQ(backend.calls, 4);
  ASSERT_EQ(store.size(), 10u);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    EXPECT_EQ(store.id(i), texts[i].source_id);
    EXPECT_EQ(store.get(i).values, TestHashBackend::embed_text(texts[i].text));
  }
}

TEST(Embed, BatchSizeDoesNotChangeVectors) {
  std::vector<CleanText> texts;
  for (int i = 0; i < 7; ++i) texts.push_back(clean("T100" + std::to_string(i), "t" + std::to_string(i)));
  CountingBackend batched;
  TestHashBackend whole;
  const auto a = embed(texts, batched, hash_model(), PreprocessMode::kPartial);
  const auto b = embed(texts, whole, hash_model(), PreprocessMode::kPartial);
  for (std::size_t i = 0; i < texts.size(); ++i) EXPECT_EQ(a.get(i).values, b.get(i).values);
}

TEST(Embed, Failures) {
  std::vector<CleanText> texts{clean("T1001", "a"), clean("T1002", "b")};
  CountingBackend backend;
  backend.drop_one = true;
  EXPECT_THROW(embed(texts, backend, hash_model(), PreprocessMode::kPartial), ProtocolError);
  TestHashBackend hash;
  EXPECT_THROW(embed(texts, hash, hash_model(), PreprocessMode::kFull), ConsistencyError);
}

}  // namespace
}  // namespace vuldat::embed
