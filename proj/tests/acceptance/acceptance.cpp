// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 when any
// gating criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <unistd.h>

#include "../common/link_fixture.hpp"
#include "../common/metric_oracle.hpp"
#include "../common/pipeline.hpp"
#include "vuldat/embedding.hpp"
#include "vuldat/evaluation.hpp"
#include "vuldat/feeds.hpp"
#include "vuldat/file_util.hpp"
#include "vuldat/link_graph.hpp"
#include "vuldat/preprocess.hpp"
#include "vuldat/retrieval.hpp"

namespace fs = std::filesystem;
using namespace vuldat;

namespace {

const fs::path kFixtures = VULDAT_FIXTURES;

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome fail(std::string why) { return {false, std::move(why)}; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

// --- metric oracle -----------------------------------------------------------

Outcome metric_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto instances = testing::load_metric_oracle((kFixtures / "metric_oracle.jsonl").string());
  if (instances.size() != 500) return fail("expected 500 instances, found " + std::to_string(instances.size()));
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto mismatch = testing::check_against_oracle(instances[i]);
    if (!mismatch.empty()) return fail("instance " + std::to_string(i) + ": " + mismatch);
  }
  const double s = seconds_since(t0);
  if (s >= 30.0) return fail("took " + fmt("%.2f", s) + " s");
  return {true, "500 instances agree to 1e-9 in " + fmt("%.2f", s) + " s"};
}

// --- T1539 -------------------------------------------------------------------

Outcome session_cookie_example() {
  eval::DetectionSets det;
  link::AttackCveMap map;
  for (int i = 0; i < 150; ++i) det["T1539"].insert(testing::oracle_cve(i));
  for (int i = 26; i < 151; ++i) map["T1539"].insert(testing::oracle_cve(i));
  const auto a = eval::accuracies(det, map).at(0);
  const bool ok = a.jaccard && a.mapping_accuracy && a.detection_accuracy &&
                  std::abs(*a.jaccard - 0.8212) <= 1e-4 &&
                  std::abs(*a.mapping_accuracy - 0.9920) <= 1e-4 &&
                  std::abs(*a.detection_accuracy - 0.8267) <= 1e-4;
  const std::string detail = "J=" + fmt("%.4f", a.jaccard.value_or(-1)) +
                             " MapAcc=" + fmt("%.4f", a.mapping_accuracy.value_or(-1)) +
                             " DetAcc=" + fmt("%.4f", a.detection_accuracy.value_or(-1));
  return {ok, detail};
}

// --- Table 3 classes ---------------------------------------------------------

Outcome classification() {
  eval::DetectionSets det{{"T1001", {"X", "Y"}}, {"T1002", {"X"}}, {"T1003", {}},
                          {"T1004", {}},         {"T1005", {"X"}}};
  link::AttackCveMap map{{"T1001", {"Y", "Z"}}, {"T1002", {}}, {"T1003", {"Z"}},
                         {"T1004", {}},         {"T1005", {"Z"}}};
  const auto out = eval::classify(det, map);
  const std::vector<eval::OutcomeClass> want{
      eval::OutcomeClass::kTruePositive, eval::OutcomeClass::kFalsePositive,
      eval::OutcomeClass::kFalseNegative, eval::OutcomeClass::kTrueNegative,
      eval::OutcomeClass::kDisjoint};
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (out[i].outcome != want[i]) return fail("fixture " + out[i].technique_id);
  }

  std::mt19937_64 rng(31337);
  for (int round = 0; round < 100; ++round) {
    eval::DetectionSets d;
    link::AttackCveMap m;
    const int attacks = 1 + static_cast<int>(rng() % 50);
    for (int a = 0; a < attacks; ++a) {
      const std::string id = "T" + std::to_string(1000 + a);
      auto& ds = d[id];
      auto& ms = m[id];
      for (int k = 0; k < 6; ++k) {
        if (rng() % 3 == 0) ds.insert(testing::oracle_cve(static_cast<int>(rng() % 12)));
        if (rng() % 3 == 0) ms.insert(testing::oracle_cve(static_cast<int>(rng() % 12)));
      }
    }
    if (eval::count(eval::classify(d, m)).total() != static_cast<std::size_t>(attacks)) {
      return fail("counts do not partition the attacks in round " + std::to_string(round));
    }
  }
  return {true, "5 fixture cases, partition holds on 100 random instances"};
}

// --- threshold monotonicity --------------------------------------------------

const std::vector<std::string>& vocabulary() {
  static const std::vector<std::string> words = {
      "session", "cooki", "steal", "inject", "sql", "buffer", "overflow", "credenti",
      "dump", "brute", "forc", "password", "web", "server", "execut", "command",
      "script", "privileg", "escal", "token", "memori", "corrupt", "remot", "authent"};
  return words;
}

std::string random_text(std::mt19937_64& rng) {
  const auto& v = vocabulary();
  std::string out;
  const int n = 2 + static_cast<int>(rng() % 8);
  for (int i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += v[rng() % v.size()];
  }
  return out;
}

embed::EmbeddingStore random_hash_store(std::mt19937_64& rng, const std::string& prefix,
                                        std::size_t n) {
  embed::EmbeddingStore s(embed::find_model(embed::kTestHashModel), text::PreprocessMode::kFull);
  for (std::size_t i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "%s%04zu", prefix.c_str(), i + 1);
    s.add(id, embed::TestHashBackend::embed_text(random_text(rng)));
  }
  return s;
}

bool is_prefix(const std::vector<retrieval::SimilarityHit>& a,
               const std::vector<retrieval::SimilarityHit>& b) {
  return a.size() <= b.size() && std::equal(a.begin(), a.end(), b.begin());
}

Outcome threshold_monotonicity() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(5150);
  const std::vector<double> thresholds{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  for (int corpus = 0; corpus < 100; ++corpus) {
    const auto techniques = random_hash_store(rng, "T", 5);
    const auto cves = random_hash_store(rng, "CVE-2021-", 60);
    std::vector<std::map<std::string, retrieval::DetectionList>> by_t;
    for (double t : thresholds) by_t.push_back(retrieval::retrieve_all(techniques, cves, {t, 1000}, 1));
    for (std::size_t k = 0; k + 1 < thresholds.size(); ++k) {
      for (const auto& [id, low] : by_t[k]) {
        std::set<std::string> wide;
        for (const auto& h : low.hits) wide.insert(h.cve_id);
        for (const auto& h : by_t[k + 1].at(id).hits) {
          if (!wide.contains(h.cve_id)) {
            return fail("corpus " + std::to_string(corpus) + ": " + h.cve_id + " appears only at t=" +
                        fmt("%.1f", thresholds[k + 1]));
          }
        }
        // Hits at a higher threshold are a prefix of those at a lower one.
        if (!is_prefix(by_t[k + 1].at(id).hits, low.hits)) return fail("ranking changed with threshold");
      }
    }
    for (std::size_t n : {1u, 3u, 10u}) {
      const auto cut = retrieval::retrieve_all(techniques, cves, {0.2, n}, 1);
      const auto full = retrieval::retrieve_all(techniques, cves, {0.2, 1000}, 1);
      for (const auto& [id, l] : cut) {
        if (!is_prefix(l.hits, full.at(id).hits) ||
            l.hits.size() != std::min(n, full.at(id).hits.size())) {
          return fail("top_n prefix violated in corpus " + std::to_string(corpus));
        }
      }
    }
  }
  const double s = seconds_since(t0);
  if (s >= 10.0) return fail("took " + fmt("%.2f", s) + " s");
  return {true, "100 corpora, 11 thresholds, top_n prefix in " + fmt("%.2f", s) + " s"};
}

// --- retrieval oracle --------------------------------------------------------

Outcome retrieval_oracle() {
  std::mt19937_64 rng(8086);
  for (int round = 0; round < 50; ++round) {
    const auto techniques = random_hash_store(rng, "T", 20);
    const auto cves = random_hash_store(rng, "CVE-2022-", 50);
    const retrieval::RetrievalConfig cfg{0.1 * static_cast<double>(round % 8),
                                         static_cast<std::size_t>(1 + rng() % 60)};
    const auto got = retrieval::retrieve_all(techniques, cves, cfg, 4);
    for (std::size_t t = 0; t < techniques.size(); ++t) {
      std::vector<retrieval::SimilarityHit> want;
      for (std::size_t c = 0; c < cves.size(); ++c) {
        const double s = retrieval::cosine(techniques.vector(t), cves.vector(c));
        if (s > cfg.threshold) want.push_back({cves.id(c), s});
      }
      std::sort(want.begin(), want.end(), [](const auto& a, const auto& b) {
        return a.score != b.score ? a.score > b.score : a.cve_id < b.cve_id;
      });
      if (want.size() > cfg.top_n) want.resize(cfg.top_n);
      if (got.at(techniques.id(t)).hits != want) {
        return fail("round " + std::to_string(round) + " technique " + techniques.id(t));
      }
    }
  }
  return {true, "50 instances of 20 techniques x 50 CVEs match exhaustive scoring exactly"};
}

// --- link graph --------------------------------------------------------------

Outcome link_graph() {
  const auto ds = link::build_mapping(testing::miniature_snapshot());
  using S = std::set<std::string>;
  const link::AttackCveMap want{
      {"T1001", S{"CVE-2020-0001", "CVE-2020-0002"}},
      {"T1002", S{"CVE-2020-0003", "CVE-2020-0004", "CVE-2020-0005"}},
      {"T1003", S{}}};
  if (ds.mapping != want) return fail("miniature mapping differs from the hand-derived one");
  if (ds.chains.size() != 7) return fail("expected 7 chains, got " + std::to_string(ds.chains.size()));
  if (ds.dangling.size() != 1) return fail("expected 1 dangling reference");
  const auto& st = ds.stats;
  if (!(st.techniques == link::RepositoryStats{2, 1, 3}) || !(st.capecs == link::RepositoryStats{3, 1, 4}) ||
      !(st.cwes == link::RepositoryStats{3, 2, 5}) || !(st.cves == link::RepositoryStats{5, 5, 10})) {
    return fail("repository statistics differ from the hand-derived table");
  }

  std::mt19937_64 rng(4004);
  for (int round = 0; round < 100; ++round) {
    const auto s = testing::random_snapshot(rng, 50);
    const auto r = link::build_mapping(s);
    if (r.chains != testing::brute_force_chains(s) || r.mapping != testing::brute_force_mapping(s) ||
        r.dangling.size() != testing::brute_force_dangling(s)) {
      return fail("brute-force join disagrees on random snapshot " + std::to_string(round));
    }
  }
  return {true, "miniature fixture matches; brute-force join agrees on 100 random snapshots"};
}

// --- preprocessing -----------------------------------------------------------

bool full_alphabet(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == ' ';
  });
}

Outcome preprocessing() {
  const text::Preprocessor pre;
  std::ifstream in(kFixtures / "preprocess_golden.jsonl");
  std::string line;
  std::size_t partial = 0, full = 0;
  std::vector<std::string> corpus;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto g = nlohmann::json::parse(line);
    const auto mode = text::parse_mode(g.at("mode").get<std::string>());
    const auto input = g.at("input").get<std::string>();
    const auto got = pre.normalize(input, mode);
    if (got != g.at("expected").get<std::string>()) return fail("golden mismatch for: " + input);
    if (pre.normalize(got, mode) != got) return fail("not idempotent on: " + input);
    (mode == text::PreprocessMode::kFull ? full : partial)++;
    corpus.push_back(input);
  }
  if (partial < 20 || full < 20) return fail("fewer than 20 goldens per mode");

  const auto attack = feeds::parse_attack_feed(read_file(kFixtures / "feeds/enterprise-attack.json"),
                                               feeds::FeedFormat::kStix);
  const auto cves = feeds::parse_cve_feed(read_file(kFixtures / "feeds/nvdcve-2.0.json"),
                                          feeds::FeedFormat::kNvdJson);
  for (const auto& t : attack.records) corpus.push_back(t.description);
  for (const auto& c : cves.records) corpus.push_back(c.description);
  for (const auto& text : corpus) {
    if (!full_alphabet(pre.normalize(text, text::PreprocessMode::kFull))) {
      return fail("full-mode output outside [a-z0-9 ] for: " + text);
    }
  }
  return {true, std::to_string(partial) + " partial + " + std::to_string(full) +
                    " full goldens; alphabet holds on " + std::to_string(corpus.size()) + " texts"};
}

// --- end to end --------------------------------------------------------------

struct ScratchDir {
  fs::path path;
  explicit ScratchDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("vuldat_acceptance_" + std::to_string(::getpid()) + "_" + tag)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

Outcome end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  ScratchDir a("a"), b("b");
  const auto first = testing::run_fixture_pipeline(kFixtures / "feeds", a.path);
  if (!first.ok) return fail("stage " + first.failed_stage + " failed: " + first.failure_log);
  const auto second = testing::run_fixture_pipeline(kFixtures / "feeds", b.path);
  if (!second.ok) return fail("stage " + second.failed_stage + " failed: " + second.failure_log);
  if (first.report_json != second.report_json || first.report_csv != second.report_csv) {
    return fail("evaluation reports differ between runs");
  }
  const double s = seconds_since(t0);
  if (s >= 60.0) return fail("took " + fmt("%.2f", s) + " s");
  std::string summary = first.evaluate_line;
  if (!summary.empty() && summary.back() == '\n') summary.pop_back();
  return {true, "byte-identical reports in " + fmt("%.2f", s) + " s (" + summary + ")"};
}

// Needs a current MITRE snapshot and a running embedding service, so it only
// reads a report produced out of band.
void best_effort_full_run() {
  const char* report = std::getenv("VULDAT_FULL_RUN_REPORT");
  if (!report) {
    std::printf("SKIP  full-scale run (non-gating): set VULDAT_FULL_RUN_REPORT to an "
                "evaluation_report.json from multi-qa-mpnet-base-dot-v1 / full\n");
    return;
  }
  try {
    const auto run = eval::model_run_from_report_json(read_file(report));
    const bool within = std::abs(run.prf.f1 - 0.85) <= 0.10;
    std::printf("INFO  full-scale run (non-gating): model=%s mode=%s f1=%.4f %s 0.85 +/- 0.10\n",
                run.model.c_str(), run.mode.c_str(), run.prf.f1, within ? "within" : "outside");
  } catch (const std::exception& e) {
    std::printf("INFO  full-scale run (non-gating): unreadable report: %s\n", e.what());
  }
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"metric oracle equivalence", metric_oracle},
      {"T1539 worked example", session_cookie_example},
      {"outcome classification", classification},
      {"threshold monotonicity", threshold_monotonicity},
      {"retrieval oracle", retrieval_oracle},
      {"link-graph fixture", link_graph},
      {"preprocessing golden suite", preprocessing},
      {"end-to-end determinism", end_to_end},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    std::printf("%s  %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  best_effort_full_run();
  std::printf("%d/%zu gating criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
