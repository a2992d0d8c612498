#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "../common/link_fixture.hpp"
#include "test_util.hpp"
#include "vuldat/error.hpp"
#include "vuldat/file_util.hpp"
#include "vuldat/link_graph.hpp"

namespace vuldat::link {
namespace {

using vuldat::testing::TempDir;

std::set<std::string> cves(std::initializer_list<int> ids) {
  std::set<std::string> out;
  for (int i : ids) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "CVE-2020-%04d", i);
    out.insert(buf);
  }
  return out;
}

TEST(Mapping, SpecDiamond) {
  CorpusSnapshot s;
  s.snapshot_date = "2024-05-01";
  s.techniques = {{"T1001", "t", "t", {"CAPEC-1", "CAPEC-2"}}};
  s.capecs = {{"CAPEC-1", "a", "a", {"CWE-1"}}, {"CAPEC-2", "b", "b", {"CWE-1"}}};
  s.cwes = {{"CWE-1", "w", "w", {"CVE-2020-0001"}}};
  s.cves = {{"CVE-2020-0001", "v", 2020}};
  const auto ds = build_mapping(s);
  EXPECT_EQ(ds.mapping.at("T1001"), cves({1}));
  EXPECT_EQ(ds.chains.size(), 2u);
  EXPECT_EQ(ds.stats.techniques, (RepositoryStats{1, 0, 1}));
  EXPECT_EQ(ds.stats.capecs, (RepositoryStats{2, 0, 2}));
  EXPECT_EQ(ds.stats.cwes, (RepositoryStats{1, 0, 1}));
  EXPECT_EQ(ds.stats.cves, (RepositoryStats{1, 0, 1}));
}

TEST(Mapping, MiniatureFixture) {
  const auto ds = build_mapping(vuldat::testing::miniature_snapshot());
  EXPECT_EQ(ds.mapping.at("T1001"), cves({1, 2}));
  EXPECT_EQ(ds.mapping.at("T1002"), cves({3, 4, 5}));
  EXPECT_TRUE(ds.mapping.at("T1003").empty());
  EXPECT_EQ(ds.chains.size(), 7u);
  EXPECT_EQ(ds.stats.techniques, (RepositoryStats{2, 1, 3}));
  EXPECT_EQ(ds.stats.capecs, (RepositoryStats{3, 1, 4}));
  EXPECT_EQ(ds.stats.cwes, (RepositoryStats{3, 2, 5}));
  EXPECT_EQ(ds.stats.cves, (RepositoryStats{5, 5, 10}));
  EXPECT_EQ(ds.stats.cwe_linked_upward, 4u);
  EXPECT_EQ(ds.stats.cwe_linked_downward, 4u);
  ASSERT_EQ(ds.dangling.size(), 1u);
  EXPECT_EQ(ds.dangling[0], (DanglingReference{"CAPEC-3", "CWE-999", "capec->cwe"}));
}

TEST(Mapping, DiamondChainsBothRecorded) {
  const auto ds = build_mapping(vuldat::testing::miniature_snapshot());
  std::size_t via1 = 0, via2 = 0;
  for (const auto& c : ds.chains) {
    if (c.technique_id != "T1001") continue;
    (c.capec_id == "CAPEC-1" ? via1 : via2)++;
  }
  EXPECT_EQ(via1, 2u);
  EXPECT_EQ(via2, 2u);
}

TEST(Mapping, EmptyTechniqueReferencesGiveEmptySet) {
  CorpusSnapshot s;
  s.snapshot_date = "2024-05-01";
  s.techniques = {{"T1001", "t", "t", {}}};
  const auto ds = build_mapping(s);
  ASSERT_TRUE(ds.mapping.contains("T1001"));
  EXPECT_TRUE(ds.mapping.at("T1001").empty());
  EXPECT_EQ(ds.stats.techniques, (RepositoryStats{0, 1, 1}));
}

TEST(Mapping, OracleAgreesOnRandomSnapshots) {
  std::mt19937_64 rng(20240501);
  for (int round = 0; round < 100; ++round) {
    const auto s = vuldat::testing::random_snapshot(rng);
    const auto ds = build_mapping(s);
    ASSERT_EQ(ds.chains, vuldat::testing::brute_force_chains(s)) << "round " << round;
    ASSERT_EQ(ds.mapping, vuldat::testing::brute_force_mapping(s)) << "round " << round;
    ASSERT_EQ(ds.dangling.size(), vuldat::testing::brute_force_dangling(s)) << "round " << round;
    // Table partition.
    for (const auto& r : {ds.stats.techniques, ds.stats.capecs, ds.stats.cwes, ds.stats.cves}) {
      ASSERT_EQ(r.linked + r.not_linked, r.total);
    }
    ASSERT_EQ(ds.stats.techniques.total, s.techniques.size());
    ASSERT_EQ(ds.stats.cves.total, s.cves.size());
  }
}

TEST(Mapping, LinkedMeansOnSomeChain) {
  std::mt19937_64 rng(7);
  for (int round = 0; round < 50; ++round) {
    const auto s = vuldat::testing::random_snapshot(rng);
    const auto ds = build_mapping(s);
    std::set<std::string> cve_on_chain, cwe_on_chain;
    for (const auto& c : ds.chains) {
      cve_on_chain.insert(c.cve_id);
      cwe_on_chain.insert(c.cwe_id);
    }
    EXPECT_EQ(ds.stats.cves.linked, cve_on_chain.size());
    EXPECT_EQ(ds.stats.cwes.linked, cwe_on_chain.size());
  }
}

TEST(Stats, InconsistentMappingRejected) {
  const auto s = vuldat::testing::miniature_snapshot();
  auto ds = build_mapping(s);
  ds.chains.push_back({"T1003", "CAPEC-4", "CWE-4", "CVE-2020-0006"});
  EXPECT_THROW(compute_stats(ds, s), ConsistencyError);

  ds = build_mapping(s);
  ds.mapping["T1003"].insert("CVE-2020-0009");
  EXPECT_THROW(compute_stats(ds, s), ConsistencyError);

  ds = build_mapping(s);
  ds.mapping.erase("T1003");
  EXPECT_THROW(compute_stats(ds, s), ConsistencyError);
}

TEST(Export, FilesAndRoundTrip) {
  TempDir dir;
  const auto ds = build_mapping(vuldat::testing::miniature_snapshot());
  export_mapping(ds, dir.path());

  const std::string csv = read_file(dir / "mapping_chains.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "technique_id,capec_id,cwe_id,cve_id");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 8);

  EXPECT_EQ(load_mapping(dir / "mapping.json"), ds.mapping);

  const auto diag = nlohmann::json::parse(read_file(dir / "link_diagnostics.json"));
  EXPECT_EQ(diag.at("dangling_count"), 1);
  EXPECT_EQ(diag.at("chain_count"), 7);
}

TEST(Export, LoadRejectsMalformed) {
  TempDir dir;
  write_file(dir / "m.json", R"({"T1001": "CVE-2020-0001"})");
  EXPECT_THROW(load_mapping(dir / "m.json"), CorruptionError);
  write_file(dir / "m.json", "[");
  EXPECT_THROW(load_mapping(dir / "m.json"), CorruptionError);
}

TEST(Render, TableShape) {
  const auto ds = build_mapping(vuldat::testing::miniature_snapshot());
  const std::string table = render_stats_table(ds.stats);
  EXPECT_NE(table.find("Attack Techniques"), std::string::npos);
  EXPECT_NE(table.find("CVE reports                 5            5         10"),
            std::string::npos)
      << table;
  EXPECT_NE(table.find("CWE linked upward (to CAPEC): 4"), std::string::npos);
}

}  // namespace
}  // namespace vuldat::link
