#include "vuldat/cli.hpp"

#include <cstdlib>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "vuldat/embedding.hpp"
#include "vuldat/error.hpp"
#include "vuldat/evaluation.hpp"
#include "vuldat/feeds.hpp"
#include "vuldat/file_util.hpp"
#include "vuldat/link_graph.hpp"
#include "vuldat/preprocess.hpp"
#include "vuldat/retrieval.hpp"
#include "vuldat/snapshot.hpp"

namespace vuldat::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kCleanFile = "clean.jsonl";
constexpr const char* kTechniqueStore = "techniques";
constexpr const char* kCveStore = "cves";

// Flags that override RunConfig members. Applied only when given on the
// command line, so config-file values survive otherwise.
class Binder {
 public:
  explicit Binder(CLI::App* app) : app_(app) {}

  template <typename T>
  CLI::Option* bind(const std::string& names, T RunConfig::*member, const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app_->add_option(names, *value, help);
    appliers_.push_back([opt, value, member](RunConfig& c) {
      if (opt->count() > 0) c.*member = *value;
    });
    return opt;
  }

  void apply(RunConfig& config) const {
    for (const auto& f : appliers_) f(config);
  }

 private:
  CLI::App* app_;
  std::vector<std::function<void(RunConfig&)>> appliers_;
};

struct Context {
  std::ostream& out;
  spdlog::logger& log;
};

void require(const std::string& value, const char* what) {
  if (value.empty()) throw ConfigError(std::string("missing required setting: ") + what);
}

std::string read_snapshot_manifest(const fs::path& snapshot_dir) {
  if (snapshot_dir.empty()) return {};
  const fs::path p = snapshot_dir / "manifest.json";
  if (!fs::exists(p)) return {};
  return read_file(p);
}

void write_run_manifest(const std::string& subcommand, const RunConfig& config,
                        const fs::path& out_dir, const std::vector<std::string>& outputs) {
  write_file(out_dir / kRunManifestName,
             run_manifest_json(subcommand, config, config.snapshot_dir, out_dir, outputs));
}

std::unique_ptr<text::Lexicon> custom_lexicon(const RunConfig& config) {
  if (config.stopwords.empty()) return nullptr;
  return std::make_unique<text::Lexicon>(text::Lexicon::load(config.stopwords, config.lemma_table));
}

std::unique_ptr<embed::EmbeddingBackend> make_backend(const RunConfig& config) {
  if (config.backend == "test-hash") return std::make_unique<embed::TestHashBackend>();
  if (config.backend == "fixture") {
    return std::make_unique<embed::FixtureBackend>(embed::load_store(config.fixture));
  }
  require(config.endpoint, "embedding endpoint (--endpoint or VULDAT_EMBED_URL)");
  return std::make_unique<embed::RemoteBackend>(config.endpoint);
}

void check_store(const embed::EmbeddingStore& store, const RunConfig& config, const char* what) {
  if (store.model().model_name != config.model) {
    throw ConfigError(std::string(what) + " store holds " + store.model().model_name +
                      " vectors but the run is configured for " + config.model);
  }
  if (text::to_string(store.mode()) != config.mode) {
    throw ConfigError(std::string(what) + " store was built with " +
                      text::to_string(store.mode()) + " preprocessing but the run uses " +
                      config.mode);
  }
}

// --- subcommands -----------------------------------------------------------

int cmd_ingest(const RunConfig& c, Context& ctx) {
  require(c.attack_feed, "attack feed (--attack)");
  require(c.capec_feed, "CAPEC feed (--capec)");
  require(c.cwe_feed, "CWE feed (--cwe)");
  require(c.cve_feed, "CVE feed (--cve)");
  require(c.snapshot_date, "snapshot date (--snapshot-date)");
  require(c.snapshot_dir, "snapshot output directory (--out)");

  CorpusSnapshot snap;
  snap.snapshot_date = c.snapshot_date;
  auto ingest = [&](const char* name, const std::string& path, const std::string& format,
                    auto parse, auto& dest) {
    const std::string raw = read_file(path);
    auto result = parse(raw, feeds::parse_format(format));
    ctx.log.info("event=feed.parsed feed={} format={} objects={} records={} dropped={}", name,
                 format, result.input_objects, result.records.size(), result.dropped);
    dest = std::move(result.records);
    snap.source_versions[name] = format + ":fnv1a64:" + hex64(fnv1a64(raw));
  };
  ingest("attack", c.attack_feed, c.attack_format, feeds::parse_attack_feed, snap.techniques);
  ingest("capec", c.capec_feed, c.capec_format, feeds::parse_capec_feed, snap.capecs);
  ingest("cwe", c.cwe_feed, c.cwe_format, feeds::parse_cwe_feed, snap.cwes);
  ingest("cve", c.cve_feed, c.cve_format, feeds::parse_cve_feed, snap.cves);

  write_snapshot(snap, c.snapshot_dir);
  write_run_manifest("ingest", c, c.snapshot_dir, {"manifest.json"});
  ctx.log.info("event=snapshot.written dir={} date={}", c.snapshot_dir, c.snapshot_date);
  return kExitOk;
}

int cmd_build_map(const RunConfig& c, const std::string& out_dir, Context& ctx) {
  require(c.snapshot_dir, "snapshot directory (--snapshot)");
  require(out_dir, "output directory (--out)");
  const auto snap = read_snapshot(c.snapshot_dir);
  const auto ds = link::build_mapping(snap);
  link::export_mapping(ds, out_dir);
  write_run_manifest("build-map", c, out_dir,
                     {"mapping.json", "mapping_chains.csv", "link_diagnostics.json"});
  ctx.log.info("event=mapping.built chains={} dangling={} techniques_linked={}", ds.chains.size(),
               ds.dangling.size(), ds.stats.techniques.linked);
  return kExitOk;
}

int cmd_stats(const RunConfig& c, Context& ctx) {
  require(c.snapshot_dir, "snapshot directory (--snapshot)");
  const auto ds = link::build_mapping(read_snapshot(c.snapshot_dir));
  ctx.out << link::render_stats_table(ds.stats);
  ctx.log.info("event=stats chains={} dangling={}", ds.chains.size(), ds.dangling.size());
  return kExitOk;
}

text::CleanCorpus clean_from_snapshot(const RunConfig& c) {
  const auto lexicon = custom_lexicon(c);
  const text::Preprocessor pre = lexicon ? text::Preprocessor(*lexicon) : text::Preprocessor();
  return text::preprocess_corpus(read_snapshot(c.snapshot_dir), text::parse_mode(c.mode), pre);
}

int cmd_preprocess(const RunConfig& c, const std::string& out_dir, Context& ctx) {
  require(c.snapshot_dir, "snapshot directory (--snapshot)");
  require(out_dir, "output directory (--out)");
  const auto corpus = clean_from_snapshot(c);
  write_file(fs::path(out_dir) / kCleanFile, corpus.to_jsonl());
  write_run_manifest("preprocess", c, out_dir, {kCleanFile});
  ctx.log.info("event=preprocess.done mode={} texts={}", c.mode, corpus.size());
  return kExitOk;
}

int cmd_embed(const RunConfig& c, Context& ctx) {
  require(c.stores_dir, "store output directory (--out)");
  std::optional<text::CleanCorpus> corpus;
  if (!c.clean_path.empty()) {
    corpus = text::CleanCorpus::from_jsonl(read_file(c.clean_path));
  } else if (!c.snapshot_dir.empty()) {
    corpus = clean_from_snapshot(c);
  } else {
    throw ConfigError("embed needs --clean or --snapshot");
  }
  if (text::to_string(corpus->mode()) != c.mode) {
    throw ConfigError(std::string("clean corpus uses ") + text::to_string(corpus->mode()) +
                      " preprocessing but the run uses " + c.mode);
  }

  const auto& model = embed::find_model(c.model);
  auto backend = make_backend(c);
  const auto techniques = corpus->techniques();
  const auto cves = corpus->cves();
  const auto t_store = embed::embed(techniques, *backend, model, corpus->mode());
  const auto c_store = embed::embed(cves, *backend, model, corpus->mode());

  const fs::path dir = c.stores_dir;
  embed::save_store(t_store, dir / kTechniqueStore);
  embed::save_store(c_store, dir / kCveStore);
  write_run_manifest("embed", c, dir,
                     {"techniques.embjson", "techniques.embbin", "cves.embjson", "cves.embbin"});
  ctx.log.info("event=embed.done backend={} model={} techniques={} cves={}", backend->name(),
               model.model_name, t_store.size(), c_store.size());
  return kExitOk;
}

struct QueryArgs {
  std::string text;
  std::string technique;
  bool all = false;
};

int cmd_query(const RunConfig& c, const QueryArgs& q, Context& ctx) {
  require(c.stores_dir, "store directory (--stores)");
  const int selectors = int(!q.text.empty()) + int(!q.technique.empty()) + int(q.all);
  if (selectors != 1) throw ConfigError("query needs exactly one of --text, --technique, --all");

  const retrieval::RetrievalConfig rc{c.threshold, c.top_n};
  const fs::path dir = c.stores_dir;
  const auto cves = embed::load_store(dir / kCveStore);
  check_store(cves, c, "CVE");

  if (!q.text.empty()) {
    const auto lexicon = custom_lexicon(c);
    const text::Preprocessor pre = lexicon ? text::Preprocessor(*lexicon) : text::Preprocessor();
    const auto clean = pre.run(q.text, cves.mode(), "query");
    auto backend = make_backend(c);
    const auto one = embed::embed(std::span(&clean, 1), *backend, cves.model(), cves.mode());
    const auto list = retrieval::retrieve(one.get(0), cves, rc);
    ctx.out << retrieval::to_json(list);
    ctx.log.info("event=query.done hits={}", list.hits.size());
    return kExitOk;
  }

  const auto techniques = embed::load_store(dir / kTechniqueStore);
  check_store(techniques, c, "technique");

  if (!q.technique.empty()) {
    const auto idx = techniques.index_of(q.technique);
    if (!idx) throw ConsistencyError("no embedding for technique " + q.technique);
    const auto list = retrieval::retrieve(techniques.get(*idx), cves, rc);
    ctx.out << retrieval::to_json(list);
    ctx.log.info("event=query.done technique={} hits={}", q.technique, list.hits.size());
    return kExitOk;
  }

  require(c.detections_dir, "detections output directory (--out)");
  const auto lists = retrieval::retrieve_all(techniques, cves, rc, c.workers);
  std::vector<std::string> outputs;
  for (const auto& [id, list] : lists) {
    const std::string name = id + ".json";
    write_file(fs::path(c.detections_dir) / name, retrieval::to_json(list, kRunManifestName));
    outputs.push_back(name);
  }
  write_run_manifest("query", c, c.detections_dir, outputs);
  ctx.log.info("event=query.all techniques={} threshold={} top_n={}", lists.size(), c.threshold,
               c.top_n);
  return kExitOk;
}

std::map<std::string, retrieval::DetectionList> load_detections(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("detections directory not found: " + dir.string());
  std::map<std::string, retrieval::DetectionList> lists;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const fs::path& p = entry.path();
    if (!entry.is_regular_file() || p.extension() != ".json") continue;
    const std::string stem = p.stem().string();
    if (!is_technique_id(stem)) continue;
    auto list = retrieval::detection_from_json(read_file(p));
    if (list.query_id != stem) {
      throw ConsistencyError(p.filename().string() + " holds detections for " + list.query_id);
    }
    lists.emplace(stem, std::move(list));
  }
  if (lists.empty()) throw ConsistencyError("no detection lists in " + dir.string());

  const auto& first = lists.begin()->second;
  for (const auto& [id, l] : lists) {
    if (l.model != first.model || l.mode != first.mode || l.threshold != first.threshold ||
        l.top_n != first.top_n) {
      throw ConsistencyError("detection list " + id + " comes from a different run setting");
    }
  }
  return lists;
}

int cmd_evaluate(const RunConfig& c, Context& ctx) {
  require(c.detections_dir, "detections directory (--detections)");
  require(c.mapping_path, "mapping file (--mapping)");
  require(c.reports_dir, "report output directory (--out)");

  const auto lists = load_detections(c.detections_dir);
  const auto mapping = link::load_mapping(c.mapping_path);
  const auto& first = lists.begin()->second;
  eval::RunMetadata meta{first.model, text::to_string(first.mode), first.threshold, first.top_n,
                         read_snapshot_manifest(c.snapshot_dir)};
  const auto report = eval::evaluate(eval::to_sets(lists), mapping,
                                     eval::parse_disjoint_policy(c.disjoint_policy), meta);

  const fs::path dir = c.reports_dir;
  write_file(dir / "evaluation_report.json", eval::report_json(report, kRunManifestName));
  write_file(dir / "evaluation_report.csv", eval::report_csv(report));
  write_run_manifest("evaluate", c, dir, {"evaluation_report.json", "evaluation_report.csv"});

  const auto& k = report.counts;
  ctx.out << "model=" << meta.model << " mode=" << meta.mode << " TP=" << k.tp << " FP=" << k.fp
          << " FN=" << k.fn << " TN=" << k.tn << " Disjoint=" << k.disjoint
          << " precision=" << report.prf.precision << " recall=" << report.prf.recall
          << " f1=" << report.prf.f1 << '\n';
  ctx.log.info("event=evaluate.done attacks={} f1={}", report.outcomes.size(), report.prf.f1);
  return kExitOk;
}

int cmd_compare(const RunConfig& c, const std::vector<std::string>& reports,
                const std::string& out_dir, Context& ctx) {
  if (reports.empty()) throw ConfigError("compare needs at least one report");
  std::vector<eval::ModelRun> runs;
  for (const auto& r : reports) {
    fs::path p = r;
    if (fs::is_directory(p)) p /= "evaluation_report.json";
    runs.push_back(eval::model_run_from_report_json(read_file(p)));
  }
  const auto table = eval::compare_models(runs);
  const std::string csv = eval::comparison_csv(table);
  ctx.out << csv;
  if (!out_dir.empty()) {
    write_file(fs::path(out_dir) / "model_comparison.csv", csv);
    write_run_manifest("compare", c, out_dir, {"model_comparison.csv"});
  }
  ctx.log.info("event=compare.done runs={} tie={}", runs.size(), table.tie);
  return kExitOk;
}

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kConfig: return kExitUsage;
    case ErrorKind::kTransport:
    case ErrorKind::kProtocol: return kExitBackend;
    default: return kExitData;
  }
}

}  // namespace

std::string run_manifest_json(const std::string& subcommand, const RunConfig& config,
                              const fs::path& snapshot_dir, const fs::path& out_dir,
                              const std::vector<std::string>& outputs) {
  ordered_json j;
  j["tool"] = "vuldat";
  j["manifest_version"] = 1;
  j["subcommand"] = subcommand;
  j["config_hash"] = config_hash(config);
  j["config"] = to_toml(config);
  const std::string snap = read_snapshot_manifest(snapshot_dir);
  j["snapshot_manifest"] = snap.empty() ? ordered_json(nullptr) : ordered_json::parse(snap);
  ordered_json files = ordered_json::array();
  for (const auto& name : outputs) {
    files.push_back({{"file", name}, {"fnv1a64", hex64(fnv1a64(read_file(out_dir / name)))}});
  }
  j["outputs"] = std::move(files);
  return j.dump(2) + "\n";
}

int run_subcommand(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Maps attack techniques to CVEs by embedding similarity", "vuldat"};
  app.require_subcommand(1);
  std::string config_file;
  std::string log_level = "info";
  app.add_option("--config", config_file, "run configuration file (TOML)");
  app.add_option("--log-level", log_level, "debug|info|warn|error|off")
      ->check(CLI::IsMember({"debug", "info", "warn", "error", "off"}));

  auto add_lexicon = [](Binder& b) {
    b.bind("--stopwords", &RunConfig::stopwords, "stop-word list, one word per line");
    b.bind("--lemma-table", &RunConfig::lemma_table, "form<TAB>lemma table");
  };
  auto add_embedding = [](Binder& b) {
    b.bind("--model", &RunConfig::model, "embedding model name");
    b.bind("--backend", &RunConfig::backend, "test-hash|fixture|remote");
    b.bind("--endpoint", &RunConfig::endpoint, "embedding service URL");
    b.bind("--fixture", &RunConfig::fixture, "fixture store for the fixture backend");
  };

  auto* ingest = app.add_subcommand("ingest", "parse raw feeds into a snapshot");
  Binder b_ingest(ingest);
  b_ingest.bind("--attack", &RunConfig::attack_feed, "ATT&CK feed");
  b_ingest.bind("--attack-format", &RunConfig::attack_format, "stix|jsonl");
  b_ingest.bind("--capec", &RunConfig::capec_feed, "CAPEC feed");
  b_ingest.bind("--capec-format", &RunConfig::capec_format, "xml|jsonl");
  b_ingest.bind("--cwe", &RunConfig::cwe_feed, "CWE feed");
  b_ingest.bind("--cwe-format", &RunConfig::cwe_format, "xml|jsonl");
  b_ingest.bind("--cve", &RunConfig::cve_feed, "CVE feed");
  b_ingest.bind("--cve-format", &RunConfig::cve_format, "nvd|jsonl");
  b_ingest.bind("--snapshot-date", &RunConfig::snapshot_date, "YYYY-MM-DD");
  b_ingest.bind("--out,--snapshot", &RunConfig::snapshot_dir, "snapshot directory to write");

  std::string local_out;
  auto* build_map = app.add_subcommand("build-map", "build the attack-to-CVE mapping");
  Binder b_map(build_map);
  b_map.bind("--snapshot", &RunConfig::snapshot_dir, "snapshot directory");
  build_map->add_option("--out", local_out, "output directory");

  auto* stats = app.add_subcommand("stats", "print link statistics for a snapshot");
  Binder b_stats(stats);
  b_stats.bind("--snapshot", &RunConfig::snapshot_dir, "snapshot directory");

  auto* preprocess = app.add_subcommand("preprocess", "normalize technique and CVE texts");
  Binder b_pre(preprocess);
  b_pre.bind("--snapshot", &RunConfig::snapshot_dir, "snapshot directory");
  b_pre.bind("--preprocess", &RunConfig::mode, "partial|full");
  add_lexicon(b_pre);
  preprocess->add_option("--out", local_out, "output directory");

  auto* embed_cmd = app.add_subcommand("embed", "embed cleaned texts into vector stores");
  Binder b_embed(embed_cmd);
  b_embed.bind("--clean", &RunConfig::clean_path, "clean corpus from `preprocess`");
  b_embed.bind("--snapshot", &RunConfig::snapshot_dir, "snapshot (preprocessed on the fly)");
  b_embed.bind("--preprocess", &RunConfig::mode, "partial|full");
  b_embed.bind("--out,--stores", &RunConfig::stores_dir, "store directory to write");
  add_lexicon(b_embed);
  add_embedding(b_embed);

  QueryArgs qargs;
  auto* query = app.add_subcommand("query", "retrieve CVEs for a technique or free text");
  Binder b_query(query);
  query->add_option("--text", qargs.text, "free-text attack description");
  query->add_option("--technique", qargs.technique, "technique id with a stored embedding");
  query->add_flag("--all", qargs.all, "every stored technique, one file each");
  b_query.bind("--stores", &RunConfig::stores_dir, "store directory");
  b_query.bind("--out", &RunConfig::detections_dir, "detections directory (with --all)");
  b_query.bind("--threshold", &RunConfig::threshold, "minimum cosine, exclusive");
  b_query.bind("--top-n", &RunConfig::top_n, "maximum hits per query");
  b_query.bind("--workers", &RunConfig::workers, "threads for --all (0 = all cores)");
  b_query.bind("--preprocess", &RunConfig::mode, "partial|full");
  add_lexicon(b_query);
  add_embedding(b_query);

  auto* evaluate = app.add_subcommand("evaluate", "score detections against the mapping");
  Binder b_eval(evaluate);
  b_eval.bind("--detections", &RunConfig::detections_dir, "detections directory");
  b_eval.bind("--mapping", &RunConfig::mapping_path, "mapping.json");
  b_eval.bind("--disjoint-policy", &RunConfig::disjoint_policy, "fp|fp-and-fn|exclude");
  b_eval.bind("--snapshot", &RunConfig::snapshot_dir, "snapshot, recorded in the report");
  b_eval.bind("--out", &RunConfig::reports_dir, "report directory");

  std::vector<std::string> reports;
  auto* compare = app.add_subcommand("compare", "tabulate evaluation reports across models");
  compare->add_option("reports", reports, "evaluation_report.json files or their directories");
  compare->add_option("--out", local_out, "output directory");
  Binder b_compare(compare);

  std::vector<const char*> argv{"vuldat"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  auto sink = std::make_shared<spdlog::sinks::ostream_sink_st>(err);
  spdlog::logger log("vuldat", sink);
  log.set_pattern("%Y-%m-%dT%H:%M:%S.%e level=%l %v");
  log.set_level(spdlog::level::from_str(log_level));
  Context ctx{out, log};

  try {
    RunConfig config = config_file.empty() ? RunConfig{} : load_config(config_file);
    for (const Binder* b : {&b_ingest, &b_map, &b_stats, &b_pre, &b_embed, &b_query, &b_eval,
                            &b_compare}) {
      b->apply(config);
    }
    if (config.endpoint.empty()) {
      if (const char* env = std::getenv("VULDAT_EMBED_URL")) config.endpoint = env;
    }
    validate(config);

    if (ingest->parsed()) return cmd_ingest(config, ctx);
    if (build_map->parsed()) return cmd_build_map(config, local_out, ctx);
    if (stats->parsed()) return cmd_stats(config, ctx);
    if (preprocess->parsed()) return cmd_preprocess(config, local_out, ctx);
    if (embed_cmd->parsed()) return cmd_embed(config, ctx);
    if (query->parsed()) return cmd_query(config, qargs, ctx);
    if (evaluate->parsed()) return cmd_evaluate(config, ctx);
    if (compare->parsed()) return cmd_compare(config, reports, local_out, ctx);
    err << app.help();
    return kExitUsage;
  } catch (const Error& e) {
    log.error("event=failed kind={} msg=\"{}\"", to_string(e.kind()), e.what());
    return exit_code_for(e);
  } catch (const fs::filesystem_error& e) {
    log.error("event=failed kind=io msg=\"{}\"", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    log.error("event=failed kind=internal msg=\"{}\"", e.what());
    return kExitData;
  }
}

int run_subcommand(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_subcommand(args, std::cout, std::cerr);
}

}  // namespace vuldat::cli
