#pragma once

// The five batch commands. Each takes the effective RunConfig and a stream for
// progress messages, writes its files and returns what it produced.

#include "scrm/checkpoint.hpp"
#include "scrm/config.hpp"
#include "scrm/evaluation.hpp"
#include "scrm/relation_graphs.hpp"
#include "scrm/session_ingest.hpp"
#include "scrm/synth.hpp"
#include "scrm/training.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace scrm {

namespace fs = std::filesystem;

namespace detail {
inline void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    fs::create_directories(parent, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create directory " + parent.string() + ": " + ec.message());
  }
}

inline std::ofstream open_out(const std::string& path) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
  return out;
}

inline void write_text(const std::string& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Data pipeline shared by the commands

inline FilterOptions filter_options(const RunConfig& c) {
  return FilterOptions{c.min_item_support, c.min_session_len, c.filter_passes};
}

inline FusedCorpus load_corpus(const RunConfig& c) {
  std::ifstream in(c.events_in, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read events file " + c.events_in);
  const auto events = parse_events(in);
  if (events.empty()) throw Error(ErrorKind::EmptyDataset, c.events_in + " holds no events");
  return filter_dataset(fuse_sessions(events), filter_options(c));
}

struct Pipeline {
  FusedCorpus corpus;
  DatasetSplit split;
  RelationGraphs graphs;  // built from the training sessions only
};

inline Pipeline prepare(const RunConfig& c) {
  Pipeline p;
  p.corpus = load_corpus(c);
  p.split = split_chronological(p.corpus.sessions, c.n_valid, c.n_test);
  p.graphs = build_relation_graphs(p.split.train_sessions, p.corpus.catalog.size());
  return p;
}

inline std::string dataset_name(const RunConfig& c) { return fs::path(c.events_in).stem().string(); }

inline std::string log_path(const RunConfig& c) {
  return c.log_out.empty() ? c.checkpoint + ".log.jsonl" : c.log_out;
}

// ---------------------------------------------------------------------------
// build-graphs

inline nlohmann::json stats_json(const GraphStats& s) {
  return {{"num_items", s.num_items},
          {"num_edges", s.num_edges},
          {"first_order_edges", s.first_order_edges},
          {"second_order_edges", s.second_order_edges},
          {"density", s.density},
          {"mean_degree", s.mean_degree},
          {"weight_histogram", s.weight_histogram}};
}

/// Builds both graphs over every session that survives filtering and writes
/// substitutable.tsv, complementary.tsv and stats.json under graphs_out.
inline RelationGraphs cmd_build_graphs(const RunConfig& c, std::ostream& log) {
  const FusedCorpus corpus = load_corpus(c);
  RelationGraphs g = build_relation_graphs(corpus.sessions, corpus.catalog.size());
  const fs::path dir(c.graphs_out);
  for (const auto* graph : {&g.substitutable, &g.complementary}) {
    auto out = detail::open_out((dir / (std::string(to_string(graph->kind())) + ".tsv")).string());
    write_graph_tsv(out, *graph, true, &corpus.catalog.ids);
  }
  nlohmann::json stats;
  stats["sessions"] = corpus.sessions.size();
  stats["items"] = corpus.catalog.size();
  stats["substitutable"] = stats_json(graph_stats(g.substitutable));
  stats["complementary"] = stats_json(graph_stats(g.complementary));
  detail::write_text((dir / "stats.json").string(), stats.dump(2) + "\n");
  log << "build-graphs: " << corpus.sessions.size() << " sessions, " << corpus.catalog.size()
      << " items, " << g.substitutable.num_edges() << " substitutable and "
      << g.complementary.num_edges() << " complementary edges -> " << dir.string() << '\n';
  return g;
}

// ---------------------------------------------------------------------------
// train

/// Trains from the events file, writes the best checkpoint, its effective
/// config (<checkpoint>.config) and the epoch log.
inline TrainResult cmd_train(const RunConfig& c, std::ostream& log) {
  validate(c);
  const Pipeline p = prepare(c);
  const std::size_t n = p.corpus.catalog.size();
  ModelParams params = init_params(model_dims(c.train, n), c.train.seed);

  auto log_out = detail::open_out(log_path(c));
  TrainResult r = train(std::move(params), p.graphs, p.split, c.train, [&](const EpochLog& e) {
    log_out << epoch_log_json(e).dump() << '\n';
    log_out.flush();
    log << "epoch " << e.epoch << " loss " << format_double(e.loss.total) << " valid MRR@10 "
        << format_double(e.valid10.mrr) << '\n';
  });

  Checkpoint ck{make_manifest(c.train, n, p.graphs), r.best};
  detail::ensure_parent(c.checkpoint);
  save_checkpoint(c.checkpoint, ck);
  detail::write_text(c.checkpoint + ".config", config_text(c));
  log << "train: best epoch " << r.best_epoch << " of " << r.log.size() << " -> " << c.checkpoint << '\n';
  return r;
}

// ---------------------------------------------------------------------------
// evaluate

inline ModelOptions model_options(const CheckpointManifest& m) {
  TrainConfig t;
  t.ablation = m.ablation;
  t.top_k = m.top_k;
  t.tau = m.tau;
  return model_options(t);
}

inline void check_manifest(const CheckpointManifest& m, const Pipeline& p) {
  if (m.dims.num_items != p.corpus.catalog.size()) {
    throw Error(ErrorKind::ConfigMismatch, "checkpoint has " + std::to_string(m.dims.num_items) +
                                               " items, data has " +
                                               std::to_string(p.corpus.catalog.size()));
  }
  if (m.sub_graph_hash != hex64(graph_hash(p.graphs.substitutable)) ||
      m.comp_graph_hash != hex64(graph_hash(p.graphs.complementary))) {
    throw Error(ErrorKind::ConfigMismatch, "graphs differ from the ones the checkpoint was trained on");
  }
}

/// Test-split metrics at K = 5, 10, 20 of the checkpoint; with baselines also
/// POP and ItemKNN fitted on the training split. Written to report_out.
inline nlohmann::json cmd_evaluate(const RunConfig& c, bool with_baselines, std::ostream& log) {
  const Pipeline p = prepare(c);
  const Checkpoint ck = load_checkpoint(c.checkpoint);
  check_manifest(ck.manifest, p);
  const ModelOptions mopt = model_options(ck.manifest);
  const MetricTable t = evaluate_model(ck.params, p.graphs, p.split.test, mopt);
  nlohmann::json report = metric_report("scrm", dataset_name(c), t, ck.manifest.seed);
  log << metrics_csv_header() << '\n' << metrics_csv_row("scrm", t) << '\n';
  if (with_baselines) {
    const std::size_t n = p.corpus.catalog.size();
    const MetricTable pop = evaluate(baseline_pop(p.split.train, n), p.split.test);
    const ItemKnn knn(p.split.train_sessions, n);
    const MetricTable itemknn = evaluate(knn.scorer(), p.split.test);
    report["pop"] = metrics_json(pop);
    report["itemknn"] = metrics_json(itemknn);
    log << metrics_csv_row("pop", pop) << '\n' << metrics_csv_row("itemknn", itemknn) << '\n';
  }
  detail::write_text(c.report_out, report.dump(2) + "\n");
  return report;
}

// ---------------------------------------------------------------------------
// ablate

struct AblationVariant {
  std::string name;   // flag spelling
  std::string label;  // table label
  AblationFlags flags;
};

inline std::vector<AblationVariant> ablation_variants() {
  std::vector<AblationVariant> v;
  v.push_back({"full", "SCRM", {}});
  const std::pair<const char*, const char*> named[] = {
      {"no_ex", "SCRM-ex"},       {"no_se", "SCRM-se"},    {"no_denoise", "SCRM-DL"},
      {"sub_only", "SCRM-C"},     {"comp_only", "SCRM-S"}, {"mix_graphs", "SCRM_mix"},
      {"no_integration", "SCRM_inte"}};
  for (const auto& [name, label] : named) {
    AblationFlags f;
    *ablation_flag(f, name) = true;
    v.push_back({name, label, f});
  }
  for (std::size_t layers : {2, 3}) {
    AblationFlags f;
    f.wgat_layers = layers;
    v.push_back({"wgat" + std::to_string(layers), std::to_string(layers) + "*WGAT", f});
  }
  return v;
}

/// Full model plus the seven single-change variants.
inline std::vector<std::string> default_ablation_names() {
  return {"full", "no_ex", "no_se", "no_denoise", "sub_only", "comp_only", "mix_graphs", "no_integration"};
}

inline AblationVariant find_variant(const std::string& name) {
  for (auto& v : ablation_variants())
    if (v.name == name) return v;
  throw Error(ErrorKind::BadConfig, "unknown ablation variant '" + name + "'");
}

struct AblationRow {
  AblationVariant variant;
  std::vector<MetricTable> per_seed;
  MetricTable mean;
};

struct AblationReport {
  std::vector<std::uint64_t> seeds;
  std::vector<AblationRow> rows;
  std::vector<std::string> violations;  // variants whose MRR@10 beats the full model

  const AblationRow* row(const std::string& name) const {
    for (const auto& r : rows)
      if (r.variant.name == name) return &r;
    return nullptr;
  }
};

inline MetricTable mean_table(const std::vector<MetricTable>& ts) {
  MetricTable m = ts.front();
  for (auto& c : m.cells) c = {};
  for (const auto& t : ts)
    for (std::size_t i = 0; i < m.cells.size(); ++i) {
      m.cells[i].hr += t.cells[i].hr;
      m.cells[i].mrr += t.cells[i].mrr;
      m.cells[i].ndcg += t.cells[i].ndcg;
    }
  const double n = static_cast<double>(ts.size());
  for (auto& c : m.cells) {
    c.hr /= n;
    c.mrr /= n;
    c.ndcg /= n;
  }
  return m;
}

/// Variants whose mean MRR@10 must not exceed the full model's.
inline const std::vector<std::string>& ordering_checked_variants() {
  static const std::vector<std::string> v{"no_denoise", "sub_only", "comp_only", "mix_graphs"};
  return v;
}

inline nlohmann::json ablation_json(const AblationReport& r) {
  nlohmann::json j;
  j["seeds"] = r.seeds;
  j["variants"] = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json v;
    v["name"] = row.variant.name;
    v["label"] = row.variant.label;
    v["mean"] = metrics_json(row.mean);
    v["per_seed_mrr@10"] = nlohmann::json::array();
    for (const auto& t : row.per_seed) v["per_seed_mrr@10"].push_back(t.at(10).mrr);
    j["variants"].push_back(v);
  }
  j["ordering_violations"] = r.violations;
  return j;
}

inline std::string ablation_table(const AblationReport& r) {
  std::ostringstream s;
  s << metrics_csv_header() << '\n';
  for (const auto& row : r.rows) s << metrics_csv_row(row.variant.label, row.mean) << '\n';
  return s.str();
}

/// Trains and evaluates every variant for every seed on one data pipeline and
/// writes the JSON report to report_out and the CSV table next to it.
inline AblationReport cmd_ablate(const RunConfig& c, const std::vector<std::string>& variants,
                                 const std::vector<std::uint64_t>& seeds, std::ostream& log) {
  validate(c);
  if (seeds.empty()) throw Error(ErrorKind::BadConfig, "ablate needs at least one seed");
  const Pipeline p = prepare(c);
  const std::size_t n = p.corpus.catalog.size();
  AblationReport report;
  report.seeds = seeds;
  for (const auto& name : variants.empty() ? default_ablation_names() : variants) {
    AblationRow row;
    row.variant = find_variant(name);
    for (std::uint64_t seed : seeds) {
      RunConfig rc = c;
      rc.train.ablation = row.variant.flags;
      if (name.rfind("wgat", 0) != 0) rc.train.ablation.wgat_layers = c.train.ablation.wgat_layers;
      rc.train.seed = seed;
      validate(rc);
      const TrainResult tr = train(init_params(model_dims(rc.train, n), seed), p.graphs, p.split, rc.train);
      row.per_seed.push_back(evaluate_model(tr.best, p.graphs, p.split.test, model_options(rc.train)));
      log << "ablate: " << row.variant.label << " seed " << seed << " MRR@10 "
          << format_double(row.per_seed.back().at(10).mrr) << '\n';
    }
    row.mean = mean_table(row.per_seed);
    report.rows.push_back(std::move(row));
  }
  if (const AblationRow* full = report.row("full")) {
    const double ref = full->mean.at(10).mrr;
    for (const auto& name : ordering_checked_variants()) {
      const AblationRow* other = report.row(name);
      if (other && other->mean.at(10).mrr > ref) {
        std::ostringstream msg;
        msg << other->variant.label << " MRR@10 " << format_double(other->mean.at(10).mrr)
            << " > SCRM " << format_double(ref);
        report.violations.push_back(msg.str());
      }
    }
  }
  detail::write_text(c.report_out, ablation_json(report).dump(2) + "\n");
  detail::write_text(fs::path(c.report_out).replace_extension(".csv").string(), ablation_table(report));
  log << ablation_table(report);
  for (const auto& v : report.violations) log << "ordering violation: " << v << '\n';
  return report;
}

// ---------------------------------------------------------------------------
// synth

inline std::string truth_dir(const RunConfig& c) {
  if (!c.truth_out.empty()) return c.truth_out;
  const fs::path parent = fs::path(c.events_in).parent_path();
  return parent.empty() ? "." : parent.string();
}

/// Writes the events CSV to events_in and planted_substitutable.tsv /
/// planted_complementary.tsv to truth_out.
inline SyntheticCorpus cmd_synth(const RunConfig& c, std::ostream& log) {
  validate(c);
  SyntheticCorpus corpus = generate_synthetic(c.synth, c.train.seed);
  {
    auto out = detail::open_out(c.events_in);
    write_synthetic_events(out, corpus);
  }
  const fs::path dir(truth_dir(c));
  {
    auto out = detail::open_out((dir / "planted_substitutable.tsv").string());
    write_planted_pairs(out, corpus.substitutes);
  }
  {
    auto out = detail::open_out((dir / "planted_complementary.tsv").string());
    write_planted_pairs(out, corpus.complements);
  }
  log << "synth: " << c.synth.n_sessions << " sessions, " << corpus.events.size() << " events -> "
      << c.events_in << '\n';
  return corpus;
}

}  // namespace scrm
