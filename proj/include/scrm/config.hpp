#pragma once

// Run configuration: every knob of a command, readable from a flat
// `key = value` file and overridable by `--key value` flags. Keys are the
// kebab-case field names; `#` starts a comment.

#include "scrm/error.hpp"
#include "scrm/linalg.hpp"
#include "scrm/training.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace scrm {

struct LenRange {
  std::size_t lo = 2;
  std::size_t hi = 12;

  bool operator==(const LenRange&) const = default;
};

struct SynthConfig {
  std::size_t n_items = 200;
  std::size_t n_sub_clusters = 40;
  std::size_t n_comp_pairs = 60;
  std::size_t n_sessions = 3000;
  LenRange session_len_range{2, 12};
  double noise_rate = 0.1;
  double p_complement = 0.6;   // chance a planted complement follows a purchase
  double p_repeat = 0.7;       // chance the purchase is the last clicked item

  bool operator==(const SynthConfig&) const = default;
};

struct RunConfig {
  TrainConfig train;

  std::string events_in = "events.csv";
  std::string graphs_out = "graphs";
  std::string checkpoint = "model.ckpt";
  std::string report_out = "report.json";
  std::string log_out;    // empty: <checkpoint>.log.jsonl
  std::string truth_out;  // empty: directory of events_in

  std::size_t min_item_support = 5;
  std::size_t min_session_len = 2;
  std::size_t filter_passes = 1;
  std::size_t n_valid = 300;
  std::size_t n_test = 300;

  SynthConfig synth;

  bool operator==(const RunConfig&) const = default;
};

inline constexpr const char* kAblationNames[] = {"no_ex",     "no_se",      "no_denoise",
                                                 "sub_only",  "comp_only",  "mix_graphs",
                                                 "no_integration"};

inline bool* ablation_flag(AblationFlags& a, std::string_view name) {
  if (name == "no_ex") return &a.no_ex;
  if (name == "no_se") return &a.no_se;
  if (name == "no_denoise") return &a.no_denoise;
  if (name == "sub_only") return &a.sub_only;
  if (name == "comp_only") return &a.comp_only;
  if (name == "mix_graphs") return &a.mix_graphs;
  if (name == "no_integration") return &a.no_integration;
  return nullptr;
}

// ---------------------------------------------------------------------------
// Text codecs per field type

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string to_text(double v) { return format_double(v); }
inline std::string to_text(std::size_t v) { return std::to_string(v); }
inline std::string to_text(const std::string& v) { return v; }
inline std::string to_text(const LenRange& r) { return std::to_string(r.lo) + ":" + std::to_string(r.hi); }

inline std::string to_text(const AblationFlags& a) {
  std::string out;
  AblationFlags copy = a;
  for (const char* name : kAblationNames) {
    if (*ablation_flag(copy, name)) {
      if (!out.empty()) out += ',';
      out += name;
    }
  }
  return out.empty() ? "none" : out;
}

template <class T>
void parse_number(std::string_view key, std::string_view text, T& out) {
  const std::string s = trim(text);
  if constexpr (std::is_floating_point_v<T>) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      out = v;
      return;
    } catch (const std::exception&) {
      throw Error(ErrorKind::BadConfig, std::string(key) + ": not a number: '" + s + "'");
    }
  } else {
    T v{};
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
      throw Error(ErrorKind::BadConfig, std::string(key) + ": not a non-negative integer: '" + s + "'");
    }
    out = v;
  }
}

inline void from_text(std::string_view key, std::string_view text, double& v) { parse_number(key, text, v); }
inline void from_text(std::string_view key, std::string_view text, std::size_t& v) { parse_number(key, text, v); }
inline void from_text(std::string_view, std::string_view text, std::string& v) { v = trim(text); }

inline void from_text(std::string_view key, std::string_view text, LenRange& r) {
  const std::string s = trim(text);
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw Error(ErrorKind::BadConfig, std::string(key) + ": expected lo:hi");
  parse_number(key, std::string_view(s).substr(0, colon), r.lo);
  parse_number(key, std::string_view(s).substr(colon + 1), r.hi);
}

/// Comma-separated ablation names, or "none".
inline void from_text(std::string_view key, std::string_view text, AblationFlags& a) {
  const std::size_t layers = a.wgat_layers;
  a = AblationFlags{};
  a.wgat_layers = layers;
  std::stringstream ss{std::string(text)};
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok.empty() || tok == "none") continue;
    bool* f = ablation_flag(a, tok);
    if (!f) throw Error(ErrorKind::BadConfig, std::string(key) + ": unknown ablation '" + tok + "'");
    *f = true;
  }
}

// ---------------------------------------------------------------------------
// Field table

/// Calls `f(key, field&, help)` for every configurable field, in file order.
template <class Config, class F>
void visit_fields(Config& c, F&& f) {
  auto& t = c.train;
  f("events-in", c.events_in, "input events CSV (session_id,timestamp,item_id,behavior)");
  f("graphs-out", c.graphs_out, "directory for graph TSVs and stats");
  f("checkpoint", c.checkpoint, "model checkpoint path");
  f("report-out", c.report_out, "metric / ablation report path");
  f("log-out", c.log_out, "epoch log JSONL path (default <checkpoint>.log.jsonl)");
  f("truth-out", c.truth_out, "directory for planted relation files (default: next to events)");

  f("min-item-support", c.min_item_support, "drop items with fewer interactions");
  f("min-session-len", c.min_session_len, "drop sessions shorter than this");
  f("filter-passes", c.filter_passes, "item/session filter rounds");
  f("n-valid", c.n_valid, "validation sessions");
  f("n-test", c.n_test, "test sessions");

  f("lr", t.lr, "Adam learning rate");
  f("gamma1", t.gamma1, "weight of the exclusivity loss");
  f("gamma2", t.gamma2, "weight of the semantic ordering loss");
  f("tau", t.tau, "Gumbel-Softmax temperature");
  f("tau-anneal", t.tau_anneal, "per-epoch temperature multiplier");
  f("tau-min", t.tau_min, "temperature floor when annealing");
  f("top-k", t.top_k, "neighbors kept per node after denoising");
  f("l2", t.l2, "L2 penalty");
  f("batch-size", t.batch_size, "prefixes per batch");
  f("epochs", t.epochs, "maximum epochs");
  f("patience", t.patience, "epochs without validation gain before stopping");
  f("n-neg", t.n_neg, "irrelevant items per semantic sample");
  f("seed", t.seed, "random seed");
  f("d0", t.d0, "input embedding size");
  f("d1", t.d1, "hidden size");
  f("heads", t.heads, "attention heads");
  f("wgat-layers", t.ablation.wgat_layers, "stacked attention layers");
  f("ablate", t.ablation, "comma list of: no_ex,no_se,no_denoise,sub_only,comp_only,mix_graphs,no_integration");

  auto& s = c.synth;
  f("n-items", s.n_items, "synthetic catalog size");
  f("n-sub-clusters", s.n_sub_clusters, "synthetic substitute clusters");
  f("n-comp-pairs", s.n_comp_pairs, "synthetic complement pairs");
  f("n-sessions", s.n_sessions, "synthetic sessions");
  f("session-len-range", s.session_len_range, "synthetic session length lo:hi");
  f("noise-rate", s.noise_rate, "probability of a random event after each step");
  f("p-complement", s.p_complement, "probability a purchase is followed by its complement");
  f("p-repeat", s.p_repeat, "probability the purchase repeats the last click");
}

inline void set_field(RunConfig& c, std::string_view key, std::string_view value) {
  bool found = false;
  visit_fields(c, [&](std::string_view k, auto& field, const char*) {
    if (k != key) return;
    from_text(k, value, field);
    found = true;
  });
  if (!found) throw Error(ErrorKind::BadConfig, "unknown config key '" + std::string(key) + "'");
}

inline std::string config_text(const RunConfig& c) {
  std::ostringstream out;
  RunConfig copy = c;
  visit_fields(copy, [&](std::string_view k, auto& field, const char*) {
    out << k << " = " << to_text(field) << '\n';
  });
  return out.str();
}

inline void apply_config_text(RunConfig& c, std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::BadConfig, "config line " + std::to_string(n) + ": expected key = value", n);
    }
    set_field(c, trim(std::string_view(t).substr(0, eq)), std::string_view(t).substr(eq + 1));
  }
}

inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(base, ss.str());
  return base;
}

/// Rejects values no command can run with.
inline void validate(const RunConfig& c) {
  const auto& t = c.train;
  const auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw Error(ErrorKind::BadConfig, msg);
  };
  need(t.lr > 0.0, "lr must be positive");
  need(t.tau > 0.0 && t.tau_min > 0.0, "tau and tau-min must be positive");
  need(t.tau_anneal > 0.0, "tau-anneal must be positive");
  need(t.gamma1 >= 0.0 && t.gamma2 >= 0.0 && t.l2 >= 0.0, "loss weights must be non-negative");
  need(t.batch_size > 0, "batch-size must be positive");
  need(t.top_k > 0, "top-k must be positive");
  need(t.d0 > 0 && t.d1 > 0 && t.heads > 0 && t.ablation.wgat_layers > 0,
       "d0, d1, heads and wgat-layers must be positive");
  const auto& a = t.ablation;
  need(int(a.sub_only) + int(a.comp_only) + int(a.mix_graphs) <= 1,
       "sub_only, comp_only and mix_graphs are mutually exclusive");
  need(c.min_session_len >= 2, "min-session-len must be at least 2");
  const auto& s = c.synth;
  need(s.n_items > 0 && s.n_sub_clusters > 0 && s.n_sub_clusters <= s.n_items,
       "synthetic clusters must be between 1 and n-items");
  need(s.session_len_range.lo >= 2 && s.session_len_range.lo <= s.session_len_range.hi,
       "session-len-range must satisfy 2 <= lo <= hi");
  need(s.noise_rate >= 0.0 && s.noise_rate < 1.0, "noise-rate must be in [0, 1)");
  need(s.p_complement >= 0.0 && s.p_complement <= 1.0, "p-complement must be in [0, 1]");
  need(s.p_repeat >= 0.0 && s.p_repeat <= 1.0, "p-repeat must be in [0, 1]");
}

}  // namespace scrm
