#pragma once

// Ranked-retrieval metrics (HR, MRR, NDCG at K), the POP and ItemKNN
// baselines, and the prefix evaluation loop. Relevance is binary with a
// single target, so IDCG = 1.

#include "scrm/error.hpp"
#include "scrm/parallel.hpp"
#include "scrm/session_ingest.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace scrm {

inline const std::vector<std::size_t> kDefaultKs{5, 10, 20};

/// 1-based rank of `target` by descending score; ties go to the lower index.
inline std::size_t rank_target(std::span<const double> scores, std::size_t target) {
  const double t = scores[target];
  std::size_t ahead = 0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (scores[j] > t || (scores[j] == t && j < target)) ++ahead;
  }
  return ahead + 1;
}

struct MetricCell {
  double hr = 0.0;
  double mrr = 0.0;
  double ndcg = 0.0;

  bool operator==(const MetricCell&) const = default;
};

/// rank 0 means the target was not ranked at all.
inline MetricCell metrics_at_k(std::size_t rank, std::size_t k) {
  if (rank == 0 || rank > k) return {};
  const double r = static_cast<double>(rank);
  return {1.0, 1.0 / r, 1.0 / std::log2(r + 1.0)};
}

struct MetricTable {
  std::vector<std::size_t> ks;
  std::vector<MetricCell> cells;
  std::size_t n_prefixes = 0;

  const MetricCell& at(std::size_t k) const {
    const auto it = std::find(ks.begin(), ks.end(), k);
    if (it == ks.end()) throw Error(ErrorKind::BadConfig, "K=" + std::to_string(k) + " not evaluated");
    return cells[static_cast<std::size_t>(it - ks.begin())];
  }

  bool operator==(const MetricTable&) const = default;
};

/// Running sums of per-prefix metrics for several cutoffs.
class RankedEval {
 public:
  explicit RankedEval(std::vector<std::size_t> ks = kDefaultKs)
      : ks_(std::move(ks)), sums_(ks_.size()) {}

  void add(std::size_t rank) {
    for (std::size_t i = 0; i < ks_.size(); ++i) {
      const MetricCell c = metrics_at_k(rank, ks_[i]);
      sums_[i].hr += c.hr;
      sums_[i].mrr += c.mrr;
      sums_[i].ndcg += c.ndcg;
    }
    ++count_;
  }

  std::size_t count() const { return count_; }

  MetricTable table() const {
    MetricTable t{ks_, sums_, count_};
    if (count_ == 0) return t;
    const double n = static_cast<double>(count_);
    for (auto& c : t.cells) {
      c.hr /= n;
      c.mrr /= n;
      c.ndcg /= n;
    }
    return t;
  }

 private:
  std::vector<std::size_t> ks_;
  std::vector<MetricCell> sums_;
  std::size_t count_ = 0;
};

/// Fills a score vector over the catalog for one prefix. Must be safe to call
/// concurrently.
using Scorer = std::function<void(const LabeledPrefix&, std::vector<double>&)>;

/// Ranks every prefix in parallel and accumulates in prefix order.
inline std::vector<std::size_t> rank_all(const Scorer& scorer,
                                         std::span<const LabeledPrefix> prefixes) {
  std::vector<std::size_t> ranks(prefixes.size(), 0);
  const auto chunks = chunk_ranges(prefixes.size(), 64);
  parallel_for(chunks.size(), [&](std::size_t c) {
    std::vector<double> scores;
    for (std::size_t i = chunks[c].first; i < chunks[c].second; ++i) {
      scorer(prefixes[i], scores);
      ranks[i] = rank_target(scores, prefixes[i].target);
    }
  });
  return ranks;
}

inline MetricTable evaluate(const Scorer& scorer, std::span<const LabeledPrefix> prefixes,
                            const std::vector<std::size_t>& ks = kDefaultKs) {
  if (prefixes.empty()) throw Error(ErrorKind::EmptySplit, "no prefixes to evaluate");
  RankedEval acc(ks);
  for (std::size_t r : rank_all(scorer, prefixes)) acc.add(r);
  return acc.table();
}

// ---------------------------------------------------------------------------
// Baselines

/// Item frequency over training prefix inputs and targets, same for every prefix.
inline Scorer baseline_pop(std::span<const LabeledPrefix> train, std::size_t num_items) {
  std::vector<double> counts(num_items, 0.0);
  for (const auto& p : train) {
    for (ItemIndex i : p.items) counts[i] += 1.0;
    counts[p.target] += 1.0;
  }
  return [counts = std::move(counts)](const LabeledPrefix&, std::vector<double>& out) {
    out = counts;
  };
}

/// Cosine similarity between binary item-by-session incidence vectors.
class ItemKnn {
 public:
  ItemKnn(const std::vector<FusedSession>& sessions, std::size_t num_items)
      : item_sessions_(num_items) {
    session_items_.reserve(sessions.size());
    for (std::size_t s = 0; s < sessions.size(); ++s) {
      std::vector<ItemIndex> items;
      for (const auto& st : sessions[s].steps) items.push_back(st.item);
      std::sort(items.begin(), items.end());
      items.erase(std::unique(items.begin(), items.end()), items.end());
      for (ItemIndex i : items) item_sessions_[i].push_back(s);
      session_items_.push_back(std::move(items));
    }
  }

  double similarity(ItemIndex a, ItemIndex b) const {
    const auto& sa = item_sessions_[a];
    const auto& sb = item_sessions_[b];
    if (sa.empty() || sb.empty()) return 0.0;
    std::vector<std::size_t> common;
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(common));
    return static_cast<double>(common.size()) /
           std::sqrt(static_cast<double>(sa.size()) * static_cast<double>(sb.size()));
  }

  /// Similarity row of `item`, with its own entry set to 0.
  void row(ItemIndex item, std::vector<double>& out) const {
    const std::size_t n = item_sessions_.size();
    out.assign(n, 0.0);
    const auto& sa = item_sessions_[item];
    if (sa.empty()) return;
    for (std::size_t s : sa)
      for (ItemIndex b : session_items_[s]) out[b] += 1.0;
    for (std::size_t b = 0; b < n; ++b) {
      if (out[b] == 0.0) continue;
      out[b] /= std::sqrt(static_cast<double>(sa.size()) *
                          static_cast<double>(item_sessions_[b].size()));
    }
    out[item] = 0.0;
  }

  Scorer scorer() const {
    return [this](const LabeledPrefix& p, std::vector<double>& out) { row(p.items.back(), out); };
  }

 private:
  std::vector<std::vector<std::size_t>> item_sessions_;
  std::vector<std::vector<ItemIndex>> session_items_;
};

// ---------------------------------------------------------------------------
// Reports

inline nlohmann::json metrics_json(const MetricTable& t) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < t.ks.size(); ++i) {
    j[std::to_string(t.ks[i])] = {
        {"hr", t.cells[i].hr}, {"mrr", t.cells[i].mrr}, {"ndcg", t.cells[i].ndcg}};
  }
  return j;
}

/// {model, dataset, "<K>": {hr, mrr, ndcg}..., n_prefixes, seed}
inline nlohmann::json metric_report(const std::string& model, const std::string& dataset,
                                    const MetricTable& t, std::uint64_t seed) {
  nlohmann::json j = metrics_json(t);
  j["model"] = model;
  j["dataset"] = dataset;
  j["n_prefixes"] = t.n_prefixes;
  j["seed"] = seed;
  return j;
}

/// HR@K.., MRR@K.., NDCG@K.. in that column order.
inline std::string metrics_csv_header(const std::vector<std::size_t>& ks = kDefaultKs) {
  std::ostringstream s;
  s << "model";
  for (const char* m : {"HR", "MRR", "NDCG"})
    for (std::size_t k : ks) s << ',' << m << '@' << k;
  return s.str();
}

inline std::string metrics_csv_row(const std::string& model, const MetricTable& t) {
  std::ostringstream s;
  s.precision(4);
  s << std::fixed << model;
  for (int m = 0; m < 3; ++m)
    for (const auto& c : t.cells) s << ',' << (m == 0 ? c.hr : m == 1 ? c.mrr : c.ndcg);
  return s.str();
}

}  // namespace scrm
