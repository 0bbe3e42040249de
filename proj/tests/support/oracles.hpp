#pragma once

// Fixtures and independent reference implementations used by the tests.
// Nothing here calls into the code under test except for plain data types.

#include "scrm/scrm.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace scrm::oracle {

// Session {v1,v2,v3,v4,v5,v6,v2} with behaviors c,c,p,c,c,p,p.
inline const char* kFig2Events =
    "session_id,timestamp,item_id,behavior\n"
    "f2,1,v1,click\n"
    "f2,2,v2,click\n"
    "f2,3,v3,purchase\n"
    "f2,4,v4,click\n"
    "f2,5,v5,click\n"
    "f2,6,v6,purchase\n"
    "f2,7,v2,purchase\n";

using IdPair = std::pair<std::string, std::string>;

inline IdPair id_pair(std::string a, std::string b) {
  if (b < a) std::swap(a, b);
  return {a, b};
}

/// Edge set of a graph by catalog id, optionally restricted to one order.
inline std::set<IdPair> id_edges(const RelationGraph& g, const Catalog& cat, int order = 0) {
  std::set<IdPair> out;
  for (const auto& [k, e] : g.edges())
    if (order == 0 || static_cast<int>(e.order) == order) out.insert(id_pair(cat.ids[k.a], cat.ids[k.b]));
  return out;
}

// ---------------------------------------------------------------------------
// Graph-rule oracle: dense matrices, literal rules, triple loops.

struct OracleEdge {
  std::size_t frequency = 0;
  double weight = 0.0;
  int order = 0;
  bool operator==(const OracleEdge&) const = default;
};

struct OracleGraphs {
  std::map<std::pair<std::size_t, std::size_t>, OracleEdge> sub, comp;
};

inline OracleGraphs oracle_graphs(const std::vector<FusedSession>& sessions, std::size_t n) {
  std::vector<std::vector<std::size_t>> fs(n, std::vector<std::size_t>(n, 0)), fc = fs;
  for (const auto& s : sessions) {
    for (std::size_t t = 0; t + 1 < s.steps.size(); ++t) {
      const auto a = s.steps[t], b = s.steps[t + 1];
      if (a.item == b.item) continue;
      const bool cc = a.behavior == Behavior::Click && b.behavior == Behavior::Click;
      const bool cp = a.behavior == Behavior::Click && b.behavior == Behavior::Purchase;
      const bool pp = a.behavior == Behavior::Purchase && b.behavior == Behavior::Purchase;
      const bool pc = a.behavior == Behavior::Purchase && b.behavior == Behavior::Click;
      if (cc || cp) {
        ++fs[a.item][b.item];
        ++fs[b.item][a.item];
      }
      if (pp || pc) {
        ++fc[a.item][b.item];
        ++fc[b.item][a.item];
      }
    }
  }
  const auto max_of = [&](const auto& m) {
    std::size_t mx = 0;
    for (const auto& r : m) mx = std::max(mx, *std::max_element(r.begin(), r.end()));
    return mx;
  };
  const double ms = static_cast<double>(max_of(fs)), mc = static_cast<double>(max_of(fc));
  OracleGraphs g;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (fs[i][j]) g.sub[{i, j}] = {fs[i][j], fs[i][j] / ms, 1};
      if (fc[i][j]) g.comp[{i, j}] = {fc[i][j], fc[i][j] / mc, 1};
    }
  // Second order: complement {i,k} and substitute {k,j} imply complement {i,j}.
  std::map<std::pair<std::size_t, std::size_t>, OracleEdge> derived;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j || i == k || k == j) continue;
        if (!fc[i][k] || !fs[k][j]) continue;
        const auto key = std::make_pair(std::min(i, j), std::max(i, j));
        if (g.comp.count(key)) continue;
        const double w = std::min(fc[i][k] / mc, fs[k][j] / ms);
        const std::size_t f = std::min(fc[i][k], fs[k][j]);
        auto& e = derived[key];
        e.order = 2;
        e.weight = std::max(e.weight, w);
        e.frequency = std::max(e.frequency, f);
      }
  for (const auto& [k, e] : derived) g.comp[k] = e;
  return g;
}

inline std::map<std::pair<std::size_t, std::size_t>, OracleEdge> as_oracle(const RelationGraph& g) {
  std::map<std::pair<std::size_t, std::size_t>, OracleEdge> out;
  for (const auto& [k, e] : g.edges())
    out[{k.a, k.b}] = {e.frequency, e.weight, static_cast<int>(e.order)};
  return out;
}

/// Random corpus: up to `max_sessions` sessions over up to `max_items` items.
inline std::vector<FusedSession> random_sessions(std::mt19937_64& rng, std::size_t max_sessions,
                                                 std::size_t max_items, std::size_t& n_items) {
  n_items = 2 + rng() % (max_items - 1);
  const std::size_t ns = 1 + rng() % max_sessions;
  std::vector<FusedSession> out;
  for (std::size_t s = 0; s < ns; ++s) {
    FusedSession fs;
    fs.id = "r" + std::to_string(s);
    const std::size_t len = 2 + rng() % 7;
    for (std::size_t t = 0; t < len; ++t) {
      Step st;
      st.item = static_cast<ItemIndex>(rng() % n_items);
      st.behavior = rng() % 2 ? Behavior::Click : Behavior::Purchase;
      st.timestamp = static_cast<std::int64_t>(t);
      fs.steps.push_back(st);
    }
    out.push_back(std::move(fs));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metric oracle: explicit sort, textbook formulas.

inline std::size_t oracle_rank(const std::vector<double>& scores, std::size_t target) {
  std::vector<std::size_t> idx(scores.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return static_cast<std::size_t>(std::find(idx.begin(), idx.end(), target) - idx.begin()) + 1;
}

inline MetricCell oracle_metrics(std::size_t rank, std::size_t k) {
  MetricCell c;
  if (rank <= k) {
    c.hr = 1.0;
    c.mrr = 1.0 / static_cast<double>(rank);
    c.ndcg = std::log(2.0) / std::log(static_cast<double>(rank) + 1.0);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Small model fixture for gradient checks.

struct ToyProblem {
  RelationGraphs graphs;
  std::vector<LabeledPrefix> batch;
  std::size_t n_items = 6;
};

inline ToyProblem toy_problem() {
  ToyProblem t;
  const auto C = Behavior::Click, P = Behavior::Purchase;
  const std::vector<std::vector<std::pair<ItemIndex, Behavior>>> raw = {
      {{0, C}, {1, C}, {2, P}, {3, C}, {4, C}, {5, P}, {1, P}},
      {{1, C}, {0, C}, {2, C}, {3, P}, {5, C}},
      {{4, C}, {5, C}, {0, P}, {2, C}, {1, C}},
      {{3, C}, {2, C}, {4, P}, {0, P}},
      {{5, C}, {4, C}, {3, C}, {1, P}, {2, C}},
  };
  std::vector<FusedSession> sessions;
  for (std::size_t s = 0; s < raw.size(); ++s) {
    FusedSession fs;
    fs.id = "t" + std::to_string(s);
    for (std::size_t k = 0; k < raw[s].size(); ++k)
      fs.steps.push_back({raw[s][k].first, raw[s][k].second, static_cast<std::int64_t>(k)});
    sessions.push_back(fs);
  }
  t.graphs = build_relation_graphs(sessions, t.n_items);
  t.batch = expand_prefixes(sessions);
  return t;
}

struct GradCheck {
  std::string worst_tensor;
  double max_rel_error = 0.0;
};

/// Per tensor: max |analytic - numeric| / max(max |numeric|, max |analytic|, 1e-7);
/// the worst tensor is reported.
inline GradCheck gradient_check(const ModelParams& params, const RelationGraphs& graphs,
                                std::span<const LabeledPrefix> batch, const BatchSamples& samples,
                                const ModelOptions& mopt, const LossWeights& w, double h = 1e-5) {
  const auto objective = [&](const ModelParams& p) {
    const auto r = batch_objective(p, graphs, batch, samples, mopt, w, DenoiseMode::Deterministic,
                                   nullptr, nullptr);
    return w.rec * r.loss.rec + w.ex * r.loss.ex + w.se * r.loss.se;
  };
  ModelParams grads = params.zeros_like();
  batch_objective(params, graphs, batch, samples, mopt, w, DenoiseMode::Deterministic, nullptr, &grads);

  std::vector<const Matrix*> analytic;
  grads.visit([&](const std::string&, const Matrix& m) { analytic.push_back(&m); });
  ModelParams probe = params;
  GradCheck out;
  std::size_t t = 0;
  probe.visit([&](const std::string& name, Matrix& m) {
    const Matrix& a = *analytic[t++];
    double diff = 0.0, scale = 1e-7;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double orig = m.data()[i];
      m.data()[i] = orig + h;
      const double fp = objective(probe);
      m.data()[i] = orig - h;
      const double fm = objective(probe);
      m.data()[i] = orig;
      const double num = (fp - fm) / (2.0 * h);
      diff = std::max(diff, std::abs(num - a.data()[i]));
      scale = std::max({scale, std::abs(num), std::abs(a.data()[i])});
    }
    const double rel = diff / scale;
    if (rel > out.max_rel_error) {
      out.max_rel_error = rel;
      out.worst_tensor = name;
    }
  });
  return out;
}

}  // namespace scrm::oracle
