#pragma once

// The three loss terms: binary cross-entropy over the catalog, the
// substitute/complement exclusivity penalty and the semantic ordering loss.
// Each term has a value function and a gradient function that accumulates
// into caller-owned buffers.

#include "scrm/linalg.hpp"
#include "scrm/relation_graphs.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <set>
#include <vector>

namespace scrm {

inline constexpr double kProbClamp = 1e-12;

struct LossTerms {
  double rec = 0.0;
  double ex = 0.0;
  double se = 0.0;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double total = 0.0;

  void finalize() { total = rec + gamma1 * ex + gamma2 * se; }
};

/// L_r = -sum_j [y_j log p_j + (1 - y_j) log(1 - p_j)], y one-hot at target,
/// probabilities clamped to [1e-12, 1 - 1e-12].
inline double loss_rec(std::span<const double> probs, std::size_t target) {
  double loss = 0.0;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    const double p = std::clamp(probs[j], kProbClamp, 1.0 - kProbClamp);
    loss -= j == target ? std::log(p) : std::log1p(-p);
  }
  return loss;
}

/// dL_r / dlogits when probs = softmax(logits), scaled by `scale`.
/// Clamped entries contribute no gradient.
inline Vector loss_rec_grad_logits(std::span<const double> probs, std::size_t target,
                                   double scale = 1.0) {
  const std::size_t n = probs.size();
  std::vector<double> dp(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double p = probs[j];
    if (p <= kProbClamp || p >= 1.0 - kProbClamp) continue;
    dp[j] = j == target ? -1.0 / p : 1.0 / (1.0 - p);
  }
  Vector out(static_cast<Eigen::Index>(n));
  softmax_backward(probs, dp, std::span<double>(out.data(), n));
  return out * scale;
}

// ---------------------------------------------------------------------------

using ItemPair = std::pair<ItemIndex, ItemIndex>;

inline double exclusivity_gap(const Matrix& Xs, const Matrix& Xc, ItemIndex i, ItemIndex j) {
  return Xs.row(i).dot(Xs.row(j)) - Xc.row(i).dot(Xc.row(j));
}

/// Mean over pairs of -sigmoid(((x_i^s)^T x_j^s - (x_i^c)^T x_j^c)^2).
inline double loss_exclusive(const std::vector<ItemPair>& pairs, const Matrix& Xs,
                             const Matrix& Xc) {
  if (pairs.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [i, j] : pairs) {
    const double g = exclusivity_gap(Xs, Xc, i, j);
    sum -= sigmoid(g * g);
  }
  return sum / static_cast<double>(pairs.size());
}

inline void loss_exclusive_grad(const std::vector<ItemPair>& pairs, const Matrix& Xs,
                                const Matrix& Xc, double scale, Matrix& dXs, Matrix& dXc) {
  if (pairs.empty()) return;
  const double w = scale / static_cast<double>(pairs.size());
  for (const auto& [i, j] : pairs) {
    const double g = exclusivity_gap(Xs, Xc, i, j);
    const double s = sigmoid(g * g);
    const double dg = -w * s * (1.0 - s) * 2.0 * g;
    const RowVector si = Xs.row(i), sj = Xs.row(j), ci = Xc.row(i), cj = Xc.row(j);
    dXs.row(i) += dg * sj;
    dXs.row(j) += dg * si;
    dXc.row(i) -= dg * cj;
    dXc.row(j) -= dg * ci;
  }
}

// ---------------------------------------------------------------------------

inline constexpr ItemIndex kNoItem = std::numeric_limits<ItemIndex>::max();

/// Anchor with one substitute, one complement and some irrelevant items.
/// Missing roles are kNoItem / empty.
struct RelationSample {
  ItemIndex anchor = kNoItem;
  ItemIndex substitute = kNoItem;
  ItemIndex complement = kNoItem;
  std::vector<ItemIndex> irrelevant;

  bool has_sub() const { return substitute != kNoItem; }
  bool has_comp() const { return complement != kNoItem; }
  bool has_irr() const { return !irrelevant.empty(); }
  bool usable() const { return (has_sub() && (has_comp() || has_irr())) || (has_comp() && has_irr()); }
};

namespace detail {
// Calls f(a, b, weight) for every ordering term x_i^T (x_a - x_b) of a sample:
//   sub > comp, and comp > irrelevant (sub > irrelevant when no complement).
template <class F>
void for_each_order_term(const RelationSample& s, F&& f) {
  if (s.has_sub() && s.has_comp()) f(s.substitute, s.complement, 1.0);
  const ItemIndex upper = s.has_comp() ? s.complement : s.substitute;
  if (upper != kNoItem && s.has_irr()) {
    const double w = 1.0 / static_cast<double>(s.irrelevant.size());
    for (ItemIndex t : s.irrelevant) f(upper, t, w);
  }
}
}  // namespace detail

struct SemanticLoss {
  double value = 0.0;
  std::size_t used_samples = 0;
  bool no_samples() const { return used_samples == 0; }
};

/// Mean over usable samples of -sigma(x_i^T(x_j - x_k)) - mean_t sigma(x_i^T(x_k - x_t)).
/// Anchors without a complement use the substitute in its place in the
/// second term; anchors without a substitute keep only the second term.
inline SemanticLoss loss_semantic(const std::vector<RelationSample>& samples, const Matrix& X) {
  SemanticLoss out;
  double sum = 0.0;
  for (const auto& s : samples) {
    if (!s.usable()) continue;
    ++out.used_samples;
    const RowVector xi = X.row(s.anchor);
    detail::for_each_order_term(s, [&](ItemIndex a, ItemIndex b, double w) {
      sum -= w * sigmoid(xi.dot(X.row(a) - X.row(b)));
    });
  }
  if (out.used_samples) out.value = sum / static_cast<double>(out.used_samples);
  return out;
}

inline void loss_semantic_grad(const std::vector<RelationSample>& samples, const Matrix& X,
                               double scale, Matrix& dX) {
  std::size_t used = 0;
  for (const auto& s : samples) used += s.usable();
  if (!used) return;
  const double norm = scale / static_cast<double>(used);
  for (const auto& s : samples) {
    if (!s.usable()) continue;
    const RowVector xi = X.row(s.anchor);
    detail::for_each_order_term(s, [&](ItemIndex a, ItemIndex b, double w) {
      const RowVector diff = X.row(a) - X.row(b);
      const double sg = sigmoid(xi.dot(diff));
      const double d = -norm * w * sg * (1.0 - sg);
      dX.row(s.anchor) += d * diff;
      dX.row(a) += d * xi;
      dX.row(b) -= d * xi;
    });
  }
}

// ---------------------------------------------------------------------------
// Per-batch sampling

/// Distinct items of a batch (inputs and targets), ascending.
template <class PrefixRange>
std::vector<ItemIndex> batch_items(const PrefixRange& prefixes) {
  std::set<ItemIndex> items;
  for (const auto& p : prefixes) {
    items.insert(p.items.begin(), p.items.end());
    items.insert(p.target);
  }
  return {items.begin(), items.end()};
}

/// One partner per anchor, drawn uniformly from the other batch items.
inline std::vector<ItemPair> sample_exclusive_pairs(const std::vector<ItemIndex>& items,
                                                    std::mt19937_64& rng) {
  std::vector<ItemPair> pairs;
  if (items.size() < 2) return pairs;
  std::uniform_int_distribution<std::size_t> pick(0, items.size() - 2);
  for (std::size_t a = 0; a < items.size(); ++a) {
    std::size_t b = pick(rng);
    if (b >= a) ++b;
    pairs.emplace_back(items[a], items[b]);
  }
  return pairs;
}

inline bool is_irrelevant(const RelationGraphs& g, ItemIndex anchor, ItemIndex t) {
  return t != anchor && !g.substitutable.has_edge(anchor, t) && !g.complementary.has_edge(anchor, t);
}

/// One (substitute, complement, irrelevant...) draw per anchor. Irrelevant
/// items are drawn uniformly from the catalog with rejection.
inline std::vector<RelationSample> sample_relations(const std::vector<ItemIndex>& anchors,
                                                    const RelationGraphs& g, std::size_t n_neg,
                                                    std::mt19937_64& rng) {
  std::vector<RelationSample> out;
  const std::size_t n = g.substitutable.num_items();
  if (n == 0) return out;
  std::uniform_int_distribution<std::size_t> any(0, n - 1);
  for (ItemIndex i : anchors) {
    RelationSample s;
    s.anchor = i;
    const auto& subs = g.substitutable.neighbors(i);
    const auto& comps = g.complementary.neighbors(i);
    if (subs.empty() && comps.empty()) continue;
    if (!subs.empty())
      s.substitute = subs[std::uniform_int_distribution<std::size_t>(0, subs.size() - 1)(rng)];
    if (!comps.empty())
      s.complement = comps[std::uniform_int_distribution<std::size_t>(0, comps.size() - 1)(rng)];
    const std::size_t related = subs.size() + comps.size() + 1;
    if (related < n) {
      for (std::size_t t = 0; t < n_neg; ++t) {
        for (int attempt = 0; attempt < 64; ++attempt) {
          const auto cand = static_cast<ItemIndex>(any(rng));
          if (is_irrelevant(g, i, cand)) {
            s.irrelevant.push_back(cand);
            break;
          }
        }
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace scrm
