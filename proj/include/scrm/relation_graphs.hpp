#pragma once

// Rule-based substitutable / complementary item graphs.
//
// Adjacent step pairs (a, b) of a fused session are labelled by behavior:
//   click -> click, click -> purchase        substitutable
//   purchase -> purchase, purchase -> click  complementary
// Complements are then augmented once through substitute bridges:
//   (i COM k) & (k SUB j) -> (i COM j)   and   (i SUB k) & (k COM j) -> (i COM j).

#include "scrm/linalg.hpp"
#include "scrm/session_ingest.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <ostream>
#include <sstream>
#include <utility>
#include <vector>

namespace scrm {

enum class RelationKind : std::uint8_t { Substitutable, Complementary };

inline std::string_view to_string(RelationKind k) {
  return k == RelationKind::Substitutable ? "substitutable" : "complementary";
}

/// Unordered pair stored with first < second.
struct EdgeKey {
  ItemIndex a = 0, b = 0;

  static EdgeKey of(ItemIndex i, ItemIndex j) { return i < j ? EdgeKey{i, j} : EdgeKey{j, i}; }
  auto operator<=>(const EdgeKey&) const = default;
};

struct EdgeInfo {
  std::uint64_t frequency = 0;
  double weight = 0.0;
  int order = 1;  // 1 = observed, 2 = inferred through a bridge

  bool operator==(const EdgeInfo&) const = default;
};

class RelationGraph {
 public:
  RelationGraph() = default;
  RelationGraph(RelationKind kind, std::size_t num_items)
      : kind_(kind), adjacency_(num_items) {}

  RelationKind kind() const { return kind_; }
  std::size_t num_items() const { return adjacency_.size(); }
  std::size_t num_edges() const { return edges_.size(); }
  const std::map<EdgeKey, EdgeInfo>& edges() const { return edges_; }

  /// Sorted neighbor list N(i).
  const std::vector<ItemIndex>& neighbors(ItemIndex i) const { return adjacency_[i]; }

  const EdgeInfo* find(ItemIndex i, ItemIndex j) const {
    if (i == j) return nullptr;
    auto it = edges_.find(EdgeKey::of(i, j));
    return it == edges_.end() ? nullptr : &it->second;
  }
  bool has_edge(ItemIndex i, ItemIndex j) const { return find(i, j) != nullptr; }
  double weight(ItemIndex i, ItemIndex j) const {
    const auto* e = find(i, j);
    return e ? e->weight : 0.0;
  }

  /// Adds one occurrence of {i, j}. Self pairs are ignored.
  void count(ItemIndex i, ItemIndex j) {
    if (i == j) return;
    auto [it, inserted] = edges_.try_emplace(EdgeKey::of(i, j));
    ++it->second.frequency;
    if (inserted) link(i, j);
  }

  /// Inserts an edge with explicit attributes, replacing nothing.
  bool insert(ItemIndex i, ItemIndex j, const EdgeInfo& info) {
    if (i == j) return false;
    auto [it, inserted] = edges_.try_emplace(EdgeKey::of(i, j), info);
    if (inserted) link(i, j);
    return inserted;
  }

  EdgeInfo* find_mutable(ItemIndex i, ItemIndex j) {
    auto it = edges_.find(EdgeKey::of(i, j));
    return it == edges_.end() ? nullptr : &it->second;
  }

  /// weight = frequency / max frequency.
  void normalize() {
    std::uint64_t mx = 0;
    for (const auto& [k, e] : edges_) mx = std::max(mx, e.frequency);
    for (auto& [k, e] : edges_)
      e.weight = mx ? static_cast<double>(e.frequency) / static_cast<double>(mx) : 0.0;
  }

 private:
  void link(ItemIndex i, ItemIndex j) {
    auto add = [](std::vector<ItemIndex>& v, ItemIndex x) {
      v.insert(std::lower_bound(v.begin(), v.end(), x), x);
    };
    add(adjacency_[i], j);
    add(adjacency_[j], i);
  }

  RelationKind kind_ = RelationKind::Substitutable;
  std::map<EdgeKey, EdgeInfo> edges_;
  std::vector<std::vector<ItemIndex>> adjacency_;
};

/// The graph an adjacent step pair feeds. With two behaviors the four rules
/// partition all transitions, so the leading behavior alone decides.
inline RelationKind classify_transition(Behavior first, Behavior /*second*/) {
  return first == Behavior::Click ? RelationKind::Substitutable : RelationKind::Complementary;
}

namespace detail {
inline RelationGraph build_first_order(const std::vector<FusedSession>& sessions,
                                       std::size_t num_items, RelationKind kind) {
  RelationGraph g(kind, num_items);
  for (const auto& s : sessions) {
    for (std::size_t t = 0; t + 1 < s.steps.size(); ++t) {
      const auto& a = s.steps[t];
      const auto& b = s.steps[t + 1];
      if (classify_transition(a.behavior, b.behavior) == kind) g.count(a.item, b.item);
    }
  }
  g.normalize();
  return g;
}
}  // namespace detail

inline RelationGraph build_substitutable(const std::vector<FusedSession>& sessions,
                                         std::size_t num_items) {
  return detail::build_first_order(sessions, num_items, RelationKind::Substitutable);
}

inline RelationGraph build_complementary_first_order(const std::vector<FusedSession>& sessions,
                                                     std::size_t num_items) {
  return detail::build_first_order(sessions, num_items, RelationKind::Complementary);
}

/// One pass over first-order complement edges, bridging through substitutes.
/// A derived edge takes min(constituent weights) and min(constituent
/// frequencies), maximized over all derivation paths. Existing first-order
/// edges are left as they are; weights are not renormalized.
inline RelationGraph augment_second_order(const RelationGraph& comp, const RelationGraph& sub) {
  RelationGraph out = comp;
  std::map<EdgeKey, EdgeInfo> derived;
  for (const auto& [key, ce] : comp.edges()) {
    if (ce.order != 1) continue;
    // Either endpoint of the complement edge can be the bridge k.
    const std::array<std::pair<ItemIndex, ItemIndex>, 2> ends{{{key.a, key.b}, {key.b, key.a}}};
    for (const auto& [i, k] : ends) {
      for (ItemIndex j : sub.neighbors(k)) {
        if (j == i) continue;
        const auto* existing = comp.find(i, j);
        if (existing && existing->order == 1) continue;
        const auto* se = sub.find(k, j);
        EdgeInfo cand{std::min(ce.frequency, se->frequency), std::min(ce.weight, se->weight), 2};
        auto [it, inserted] = derived.try_emplace(EdgeKey::of(i, j), cand);
        if (!inserted) {
          it->second.weight = std::max(it->second.weight, cand.weight);
          it->second.frequency = std::max(it->second.frequency, cand.frequency);
        }
      }
    }
  }
  for (const auto& [key, info] : derived) out.insert(key.a, key.b, info);
  return out;
}

/// Union of two graphs' edges. Shared edges keep the larger weight and the
/// summed frequency.
inline RelationGraph merge_graphs(const RelationGraph& a, const RelationGraph& b) {
  RelationGraph out = a;
  for (const auto& [key, e] : b.edges()) {
    if (auto* cur = out.find_mutable(key.a, key.b)) {
      cur->frequency += e.frequency;
      cur->weight = std::max(cur->weight, e.weight);
      cur->order = std::min(cur->order, e.order);
    } else {
      out.insert(key.a, key.b, e);
    }
  }
  return out;
}

struct GraphStats {
  std::size_t num_items = 0;
  std::size_t num_edges = 0;
  std::size_t first_order_edges = 0;
  std::size_t second_order_edges = 0;
  double density = 0.0;
  double mean_degree = 0.0;
  std::array<std::size_t, 10> weight_histogram{};  // bins (0,0.1], ..., (0.9,1.0]
};

inline GraphStats graph_stats(const RelationGraph& g) {
  GraphStats st;
  st.num_items = g.num_items();
  st.num_edges = g.num_edges();
  const double n = static_cast<double>(st.num_items);
  const double e = static_cast<double>(st.num_edges);
  st.density = st.num_items > 1 ? 2.0 * e / (n * (n - 1.0)) : 0.0;
  st.mean_degree = st.num_items > 0 ? 2.0 * e / n : 0.0;
  for (const auto& [k, info] : g.edges()) {
    (info.order == 1 ? st.first_order_edges : st.second_order_edges)++;
    auto bin = static_cast<std::size_t>(std::ceil(info.weight * 10.0)) ;
    bin = std::clamp<std::size_t>(bin, 1, 10) - 1;
    ++st.weight_histogram[bin];
  }
  return st;
}

/// TSV: kind, item_i, item_j, frequency, weight, order (i < j by dense index).
/// Items are written as dense indices, or as catalog ids when `ids` is given.
inline void write_graph_tsv(std::ostream& out, const RelationGraph& g, bool header = true,
                            const std::vector<std::string>* ids = nullptr) {
  if (header) out << "kind\titem_i\titem_j\tfrequency\tweight\torder\n";
  for (const auto& [k, e] : g.edges()) {
    out << to_string(g.kind()) << '\t';
    if (ids) out << (*ids)[k.a] << '\t' << (*ids)[k.b];
    else out << k.a << '\t' << k.b;
    out << '\t' << e.frequency << '\t' << format_double(e.weight) << '\t' << e.order << '\n';
  }
}

inline std::string graph_tsv(const RelationGraph& g) {
  std::ostringstream s;
  write_graph_tsv(s, g);
  return s.str();
}

inline std::uint64_t graph_hash(const RelationGraph& g) { return fnv1a64(graph_tsv(g)); }

/// The pair of graphs the model consumes.
struct RelationGraphs {
  RelationGraph substitutable;
  RelationGraph complementary;  // first-order plus inferred edges
};

inline RelationGraphs build_relation_graphs(const std::vector<FusedSession>& sessions,
                                            std::size_t num_items) {
  RelationGraphs g;
  g.substitutable = build_substitutable(sessions, num_items);
  g.complementary =
      augment_second_order(build_complementary_first_order(sessions, num_items), g.substitutable);
  return g;
}

}  // namespace scrm
