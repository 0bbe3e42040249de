#include "support/oracles.hpp"

#include <gtest/gtest.h>

using namespace scrm;

namespace {

SynthConfig small_synth(double noise) {
  SynthConfig c;
  c.n_items = 60;
  c.n_sub_clusters = 12;
  c.n_comp_pairs = 20;
  c.n_sessions = 400;
  c.noise_rate = noise;
  return c;
}

std::string events_text(const SyntheticCorpus& c) {
  std::ostringstream out;
  write_synthetic_events(out, c);
  return out.str();
}

std::pair<std::size_t, std::size_t> key(std::size_t a, std::size_t b) { return {std::min(a, b), std::max(a, b)}; }

}  // namespace

TEST(Synth, SameSeedSameCorpus) {
  const auto a = generate_synthetic(small_synth(0.1), 7);
  const auto b = generate_synthetic(small_synth(0.1), 7);
  EXPECT_EQ(events_text(a), events_text(b));
  EXPECT_EQ(a.complements, b.complements);
  EXPECT_NE(events_text(a), events_text(generate_synthetic(small_synth(0.1), 8)));
}

TEST(Synth, PlantedStructure) {
  const auto cfg = small_synth(0.1);
  const auto c = generate_synthetic(cfg, 3);
  EXPECT_EQ(c.complements.size(), cfg.n_comp_pairs);
  EXPECT_EQ(c.substitutes.size(), cfg.n_sub_clusters * 10);  // 12 clusters of 5
  for (auto [a, b] : c.complements) {
    EXPECT_LT(a, b);
    EXPECT_NE(c.cluster_of[a], c.cluster_of[b]);
  }
  for (auto [a, b] : c.substitutes) EXPECT_EQ(c.cluster_of[a], c.cluster_of[b]);
  const auto fused = fuse_sessions(c.events);
  EXPECT_EQ(fused.sessions.size(), cfg.n_sessions);
  for (const auto& s : fused.sessions) {
    EXPECT_GE(s.steps.size(), cfg.session_len_range.lo);
    EXPECT_LE(s.steps.size(), cfg.session_len_range.hi);
  }
}

TEST(Synth, NoiseFreeAdjacentPairsArePlanted) {
  const auto c = generate_synthetic(small_synth(0.0), 11);
  std::set<std::pair<std::size_t, std::size_t>> comp(c.complements.begin(), c.complements.end());
  for (char n : c.noise) EXPECT_EQ(n, 0);
  for (std::size_t e = 0; e + 1 < c.events.size(); ++e) {
    if (c.events[e].session_id != c.events[e + 1].session_id) continue;
    const std::size_t a = std::stoul(c.events[e].item_id.substr(1));
    const std::size_t b = std::stoul(c.events[e + 1].item_id.substr(1));
    const bool sub = c.cluster_of[a] == c.cluster_of[b];
    EXPECT_TRUE(sub || comp.count(key(a, b))) << c.events[e].session_id << " " << a << " " << b;
  }
}

TEST(Synth, NoiseRateIsRespected) {
  const auto c = generate_synthetic(small_synth(0.2), 5);
  const double frac = static_cast<double>(std::count(c.noise.begin(), c.noise.end(), 1)) / static_cast<double>(c.noise.size());
  EXPECT_GT(frac, 0.1);
  EXPECT_LT(frac, 0.25);
}

TEST(Synth, GraphsRecoverCoVisitedPlantedEdges) {
  SynthConfig cfg;
  cfg.noise_rate = 0.0;
  const auto c = generate_synthetic(cfg, 7);
  const auto fused = fuse_sessions(c.events);
  const auto g = build_relation_graphs(fused.sessions, fused.catalog.size());
  std::set<std::pair<std::size_t, std::size_t>> comp(c.complements.begin(), c.complements.end());
  std::set<std::pair<std::size_t, std::size_t>> sub_visited, comp_visited;
  for (const auto& s : fused.sessions)
    for (std::size_t t = 0; t + 1 < s.steps.size(); ++t) {
      const std::size_t a = std::stoul(fused.catalog.ids[s.steps[t].item].substr(1));
      const std::size_t b = std::stoul(fused.catalog.ids[s.steps[t + 1].item].substr(1));
      if (a == b) continue;
      if (c.cluster_of[a] == c.cluster_of[b]) sub_visited.insert(key(a, b));
      if (comp.count(key(a, b))) comp_visited.insert(key(a, b));
    }
  const auto idx = [&](std::size_t k) { return fused.catalog.index.at(synth_item_id(k)); };
  std::size_t sub_hit = 0, comp_hit = 0;
  for (auto [a, b] : sub_visited) sub_hit += g.substitutable.has_edge(idx(a), idx(b));
  for (auto [a, b] : comp_visited) {
    const auto* e = g.complementary.find(idx(a), idx(b));
    comp_hit += e != nullptr && e->order == 1;
  }
  ASSERT_FALSE(sub_visited.empty());
  ASSERT_FALSE(comp_visited.empty());
  EXPECT_GE(static_cast<double>(sub_hit), 0.95 * static_cast<double>(sub_visited.size()));
  EXPECT_GE(static_cast<double>(comp_hit), 0.95 * static_cast<double>(comp_visited.size()));
}
