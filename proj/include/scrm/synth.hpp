#pragma once

// Synthetic multi-behavior corpus with planted relations.
//
// Items are split into contiguous substitute clusters; complement pairs link
// items of different clusters. Each session is a seeded walk:
//
//   browse   1-4 clicks on distinct consecutive items of one cluster
//   purchase the last clicked item (p_repeat) or another item of the cluster
//   then, with p_complement and if the purchased item has a planted
//   complement, click or purchase that complement; a click continues browsing
//   in the complement's cluster, a purchase (or no complement) ends the walk.
//
// After every step a uniformly random event is inserted with noise_rate. Walks
// are cut at session_len_range.hi and redrawn when shorter than lo.

#include "scrm/config.hpp"
#include "scrm/session_ingest.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace scrm {

struct SyntheticCorpus {
  std::vector<BehaviorEvent> events;
  std::vector<std::size_t> cluster_of;
  std::vector<std::pair<std::size_t, std::size_t>> substitutes;   // i < j
  std::vector<std::pair<std::size_t, std::size_t>> complements;   // i < j
  std::vector<char> noise;                                        // per event
};

inline std::string synth_item_id(std::size_t k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "i%04zu", k);
  return buf;
}

inline std::string synth_session_id(std::size_t s) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "s%05zu", s);
  return buf;
}

inline SyntheticCorpus generate_synthetic(const SynthConfig& cfg, std::uint64_t seed) {
  const std::size_t n = cfg.n_items;
  const std::size_t nc = cfg.n_sub_clusters;
  SyntheticCorpus out;
  out.cluster_of.resize(n);
  std::vector<std::vector<std::size_t>> members(nc);
  for (std::size_t k = 0; k < n; ++k) {
    out.cluster_of[k] = k * nc / n;
    members[out.cluster_of[k]].push_back(k);
  }
  for (const auto& m : members)
    for (std::size_t a = 0; a < m.size(); ++a)
      for (std::size_t b = a + 1; b < m.size(); ++b) out.substitutes.emplace_back(m[a], m[b]);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto pick = [&](std::size_t count) {
    return std::uniform_int_distribution<std::size_t>(0, count - 1)(rng);
  };

  std::vector<std::vector<std::size_t>> comp_of(n);
  {
    std::set<std::pair<std::size_t, std::size_t>> chosen;
    std::size_t possible = 0;
    for (std::size_t c = 0; c < nc; ++c) possible += members[c].size() * (n - members[c].size());
    const std::size_t target = std::min(cfg.n_comp_pairs, possible / 2);
    while (chosen.size() < target) {
      std::size_t a = pick(n), b = pick(n);
      if (out.cluster_of[a] == out.cluster_of[b]) continue;
      if (a > b) std::swap(a, b);
      if (chosen.emplace(a, b).second) {
        out.complements.emplace_back(a, b);
        comp_of[a].push_back(b);
        comp_of[b].push_back(a);
      }
    }
  }

  const auto& range = cfg.session_len_range;
  std::size_t order = 0;
  for (std::size_t s = 0; s < cfg.n_sessions; ++s) {
    std::vector<std::pair<std::size_t, Behavior>> walk;
    std::vector<char> noisy;
    do {
      walk.clear();
      noisy.clear();
      const auto emit = [&](std::size_t item, Behavior b) {
        if (walk.size() >= range.hi) return false;
        walk.emplace_back(item, b);
        noisy.push_back(0);
        if (unit(rng) < cfg.noise_rate && walk.size() < range.hi) {
          walk.emplace_back(pick(n), unit(rng) < 0.5 ? Behavior::Click : Behavior::Purchase);
          noisy.push_back(1);
        }
        return true;
      };

      std::size_t cluster = pick(nc);
      std::size_t current = n;  // none
      bool open = true;
      while (open) {
        const auto& m = members[cluster];
        const std::size_t clicks = 1 + pick(4);
        for (std::size_t c = 0; c < clicks && open; ++c) {
          std::size_t next = m[pick(m.size())];
          if (m.size() > 1)
            while (next == current) next = m[pick(m.size())];
          current = next;
          open = emit(current, Behavior::Click);
        }
        if (!open) break;
        std::size_t bought = current;
        if (m.size() > 1 && unit(rng) >= cfg.p_repeat)
          while (bought == current) bought = m[pick(m.size())];
        if (!emit(bought, Behavior::Purchase)) break;
        if (comp_of[bought].empty() || unit(rng) >= cfg.p_complement) break;
        const std::size_t comp = comp_of[bought][pick(comp_of[bought].size())];
        const bool click = unit(rng) < 0.5;
        if (!emit(comp, click ? Behavior::Click : Behavior::Purchase) || !click) break;
        cluster = out.cluster_of[comp];
        current = comp;
      }
    } while (walk.size() < range.lo);

    const std::string sid = synth_session_id(s);
    for (std::size_t t = 0; t < walk.size(); ++t) {
      BehaviorEvent ev;
      ev.session_id = sid;
      ev.item_id = synth_item_id(walk[t].first);
      ev.behavior = walk[t].second;
      ev.timestamp = static_cast<std::int64_t>(s * 1000 + t * 10);
      ev.file_order = order++;
      out.events.push_back(std::move(ev));
      out.noise.push_back(noisy[t]);
    }
  }
  return out;
}

inline void write_synthetic_events(std::ostream& out, const SyntheticCorpus& c) {
  out << "session_id,timestamp,item_id,behavior\n";
  for (const auto& e : c.events)
    out << e.session_id << ',' << e.timestamp << ',' << e.item_id << ',' << to_string(e.behavior) << '\n';
}

/// `item_i<TAB>item_j` per planted pair, preceded by a header line.
inline void write_planted_pairs(std::ostream& out,
                                const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  out << "item_i\titem_j\n";
  for (const auto& [a, b] : pairs) out << synth_item_id(a) << '\t' << synth_item_id(b) << '\n';
}

}  // namespace scrm
