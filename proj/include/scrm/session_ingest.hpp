#pragma once

// Multi-behavior event log ingestion: CSV parsing, session fusion, support
// filtering, prefix expansion and chronological splitting.

#include "scrm/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace scrm {

enum class Behavior : std::uint8_t { Click, Purchase };

inline std::string_view to_string(Behavior b) {
  return b == Behavior::Click ? "click" : "purchase";
}

struct BehaviorEvent {
  std::string session_id;
  std::string item_id;
  Behavior behavior = Behavior::Click;
  std::int64_t timestamp = 0;
  std::size_t file_order = 0;

  bool operator==(const BehaviorEvent&) const = default;
};

using ItemIndex = std::uint32_t;

/// Dense item indexing over the items that survive ingestion.
struct Catalog {
  std::vector<std::string> ids;           // index -> id
  std::unordered_map<std::string, ItemIndex> index;  // id -> index
  std::vector<std::size_t> counts;        // interactions per item

  std::size_t size() const { return ids.size(); }

  ItemIndex intern(const std::string& id) {
    auto [it, inserted] = index.emplace(id, static_cast<ItemIndex>(ids.size()));
    if (inserted) {
      ids.push_back(id);
      counts.push_back(0);
    }
    return it->second;
  }
};

struct Step {
  ItemIndex item = 0;
  Behavior behavior = Behavior::Click;
  std::int64_t timestamp = 0;

  bool operator==(const Step&) const = default;
};

struct FusedSession {
  std::string id;
  std::vector<Step> steps;
  std::size_t first_order = 0;  // file position of the session's first event

  std::size_t length() const { return steps.size(); }
  std::int64_t end_time() const { return steps.empty() ? 0 : steps.back().timestamp; }
};

struct FusedCorpus {
  std::vector<FusedSession> sessions;
  Catalog catalog;
};

struct LabeledPrefix {
  std::vector<ItemIndex> items;
  std::vector<Behavior> behaviors;
  ItemIndex target = 0;

  bool operator==(const LabeledPrefix&) const = default;
};

struct DatasetSplit {
  std::vector<FusedSession> train_sessions, valid_sessions, test_sessions;
  std::vector<LabeledPrefix> train, valid, test;
};

namespace detail {

inline std::string_view trim_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

}  // namespace detail

/// Parses `session_id,timestamp,item_id,behavior` lines. A first line whose
/// first field is `session_id` is a header. Blank lines are ignored.
/// Aborts with MalformedLine or UnknownBehavior on the first bad line.
inline std::vector<BehaviorEvent> parse_events(std::istream& in) {
  std::vector<BehaviorEvent> events;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = detail::trim_cr(raw);
    if (line.empty()) continue;
    const auto fields = detail::split_fields(line, ',');
    if (line_no == 1 && fields[0] == "session_id") continue;
    if (fields.size() != 4) {
      throw Error(ErrorKind::MalformedLine,
                  "line " + std::to_string(line_no) + ": expected 4 fields, got " +
                      std::to_string(fields.size()),
                  line_no);
    }
    std::int64_t ts = 0;
    const auto tsf = fields[1];
    const auto [ptr, ec] = std::from_chars(tsf.data(), tsf.data() + tsf.size(), ts);
    if (ec != std::errc{} || ptr != tsf.data() + tsf.size() || ts < 0 || tsf.empty()) {
      throw Error(ErrorKind::MalformedLine,
                  "line " + std::to_string(line_no) + ": bad timestamp '" +
                      std::string(tsf) + "'",
                  line_no);
    }
    if (fields[0].empty() || fields[2].empty()) {
      throw Error(ErrorKind::MalformedLine,
                  "line " + std::to_string(line_no) + ": empty session or item id",
                  line_no);
    }
    Behavior behavior;
    if (detail::iequals(fields[3], "click")) {
      behavior = Behavior::Click;
    } else if (detail::iequals(fields[3], "purchase")) {
      behavior = Behavior::Purchase;
    } else {
      throw Error(ErrorKind::UnknownBehavior,
                  "line " + std::to_string(line_no) + ": '" + std::string(fields[3]) + "'",
                  line_no);
    }
    events.push_back(BehaviorEvent{std::string(fields[0]), std::string(fields[2]), behavior,
                                   ts, events.size()});
  }
  return events;
}

inline std::vector<BehaviorEvent> parse_events(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_events(in);
}

/// Groups events by session (in order of first appearance) and sorts each
/// session by (timestamp, file_order). Items are indexed in file order.
inline FusedCorpus fuse_sessions(const std::vector<BehaviorEvent>& events) {
  FusedCorpus corpus;
  std::unordered_map<std::string, std::size_t> session_slot;
  std::vector<std::vector<const BehaviorEvent*>> grouped;
  for (const auto& ev : events) {
    const ItemIndex item = corpus.catalog.intern(ev.item_id);
    ++corpus.catalog.counts[item];
    auto [it, inserted] = session_slot.emplace(ev.session_id, grouped.size());
    if (inserted) {
      grouped.emplace_back();
      corpus.sessions.push_back(FusedSession{ev.session_id, {}, ev.file_order});
    }
    grouped[it->second].push_back(&ev);
  }
  for (std::size_t s = 0; s < grouped.size(); ++s) {
    auto& evs = grouped[s];
    std::stable_sort(evs.begin(), evs.end(), [](const BehaviorEvent* a, const BehaviorEvent* b) {
      if (a->timestamp != b->timestamp) return a->timestamp < b->timestamp;
      return a->file_order < b->file_order;
    });
    auto& steps = corpus.sessions[s].steps;
    steps.reserve(evs.size());
    for (const auto* ev : evs) {
      steps.push_back(Step{corpus.catalog.index.at(ev->item_id), ev->behavior, ev->timestamp});
    }
  }
  return corpus;
}

struct FilterOptions {
  std::size_t min_item_support = 5;
  std::size_t min_session_len = 2;
  std::size_t passes = 1;
};

/// Drops steps on items with fewer than `min_item_support` interactions, then
/// sessions shorter than `min_session_len`, `passes` times. The returned
/// catalog covers survivors only, keeping their relative index order.
inline FusedCorpus filter_dataset(const FusedCorpus& input, const FilterOptions& opt = {}) {
  FusedCorpus cur = input;
  for (std::size_t pass = 0; pass < std::max<std::size_t>(opt.passes, 1); ++pass) {
    std::vector<std::size_t> counts(cur.catalog.size(), 0);
    for (const auto& s : cur.sessions)
      for (const auto& st : s.steps) ++counts[st.item];

    std::vector<FusedSession> kept;
    for (const auto& s : cur.sessions) {
      FusedSession f{s.id, {}, s.first_order};
      for (const auto& st : s.steps)
        if (counts[st.item] >= opt.min_item_support) f.steps.push_back(st);
      if (f.steps.size() >= opt.min_session_len) kept.push_back(std::move(f));
    }

    std::vector<bool> used(cur.catalog.size(), false);
    for (const auto& s : kept)
      for (const auto& st : s.steps) used[st.item] = true;
    Catalog cat;
    std::vector<ItemIndex> remap(cur.catalog.size(), 0);
    for (std::size_t i = 0; i < cur.catalog.size(); ++i) {
      if (used[i]) remap[i] = cat.intern(cur.catalog.ids[i]);
    }
    for (auto& s : kept)
      for (auto& st : s.steps) {
        st.item = remap[st.item];
        ++cat.counts[st.item];
      }
    const bool changed = kept.size() != cur.sessions.size() || cat.size() != cur.catalog.size();
    cur = FusedCorpus{std::move(kept), std::move(cat)};
    if (!changed) break;
  }
  if (cur.sessions.empty()) {
    throw Error(ErrorKind::EmptyDataset, "no session survives filtering");
  }
  return cur;
}

/// A session of length l yields l-1 (input, next item) pairs.
inline std::vector<LabeledPrefix> expand_prefixes(const FusedSession& session) {
  std::vector<LabeledPrefix> out;
  if (session.steps.size() < 2) return out;
  out.reserve(session.steps.size() - 1);
  for (std::size_t len = 2; len <= session.steps.size(); ++len) {
    LabeledPrefix p;
    p.items.reserve(len - 1);
    for (std::size_t k = 0; k + 1 < len; ++k) {
      p.items.push_back(session.steps[k].item);
      p.behaviors.push_back(session.steps[k].behavior);
    }
    p.target = session.steps[len - 1].item;
    out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<LabeledPrefix> expand_prefixes(const std::vector<FusedSession>& sessions) {
  std::vector<LabeledPrefix> out;
  for (const auto& s : sessions) {
    auto p = expand_prefixes(s);
    out.insert(out.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
  }
  return out;
}

/// Orders sessions by (end timestamp, first appearance); the newest `n_test`
/// form the test split, the `n_valid` before them validation.
inline DatasetSplit split_chronological(const std::vector<FusedSession>& sessions,
                                        std::size_t n_valid, std::size_t n_test) {
  if (n_valid + n_test >= sessions.size()) {
    throw Error(ErrorKind::SplitTooLarge,
                "n_valid + n_test = " + std::to_string(n_valid + n_test) +
                    " must be below the session count " + std::to_string(sessions.size()));
  }
  std::vector<std::size_t> order(sessions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ea = sessions[a].end_time(), eb = sessions[b].end_time();
    if (ea != eb) return ea < eb;
    return sessions[a].first_order < sessions[b].first_order;
  });
  DatasetSplit split;
  const std::size_t n_train = sessions.size() - n_valid - n_test;
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto& s = sessions[order[r]];
    if (r < n_train) split.train_sessions.push_back(s);
    else if (r < n_train + n_valid) split.valid_sessions.push_back(s);
    else split.test_sessions.push_back(s);
  }
  split.train = expand_prefixes(split.train_sessions);
  split.valid = expand_prefixes(split.valid_sessions);
  split.test = expand_prefixes(split.test_sessions);
  return split;
}

/// `session_id<TAB>item:behavior item:behavior ...`, one session per line.
inline void write_sessions_dump(std::ostream& out, const FusedCorpus& corpus) {
  for (const auto& s : corpus.sessions) {
    out << s.id << '\t';
    for (std::size_t k = 0; k < s.steps.size(); ++k) {
      if (k) out << ' ';
      out << corpus.catalog.ids[s.steps[k].item] << ':' << to_string(s.steps[k].behavior);
    }
    out << '\n';
  }
}

/// `split<TAB>session_id`, sessions listed in chronological order per split.
inline void write_split_manifest(std::ostream& out, const DatasetSplit& split) {
  const auto emit = [&](std::string_view name, const std::vector<FusedSession>& ss) {
    for (const auto& s : ss) out << name << '\t' << s.id << '\n';
  };
  emit("train", split.train_sessions);
  emit("valid", split.valid_sessions);
  emit("test", split.test_sessions);
}

/// Inverse of parse_events + fuse_sessions: writes each session's steps as
/// CSV event lines, session by session.
inline void write_events(std::ostream& out, const FusedCorpus& corpus) {
  out << "session_id,timestamp,item_id,behavior\n";
  for (const auto& s : corpus.sessions)
    for (const auto& st : s.steps)
      out << s.id << ',' << st.timestamp << ',' << corpus.catalog.ids[st.item] << ','
          << to_string(st.behavior) << '\n';
}

}  // namespace scrm
