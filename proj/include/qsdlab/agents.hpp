#pragma once

// Model-free learners over the history-indexed effective MDP.
//
// Histories are encoded as bijective base-(2g) integers: the empty history is
// 1 and pushing (action a, outcome o) maps code -> code*2g + 2a + o. Codes are
// injective across lengths. Guesses are ordinary table entries at level L.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "qsdlab/planner.hpp"
#include "qsdlab/receiver.hpp"

namespace qsdlab {

inline constexpr std::uint64_t kHistoryRoot = 1;

inline std::uint64_t history_push(std::uint64_t code, std::size_t grid_size, std::uint32_t action,
                                  int outcome) {
  return code * (2 * grid_size) + 2 * action + static_cast<std::uint64_t>(outcome);
}

// Dot-joined "<action>:<outcome>" pairs; the empty history is "-".
inline std::string history_to_string(std::uint64_t code, std::size_t grid_size,
                                     std::size_t length) {
  std::vector<std::pair<std::uint32_t, int>> pairs(length);
  for (std::size_t i = length; i-- > 0;) {
    const std::uint64_t sym = code % (2 * grid_size);
    code /= 2 * grid_size;
    pairs[i] = {static_cast<std::uint32_t>(sym / 2), static_cast<int>(sym % 2)};
  }
  if (code != kHistoryRoot) throw std::invalid_argument("history_to_string: bad code");
  if (pairs.empty()) return "-";
  std::string s;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (i) s += '.';
    s += std::to_string(pairs[i].first) + ':' + std::to_string(pairs[i].second);
  }
  return s;
}

inline std::uint64_t history_from_string(const std::string& s, std::size_t grid_size) {
  std::uint64_t code = kHistoryRoot;
  if (s == "-" || s.empty()) return code;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t colon = s.find(':', pos);
    if (colon == std::string::npos) throw std::invalid_argument("bad history string: " + s);
    std::size_t dot = s.find('.', colon);
    if (dot == std::string::npos) dot = s.size();
    const auto action = static_cast<std::uint32_t>(std::stoul(s.substr(pos, colon - pos)));
    const int outcome = std::stoi(s.substr(colon + 1, dot - colon - 1));
    code = history_push(code, grid_size, action, outcome);
    pos = dot == s.size() ? dot : dot + 1;
  }
  return code;
}

// Learning-rate schedule 1/N: diverging sum, square-summable.
inline double learning_rate(std::uint64_t visits) { return 1.0 / static_cast<double>(visits); }

struct QEntry {
  double q = 0.0;     // running Q estimate (init 0)
  double mu = 1.0;    // Beta posterior parameters (flat prior)
  double nu = 1.0;
  std::uint32_t visits = 0;
};

// Tabular estimates for every (history, action) pair, allocated lazily.
// Interior levels offer one action per grid displacement, level L the two guesses.
class QTable {
 public:
  QTable(std::size_t grid_size, std::size_t layers) : grid_size_(grid_size), layers_(layers) {
    if (grid_size == 0 || grid_size > 63)
      throw std::domain_error("QTable: grid size must be in [1,63]");
    if (layers == 0) throw std::domain_error("QTable: layers must be >= 1");
  }

  std::size_t grid_size() const { return grid_size_; }
  std::size_t layers() const { return layers_; }
  std::size_t n_actions(std::size_t level) const { return level == layers_ ? 2 : grid_size_; }

  std::span<QEntry> block(std::uint64_t h, std::size_t level) {
    auto it = offsets_.find(h);
    if (it == offsets_.end()) {
      it = offsets_.emplace(h, entries_.size()).first;
      entries_.resize(entries_.size() + n_actions(level));
      meta_.push_back({h, level});
    }
    return {entries_.data() + it->second, n_actions(level)};
  }

  // nullptr when the block was never touched; callers fall back to init values.
  const QEntry* find_block(std::uint64_t h) const {
    auto it = offsets_.find(h);
    return it == offsets_.end() ? nullptr : entries_.data() + it->second;
  }

  std::size_t size() const { return entries_.size(); }

  struct BlockRef {
    std::uint64_t history;
    std::size_t level;
  };
  const std::vector<BlockRef>& blocks() const { return meta_; }
  std::span<const QEntry> entries_of(const BlockRef& b) const {
    return {entries_.data() + offsets_.at(b.history), n_actions(b.level)};
  }

 private:
  std::size_t grid_size_;
  std::size_t layers_;
  std::unordered_map<std::uint64_t, std::size_t> offsets_;
  std::vector<QEntry> entries_;
  std::vector<BlockRef> meta_;
};

enum class PolicyKind { EpsilonGreedy, ExpGreedy, Ucb, Thompson };
enum class UcbSchedule { Ucb1, Ucb2, Ucb3 };

struct PolicySpec {
  PolicyKind kind = PolicyKind::EpsilonGreedy;
  double epsilon = 0.3;           // fixed epsilon-greedy
  double tau = 200.0;             // exp-greedy decay constant
  double epsilon0 = 0.01;         // exp-greedy floor
  UcbSchedule schedule = UcbSchedule::Ucb1;

  double epsilon_at(std::uint64_t t) const {
    if (kind == PolicyKind::ExpGreedy)
      return std::max(std::exp(-static_cast<double>(t) / tau), epsilon0);
    return epsilon;
  }

  void validate() const {
    if (epsilon < 0.0 || epsilon > 1.0) throw std::domain_error("PolicySpec: epsilon outside [0,1]");
    if (kind == PolicyKind::ExpGreedy && (tau <= 0.0 || epsilon0 <= 0.0 || epsilon0 > 1.0))
      throw std::domain_error("PolicySpec: exp-greedy needs tau > 0 and epsilon0 in (0,1]");
  }
};

namespace detail {
inline std::size_t argmax_q(std::span<const QEntry> block) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < block.size(); ++i)
    if (block[i].q > block[best].q) best = i;
  return best;
}
inline std::size_t argmax_posterior_mean(std::span<const QEntry> block) {
  std::size_t best = 0;
  double bv = block[0].mu / (block[0].mu + block[0].nu);
  for (std::size_t i = 1; i < block.size(); ++i) {
    const double v = block[i].mu / (block[i].mu + block[i].nu);
    if (v > bv) {
      bv = v;
      best = i;
    }
  }
  return best;
}
}  // namespace detail

inline std::size_t select_action_epsilon_greedy(std::mt19937_64& rng, QTable& table,
                                                std::uint64_t h, std::size_t level,
                                                double epsilon_t) {
  if (!(epsilon_t >= 0.0 && epsilon_t <= 1.0))
    throw std::domain_error("select_action_epsilon_greedy: epsilon outside [0,1]");
  auto block = table.block(h, level);
  if (block.empty()) throw std::invalid_argument("select_action_epsilon_greedy: empty action set");
  if (uniform01(rng) < epsilon_t)
    return std::uniform_int_distribution<std::size_t>(0, block.size() - 1)(rng);
  return detail::argmax_q(block);
}

// -log P(t) for the confidence schedules. Ucb3's P(t) exceeds 1 for t > 1;
// its bonus argument is clamped at zero, which damps exploration early.
inline double ucb_log_inverse_confidence(UcbSchedule s, std::uint64_t t, std::uint32_t visits) {
  const double td = static_cast<double>(t);
  switch (s) {
    case UcbSchedule::Ucb1:
      return 4.0 * std::log(td);
    case UcbSchedule::Ucb2: {
      const double lt = std::log(td);
      return std::log(1.0 + td * lt * lt);
    }
    case UcbSchedule::Ucb3:
      return std::max(0.0, -std::log(td) / static_cast<double>(visits));
  }
  return 0.0;
}

inline std::size_t select_action_ucb(QTable& table, std::uint64_t h, std::size_t level,
                                     std::uint64_t t, UcbSchedule schedule) {
  if (t < 1) throw std::invalid_argument("select_action_ucb: t must be >= 1");
  auto block = table.block(h, level);
  if (block.empty()) throw std::invalid_argument("select_action_ucb: empty action set");
  for (std::size_t i = 0; i < block.size(); ++i)
    if (block[i].visits == 0) return i;
  std::size_t best = 0;
  double bv = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < block.size(); ++i) {
    const double bonus = std::sqrt(ucb_log_inverse_confidence(schedule, t, block[i].visits) /
                                   (2.0 * block[i].visits));
    const double v = block[i].q + bonus;
    if (v > bv) {
      bv = v;
      best = i;
    }
  }
  return best;
}

inline double sample_beta(std::mt19937_64& rng, double a, double b) {
  const double x = std::gamma_distribution<double>(a, 1.0)(rng);
  const double y = std::gamma_distribution<double>(b, 1.0)(rng);
  return x / (x + y);
}

inline std::size_t select_action_thompson(std::mt19937_64& rng, QTable& table, std::uint64_t h,
                                          std::size_t level) {
  auto block = table.block(h, level);
  if (block.empty()) throw std::invalid_argument("select_action_thompson: empty action set");
  std::size_t best = 0;
  double bv = -1.0;
  for (std::size_t i = 0; i < block.size(); ++i) {
    const double r = sample_beta(rng, block[i].mu, block[i].nu);
    if (r > bv) {
      bv = r;
      best = i;
    }
  }
  return best;
}

struct EpisodeTrace {
  std::vector<std::uint32_t> action_indices;  // one per layer
  std::vector<std::uint8_t> outcomes;         // one per layer
  std::uint32_t guess = 0;
  int reward = 0;
};

// Watkins update with gamma = 1, lambda = 1/N, applied forward through the
// visited chain; intermediate rewards are zero and the terminal entry
// bootstraps nothing, so it stays the exact empirical success frequency.
inline void q_update_episode(QTable& table, const EpisodeTrace& trace) {
  const std::size_t layers = table.layers();
  if (trace.action_indices.size() != layers || trace.outcomes.size() != layers)
    throw std::invalid_argument("q_update_episode: incomplete trace");
  std::uint64_t h = kHistoryRoot;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::uint64_t next =
        history_push(h, table.grid_size(), trace.action_indices[l], trace.outcomes[l]);
    auto next_block = table.block(next, l + 1);
    double bootstrap = 0.0;
    for (const QEntry& e : next_block) bootstrap = std::max(bootstrap, e.q);
    QEntry& e = table.block(h, l)[trace.action_indices[l]];
    e.visits += 1;
    e.q += learning_rate(e.visits) * (bootstrap - e.q);
    h = next;
  }
  QEntry& g = table.block(h, layers)[trace.guess];
  g.visits += 1;
  g.q += learning_rate(g.visits) * (static_cast<double>(trace.reward) - g.q);
}

// Thompson update: every visited pair is rewarded with the terminal outcome.
inline void ts_update_episode(QTable& table, const EpisodeTrace& trace) {
  const std::size_t layers = table.layers();
  if (trace.action_indices.size() != layers || trace.outcomes.size() != layers)
    throw std::invalid_argument("ts_update_episode: incomplete trace");
  const double r = static_cast<double>(trace.reward);
  std::uint64_t h = kHistoryRoot;
  for (std::size_t l = 0; l <= layers; ++l) {
    const std::uint32_t a = l == layers ? trace.guess : trace.action_indices[l];
    QEntry& e = table.block(h, l)[a];
    e.mu += r;
    e.nu += 1.0 - r;
    e.visits += 1;
    if (l < layers) h = history_push(h, table.grid_size(), a, trace.outcomes[l]);
  }
}

enum class GreedyMode { QValue, PosteriorMean };

// Deterministic policy extracted from the table; unvisited entries keep their
// initialization value and ties go to the lowest index.
inline ActionTree greedy_action_tree(QTable& table, GreedyMode mode,
                                     const std::vector<double>& beta_grid,
                                     const std::vector<double>& thetas) {
  if (beta_grid.size() != table.grid_size() || thetas.size() != table.layers())
    throw std::invalid_argument("greedy_action_tree: grid/theta size mismatch");
  ActionTree tree = ActionTree::make(table.layers());
  struct Walker {
    QTable& table;
    GreedyMode mode;
    const std::vector<double>& beta_grid;
    const std::vector<double>& thetas;
    ActionTree& tree;
    void walk(std::size_t level, std::size_t prefix, std::uint64_t h) {
      auto block = table.block(h, level);
      const std::size_t idx = mode == GreedyMode::QValue ? detail::argmax_q(block)
                                                         : detail::argmax_posterior_mean(block);
      if (level == table.layers()) {
        tree.guesses[prefix] = static_cast<int>(idx);
        return;
      }
      tree.actions[level][prefix] = LayerAction{beta_grid[idx], thetas[level]};
      for (int o = 0; o < 2; ++o)
        walk(level + 1, 2 * prefix + static_cast<std::size_t>(o),
             history_push(h, table.grid_size(), static_cast<std::uint32_t>(idx), o));
    }
  };
  Walker{table, mode, beta_grid, thetas, tree}.walk(0, 0, kHistoryRoot);
  return tree;
}

struct SnapshotRow {
  std::string history;
  std::uint32_t action = 0;
  std::uint32_t visits = 0;
  double q = 0.0;
  double mu = 1.0;
  double nu = 1.0;
};

// Flat dump of every allocated entry, sorted by (level, code, action).
inline std::vector<SnapshotRow> export_snapshot(const QTable& table) {
  std::vector<QTable::BlockRef> refs = table.blocks();
  std::sort(refs.begin(), refs.end(), [](const auto& a, const auto& b) {
    return a.level != b.level ? a.level < b.level : a.history < b.history;
  });
  std::vector<SnapshotRow> rows;
  for (const auto& ref : refs) {
    const auto entries = table.entries_of(ref);
    const std::string hs = history_to_string(ref.history, table.grid_size(), ref.level);
    for (std::size_t a = 0; a < entries.size(); ++a)
      rows.push_back({hs, static_cast<std::uint32_t>(a), entries[a].visits, entries[a].q,
                      entries[a].mu, entries[a].nu});
  }
  return rows;
}

}  // namespace qsdlab
