#pragma once

#include <cmath>
#include <limits>
#include <ostream>
#include <vector>

#include "conav/common.hpp"

namespace conav {

struct MctsConfig {
  int iterations = 100;
  double exploration = 1.4142135623730951;  ///< k
  double discount = 0.99;                   ///< gamma
  int max_depth = 100;

  void validate() const {
    if (iterations < 1) throw Error(ErrorCode::InvalidConfiguration, "iterations must be >= 1");
    if (!(exploration >= 0.0)) throw Error(ErrorCode::InvalidConfiguration, "exploration must be >= 0");
    if (!(discount >= 0.0 && discount < 1.0)) throw Error(ErrorCode::InvalidConfiguration, "discount must be in [0,1)");
    if (max_depth < 1) throw Error(ErrorCode::InvalidConfiguration, "max_depth must be >= 1");
  }
};

/// Result of simulating one action during expansion.
template <class State>
struct Expansion {
  State state;
  double reward = 0.0;
  double feasibility = 1.0;  ///< delta
  bool stopping = false;
};

struct RolloutResult {
  double value = 0.0;  ///< sum of gamma^t r_t
  int steps = 0;
  int uncertain_moves = 0;
  int failed_moves = 0;
  bool communicated = false;
  bool reached_goal = false;
};

/// Arena-allocated search tree. Node 0 is the root.
template <class State>
class SearchTree {
 public:
  struct Node {
    int parent = -1;
    int action = -1;  ///< incoming action; -1 at the root
    int depth = 0;
    State state;
    double reward = 0.0;       ///< reward of the incoming transition
    double feasibility = 1.0;  ///< delta of the incoming transition
    double value = 0.0;        ///< Q
    int visits = 0;            ///< N
    bool terminal = false;
    std::vector<int> children;
    std::vector<int> untried;  ///< in expansion order
  };

  int add_root(State state, std::vector<int> actions, bool terminal) {
    nodes_.clear();
    Node n;
    n.state = std::move(state);
    n.terminal = terminal;
    if (!terminal) n.untried = std::move(actions);
    nodes_.push_back(std::move(n));
    return 0;
  }

  int add_child(int parent, int action, State state, double reward, double feasibility, bool terminal,
                std::vector<int> actions) {
    Node n;
    n.parent = parent;
    n.action = action;
    n.depth = nodes_.at(static_cast<std::size_t>(parent)).depth + 1;
    n.state = std::move(state);
    n.reward = reward;
    n.feasibility = feasibility;
    n.terminal = terminal;
    if (!terminal) n.untried = std::move(actions);
    nodes_.push_back(std::move(n));
    const int id = static_cast<int>(nodes_.size()) - 1;
    nodes_[static_cast<std::size_t>(parent)].children.push_back(id);
    return id;
  }

  const Node& operator[](int i) const { return nodes_.at(static_cast<std::size_t>(i)); }
  Node& operator[](int i) { return nodes_.at(static_cast<std::size_t>(i)); }
  std::size_t size() const { return nodes_.size(); }

  /// UCT argmax over the children of a fully expanded node; ties go to the
  /// earliest child.
  int select(int node, double exploration) const {
    const Node& v = (*this)[node];
    if (!v.untried.empty() || v.children.empty()) {
      throw Error(ErrorCode::ContractViolation, "select on a node that is not fully expanded");
    }
    const double log_n = std::log(static_cast<double>(v.visits));
    int best = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (const int c : v.children) {
      const Node& child = (*this)[c];
      if (child.visits < 1) throw Error(ErrorCode::ContractViolation, "select with an unvisited child");
      const double n = static_cast<double>(child.visits);
      const double score = child.value / n + exploration * std::sqrt(log_n / n);
      if (score > best_score) {
        best_score = score;
        best = c;
      }
    }
    return best;
  }

  /// Walks leaf to root. Each node's Q accumulates the value of the
  /// transition into it: the leaf gets r + gamma * q, and every ancestor v
  /// gets r(v) + gamma * (delta' * q' + (1 - delta') * Q(v)/N(v)), where
  /// delta' and q' belong to the child just updated and Q(v)/N(v) is taken
  /// before this update (0 when unvisited). The root has no incoming
  /// transition and accumulates the bracketed term alone.
  void backpropagate(int leaf, double q, double discount) {
    Node* node = &(*this)[leaf];
    double sample = node->parent >= 0 ? node->reward + discount * q : q;
    node->value += sample;
    node->visits += 1;
    while (node->parent >= 0) {
      const double delta = node->feasibility;
      Node& v = (*this)[node->parent];
      const double fallback = v.visits > 0 ? v.value / v.visits : 0.0;
      const double inner = delta * sample + (1.0 - delta) * fallback;
      sample = v.parent >= 0 ? v.reward + discount * inner : inner;
      v.value += sample;
      v.visits += 1;
      node = &v;
    }
  }

  /// Incoming action of the most visited root child; ties to the lowest action.
  int best_action() const {
    const Node& root = (*this)[0];
    int best_action = -1, best_visits = -1;
    for (const int c : root.children) {
      const Node& child = (*this)[c];
      if (child.visits > best_visits || (child.visits == best_visits && child.action < best_action)) {
        best_visits = child.visits;
        best_action = child.action;
      }
    }
    return best_action;
  }

 private:
  std::vector<Node> nodes_;
};

template <class State>
struct SearchResult {
  int action = -1;
  SearchTree<State> tree;
};

/// One-expansion-per-iteration IG-MCTS over a domain providing
///   std::vector<int> actions(const State&) const
///   bool terminal(const State&) const
///   Expansion<State> expand(const State&, int action) const
///   RolloutResult rollout(const State&, int depth_budget, double discount, Rng&) const
/// Optional trace: one TSV line per iteration with the iteration, leaf depth,
/// rollout return and the visit counts of the root's children.
template <class Domain, class State>
SearchResult<State> mcts_search(const Domain& domain, State root, const MctsConfig& config, Rng& rng,
                                std::ostream* trace = nullptr) {
  config.validate();
  SearchResult<State> out;
  SearchTree<State>& tree = out.tree;
  const bool root_terminal = domain.terminal(root);
  std::vector<int> root_actions = root_terminal ? std::vector<int>{} : domain.actions(root);
  if (root_actions.empty()) throw Error(ErrorCode::PlanningFailure, "no legal action at the root");
  tree.add_root(std::move(root), std::move(root_actions), false);

  for (int it = 0; it < config.iterations; ++it) {
    int v = 0;
    while (!tree[v].terminal) {
      if (tree[v].untried.empty()) {
        if (tree[v].children.empty()) break;
        v = tree.select(v, config.exploration);
        continue;
      }
      const int a = tree[v].untried.front();
      tree[v].untried.erase(tree[v].untried.begin());
      Expansion<State> e = domain.expand(tree[v].state, a);
      const bool terminal = domain.terminal(e.state) || tree[v].depth + 1 >= config.max_depth;
      std::vector<int> next = terminal ? std::vector<int>{} : domain.actions(e.state);
      const bool leaf = terminal || next.empty();
      v = tree.add_child(v, a, std::move(e.state), e.reward, e.feasibility, leaf, std::move(next));
      break;
    }
    double q = 0.0;
    if (!tree[v].terminal) {
      q = domain.rollout(tree[v].state, config.max_depth - tree[v].depth, config.discount, rng).value;
    }
    tree.backpropagate(v, q, config.discount);
    if (trace != nullptr) {
      *trace << it << '\t' << tree[v].depth << '\t' << q << '\t';
      bool first = true;
      for (const int c : tree[0].children) {
        *trace << (first ? "" : ",") << tree[c].visits;
        first = false;
      }
      *trace << '\n';
    }
  }
  out.action = tree.best_action();
  return out;
}

}  // namespace conav
