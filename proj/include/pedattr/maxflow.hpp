#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <vector>

namespace pedattr {

/// s-t max-flow on integer capacities using Boykov-Kolmogorov search trees
/// (two trees grown from the terminals, augment, adopt orphans).
class MaxFlowGraph {
 public:
  using Capacity = std::int64_t;

  explicit MaxFlowGraph(std::size_t nodes);

  std::size_t node_count() const { return nodes_.size(); }

  /// Adds capacity source->node and node->sink. Accumulates across calls.
  void add_terminal(std::size_t node, Capacity from_source, Capacity to_sink);

  /// Adds arcs u->v with `cap` and v->u with `rev_cap`.
  void add_edge(std::size_t u, std::size_t v, Capacity cap, Capacity rev_cap);

  /// Runs to completion and returns the max-flow value.
  Capacity solve();

  /// After solve(): true when the node is reachable from the source in the
  /// residual graph.
  bool source_side(std::size_t node) const { return source_side_.at(node) != 0; }

 private:
  static constexpr int kNone = -1;
  static constexpr int kTerminal = -2;
  static constexpr int kOrphan = -3;

  struct Node {
    int first = -1;       // first outgoing arc
    int parent = kNone;   // arc to parent, or kTerminal / kOrphan / kNone
    int next_active = -1;
    bool active = false;
    bool sink_tree = false;
    std::int64_t ts = 0;
    std::int64_t dist = 0;
    Capacity tr_cap = 0;  // > 0: residual from source; < 0: residual to sink
  };

  struct Arc {
    int head;
    int next;
    Capacity r_cap;
  };

  static int sister(int a) { return a ^ 1; }

  void set_active(int i);
  int next_active();
  void augment(int middle);
  void process_source_orphan(int i);
  void process_sink_orphan(int i);
  void compute_cut();

  std::vector<Node> nodes_;
  std::vector<Arc> arcs_;
  Capacity flow_ = 0;
  std::int64_t time_ = 0;
  int queue_first_ = -1;
  int queue_last_ = -1;
  std::deque<int> orphans_;
  std::vector<char> source_side_;
};

}  // namespace pedattr
