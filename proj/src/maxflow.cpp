#include "pedattr/maxflow.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "pedattr/error.hpp"

namespace pedattr {

namespace {
constexpr std::int64_t kInfiniteDist = std::numeric_limits<std::int64_t>::max();
}

MaxFlowGraph::MaxFlowGraph(std::size_t nodes) : nodes_(nodes) {
  if (nodes > static_cast<std::size_t>(std::numeric_limits<int>::max() / 2)) {
    throw Error("max-flow graph too large");
  }
}

void MaxFlowGraph::add_terminal(std::size_t node, Capacity from_source, Capacity to_sink) {
  if (from_source < 0 || to_sink < 0) throw Error("negative terminal capacity");
  Node& n = nodes_.at(node);
  // Route the common part straight through; it is flow in every cut.
  const Capacity common = std::min(from_source, to_sink);
  flow_ += common;
  n.tr_cap += from_source - to_sink;
}

void MaxFlowGraph::add_edge(std::size_t u, std::size_t v, Capacity cap, Capacity rev_cap) {
  if (cap < 0 || rev_cap < 0) throw Error("negative edge capacity");
  if (u >= nodes_.size() || v >= nodes_.size()) throw Error("edge endpoint out of range");
  if (u == v) return;
  const auto a = static_cast<int>(arcs_.size());
  arcs_.push_back({static_cast<int>(v), nodes_[u].first, cap});
  nodes_[u].first = a;
  arcs_.push_back({static_cast<int>(u), nodes_[v].first, rev_cap});
  nodes_[v].first = a + 1;
}

void MaxFlowGraph::set_active(int i) {
  Node& n = nodes_[i];
  if (n.active) return;
  n.active = true;
  n.next_active = -1;
  if (queue_last_ >= 0) nodes_[queue_last_].next_active = i;
  else queue_first_ = i;
  queue_last_ = i;
}

int MaxFlowGraph::next_active() {
  while (queue_first_ >= 0) {
    const int i = queue_first_;
    queue_first_ = nodes_[i].next_active;
    if (queue_first_ < 0) queue_last_ = -1;
    nodes_[i].active = false;
    nodes_[i].next_active = -1;
    if (nodes_[i].parent != kNone) return i;
  }
  return -1;
}

void MaxFlowGraph::augment(int middle) {
  Capacity bottleneck = arcs_[middle].r_cap;
  int i;
  int a;
  for (i = arcs_[sister(middle)].head;; i = arcs_[a].head) {
    a = nodes_[i].parent;
    if (a == kTerminal) break;
    bottleneck = std::min(bottleneck, arcs_[sister(a)].r_cap);
  }
  bottleneck = std::min(bottleneck, nodes_[i].tr_cap);
  for (i = arcs_[middle].head;; i = arcs_[a].head) {
    a = nodes_[i].parent;
    if (a == kTerminal) break;
    bottleneck = std::min(bottleneck, arcs_[a].r_cap);
  }
  bottleneck = std::min(bottleneck, -nodes_[i].tr_cap);

  arcs_[sister(middle)].r_cap += bottleneck;
  arcs_[middle].r_cap -= bottleneck;
  for (i = arcs_[sister(middle)].head;; i = arcs_[a].head) {
    a = nodes_[i].parent;
    if (a == kTerminal) break;
    arcs_[a].r_cap += bottleneck;
    arcs_[sister(a)].r_cap -= bottleneck;
    if (arcs_[sister(a)].r_cap == 0) {
      nodes_[i].parent = kOrphan;
      orphans_.push_front(i);
    }
  }
  nodes_[i].tr_cap -= bottleneck;
  if (nodes_[i].tr_cap == 0) {
    nodes_[i].parent = kOrphan;
    orphans_.push_front(i);
  }
  for (i = arcs_[middle].head;; i = arcs_[a].head) {
    a = nodes_[i].parent;
    if (a == kTerminal) break;
    arcs_[sister(a)].r_cap += bottleneck;
    arcs_[a].r_cap -= bottleneck;
    if (arcs_[a].r_cap == 0) {
      nodes_[i].parent = kOrphan;
      orphans_.push_front(i);
    }
  }
  nodes_[i].tr_cap += bottleneck;
  if (nodes_[i].tr_cap == 0) {
    nodes_[i].parent = kOrphan;
    orphans_.push_front(i);
  }
  flow_ += bottleneck;
}

void MaxFlowGraph::process_source_orphan(int i) {
  int best_arc = kNone;
  std::int64_t best_dist = kInfiniteDist;
  for (int a0 = nodes_[i].first; a0 >= 0; a0 = arcs_[a0].next) {
    if (arcs_[sister(a0)].r_cap == 0) continue;
    int j = arcs_[a0].head;
    if (nodes_[j].sink_tree || nodes_[j].parent == kNone) continue;
    // walk to the root to see whether j still hangs off the source
    std::int64_t d = 0;
    while (true) {
      if (nodes_[j].ts == time_) {
        d += nodes_[j].dist;
        break;
      }
      const int a = nodes_[j].parent;
      ++d;
      if (a == kTerminal) {
        nodes_[j].ts = time_;
        nodes_[j].dist = 1;
        break;
      }
      if (a == kOrphan) {
        d = kInfiniteDist;
        break;
      }
      j = arcs_[a].head;
    }
    if (d < kInfiniteDist) {
      if (d < best_dist) {
        best_arc = a0;
        best_dist = d;
      }
      for (j = arcs_[a0].head; nodes_[j].ts != time_; j = arcs_[nodes_[j].parent].head) {
        nodes_[j].ts = time_;
        nodes_[j].dist = d--;
      }
    }
  }

  nodes_[i].parent = best_arc;
  if (best_arc != kNone) {
    nodes_[i].ts = time_;
    nodes_[i].dist = best_dist + 1;
    return;
  }
  for (int a0 = nodes_[i].first; a0 >= 0; a0 = arcs_[a0].next) {
    const int j = arcs_[a0].head;
    const int a = nodes_[j].parent;
    if (nodes_[j].sink_tree || a == kNone) continue;
    if (arcs_[sister(a0)].r_cap > 0) set_active(j);
    if (a != kTerminal && a != kOrphan && arcs_[a].head == i) {
      nodes_[j].parent = kOrphan;
      orphans_.push_back(j);
    }
  }
}

void MaxFlowGraph::process_sink_orphan(int i) {
  int best_arc = kNone;
  std::int64_t best_dist = kInfiniteDist;
  for (int a0 = nodes_[i].first; a0 >= 0; a0 = arcs_[a0].next) {
    if (arcs_[a0].r_cap == 0) continue;
    int j = arcs_[a0].head;
    if (!nodes_[j].sink_tree || nodes_[j].parent == kNone) continue;
    std::int64_t d = 0;
    while (true) {
      if (nodes_[j].ts == time_) {
        d += nodes_[j].dist;
        break;
      }
      const int a = nodes_[j].parent;
      ++d;
      if (a == kTerminal) {
        nodes_[j].ts = time_;
        nodes_[j].dist = 1;
        break;
      }
      if (a == kOrphan) {
        d = kInfiniteDist;
        break;
      }
      j = arcs_[a].head;
    }
    if (d < kInfiniteDist) {
      if (d < best_dist) {
        best_arc = a0;
        best_dist = d;
      }
      for (j = arcs_[a0].head; nodes_[j].ts != time_; j = arcs_[nodes_[j].parent].head) {
        nodes_[j].ts = time_;
        nodes_[j].dist = d--;
      }
    }
  }

  nodes_[i].parent = best_arc;
  if (best_arc != kNone) {
    nodes_[i].ts = time_;
    nodes_[i].dist = best_dist + 1;
    return;
  }
  for (int a0 = nodes_[i].first; a0 >= 0; a0 = arcs_[a0].next) {
    const int j = arcs_[a0].head;
    const int a = nodes_[j].parent;
    if (!nodes_[j].sink_tree || a == kNone) continue;
    if (arcs_[a0].r_cap > 0) set_active(j);
    if (a != kTerminal && a != kOrphan && arcs_[a].head == i) {
      nodes_[j].parent = kOrphan;
      orphans_.push_back(j);
    }
  }
}

MaxFlowGraph::Capacity MaxFlowGraph::solve() {
  queue_first_ = queue_last_ = -1;
  orphans_.clear();
  time_ = 0;
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    Node& n = nodes_[k];
    n.active = false;
    n.next_active = -1;
    n.ts = time_;
    if (n.tr_cap > 0) {
      n.sink_tree = false;
      n.parent = kTerminal;
      n.dist = 1;
      set_active(static_cast<int>(k));
    } else if (n.tr_cap < 0) {
      n.sink_tree = true;
      n.parent = kTerminal;
      n.dist = 1;
      set_active(static_cast<int>(k));
    } else {
      n.parent = kNone;
    }
  }

  int current = -1;
  while (true) {
    int i = current;
    if (i >= 0) {
      nodes_[i].active = false;
      if (nodes_[i].parent == kNone) i = -1;
    }
    if (i < 0) {
      i = next_active();
      if (i < 0) break;
    }

    int middle = -1;
    if (!nodes_[i].sink_tree) {
      for (int a = nodes_[i].first; a >= 0; a = arcs_[a].next) {
        if (arcs_[a].r_cap == 0) continue;
        const int j = arcs_[a].head;
        Node& nj = nodes_[j];
        if (nj.parent == kNone) {
          nj.sink_tree = false;
          nj.parent = sister(a);
          nj.ts = nodes_[i].ts;
          nj.dist = nodes_[i].dist + 1;
          set_active(j);
        } else if (nj.sink_tree) {
          middle = a;
          break;
        } else if (nj.ts <= nodes_[i].ts && nj.dist > nodes_[i].dist) {
          nj.parent = sister(a);
          nj.ts = nodes_[i].ts;
          nj.dist = nodes_[i].dist + 1;
        }
      }
    } else {
      for (int a = nodes_[i].first; a >= 0; a = arcs_[a].next) {
        if (arcs_[sister(a)].r_cap == 0) continue;
        const int j = arcs_[a].head;
        Node& nj = nodes_[j];
        if (nj.parent == kNone) {
          nj.sink_tree = true;
          nj.parent = sister(a);
          nj.ts = nodes_[i].ts;
          nj.dist = nodes_[i].dist + 1;
          set_active(j);
        } else if (!nj.sink_tree) {
          middle = sister(a);
          break;
        } else if (nj.ts <= nodes_[i].ts && nj.dist > nodes_[i].dist) {
          nj.parent = sister(a);
          nj.ts = nodes_[i].ts;
          nj.dist = nodes_[i].dist + 1;
        }
      }
    }

    ++time_;
    if (middle >= 0) {
      // keep i as the current node; the flag stops it from being queued twice
      nodes_[i].active = true;
      current = i;
      augment(middle);
      while (!orphans_.empty()) {
        const int o = orphans_.front();
        orphans_.pop_front();
        if (nodes_[o].sink_tree) process_sink_orphan(o);
        else process_source_orphan(o);
      }
    } else {
      current = -1;
    }
  }

  compute_cut();
  return flow_;
}

void MaxFlowGraph::compute_cut() {
  source_side_.assign(nodes_.size(), 0);
  std::vector<int> stack;
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    if (nodes_[k].tr_cap > 0) {
      source_side_[k] = 1;
      stack.push_back(static_cast<int>(k));
    }
  }
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    for (int a = nodes_[i].first; a >= 0; a = arcs_[a].next) {
      const int j = arcs_[a].head;
      if (arcs_[a].r_cap > 0 && !source_side_[j]) {
        source_side_[j] = 1;
        stack.push_back(j);
      }
    }
  }
}

}  // namespace pedattr
