#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "rfim/errors.hpp"

namespace rfim {

/// s-t flow network with integer capacities and Dinic max-flow. Arcs are kept
/// as xor-paired forward/reverse entries; antiparallel lattice edges are two
/// paired arcs with equal capacity.
class FlowNetwork {
 public:
  FlowNetwork(int nodes, int source, int sink) : n_(nodes), source_(source), sink_(sink) {
    if (source < 0 || sink < 0 || source >= nodes || sink >= nodes || source == sink)
      throw validation_error("FlowNetwork: bad source/sink");
    adj_.resize(nodes);
  }

  int node_count() const { return n_; }
  int source() const { return source_; }
  int sink() const { return sink_; }

  void add_arc(int from, int to, std::int64_t capacity, std::int64_t reverse_capacity = 0) {
    if (capacity < 0 || reverse_capacity < 0)
      throw validation_error("FlowNetwork: negative capacity");
    adj_[from].push_back(int(to_.size()));
    to_.push_back(to);
    cap_.push_back(capacity);
    adj_[to].push_back(int(to_.size()));
    to_.push_back(from);
    cap_.push_back(reverse_capacity);
  }

  /// Dinic with BFS level graphs and current-arc pruning.
  std::int64_t max_flow() {
    std::int64_t total = 0;
    while (bfs_levels()) {
      iter_.assign(n_, 0);
      std::int64_t pushed;
      while ((pushed = augment()) > 0) total += pushed;
    }
    return total;
  }

  /// Nodes reachable from the source in the residual graph; this is the
  /// smallest min-cut source side. Valid after max_flow().
  std::vector<char> source_side_minimal() const {
    std::vector<char> seen(n_, 0);
    std::vector<int> queue{source_};
    seen[source_] = 1;
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const int u = queue[q];
      for (int e : adj_[u])
        if (cap_[e] > 0 && !seen[to_[e]]) {
          seen[to_[e]] = 1;
          queue.push_back(to_[e]);
        }
    }
    return seen;
  }

  /// Complement of the nodes that can still reach the sink; this is the
  /// largest min-cut source side. Valid after max_flow().
  std::vector<char> source_side_maximal() const {
    std::vector<char> reaches(n_, 0);
    std::vector<int> queue{sink_};
    reaches[sink_] = 1;
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const int u = queue[q];
      for (int e : adj_[u])
        if (cap_[e ^ 1] > 0 && !reaches[to_[e]]) {
          reaches[to_[e]] = 1;
          queue.push_back(to_[e]);
        }
    }
    std::vector<char> side(n_, 0);
    for (int v = 0; v < n_; ++v) side[v] = reaches[v] ? 0 : 1;
    return side;
  }

 private:
  bool bfs_levels() {
    level_.assign(n_, -1);
    std::vector<int> queue{source_};
    level_[source_] = 0;
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const int u = queue[q];
      for (int e : adj_[u])
        if (cap_[e] > 0 && level_[to_[e]] < 0) {
          level_[to_[e]] = level_[u] + 1;
          queue.push_back(to_[e]);
        }
    }
    return level_[sink_] >= 0;
  }

  // Iterative blocking-path search; grid paths can be thousands of arcs long,
  // too deep for recursion.
  std::int64_t augment() {
    path_.clear();
    int u = source_;
    while (true) {
      if (u == sink_) {
        std::int64_t bottleneck = std::numeric_limits<std::int64_t>::max();
        for (int e : path_) bottleneck = std::min(bottleneck, cap_[e]);
        for (int e : path_) {
          cap_[e] -= bottleneck;
          cap_[e ^ 1] += bottleneck;
        }
        return bottleneck;
      }
      bool advanced = false;
      for (int& i = iter_[u]; i < int(adj_[u].size()); ++i) {
        const int e = adj_[u][i];
        if (cap_[e] > 0 && level_[to_[e]] == level_[u] + 1) {
          path_.push_back(e);
          u = to_[e];
          advanced = true;
          break;
        }
      }
      if (advanced) continue;
      level_[u] = -1;  // dead end, prune
      if (path_.empty()) return 0;
      u = to_[path_.back() ^ 1];
      path_.pop_back();
    }
  }

  int n_;
  int source_;
  int sink_;
  std::vector<std::vector<int>> adj_;
  std::vector<int> to_;
  std::vector<std::int64_t> cap_;
  std::vector<int> level_;
  std::vector<int> iter_;
  std::vector<int> path_;
};

}  // namespace rfim
