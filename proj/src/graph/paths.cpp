#include "cts/graph/paths.hpp"

#include <algorithm>
#include <deque>
#include <limits>

#include "cts/common/error.hpp"
#include "cts/graph/logic.hpp"

namespace cts::graph {

namespace {

/// Edge indices of `v` that a constrained walk may follow.
std::vector<std::size_t> allowed_edges(const DialogTree& tree, std::size_t v,
                                       const Beliefstate& constraints) {
  const auto& node = tree.node(v);
  std::vector<std::size_t> edges;
  bool constrained = false;
  if (node.kind == NodeKind::Logic) {
    for (const auto& edge : node.answers)
      if (edge.condition && constraints.count(edge.condition->variable)) constrained = true;
  }
  if (constrained) {
    edges.push_back(select_logic_edge_lenient(node, constraints));
  } else {
    for (std::size_t e = 0; e < node.answers.size(); ++e) edges.push_back(e);
  }
  return edges;
}

std::vector<int> distances(const DialogTree& tree, std::size_t from, const Beliefstate& constraints) {
  std::vector<int> dist(tree.size(), -1);
  std::deque<std::size_t> queue{from};
  dist[from] = 0;
  while (!queue.empty()) {
    const auto v = queue.front();
    queue.pop_front();
    for (const auto e : allowed_edges(tree, v, constraints)) {
      const auto t = tree.node(v).answers[e].target_index;
      if (dist[t] < 0) {
        dist[t] = dist[v] + 1;
        queue.push_back(t);
      }
    }
  }
  return dist;
}

void check_indices(const DialogTree& tree, std::size_t from, std::size_t goal) {
  if (from >= tree.size() || goal >= tree.size()) throw UnknownNode("path endpoint out of range");
}

/// Number of shortest continuations from each node to `goal`.
std::vector<double> continuation_counts(const DialogTree& tree, const std::vector<int>& dist,
                                        std::size_t goal, const Beliefstate& constraints) {
  std::vector<std::size_t> order;
  for (std::size_t v = 0; v < tree.size(); ++v)
    if (dist[v] >= 0 && dist[v] <= dist[goal]) order.push_back(v);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return dist[a] > dist[b]; });
  std::vector<double> count(tree.size(), 0.0);
  count[goal] = 1.0;
  for (const auto v : order) {
    if (v == goal) continue;
    for (const auto e : allowed_edges(tree, v, constraints)) {
      const auto t = tree.node(v).answers[e].target_index;
      if (dist[t] == dist[v] + 1) count[v] += count[t];
    }
  }
  return count;
}

}  // namespace

Path shortest_constrained_path(const DialogTree& tree, std::size_t from, std::size_t goal,
                               const Beliefstate& constraints) {
  check_indices(tree, from, goal);
  if (from == goal) return {};
  std::vector<std::optional<PathStep>> parent(tree.size());
  std::vector<bool> seen(tree.size(), false);
  std::deque<std::size_t> queue{from};
  seen[from] = true;
  while (!queue.empty()) {
    const auto v = queue.front();
    queue.pop_front();
    for (const auto e : allowed_edges(tree, v, constraints)) {
      const auto t = tree.node(v).answers[e].target_index;
      if (seen[t]) continue;
      seen[t] = true;
      parent[t] = PathStep{v, e};
      if (t == goal) {
        Path path;
        for (auto cur = goal; cur != from; cur = parent[cur]->node) path.push_back(*parent[cur]);
        std::reverse(path.begin(), path.end());
        return path;
      }
      queue.push_back(t);
    }
  }
  throw Unreachable("node '" + tree.node(goal).id + "' is unreachable from '" +
                    tree.node(from).id + "' under the given constraints");
}

std::vector<Path> all_shortest_paths(const DialogTree& tree, std::size_t from, std::size_t goal,
                                     const Beliefstate& constraints) {
  check_indices(tree, from, goal);
  if (from == goal) return {Path{}};
  const auto dist = distances(tree, from, constraints);
  if (dist[goal] < 0)
    throw Unreachable("node '" + tree.node(goal).id + "' is unreachable under the given constraints");
  const auto count = continuation_counts(tree, dist, goal, constraints);
  std::vector<Path> out;
  Path current;
  auto walk = [&](auto&& self, std::size_t v) -> void {
    if (v == goal) {
      out.push_back(current);
      return;
    }
    for (const auto e : allowed_edges(tree, v, constraints)) {
      const auto t = tree.node(v).answers[e].target_index;
      if (dist[t] != dist[v] + 1 || count[t] == 0.0) continue;
      current.push_back(PathStep{v, e});
      self(self, t);
      current.pop_back();
    }
  };
  walk(walk, from);
  return out;
}

Path sample_shortest_path(const DialogTree& tree, std::size_t from, std::size_t goal,
                          const Beliefstate& constraints, Rng& rng) {
  check_indices(tree, from, goal);
  if (from == goal) return {};
  const auto dist = distances(tree, from, constraints);
  if (dist[goal] < 0)
    throw Unreachable("node '" + tree.node(goal).id + "' is unreachable under the given constraints");
  const auto count = continuation_counts(tree, dist, goal, constraints);
  Path path;
  for (auto v = from; v != goal;) {
    std::vector<std::pair<std::size_t, double>> options;
    for (const auto e : allowed_edges(tree, v, constraints)) {
      const auto t = tree.node(v).answers[e].target_index;
      if (dist[t] == dist[v] + 1 && count[t] > 0.0) options.emplace_back(e, count[t]);
    }
    double total = 0.0;
    for (const auto& [e, c] : options) total += c;
    double r = rng.uniform() * total;
    std::size_t chosen = options.back().first;
    for (const auto& [e, c] : options) {
      if (r < c) {
        chosen = e;
        break;
      }
      r -= c;
    }
    path.push_back(PathStep{v, chosen});
    v = tree.node(v).answers[chosen].target_index;
  }
  return path;
}

std::vector<std::size_t> path_nodes(const DialogTree& tree, const Path& path) {
  std::vector<std::size_t> nodes;
  for (const auto& step : path) nodes.push_back(step.node);
  if (!path.empty()) nodes.push_back(tree.node(path.back().node).answers[path.back().edge].target_index);
  return nodes;
}

}  // namespace cts::graph
