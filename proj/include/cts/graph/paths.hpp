#pragma once

#include <cstddef>
#include <vector>

#include "cts/common/rng.hpp"
#include "cts/graph/tree.hpp"

namespace cts::graph {

/// One hop of a path: leave `node` along its answer edge `edge`.
struct PathStep {
  std::size_t node = 0;
  std::size_t edge = 0;

  bool operator==(const PathStep&) const = default;
};

using Path = std::vector<PathStep>;

/// Breadth-first shortest path from `from` to `goal`. At Logic nodes whose
/// variable is present in `constraints` only the edge chosen by the logic is
/// followed; otherwise every edge is allowed. Ties resolve to the lowest edge
/// indices. Throws Unreachable.
Path shortest_constrained_path(const DialogTree& tree, std::size_t from, std::size_t goal,
                               const Beliefstate& constraints);

/// All shortest constraint-consistent paths (may be many in dense graphs).
std::vector<Path> all_shortest_paths(const DialogTree& tree, std::size_t from, std::size_t goal,
                                     const Beliefstate& constraints);

/// One shortest path drawn uniformly among all shortest paths.
Path sample_shortest_path(const DialogTree& tree, std::size_t from, std::size_t goal,
                          const Beliefstate& constraints, Rng& rng);

/// Node sequence visited by a path including its final target.
std::vector<std::size_t> path_nodes(const DialogTree& tree, const Path& path);

}  // namespace cts::graph
