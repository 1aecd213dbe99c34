#pragma once

#include <cstddef>
#include <vector>

#include "cts/graph/tree.hpp"

namespace cts::graph {

/// Bits per tree level in the position encoding: ceil(log2(max_actions)).
int position_bits_per_level(const DialogTree& tree);

/// Width of the position encoding: max_depth * bits per level.
std::size_t position_width(const DialogTree& tree);

/// Binary position of `v`: along the shortest path from Start (ties to the
/// lowest edge indices), each level holds the action index of the SKIP taken
/// (edge index + 1, MSB first); unused levels are zero. Start encodes as all
/// zeros. Throws UnknownNode.
std::vector<float> node_position_encoding(const DialogTree& tree, std::size_t v);

/// Encodings of every node, computed with one BFS.
std::vector<std::vector<float>> all_position_encodings(const DialogTree& tree);

}  // namespace cts::graph
