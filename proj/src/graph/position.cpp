#include "cts/graph/position.hpp"

#include <deque>

#include "cts/common/error.hpp"

namespace cts::graph {

int position_bits_per_level(const DialogTree& tree) {
  int bits = 0;
  while ((1 << bits) < tree.max_actions()) ++bits;
  return bits;
}

std::size_t position_width(const DialogTree& tree) {
  return static_cast<std::size_t>(tree.max_depth()) *
         static_cast<std::size_t>(position_bits_per_level(tree));
}

std::vector<std::vector<float>> all_position_encodings(const DialogTree& tree) {
  const int bits = position_bits_per_level(tree);
  const std::size_t width = position_width(tree);
  std::vector<std::vector<float>> codes(tree.size());
  std::vector<int> level(tree.size(), -1);
  std::deque<std::size_t> queue{tree.start()};
  codes[tree.start()].assign(width, 0.0f);
  level[tree.start()] = 0;
  while (!queue.empty()) {
    const auto v = queue.front();
    queue.pop_front();
    const auto& answers = tree.node(v).answers;
    for (std::size_t e = 0; e < answers.size(); ++e) {
      const auto t = answers[e].target_index;
      if (level[t] >= 0) continue;
      level[t] = level[v] + 1;
      codes[t] = codes[v];
      const auto action_index = e + 1;
      const std::size_t offset = static_cast<std::size_t>(level[v]) * bits;
      for (int b = 0; b < bits; ++b)
        codes[t][offset + b] = ((action_index >> (bits - 1 - b)) & 1U) ? 1.0f : 0.0f;
      queue.push_back(t);
    }
  }
  return codes;
}

std::vector<float> node_position_encoding(const DialogTree& tree, std::size_t v) {
  if (v >= tree.size()) throw UnknownNode("unknown node index " + std::to_string(v));
  return all_position_encodings(tree)[v];
}

}  // namespace cts::graph
