#pragma once

#include <memory>
#include <string>

#include "cts/env/environment.hpp"
#include "cts/graph/synth.hpp"
#include "cts/graph/tree_io.hpp"

namespace cts::test {

inline std::string fixture(const std::string& name) { return std::string(CTS_FIXTURE_DIR) + "/" + name; }

inline graph::DialogTree load_fixture(const std::string& name) { return graph::load_tree(fixture(name)); }

inline env::World synth_world(int nodes, std::uint64_t seed, int dim = 64) {
  auto [tree, corpus] = graph::synthesize_tree({.node_count = nodes}, seed);
  env::World w{std::make_shared<graph::DialogTree>(std::move(tree)),
               std::make_shared<graph::UtteranceCorpus>(std::move(corpus)), nullptr};
  w.encoder = env::memoize_world(std::make_shared<text::HashedNgramEncoder>(dim), *w.tree, *w.corpus);
  return w;
}

inline env::World fixture_world(const std::string& name, int dim = 32) {
  auto tree = std::make_shared<graph::DialogTree>(load_fixture(name));
  auto corpus = std::make_shared<graph::UtteranceCorpus>(graph::UtteranceCorpus::from_tree(*tree));
  return {tree, corpus, std::make_shared<text::HashedNgramEncoder>(dim)};
}

}  // namespace cts::test
