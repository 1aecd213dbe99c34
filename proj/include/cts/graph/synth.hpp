#pragma once

#include <cstdint>
#include <utility>

#include "cts/graph/corpus.hpp"
#include "cts/graph/tree.hpp"

namespace cts::graph {

struct SynthParams {
  int node_count = 25;
  int max_branching = 4;
  int depth_target = 6;
  int faq_per_info = 4;
  int paraphrases_per_answer = 4;
  /// Tokens an Information node's text shares with each of its FAQ questions'
  /// base question.
  int info_text_overlap = 1;
  /// Fraction of paraphrases / questions assigned to the train split.
  double train_fraction = 0.6;
};

/// Generates a random valid tree plus paraphrase corpus, deterministically
/// from `seed`. Trees of at least 7 nodes contain every node kind.
/// Throws InvalidParams.
std::pair<DialogTree, UtteranceCorpus> synthesize_tree(const SynthParams& params,
                                                       std::uint64_t seed);

/// Fraction of `text`'s whitespace tokens that occur in `reference`.
double token_overlap(const std::string& text, const std::string& reference);

}  // namespace cts::graph
