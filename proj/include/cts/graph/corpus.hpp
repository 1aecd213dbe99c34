#pragma once

#include <map>
#include <string>
#include <vector>

#include "cts/graph/tree.hpp"

namespace cts::graph {

/// Which user texts the simulator draws from.
enum class CorpusSplit {
  Train,
  Test,
  All,
  Prototype,  // answers: the edge prototype only; FAQ: all questions
};

CorpusSplit corpus_split_from_string(const std::string& name);
std::string to_string(CorpusSplit split);

struct Paraphrases {
  std::vector<std::string> train;
  std::vector<std::string> test;

  bool operator==(const Paraphrases&) const = default;
};

/// User utterances: answer paraphrases keyed by edge id and FAQ questions
/// keyed by Information node id.
class UtteranceCorpus {
 public:
  std::map<std::string, Paraphrases> answers;
  std::map<std::string, Paraphrases> faq;

  /// Answer texts for an edge under `split`.
  std::vector<std::string> answer_texts(const AnswerEdge& edge, CorpusSplit split) const;
  std::vector<std::string> faq_texts(const Node& node, CorpusSplit split) const;

  /// Corpus built from the tree alone: FAQ questions become training
  /// questions, no answer paraphrases.
  static UtteranceCorpus from_tree(const DialogTree& tree);

  bool operator==(const UtteranceCorpus&) const = default;
};

std::string serialize_corpus(const UtteranceCorpus& corpus);
UtteranceCorpus parse_corpus(const std::string& document);
UtteranceCorpus load_corpus(const std::string& path);

}  // namespace cts::graph
