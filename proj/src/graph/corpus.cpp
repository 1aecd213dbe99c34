#include "cts/graph/corpus.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "cts/common/error.hpp"

namespace cts::graph {

using ordered_json = nlohmann::ordered_json;

CorpusSplit corpus_split_from_string(const std::string& name) {
  if (name == "train") return CorpusSplit::Train;
  if (name == "test") return CorpusSplit::Test;
  if (name == "all") return CorpusSplit::All;
  if (name == "prototype") return CorpusSplit::Prototype;
  throw ParseError("unknown corpus split '" + name + "'");
}

std::string to_string(CorpusSplit split) {
  switch (split) {
    case CorpusSplit::Train: return "train";
    case CorpusSplit::Test: return "test";
    case CorpusSplit::All: return "all";
    case CorpusSplit::Prototype: return "prototype";
  }
  return "?";
}

namespace {

std::vector<std::string> select(const Paraphrases& p, CorpusSplit split) {
  switch (split) {
    case CorpusSplit::Train: return p.train;
    case CorpusSplit::Test: return p.test;
    default: {
      auto all = p.train;
      all.insert(all.end(), p.test.begin(), p.test.end());
      return all;
    }
  }
}

}  // namespace

std::vector<std::string> UtteranceCorpus::answer_texts(const AnswerEdge& edge, CorpusSplit split) const {
  if (split != CorpusSplit::Prototype) {
    const auto it = answers.find(edge.id);
    if (it != answers.end()) {
      auto texts = select(it->second, split);
      if (!texts.empty()) return texts;
    }
  }
  // Edges without paraphrases answer with their prototype.
  if (edge.text.empty()) return {};
  return {edge.text};
}

std::vector<std::string> UtteranceCorpus::faq_texts(const Node& node, CorpusSplit split) const {
  if (split == CorpusSplit::Prototype || split == CorpusSplit::All) {
    const auto it = faq.find(node.id);
    if (it == faq.end()) return node.faq;
    return select(it->second, CorpusSplit::All);
  }
  const auto it = faq.find(node.id);
  if (it == faq.end()) return split == CorpusSplit::Train ? node.faq : std::vector<std::string>{};
  return select(it->second, split);
}

UtteranceCorpus UtteranceCorpus::from_tree(const DialogTree& tree) {
  UtteranceCorpus corpus;
  for (const auto& node : tree.nodes())
    if (!node.faq.empty()) corpus.faq[node.id].train = node.faq;
  return corpus;
}

std::string serialize_corpus(const UtteranceCorpus& corpus) {
  ordered_json doc;
  auto dump = [](const std::map<std::string, Paraphrases>& m) {
    ordered_json o = ordered_json::object();
    for (const auto& [key, p] : m) o[key] = ordered_json{{"train", p.train}, {"test", p.test}};
    return o;
  };
  doc["format"] = "cts-corpus/1";
  doc["answers"] = dump(corpus.answers);
  doc["faq"] = dump(corpus.faq);
  return doc.dump(2) + "\n";
}

UtteranceCorpus parse_corpus(const std::string& document) {
  UtteranceCorpus corpus;
  try {
    const auto doc = nlohmann::json::parse(document);
    auto load = [](const nlohmann::json& o, std::map<std::string, Paraphrases>& out) {
      for (const auto& [key, value] : o.items()) {
        Paraphrases p;
        p.train = value.value("train", std::vector<std::string>{});
        p.test = value.value("test", std::vector<std::string>{});
        out[key] = std::move(p);
      }
    };
    if (doc.contains("answers")) load(doc.at("answers"), corpus.answers);
    if (doc.contains("faq")) load(doc.at("faq"), corpus.faq);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed corpus document: ") + e.what());
  }
  return corpus;
}

UtteranceCorpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_corpus(ss.str());
}

}  // namespace cts::graph
