#include "cts/graph/synth.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <sstream>

#include "cts/common/error.hpp"
#include "cts/common/rng.hpp"
#include "cts/graph/logic.hpp"

namespace cts::graph {

namespace {

using Tokens = std::vector<std::string>;

std::string join(const Tokens& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

Tokens split_tokens(const std::string& text) {
  Tokens out;
  std::istringstream is(text);
  for (std::string t; is >> t;) out.push_back(t);
  return out;
}

/// Draws pronounceable, never repeated pseudo-words.
class WordSource {
 public:
  explicit WordSource(Rng& rng) : rng_(rng) {}

  std::string fresh() {
    static constexpr std::string_view consonants = "bdfgklmnprstvz";
    static constexpr std::string_view vowels = "aeiou";
    for (;;) {
      const int syllables = 2 + static_cast<int>(rng_.index(2));
      std::string w;
      for (int s = 0; s < syllables; ++s) {
        w += consonants[rng_.index(consonants.size())];
        w += vowels[rng_.index(vowels.size())];
      }
      if (used_.insert(w).second) return w;
    }
  }

  Tokens fresh(int n) {
    Tokens out;
    for (int i = 0; i < n; ++i) out.push_back(fresh());
    return out;
  }

 private:
  Rng& rng_;
  std::set<std::string> used_;
};

/// Keeps ceil(keep_fraction * |base|) base tokens in order and fills the
/// remaining slots with fresh words.
std::string paraphrase(const Tokens& base, double keep_fraction, WordSource& words, Rng& rng) {
  const std::size_t keep = std::min(
      base.size(), static_cast<std::size_t>(std::ceil(keep_fraction * static_cast<double>(base.size()))));
  std::vector<std::size_t> order(base.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  std::vector<bool> kept(base.size(), false);
  for (std::size_t i = 0; i < keep; ++i) kept[order[i]] = true;
  Tokens out;
  for (std::size_t i = 0; i < base.size(); ++i) out.push_back(kept[i] ? base[i] : words.fresh());
  return join(out);
}

Paraphrases split(std::vector<std::string> items, double train_fraction) {
  Paraphrases p;
  if (items.empty()) return p;
  std::size_t n_train = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(items.size()))));
  if (items.size() >= 2) n_train = std::min(n_train, items.size() - 1);
  p.train.assign(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(n_train));
  p.test.assign(items.begin() + static_cast<std::ptrdiff_t>(n_train), items.end());
  return p;
}

enum class Shape { Leaf, Chain, Dialog, Variable };

struct Slot {
  std::size_t node;
  int depth;
  std::optional<Shape> forced;
};

class Builder {
 public:
  Builder(const SynthParams& params, std::uint64_t seed)
      : params_(params), rng_(seed), words_(rng_), question_words_(words_.fresh(3)) {}

  std::pair<DialogTree, UtteranceCorpus> run() {
    Node start;
    start.id = "start";
    start.kind = NodeKind::Start;
    start.text = join(words_.fresh(6));
    nodes_.push_back(std::move(start));

    // Hold back the nodes needed for the forced Dialog -> Variable -> Logic
    // chain so that every node kind appears.
    if (params_.node_count >= 7) reserved_ = 5;
    const int cap = std::max(1, std::min(params_.max_branching, remaining()));
    const int branches = static_cast<int>(rng_.between(std::min(2, cap), cap));
    add_answer_children(0, branches, 0, /*force_first_dialog=*/true);

    while (!queue_.empty()) {
      const Slot slot = queue_.front();
      queue_.pop_front();
      expand(slot);
    }

    for (auto& node : nodes_) finish_texts(node);
    auto tree = DialogTree::build(nodes_, "start");
    return {std::move(tree), std::move(corpus_)};
  }

 private:
  int created() const { return static_cast<int>(nodes_.size()); }
  int remaining() const { return params_.node_count - created() - reserved_; }

  std::size_t new_node(NodeKind kind) {
    Node n;
    n.id = "n" + std::to_string(nodes_.size());
    n.kind = kind;
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
  }

  std::string next_edge_id() { return "e" + std::to_string(++edge_counter_); }

  void add_answer_children(std::size_t parent, int count, int depth, bool force_first_dialog) {
    for (int i = 0; i < count; ++i) {
      const auto child = new_node(NodeKind::Information);
      AnswerEdge edge;
      edge.id = next_edge_id();
      edge.target = nodes_[child].id;
      const Tokens proto = words_.fresh(3);
      edge.text = join(proto);
      std::vector<std::string> paras;
      for (int k = 0; k < params_.paraphrases_per_answer; ++k) paras.push_back(paraphrase(proto, 0.6, words_, rng_));
      corpus_.answers[edge.id] = split(std::move(paras), params_.train_fraction);
      nodes_[parent].answers.push_back(std::move(edge));
      std::optional<Shape> forced;
      if (i == 0 && force_first_dialog) forced = Shape::Dialog;
      queue_.push_back(Slot{child, depth + 1, forced});
    }
  }

  Shape choose(const Slot& slot) {
    // Release the part of the reservation this slot was holding.
    if (slot.forced && reserved_ > 0) reserved_ = *slot.forced == Shape::Dialog ? 3 : 0;
    const int left = remaining();
    const bool must_expand = queue_.empty() && left > 0;
    if (left == 0) return Shape::Leaf;
    if (slot.forced) {
      if (*slot.forced == Shape::Dialog && left >= 2) return Shape::Dialog;
      if (*slot.forced == Shape::Variable && left >= 3) return Shape::Variable;
    }
    const bool depth_ok1 = slot.depth + 1 <= params_.depth_target;
    const bool depth_ok2 = slot.depth + 2 <= params_.depth_target;
    if (!depth_ok1 && !must_expand) return Shape::Leaf;
    std::vector<std::pair<Shape, double>> options;
    if (!must_expand) options.emplace_back(Shape::Leaf, 0.35);
    options.emplace_back(Shape::Chain, 0.10);
    if (left >= 2) options.emplace_back(Shape::Dialog, 0.40);
    if (left >= 3 && (depth_ok2 || must_expand)) options.emplace_back(Shape::Variable, 0.15);
    double total = 0;
    for (const auto& [s, w] : options) total += w;
    double r = rng_.uniform() * total;
    for (const auto& [s, w] : options) {
      if (r < w) return s;
      r -= w;
    }
    return options.back().first;
  }

  void expand(const Slot& slot) {
    const Shape shape = choose(slot);
    auto& node = nodes_[slot.node];
    switch (shape) {
      case Shape::Leaf:
        node.kind = NodeKind::Information;
        break;
      case Shape::Chain: {
        node.kind = NodeKind::Information;
        const auto child = new_node(NodeKind::Information);
        AnswerEdge edge;
        edge.id = next_edge_id();
        edge.target = nodes_[child].id;
        nodes_[slot.node].answers.push_back(std::move(edge));
        queue_.push_back(Slot{child, slot.depth + 1, std::nullopt});
        break;
      }
      case Shape::Dialog: {
        node.kind = NodeKind::Dialog;
        node.text = join(words_.fresh(6));
        const int branches = static_cast<int>(rng_.between(2, std::min(params_.max_branching, remaining())));
        const bool force_variable = !variable_forced_;
        variable_forced_ = true;
        const std::size_t first_child = nodes_.size();
        add_answer_children(slot.node, branches, slot.depth, false);
        if (force_variable) {
          for (auto& q : queue_)
            if (q.node == first_child) q.forced = Shape::Variable;
        }
        break;
      }
      case Shape::Variable:
        make_variable(slot);
        break;
    }
  }

  void make_variable(const Slot& slot) {
    const int which = variable_counter_++ % 3;
    VariableSpec spec;
    spec.name = "var" + std::to_string(variable_counter_);
    std::string condition;
    std::string example;
    if (which == 0) {
      spec.type = ValueType::Number;
      spec.units = {{"seconds", 1.0}, {"minutes", 60.0}, {"hours", 3600.0}, {"days", 86400.0}, {"weeks", 604800.0}};
      const auto weeks = rng_.between(2, 6);
      condition = spec.name + " < " + std::to_string(weeks) + " weeks";
      example = std::to_string(rng_.between(1, 20)) + " days";
    } else if (which == 1) {
      spec.type = ValueType::Boolean;
      condition = spec.name + " == true";
      example = "yes";
    } else {
      spec.type = ValueType::Category;
      spec.categories = words_.fresh(3);
      condition = spec.name + " == " + spec.categories[0];
      example = spec.categories[rng_.index(3)];
    }
    auto& var_node = nodes_[slot.node];
    var_node.kind = NodeKind::Variable;
    Tokens text = words_.fresh(5);
    if (spec.type == ValueType::Number) {
      text.push_back("days");
      text.push_back("weeks");
    }
    var_node.text = join(text);
    var_node.variable = spec;

    const auto logic = new_node(NodeKind::Logic);
    AnswerEdge to_logic;
    to_logic.id = next_edge_id();
    to_logic.text = example;
    to_logic.target = nodes_[logic].id;
    nodes_[slot.node].answers.push_back(std::move(to_logic));

    for (int branch = 0; branch < 2; ++branch) {
      const auto child = new_node(NodeKind::Information);
      AnswerEdge edge;
      edge.id = next_edge_id();
      edge.target = nodes_[child].id;
      if (branch == 0) {
        edge.condition = LogicCondition{};
        edge.condition->source = condition;
      }
      nodes_[logic].answers.push_back(std::move(edge));
      queue_.push_back(Slot{child, slot.depth + 2, std::nullopt});
    }
  }

  void finish_texts(Node& node) {
    if (node.kind != NodeKind::Information) return;
    const Tokens topic = words_.fresh(6);
    Tokens base{question_words_[rng_.index(question_words_.size())]};
    base.insert(base.end(), topic.begin(), topic.end());

    Tokens text = words_.fresh(7);
    const int overlap = std::clamp(params_.info_text_overlap, 0, static_cast<int>(topic.size()));
    for (int i = 0; i < overlap; ++i) {
      const auto pos = rng_.index(text.size() + 1);
      text.insert(text.begin() + static_cast<std::ptrdiff_t>(pos), topic[static_cast<std::size_t>(i)]);
    }
    node.text = join(text);

    std::vector<std::string> questions;
    for (int k = 0; k < params_.faq_per_info; ++k) questions.push_back(paraphrase(base, 0.7, words_, rng_));
    node.faq = questions;
    if (!questions.empty()) corpus_.faq[node.id] = split(std::move(questions), params_.train_fraction);
  }

  SynthParams params_;
  Rng rng_;
  WordSource words_;
  Tokens question_words_;
  std::vector<Node> nodes_;
  std::deque<Slot> queue_;
  UtteranceCorpus corpus_;
  int edge_counter_ = 0;
  int variable_counter_ = 0;
  bool variable_forced_ = false;
  int reserved_ = 0;
};

}  // namespace

std::pair<DialogTree, UtteranceCorpus> synthesize_tree(const SynthParams& params, std::uint64_t seed) {
  if (params.node_count < 3) throw InvalidParams("node_count must be at least 3");
  if (params.max_branching < 2) throw InvalidParams("max_branching must be at least 2");
  if (params.depth_target < 1) throw InvalidParams("depth_target must be at least 1");
  if (params.faq_per_info < 0 || params.paraphrases_per_answer < 0)
    throw InvalidParams("paraphrase counts must be non-negative");
  if (!(params.train_fraction > 0.0 && params.train_fraction <= 1.0))
    throw InvalidParams("train_fraction must lie in (0, 1]");
  return Builder(params, seed).run();
}

double token_overlap(const std::string& text, const std::string& reference) {
  const auto tokens = split_tokens(text);
  if (tokens.empty()) return 0.0;
  const auto ref = split_tokens(reference);
  const std::set<std::string> ref_set(ref.begin(), ref.end());
  std::size_t shared = 0;
  for (const auto& t : tokens) shared += ref_set.count(t);
  return static_cast<double>(shared) / static_cast<double>(tokens.size());
}

}  // namespace cts::graph
