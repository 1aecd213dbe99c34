#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace cts::graph {

enum class NodeKind { Start, Dialog, Variable, Information, Logic };
inline constexpr std::size_t kNodeKindCount = 5;

enum class ValueType { Boolean, Number, Category };

/// A beliefstate value. Numbers are always stored in the variable's base unit.
using Value = std::variant<bool, double, std::string>;

/// Filled variables, keyed by variable name.
using Beliefstate = std::map<std::string, Value>;

enum class CompareOp { Eq, Neq, Lt, Lte, Gt, Gte };

struct LogicCondition {
  std::string variable;
  CompareOp op = CompareOp::Eq;
  Value literal;       // base units for numbers
  std::string source;  // condition text as written in the tree file

  bool operator==(const LogicCondition&) const = default;
};

struct AnswerEdge {
  std::string id;
  std::string text;  // prototypical answer
  std::string target;
  std::optional<LogicCondition> condition;  // Logic nodes only; absent = default branch
  std::size_t target_index = 0;             // resolved on load

  bool operator==(const AnswerEdge&) const = default;
};

struct VariableSpec {
  std::string name;
  ValueType type = ValueType::Number;
  std::map<std::string, double> units;  // unit word -> multiplier to base unit
  std::vector<std::string> categories;  // Category variables only

  bool operator==(const VariableSpec&) const = default;
};

struct Node {
  std::string id;
  NodeKind kind = NodeKind::Dialog;
  std::string text;
  std::vector<AnswerEdge> answers;
  std::vector<std::string> faq;  // Information nodes only
  std::optional<VariableSpec> variable;

  bool operator==(const Node&) const = default;
};

enum class ActionKind { Ask, Skip };

/// One entry of E(v): ASK(v) or SKIP along answer edge `edge`.
struct Action {
  ActionKind kind = ActionKind::Ask;
  std::size_t node = 0;
  std::size_t edge = 0;    // Skip only
  std::size_t target = 0;  // Skip: edge target; Ask: the node itself

  bool operator==(const Action&) const = default;
};

/// A validated, immutable dialog graph. Use `parse_tree` or `DialogTree::build`.
class DialogTree {
 public:
  /// Validates `nodes` and derives indices, depth and action width.
  /// Throws ValidationError naming the offending node or edge.
  static DialogTree build(std::vector<Node> nodes, std::string start_id);

  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& node(std::size_t index) const { return nodes_.at(index); }
  std::size_t size() const { return nodes_.size(); }

  std::size_t start() const { return start_; }
  const std::string& start_id() const { return nodes_[start_].id; }

  /// Longest BFS distance from Start, at least 1.
  int max_depth() const { return max_depth_; }
  /// Maximal out-degree + 1 (the ASK self-transition).
  int max_actions() const { return max_actions_; }

  std::optional<std::size_t> find(const std::string& id) const;
  /// Throws UnknownNode.
  std::size_t index_of(const std::string& id) const;

  /// Unconstrained BFS distance from Start per node.
  const std::vector<int>& depths() const { return depths_; }

  /// Variable nodes, in file order; this order defines beliefstate bits.
  const std::vector<std::size_t>& variable_nodes() const { return variable_nodes_; }
  const VariableSpec* variable(const std::string& name) const;
  std::optional<std::size_t> variable_slot(const std::string& name) const;

  bool is_leaf(std::size_t index) const { return nodes_[index].answers.empty(); }

  bool operator==(const DialogTree& other) const {
    return nodes_ == other.nodes_ && start_ == other.start_;
  }

 private:
  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t start_ = 0;
  int max_depth_ = 1;
  int max_actions_ = 1;
  std::vector<int> depths_;
  std::vector<std::size_t> variable_nodes_;
};

std::string to_string(NodeKind kind);
NodeKind node_kind_from_string(const std::string& name);
std::string to_string(ValueType type);
std::string to_string(ActionKind kind);

/// ASK(v) first, then one SKIP per answer edge in file order. Throws UnknownNode.
std::vector<Action> actions_at(const DialogTree& tree, std::size_t v);
std::vector<Action> actions_at(const DialogTree& tree, const std::string& id);

}  // namespace cts::graph
