#include "cts/graph/tree.hpp"

#include <algorithm>
#include <deque>
#include <unordered_set>

#include "cts/common/error.hpp"
#include "cts/graph/logic.hpp"

namespace cts::graph {

namespace {

std::vector<int> bfs_depths(const std::vector<Node>& nodes, std::size_t from) {
  std::vector<int> depth(nodes.size(), -1);
  std::deque<std::size_t> queue{from};
  depth[from] = 0;
  while (!queue.empty()) {
    const std::size_t v = queue.front();
    queue.pop_front();
    for (const auto& edge : nodes[v].answers) {
      if (depth[edge.target_index] < 0) {
        depth[edge.target_index] = depth[v] + 1;
        queue.push_back(edge.target_index);
      }
    }
  }
  return depth;
}

void check_node_shape(const Node& node) {
  const auto where = "node '" + node.id + "'";
  switch (node.kind) {
    case NodeKind::Dialog:
    case NodeKind::Variable:
      if (node.text.empty()) throw ValidationError(where + ": question text is empty");
      break;
    case NodeKind::Logic:
      if (!node.text.empty()) throw ValidationError(where + ": logic nodes carry no text");
      break;
    case NodeKind::Information:
      if (node.answers.size() > 1)
        throw ValidationError(where + ": information nodes have at most one successor");
      break;
    case NodeKind::Start:
      break;
  }
  if (node.kind != NodeKind::Information && !node.faq.empty())
    throw ValidationError(where + ": only information nodes carry FAQ questions");
  if (node.kind == NodeKind::Variable) {
    if (!node.variable) throw ValidationError(where + ": variable node without variable spec");
    if (node.variable->name.empty()) throw ValidationError(where + ": variable name is empty");
    if (node.variable->type == ValueType::Category && node.variable->categories.empty())
      throw ValidationError(where + ": category variable without values");
  } else if (node.variable) {
    throw ValidationError(where + ": only variable nodes declare variables");
  }
  for (const auto& edge : node.answers) {
    const bool silent_source = node.kind == NodeKind::Information || node.kind == NodeKind::Logic;
    if (edge.text.empty() && !silent_source)
      throw ValidationError("edge '" + edge.id + "' of " + where + ": prototype answer is empty");
    if (edge.condition && node.kind != NodeKind::Logic)
      throw ValidationError("edge '" + edge.id + "' of " + where +
                            ": conditions are only allowed on logic nodes");
  }
  if (node.kind == NodeKind::Logic) {
    const auto defaults = std::count_if(node.answers.begin(), node.answers.end(),
                                        [](const AnswerEdge& e) { return !e.condition; });
    if (defaults != 1)
      throw ValidationError(where + ": logic node needs exactly one default branch, found " +
                            std::to_string(defaults));
  }
}

}  // namespace

DialogTree DialogTree::build(std::vector<Node> nodes, std::string start_id) {
  DialogTree tree;
  if (nodes.empty()) throw ValidationError("tree has no nodes");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id.empty()) throw ValidationError("node #" + std::to_string(i) + " has no id");
    if (!tree.index_.emplace(nodes[i].id, i).second)
      throw ValidationError("duplicate node id '" + nodes[i].id + "'");
  }
  std::size_t start_count = 0;
  for (const auto& node : nodes)
    if (node.kind == NodeKind::Start) ++start_count;
  if (start_count != 1)
    throw ValidationError("tree needs exactly one start node, found " + std::to_string(start_count));
  const auto start_it = tree.index_.find(start_id);
  if (start_it == tree.index_.end())
    throw ValidationError("start node '" + start_id + "' does not exist");
  if (nodes[start_it->second].kind != NodeKind::Start)
    throw ValidationError("start node '" + start_id + "' is not of kind start");
  tree.start_ = start_it->second;

  std::unordered_set<std::string> edge_ids;
  for (auto& node : nodes) {
    for (auto& edge : node.answers) {
      if (edge.id.empty()) throw ValidationError("edge without id on node '" + node.id + "'");
      if (!edge_ids.insert(edge.id).second)
        throw ValidationError("duplicate edge id '" + edge.id + "'");
      const auto target = tree.index_.find(edge.target);
      if (target == tree.index_.end())
        throw ValidationError("edge '" + edge.id + "' of node '" + node.id +
                              "' targets unknown node '" + edge.target + "'");
      edge.target_index = target->second;
    }
    check_node_shape(node);
  }

  std::map<std::string, std::size_t> declared;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].kind != NodeKind::Variable) continue;
    if (!declared.emplace(nodes[i].variable->name, i).second)
      throw ValidationError("variable '" + nodes[i].variable->name + "' declared twice");
    tree.variable_nodes_.push_back(i);
  }

  // Conditions are typed against their variable, which must be declared by a
  // Variable node that can reach the Logic node.
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    auto& node = nodes[i];
    if (node.kind != NodeKind::Logic) continue;
    for (auto& edge : node.answers) {
      if (!edge.condition) continue;
      const std::string name = condition_variable(edge.condition->source);
      const auto decl = declared.find(name);
      if (decl == declared.end())
        throw ValidationError("edge '" + edge.id + "': condition uses undeclared variable '" +
                              name + "'");
      const auto reach = bfs_depths(nodes, decl->second);
      if (reach[i] < 0)
        throw ValidationError("edge '" + edge.id + "': variable '" + name +
                              "' is not set upstream of logic node '" + node.id + "'");
      try {
        edge.condition = parse_condition(edge.condition->source, *nodes[decl->second].variable);
      } catch (const Error& e) {
        throw ValidationError("edge '" + edge.id + "': " + e.what());
      }
    }
  }

  tree.depths_ = bfs_depths(nodes, tree.start_);
  int deepest = 0;
  std::size_t widest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (tree.depths_[i] < 0)
      throw ValidationError("node '" + nodes[i].id + "' is unreachable from start");
    deepest = std::max(deepest, tree.depths_[i]);
    widest = std::max(widest, nodes[i].answers.size());
  }
  tree.max_depth_ = std::max(1, deepest);
  tree.max_actions_ = static_cast<int>(widest) + 1;
  tree.nodes_ = std::move(nodes);
  return tree;
}

std::optional<std::size_t> DialogTree::find(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t DialogTree::index_of(const std::string& id) const {
  const auto found = find(id);
  if (!found) throw UnknownNode("unknown node '" + id + "'");
  return *found;
}

const VariableSpec* DialogTree::variable(const std::string& name) const {
  for (const auto i : variable_nodes_)
    if (nodes_[i].variable->name == name) return &*nodes_[i].variable;
  return nullptr;
}

std::optional<std::size_t> DialogTree::variable_slot(const std::string& name) const {
  for (std::size_t k = 0; k < variable_nodes_.size(); ++k)
    if (nodes_[variable_nodes_[k]].variable->name == name) return k;
  return std::nullopt;
}

std::string to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Start: return "start";
    case NodeKind::Dialog: return "dialog";
    case NodeKind::Variable: return "variable";
    case NodeKind::Information: return "information";
    case NodeKind::Logic: return "logic";
  }
  return "?";
}

NodeKind node_kind_from_string(const std::string& name) {
  if (name == "start") return NodeKind::Start;
  if (name == "dialog") return NodeKind::Dialog;
  if (name == "variable") return NodeKind::Variable;
  if (name == "information" || name == "info") return NodeKind::Information;
  if (name == "logic") return NodeKind::Logic;
  throw ParseError("unknown node kind '" + name + "'");
}

std::string to_string(ValueType type) {
  switch (type) {
    case ValueType::Boolean: return "boolean";
    case ValueType::Number: return "number";
    case ValueType::Category: return "category";
  }
  return "?";
}

std::string to_string(ActionKind kind) { return kind == ActionKind::Ask ? "ask" : "skip"; }

std::vector<Action> actions_at(const DialogTree& tree, std::size_t v) {
  if (v >= tree.size()) throw UnknownNode("unknown node index " + std::to_string(v));
  const auto& node = tree.node(v);
  std::vector<Action> actions;
  actions.reserve(node.answers.size() + 1);
  actions.push_back(Action{ActionKind::Ask, v, 0, v});
  for (std::size_t e = 0; e < node.answers.size(); ++e)
    actions.push_back(Action{ActionKind::Skip, v, e, node.answers[e].target_index});
  return actions;
}

std::vector<Action> actions_at(const DialogTree& tree, const std::string& id) {
  return actions_at(tree, tree.index_of(id));
}

}  // namespace cts::graph
