#include "cts/graph/tree_io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "cts/common/error.hpp"
#include "cts/common/hash.hpp"

namespace cts::graph {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ValueType value_type_from_string(const std::string& name) {
  if (name == "boolean" || name == "bool") return ValueType::Boolean;
  if (name == "number") return ValueType::Number;
  if (name == "category") return ValueType::Category;
  throw ParseError("unknown variable type '" + name + "'");
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  return it->get<T>();
}

const json& require(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing field '" + key + "'");
  return *it;
}

Node parse_node(const json& j) {
  if (!j.is_object()) throw ParseError("node entry is not an object");
  Node node;
  node.id = require(j, "id", "node").get<std::string>();
  const std::string where = "node '" + node.id + "'";
  node.kind = node_kind_from_string(require(j, "kind", where).get<std::string>());
  node.text = get_or<std::string>(j, "text", "");
  if (const auto it = j.find("answers"); it != j.end()) {
    if (!it->is_array()) throw ParseError(where + ": 'answers' must be an array");
    for (const auto& a : *it) {
      AnswerEdge edge;
      edge.id = require(a, "id", where + " answer").get<std::string>();
      edge.text = get_or<std::string>(a, "text", "");
      edge.target = require(a, "target", "edge '" + edge.id + "'").get<std::string>();
      const auto cond = get_or<std::string>(a, "condition", "");
      if (!cond.empty() && cond != "else" && cond != "default") {
        edge.condition = LogicCondition{};
        edge.condition->source = cond;
      }
      node.answers.push_back(std::move(edge));
    }
  }
  if (const auto it = j.find("faq"); it != j.end())
    node.faq = it->get<std::vector<std::string>>();
  if (const auto it = j.find("variable"); it != j.end() && !it->is_null()) {
    VariableSpec spec;
    spec.name = require(*it, "name", where + " variable").get<std::string>();
    spec.type = value_type_from_string(get_or<std::string>(*it, "type", "number"));
    if (const auto u = it->find("units"); u != it->end())
      spec.units = u->get<std::map<std::string, double>>();
    if (const auto v = it->find("values"); v != it->end())
      spec.categories = v->get<std::vector<std::string>>();
    node.variable = std::move(spec);
  }
  return node;
}

bool looks_like_designer_export(const json& doc) {
  if (!doc.is_object() || !doc.contains("nodes") || !doc["nodes"].is_array()) return false;
  if (doc["nodes"].empty()) return false;
  const auto& first = doc["nodes"][0];
  return first.is_object() && first.contains("key") && first.contains("type") && !first.contains("kind");
}

}  // namespace

DialogTree parse_tree(const std::string& document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed tree document: ") + e.what());
  }
  if (looks_like_designer_export(doc)) return parse_tree(adapt_designer_export(document));
  try {
    if (!doc.is_object()) throw ParseError("tree document must be an object");
    const auto start = require(doc, "start", "tree").get<std::string>();
    const auto& nodes_json = require(doc, "nodes", "tree");
    if (!nodes_json.is_array()) throw ParseError("'nodes' must be an array");
    std::vector<Node> nodes;
    nodes.reserve(nodes_json.size());
    for (const auto& n : nodes_json) nodes.push_back(parse_node(n));
    return DialogTree::build(std::move(nodes), start);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed tree document: ") + e.what());
  }
}

DialogTree load_tree(const std::string& path) { return parse_tree(read_file(path)); }

std::string serialize_tree(const DialogTree& tree) {
  ordered_json doc;
  doc["format"] = "cts-tree/1";
  doc["start"] = tree.start_id();
  ordered_json nodes = ordered_json::array();
  for (const auto& node : tree.nodes()) {
    ordered_json n;
    n["id"] = node.id;
    n["kind"] = to_string(node.kind);
    n["text"] = node.text;
    ordered_json answers = ordered_json::array();
    for (const auto& edge : node.answers) {
      ordered_json a;
      a["id"] = edge.id;
      a["text"] = edge.text;
      a["target"] = edge.target;
      if (edge.condition) a["condition"] = edge.condition->source;
      answers.push_back(std::move(a));
    }
    n["answers"] = std::move(answers);
    n["faq"] = node.faq;
    if (node.variable) {
      ordered_json v;
      v["name"] = node.variable->name;
      v["type"] = to_string(node.variable->type);
      if (!node.variable->units.empty()) v["units"] = node.variable->units;
      if (!node.variable->categories.empty()) v["values"] = node.variable->categories;
      n["variable"] = std::move(v);
    }
    nodes.push_back(std::move(n));
  }
  doc["nodes"] = std::move(nodes);
  return doc.dump(2) + "\n";
}

void save_tree(const DialogTree& tree, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << serialize_tree(tree);
}

std::string adapt_designer_export(const std::string& document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed designer export: ") + e.what());
  }
  static const std::map<std::string, std::string> kinds = {
      {"startNode", "start"},       {"userResponseNode", "dialog"}, {"userInputNode", "variable"},
      {"infoNode", "information"},  {"logicNode", "logic"},
  };
  ordered_json out;
  ordered_json nodes = ordered_json::array();
  std::string start;
  try {
    for (const auto& src : doc.at("nodes")) {
      ordered_json n;
      const auto key = src.at("key").get<std::string>();
      const auto type = src.at("type").get<std::string>();
      const auto kind = kinds.find(type);
      if (kind == kinds.end()) throw ParseError("node '" + key + "': unknown designer type '" + type + "'");
      if (kind->second == "start") start = key;
      const json data = src.value("data", json::object());
      n["id"] = key;
      n["kind"] = kind->second;
      n["text"] = data.value("raw_text", std::string{});
      ordered_json answers = ordered_json::array();
      for (const auto& a : data.value("answers", json::array())) {
        ordered_json edge;
        edge["id"] = a.at("key").get<std::string>();
        edge["text"] = a.value("raw_text", std::string{});
        edge["target"] = a.at("connected_node").get<std::string>();
        if (a.contains("condition") && a["condition"].is_string()) edge["condition"] = a["condition"];
        answers.push_back(std::move(edge));
      }
      n["answers"] = std::move(answers);
      n["faq"] = data.value("questions", std::vector<std::string>{});
      if (data.contains("variable")) n["variable"] = data["variable"];
      nodes.push_back(std::move(n));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed designer export: ") + e.what());
  }
  if (start.empty()) throw ValidationError("designer export has no startNode");
  out["start"] = start;
  out["nodes"] = std::move(nodes);
  return out.dump();
}

std::uint64_t tree_fingerprint(const DialogTree& tree) { return fnv1a64(serialize_tree(tree)); }

}  // namespace cts::graph
