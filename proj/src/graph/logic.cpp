#include "cts/graph/logic.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

#include "cts/common/error.hpp"

namespace cts::graph {

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> words(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-' ||
        static_cast<unsigned char>(c) >= 0x80) {
      cur.push_back(c);
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  // "3 weeks." or "2-" should still yield the bare word.
  for (auto& w : out)
    while (!w.empty() && (w.back() == '.' || w.back() == '-')) w.pop_back();
  std::erase_if(out, [](const std::string& w) { return w.empty(); });
  return out;
}

std::optional<double> to_number(const std::string& token) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return value;
}

std::optional<double> unit_multiplier(const VariableSpec& spec, const std::string& word) {
  const std::string w = lower(word);
  for (const auto& [unit, mult] : spec.units) {
    const std::string u = lower(unit);
    if (w == u || w + "s" == u || w == u + "s" || w + "n" == u || w == u + "n") return mult;
  }
  return std::nullopt;
}

CompareOp op_from_string(const std::string& op) {
  if (op == "==") return CompareOp::Eq;
  if (op == "!=") return CompareOp::Neq;
  if (op == "<") return CompareOp::Lt;
  if (op == "<=") return CompareOp::Lte;
  if (op == ">") return CompareOp::Gt;
  if (op == ">=") return CompareOp::Gte;
  throw ParseError("unknown comparison operator '" + op + "'");
}

struct SplitCondition {
  std::string variable;
  std::string op;
  std::string literal;
};

SplitCondition split_condition(const std::string& text) {
  const std::string s = trim(text);
  std::size_t i = 0;
  while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_')) ++i;
  if (i == 0) throw ParseError("condition '" + text + "' does not start with a variable name");
  SplitCondition out;
  out.variable = s.substr(0, i);
  while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  std::size_t j = i;
  while (j < s.size() && (s[j] == '=' || s[j] == '!' || s[j] == '<' || s[j] == '>')) ++j;
  if (j == i) throw ParseError("condition '" + text + "' has no comparison operator");
  out.op = s.substr(i, j - i);
  out.literal = trim(s.substr(j));
  if (out.literal.empty()) throw ParseError("condition '" + text + "' has no literal");
  return out;
}

template <typename T>
bool compare(CompareOp op, const T& lhs, const T& rhs) {
  switch (op) {
    case CompareOp::Eq: return lhs == rhs;
    case CompareOp::Neq: return lhs != rhs;
    case CompareOp::Lt: return lhs < rhs;
    case CompareOp::Lte: return lhs <= rhs;
    case CompareOp::Gt: return lhs > rhs;
    case CompareOp::Gte: return lhs >= rhs;
  }
  return false;
}

std::string format_number(double v) {
  if (std::isfinite(v) && std::floor(v) == v && std::fabs(v) < 1e15) {
    std::ostringstream os;
    os << static_cast<long long>(v);
    return os.str();
  }
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace

std::string condition_variable(const std::string& text) { return split_condition(text).variable; }

LogicCondition parse_condition(const std::string& text, const VariableSpec& spec) {
  const auto parts = split_condition(text);
  if (parts.variable != spec.name)
    throw ValidationError("condition '" + text + "' is typed against variable '" + spec.name + "'");
  LogicCondition cond;
  cond.variable = parts.variable;
  cond.op = op_from_string(parts.op);
  cond.source = trim(text);
  const bool ordering = cond.op != CompareOp::Eq && cond.op != CompareOp::Neq;

  std::string literal = parts.literal;
  const bool quoted = literal.size() >= 2 && literal.front() == '"' && literal.back() == '"';
  if (quoted) literal = literal.substr(1, literal.size() - 2);

  switch (spec.type) {
    case ValueType::Boolean: {
      const auto l = lower(literal);
      if (quoted || (l != "true" && l != "false"))
        throw ValidationError("condition '" + text + "': boolean literal expected");
      if (ordering) throw ValidationError("condition '" + text + "': booleans support == and != only");
      cond.literal = (l == "true");
      break;
    }
    case ValueType::Number: {
      std::istringstream is(literal);
      std::string number, unit, extra;
      is >> number >> unit >> extra;
      const auto value = to_number(number);
      if (quoted || !value) throw ValidationError("condition '" + text + "': numeric literal expected");
      if (!extra.empty()) throw ParseError("condition '" + text + "': trailing tokens");
      double mult = 1.0;
      if (!unit.empty()) {
        const auto m = unit_multiplier(spec, unit);
        if (!m) throw ValidationError("condition '" + text + "': unknown unit '" + unit + "'");
        mult = *m;
      }
      cond.literal = *value * mult;
      break;
    }
    case ValueType::Category: {
      if (ordering) throw ValidationError("condition '" + text + "': categories support == and != only");
      bool known = false;
      for (const auto& c : spec.categories) known |= (c == literal);
      if (!known) throw ValidationError("condition '" + text + "': unknown category '" + literal + "'");
      cond.literal = literal;
      break;
    }
  }
  return cond;
}

bool condition_holds(const LogicCondition& condition, const Value& value) {
  if (value.index() != condition.literal.index()) return false;
  return std::visit(
      [&](const auto& lhs) {
        using T = std::decay_t<decltype(lhs)>;
        return compare<T>(condition.op, lhs, std::get<T>(condition.literal));
      },
      value);
}

namespace {

std::size_t select_edge(const Node& node, const Beliefstate& beliefstate, bool strict) {
  if (node.kind != NodeKind::Logic)
    throw ValidationError("node '" + node.id + "' is not a logic node");
  std::optional<std::size_t> fallback;
  for (std::size_t e = 0; e < node.answers.size(); ++e) {
    const auto& edge = node.answers[e];
    if (!edge.condition) {
      fallback = e;
      continue;
    }
    const auto it = beliefstate.find(edge.condition->variable);
    if (it == beliefstate.end()) {
      if (strict)
        throw MissingVariable("logic node '" + node.id + "' needs variable '" +
                              edge.condition->variable + "'");
      continue;
    }
    if (condition_holds(*edge.condition, it->second)) return e;
  }
  if (!fallback) throw ValidationError("logic node '" + node.id + "' has no default branch");
  return *fallback;
}

}  // namespace

std::size_t select_logic_edge(const Node& node, const Beliefstate& beliefstate) {
  return select_edge(node, beliefstate, true);
}

std::size_t select_logic_edge_lenient(const Node& node, const Beliefstate& beliefstate) {
  return select_edge(node, beliefstate, false);
}

std::size_t evaluate_logic(const DialogTree& tree, std::size_t v, const Beliefstate& beliefstate) {
  const auto& node = tree.node(v);
  return node.answers[select_logic_edge(node, beliefstate)].target_index;
}

std::optional<Value> parse_value(const VariableSpec& spec, const std::string& utterance) {
  const auto tokens = words(utterance);
  switch (spec.type) {
    case ValueType::Boolean:
      for (const auto& t : tokens) {
        const auto w = lower(t);
        if (w == "yes" || w == "true" || w == "ja" || w == "y") return Value{true};
        if (w == "no" || w == "false" || w == "nein" || w == "n") return Value{false};
      }
      return std::nullopt;
    case ValueType::Number:
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto number = to_number(tokens[i]);
        if (!number) continue;
        double mult = 1.0;
        for (std::size_t j = i + 1; j < tokens.size(); ++j) {
          if (const auto m = unit_multiplier(spec, tokens[j])) {
            mult = *m;
            break;
          }
        }
        return Value{*number * mult};
      }
      return std::nullopt;
    case ValueType::Category:
      for (const auto& t : tokens)
        for (const auto& c : spec.categories)
          if (lower(t) == lower(c)) return Value{c};
      return std::nullopt;
  }
  return std::nullopt;
}

std::string render_value(const VariableSpec& spec, const Value& value, const std::string& unit) {
  switch (spec.type) {
    case ValueType::Boolean: return std::get<bool>(value) ? "yes" : "no";
    case ValueType::Category: return std::get<std::string>(value);
    case ValueType::Number: {
      const double base = std::get<double>(value);
      if (!unit.empty()) {
        const auto it = spec.units.find(unit);
        if (it != spec.units.end()) return format_number(base / it->second) + " " + unit;
      }
      return format_number(base);
    }
  }
  return {};
}

std::string to_string(const Value& value) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
        else if constexpr (std::is_same_v<T, double>) return format_number(v);
        else return v;
      },
      value);
}

}  // namespace cts::graph
