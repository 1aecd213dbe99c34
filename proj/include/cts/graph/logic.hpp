#pragma once

#include <optional>
#include <string>

#include "cts/graph/tree.hpp"

namespace cts::graph {

/// Parses the comparison DSL: `<variable> <op> <literal> [unit]` with op one of
/// == != < <= > >=. Literals: true/false, numbers (with an optional unit from
/// the variable's unit table), quoted or bare category labels. The literal is
/// typed against `spec`. Throws ParseError / ValidationError.
LogicCondition parse_condition(const std::string& text, const VariableSpec& spec);

/// Variable name referenced by a condition string, without type checking.
std::string condition_variable(const std::string& text);

bool condition_holds(const LogicCondition& condition, const Value& value);

/// Index of the selected answer edge of a Logic node: the first matching
/// conditioned edge in file order, otherwise the default edge.
/// Throws MissingVariable if a condition that must be tested is unfilled.
std::size_t select_logic_edge(const Node& node, const Beliefstate& beliefstate);

/// Same as select_logic_edge, but unfilled variables count as non-matching.
std::size_t select_logic_edge_lenient(const Node& node, const Beliefstate& beliefstate);

/// Target node index chosen by the Logic node `v`.
std::size_t evaluate_logic(const DialogTree& tree, std::size_t v, const Beliefstate& beliefstate);

/// Parses a user utterance into a value of `spec`, e.g. "2916 seconds" or
/// "yes". Returns nullopt if nothing usable is found.
std::optional<Value> parse_value(const VariableSpec& spec, const std::string& utterance);

/// Renders a value as a user would type it; numbers use `unit` if given.
std::string render_value(const VariableSpec& spec, const Value& value,
                         const std::string& unit = {});

std::string to_string(const Value& value);

}  // namespace cts::graph
