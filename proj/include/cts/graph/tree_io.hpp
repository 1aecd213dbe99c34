#pragma once

#include <string>

#include "cts/graph/tree.hpp"

namespace cts::graph {

/// Parses a tree document (JSON, see docs/tree-format.md). Documents carrying
/// designer-export node type names are mapped by `adapt_designer_export`.
/// Throws ParseError for malformed input and ValidationError for broken
/// invariants.
DialogTree parse_tree(const std::string& document);
DialogTree load_tree(const std::string& path);

/// Canonical JSON form; parse_tree(serialize_tree(t)) == t.
std::string serialize_tree(const DialogTree& tree);
void save_tree(const DialogTree& tree, const std::string& path);

/// Converts a designer export (`nodes[]` of {key, type, data{raw_text, answers,
/// questions, variable}}) into the native layout, returned as a JSON string.
std::string adapt_designer_export(const std::string& document);

/// FNV-1a 64-bit hash of the canonical serialization.
std::uint64_t tree_fingerprint(const DialogTree& tree);

}  // namespace cts::graph
