#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "skbf/skb.hpp"

namespace skbf {

/// A specific named entity, as written by the LLM.
struct Constant {
  std::string surface;
  friend bool operator==(const Constant&, const Constant&) = default;
};

/// An unknown entity of a declared node type.
struct Variable {
  std::string name;
  std::string var_type;
  friend bool operator==(const Variable&, const Variable&) = default;
};

using Term = std::variant<Constant, Variable>;

struct Triplet {
  Term head;
  std::string edge_type;
  Term tail;
  friend bool operator==(const Triplet&, const Triplet&) = default;
};

/// Triplets in emission order plus the variable that denotes the answer.
/// A valid set is non-empty and its target occurs in at least one triplet.
struct TripletSet {
  std::vector<Triplet> triplets;
  Variable target;
  friend bool operator==(const TripletSet&, const TripletSet&) = default;
};

inline constexpr std::string_view kTripletGrammarVersion = "triplet-grammar v1";

/// Something the parser skipped or repaired, kept for the answer trace.
struct ParseNote {
  std::size_t line = 0;  // 1-based
  std::string text;
  std::string message;
};

[[nodiscard]] bool is_variable(const Term& t) noexcept;
[[nodiscard]] bool is_constant(const Term& t) noexcept;

/// Renders one term in grammar form: `?name:type` or a quoted string.
[[nodiscard]] std::string format_term(const Term& t);
[[nodiscard]] std::string format_triplet(const Triplet& t);
/// Renders the full set, one triplet per line, then `TARGET ?name`.
[[nodiscard]] std::string to_grammar(const TripletSet& set);

/// System message used for triplet extraction requests.
[[nodiscard]] std::string_view extraction_system_prompt() noexcept;

/// Suffix appended to the user prompt when the first reply was unparsable.
[[nodiscard]] std::string_view extraction_retry_suffix() noexcept;

/// User prompt asking the LLM to formalize `query` as triplets over the
/// schema's vocabularies. Throws std::invalid_argument for an empty query or
/// a schema without node types.
[[nodiscard]] std::string build_extraction_prompt(std::string_view query, const Schema& schema);

/// Parses an LLM reply written in the triplet grammar and validates it
/// against `schema`.
///
/// Lines that are not triplets or the TARGET line are ignored. An edge type
/// missing from the schema is replaced by the closest declared type when
/// their normalized similarity is at least kEdgeRepairThreshold; otherwise the
/// triplet is dropped. Skips and repairs are appended to `notes` if given.
///
/// Throws ExtractionFormatError when no triplet line parses, when the TARGET
/// line is missing or names a variable absent from the kept triplets, when a
/// variable's node type is not declared, or when one variable name is used
/// with two different types.
[[nodiscard]] TripletSet parse_triplet_response(std::string_view raw, const Schema& schema,
                                                std::vector<ParseNote>* notes = nullptr);

inline constexpr double kEdgeRepairThreshold = 0.8;

}  // namespace skbf
