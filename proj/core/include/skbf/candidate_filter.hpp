#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "skbf/skb.hpp"
#include "skbf/triplet.hpp"

namespace skbf {

/// A constant resolved to graph nodes. Holds one node unless
/// FilterOptions::ground_top_m asks for more.
struct GroundedConstant {
  std::string surface;
  std::vector<NodeId> nodes;  // non-empty
  friend bool operator==(const GroundedConstant&, const GroundedConstant&) = default;
};

using GroundedTerm = std::variant<GroundedConstant, Variable>;

/// Prepared triplet: at most one side is a constant, constants are grounded.
struct GroundedTriplet {
  GroundedTerm head;
  std::string edge_type;
  GroundedTerm tail;
  friend bool operator==(const GroundedTriplet&, const GroundedTriplet&) = default;
};

/// Shorthand for a constant side bound to exactly one node.
[[nodiscard]] GroundedTerm grounded(const NodeId& node, std::string surface = {});

struct AliasMatch {
  NodeId node;
  double score = 0.0;
  friend bool operator==(const AliasMatch&, const AliasMatch&) = default;
};

struct FilterOptions {
  TypeMode mode_out = TypeMode::Relaxed;  // outgoing lookups ignore the edge type
  TypeMode mode_in = TypeMode::Strict;
  std::size_t ground_top_m = 1;
  double alias_threshold = 0.9;
  std::size_t sweep_cap = 1000;
  std::size_t evidence_per_triplet = 25;
};

struct GroundingDecision {
  std::size_t triplet = 0;  // position in the extracted TripletSet
  std::string outcome;  // grounded | no_match | skipped_constant_pair | skipped_self_loop | passed
  std::string surface;
  std::vector<AliasMatch> matches;  // best first, at most 5
  std::vector<NodeId> chosen;
};

struct PropagationStep {
  std::size_t sweep = 0;
  std::size_t triplet = 0;  // position in the grounded list
  std::string variable;
  std::size_t size_before = 0;  // an unconstrained domain counts all candidates of its type
  std::size_t size_after = 0;
  bool unconstrained_before = false;
  bool unconstrained_after = false;
};

struct EvidenceEdge {
  std::size_t triplet = 0;
  NodeId head;
  std::string edge_type;
  NodeId tail;
};

struct FilterTrace {
  std::vector<GroundingDecision> grounding;
  std::vector<PropagationStep> steps;
  std::size_t sweeps = 0;
  std::vector<std::string> deferred_materialized;  // variables materialized at a stalled fixpoint
  std::map<std::string, std::size_t> final_domain_sizes;
  bool short_circuited = false;
  std::vector<EvidenceEdge> evidence;
};

/// Nodes with an alias matching `surface`, best first (ties by NodeId).
/// Exact normalized matches score 1.0, other aliases score their normalized
/// edit similarity and are kept only when >= `threshold`.
[[nodiscard]] std::vector<AliasMatch> match_alias(const SemiStructuredKB& skb,
                                                  std::string_view surface, double threshold = 0.9);

/// Drops constant-constant and self-loop triplets, grounds each remaining
/// constant through match_alias and drops triplets whose constant has no
/// match. Decisions are appended to `trace`. Throws EmptyPreparationError
/// when nothing survives.
[[nodiscard]] std::vector<GroundedTriplet> prepare_triplets(const SemiStructuredKB& skb,
                                                            const TripletSet& triplets,
                                                            FilterTrace& trace,
                                                            const FilterOptions& options = {});

/// Fixpoint propagation of variable domains over the grounded triplets.
///
/// Every variable starts as the (unmaterialized) set of candidates of its
/// type. Each sweep visits the triplets in order:
///   constant -> variable  : tail &= union of outgoing neighbors of the constant
///   variable -> constant  : head &= union of incoming neighbors of the constant
///   variable -> variable  : head &= union of incoming neighbors of the tail domain,
///                           then tail &= union of outgoing neighbors of the head domain
/// until a sweep changes nothing. Variable pairs that are both still
/// unconstrained are deferred; if the fixpoint stalls on them they are
/// materialized once and propagation resumes.
///
/// Returns the target's final domain (possibly empty). Throws
/// UnconstrainedTargetError if no triplet constrains the target and
/// PropagationLimitError if the sweep cap is exceeded.
[[nodiscard]] NodeSet substitute(const SemiStructuredKB& skb,
                                 const std::vector<GroundedTriplet>& triplets,
                                 const Variable& target, FilterTrace& trace,
                                 const FilterOptions& options = {});

}  // namespace skbf
