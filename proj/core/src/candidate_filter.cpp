#include "skbf/candidate_filter.hpp"

#include <algorithm>
#include <optional>
#include <unordered_map>

#include "skbf/errors.hpp"
#include "skbf/text.hpp"

namespace skbf {

GroundedTerm grounded(const NodeId& node, std::string surface) {
  if (surface.empty()) surface = node.str();
  return GroundedConstant{std::move(surface), {node}};
}

std::vector<AliasMatch> match_alias(const SemiStructuredKB& skb, std::string_view surface,
                                    double threshold) {
  const std::string normalized = text::normalize(surface);
  const std::u32string wanted = text::to_code_points(normalized);

  std::unordered_map<NodeIndex, double> best;
  auto offer = [&](NodeIndex n, double score) {
    auto [it, inserted] = best.emplace(n, score);
    if (!inserted && score > it->second) it->second = score;
  };

  for (NodeIndex n : skb.nodes_with_alias(normalized)) offer(n, 1.0);

  for (const auto& entry : skb.alias_entries()) {
    if (entry.normalized == normalized) continue;
    const std::size_t la = wanted.size();
    const std::size_t lb = entry.code_points.size();
    const std::size_t longest = std::max(la, lb);
    if (longest == 0) continue;
    // similarity <= 1 - |la - lb| / longest, so skip hopeless lengths early.
    const std::size_t diff = la > lb ? la - lb : lb - la;
    if (1.0 - static_cast<double>(diff) / static_cast<double>(longest) < threshold) continue;
    const double score = text::edit_similarity(wanted, entry.code_points);
    if (score < threshold) continue;
    for (NodeIndex n : entry.nodes) offer(n, score);
  }

  std::vector<AliasMatch> out;
  out.reserve(best.size());
  for (const auto& [n, score] : best) out.push_back(AliasMatch{skb.node(n).id, score});
  std::sort(out.begin(), out.end(), [](const AliasMatch& a, const AliasMatch& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.node < b.node;
  });
  return out;
}

std::vector<GroundedTriplet> prepare_triplets(const SemiStructuredKB& skb,
                                              const TripletSet& triplets, FilterTrace& trace,
                                              const FilterOptions& options) {
  const std::size_t top_m = std::max<std::size_t>(1, options.ground_top_m);

  auto ground = [&](std::size_t index, const Constant& c) -> std::optional<GroundedConstant> {
    GroundingDecision decision;
    decision.triplet = index;
    decision.surface = c.surface;
    auto matches = match_alias(skb, c.surface, options.alias_threshold);
    if (matches.empty()) {
      decision.outcome = "no_match";
      trace.grounding.push_back(std::move(decision));
      return std::nullopt;
    }
    GroundedConstant g{c.surface, {}};
    for (std::size_t i = 0; i < matches.size() && i < top_m; ++i)
      g.nodes.push_back(matches[i].node);
    std::sort(g.nodes.begin(), g.nodes.end());
    decision.outcome = "grounded";
    decision.chosen = g.nodes;
    if (matches.size() > 5) matches.erase(matches.begin() + 5, matches.end());
    decision.matches = std::move(matches);
    trace.grounding.push_back(std::move(decision));
    return g;
  };

  std::vector<GroundedTriplet> out;
  for (std::size_t i = 0; i < triplets.triplets.size(); ++i) {
    const Triplet& t = triplets.triplets[i];
    const auto* head_var = std::get_if<Variable>(&t.head);
    const auto* tail_var = std::get_if<Variable>(&t.tail);

    if (!head_var && !tail_var) {
      trace.grounding.push_back(GroundingDecision{i, "skipped_constant_pair", {}, {}, {}});
      continue;
    }
    if (head_var && tail_var) {
      if (head_var->name == tail_var->name) {
        trace.grounding.push_back(GroundingDecision{i, "skipped_self_loop", {}, {}, {}});
        continue;
      }
      trace.grounding.push_back(GroundingDecision{i, "passed", {}, {}, {}});
      out.push_back(GroundedTriplet{*head_var, t.edge_type, *tail_var});
      continue;
    }
    if (!head_var) {
      if (auto g = ground(i, std::get<Constant>(t.head))) {
        out.push_back(GroundedTriplet{std::move(*g), t.edge_type, *tail_var});
      }
    } else {
      if (auto g = ground(i, std::get<Constant>(t.tail))) {
        out.push_back(GroundedTriplet{*head_var, t.edge_type, std::move(*g)});
      }
    }
  }

  if (out.empty()) {
    throw EmptyPreparationError("no triplet survived preparation (" +
                                std::to_string(triplets.triplets.size()) + " extracted)");
  }
  return out;
}

namespace {

/// A variable's candidate set. `unconstrained` stands for every candidate of
/// `type` without materializing them.
struct DomainState {
  std::string name;
  std::optional<LabelIndex> type;
  bool unconstrained = true;
  std::vector<NodeIndex> members;  // sorted; meaningful when !unconstrained

  [[nodiscard]] bool contains(const SemiStructuredKB& skb, NodeIndex n) const {
    if (unconstrained) return type && skb.is_candidate_of_type(n, *type);
    return std::binary_search(members.begin(), members.end(), n);
  }
  [[nodiscard]] std::size_t size(const SemiStructuredKB& skb) const {
    if (!unconstrained) return members.size();
    return type ? skb.candidate_indices(*type).size() : 0;
  }
};

/// One side of a compiled triplet: a variable slot or a fixed node set.
struct Side {
  std::optional<std::size_t> variable;
  std::vector<NodeIndex> constants;  // sorted
};

struct CompiledTriplet {
  Side head;
  std::optional<LabelIndex> edge_type;
  Side tail;
};

Direction reverse(Direction d) {
  return d == Direction::Outgoing ? Direction::Incoming : Direction::Outgoing;
}

class Propagator {
 public:
  Propagator(const SemiStructuredKB& skb, const FilterOptions& options, FilterTrace& trace)
      : skb_(skb), options_(options), trace_(trace) {}

  std::size_t slot(const Variable& v) {
    for (std::size_t i = 0; i < domains_.size(); ++i) {
      if (domains_[i].name == v.name) return i;
    }
    DomainState d;
    d.name = v.name;
    d.type = skb_.node_type_index(v.var_type);
    if (!d.type) {
      // No node of this type exists, so the domain is empty from the start.
      d.unconstrained = false;
    }
    domains_.push_back(std::move(d));
    return domains_.size() - 1;
  }

  Side compile_side(const GroundedTerm& term) {
    Side side;
    if (const auto* v = std::get_if<Variable>(&term)) {
      side.variable = slot(*v);
      return side;
    }
    for (const auto& id : std::get<GroundedConstant>(term).nodes) {
      side.constants.push_back(skb_.index_of(id));
    }
    std::sort(side.constants.begin(), side.constants.end());
    side.constants.erase(std::unique(side.constants.begin(), side.constants.end()),
                         side.constants.end());
    return side;
  }

  void compile(const std::vector<GroundedTriplet>& triplets) {
    for (const auto& t : triplets) {
      compiled_.push_back(CompiledTriplet{compile_side(t.head), skb_.edge_type_index(t.edge_type),
                                          compile_side(t.tail)});
    }
  }

  [[nodiscard]] std::optional<std::size_t> find_slot(const std::string& name) const {
    for (std::size_t i = 0; i < domains_.size(); ++i) {
      if (domains_[i].name == name) return i;
    }
    return std::nullopt;
  }

  /// Keeps x in `target` only if some y in `other` satisfies
  /// y in neighbors(x, edge, dir, mode). Equivalent to intersecting `target`
  /// with the union of neighbors(y, edge, reverse(dir), mode) over `other`.
  /// Returns false when both sides are unconstrained (deferred).
  bool restrict(std::size_t sweep, std::size_t triplet, DomainState& target,
                const DomainState* other_var, const std::vector<NodeIndex>* other_constants,
                std::optional<LabelIndex> edge, Direction dir, TypeMode mode) {
    const bool other_unconstrained = other_var && other_var->unconstrained;
    if (target.unconstrained && other_unconstrained) return false;

    auto other_contains = [&](NodeIndex n) {
      if (other_var) return other_var->contains(skb_, n);
      return std::binary_search(other_constants->begin(), other_constants->end(), n);
    };

    PropagationStep step;
    step.sweep = sweep;
    step.triplet = triplet;
    step.variable = target.name;
    step.size_before = target.size(skb_);
    step.unconstrained_before = target.unconstrained;

    std::vector<NodeIndex> next;
    if (!target.unconstrained) {
      for (NodeIndex x : target.members) {
        for (NodeIndex y : skb_.neighbor_indices(x, edge, dir, mode)) {
          if (other_contains(y)) {
            next.push_back(x);
            break;
          }
        }
      }
    } else {
      // Materialize through the intersection: only reachable candidates.
      const std::vector<NodeIndex>& sources = other_var ? other_var->members : *other_constants;
      for (NodeIndex y : sources) {
        for (NodeIndex x : skb_.neighbor_indices(y, edge, reverse(dir), mode)) {
          if (target.contains(skb_, x)) next.push_back(x);
        }
      }
      std::sort(next.begin(), next.end());
      next.erase(std::unique(next.begin(), next.end()), next.end());
    }
    target.members = std::move(next);
    target.unconstrained = false;

    step.size_after = target.members.size();
    trace_.steps.push_back(std::move(step));
    return true;
  }

  /// Applies one triplet. Returns false if it was deferred.
  bool apply(std::size_t sweep, std::size_t index) {
    const CompiledTriplet& t = compiled_[index];
    const TypeMode out_mode = options_.mode_out;
    const TypeMode in_mode = options_.mode_in;

    if (!t.head.variable) {
      // tail &= union over constants c of neighbors(c, e, outgoing)
      return restrict(sweep, index, domains_[*t.tail.variable], nullptr, &t.head.constants,
                      t.edge_type, Direction::Incoming, out_mode);
    }
    if (!t.tail.variable) {
      // head &= union over constants c of neighbors(c, e, incoming)
      return restrict(sweep, index, domains_[*t.head.variable], nullptr, &t.tail.constants,
                      t.edge_type, Direction::Outgoing, in_mode);
    }
    if (*t.head.variable == *t.tail.variable)
      return true;  // self-loops carry no pairwise constraint
    DomainState& head = domains_[*t.head.variable];
    DomainState& tail = domains_[*t.tail.variable];
    if (head.unconstrained && tail.unconstrained) return false;
    restrict(sweep, index, head, &tail, nullptr, t.edge_type, Direction::Outgoing, in_mode);
    restrict(sweep, index, tail, &head, nullptr, t.edge_type, Direction::Incoming, out_mode);
    return true;
  }

  using Signature = std::vector<std::pair<bool, std::size_t>>;

  [[nodiscard]] Signature signature() const {
    Signature s;
    s.reserve(domains_.size());
    for (const auto& d : domains_) s.emplace_back(d.unconstrained, d.size(skb_));
    return s;
  }

  void materialize(DomainState& d) {
    if (!d.unconstrained) return;
    const auto members = d.type ? skb_.candidate_indices(*d.type) : std::span<const NodeIndex>{};
    d.members.assign(members.begin(), members.end());
    d.unconstrained = false;
    trace_.deferred_materialized.push_back(d.name);
  }

  void run(std::size_t target) {
    for (;;) {
      if (trace_.sweeps >= options_.sweep_cap) {
        throw PropagationLimitError("propagation exceeded " + std::to_string(options_.sweep_cap) +
                                    " sweeps");
      }
      const std::size_t sweep = ++trace_.sweeps;
      const Signature before = signature();
      std::vector<std::size_t> deferred;
      for (std::size_t i = 0; i < compiled_.size(); ++i) {
        if (!apply(sweep, i)) deferred.push_back(i);
        const DomainState& t = domains_[target];
        if (!t.unconstrained && t.members.empty()) {
          trace_.short_circuited = true;
          return;
        }
      }
      if (signature() != before) continue;
      if (deferred.empty()) return;
      // Stalled with only doubly-unconstrained pairs left: materialize them once.
      for (std::size_t i : deferred) {
        materialize(domains_[*compiled_[i].head.variable]);
        materialize(domains_[*compiled_[i].tail.variable]);
      }
    }
  }

  void collect_evidence() {
    for (std::size_t i = 0; i < compiled_.size(); ++i) collect_evidence(i);
  }

  void collect_evidence(std::size_t index) {
    auto side_members = [&](const Side& s) -> const std::vector<NodeIndex>* {
      if (!s.variable) return &s.constants;
      const DomainState& d = domains_[*s.variable];
      return d.unconstrained ? nullptr : &d.members;
    };
    const bool any_type =
        options_.mode_out == TypeMode::Relaxed || options_.mode_in == TypeMode::Relaxed;
    const CompiledTriplet& t = compiled_[index];
    const auto* heads = side_members(t.head);
    const auto* tails = side_members(t.tail);
    if (!heads || !tails) return;

    std::size_t emitted = 0;
    for (NodeIndex h : *heads) {
      for (NodeIndex n :
           skb_.neighbor_indices(h, std::nullopt, Direction::Outgoing, TypeMode::Relaxed)) {
        if (!std::binary_search(tails->begin(), tails->end(), n)) continue;
        for (LabelIndex type : skb_.edge_types_between(h, n)) {
          if (!any_type && t.edge_type != type) continue;
          if (emitted == options_.evidence_per_triplet) return;
          trace_.evidence.push_back(
              EvidenceEdge{index, skb_.node(h).id, skb_.edge_type_label(type), skb_.node(n).id});
          ++emitted;
        }
      }
    }
  }

  void record_final_sizes() {
    for (const auto& d : domains_) trace_.final_domain_sizes[d.name] = d.size(skb_);
  }

  [[nodiscard]] const DomainState& domain(std::size_t i) const { return domains_[i]; }

 private:
  const SemiStructuredKB& skb_;
  const FilterOptions& options_;
  FilterTrace& trace_;
  std::vector<DomainState> domains_;
  std::vector<CompiledTriplet> compiled_;
};

}  // namespace

NodeSet substitute(const SemiStructuredKB& skb, const std::vector<GroundedTriplet>& triplets,
                   const Variable& target, FilterTrace& trace, const FilterOptions& options) {
  Propagator propagator(skb, options, trace);
  propagator.compile(triplets);

  const auto target_slot = propagator.find_slot(target.name);
  if (!target_slot) {
    throw UnconstrainedTargetError("target ?" + target.name + " occurs in no prepared triplet");
  }

  propagator.run(*target_slot);
  propagator.record_final_sizes();

  const DomainState& result = propagator.domain(*target_slot);
  if (result.unconstrained) {
    throw UnconstrainedTargetError("no triplet constrained target ?" + target.name);
  }
  if (!trace.short_circuited) propagator.collect_evidence();

  NodeSet out;
  for (NodeIndex n : result.members) out.insert(skb.node(n).id);
  return out;
}

}  // namespace skbf
