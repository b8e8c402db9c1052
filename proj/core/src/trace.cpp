#include "skbf/trace.hpp"

#include <cstdio>
#include <sstream>

#include "skbf/errors.hpp"

namespace skbf {

using json = nlohmann::json;

namespace {

constexpr std::pair<FallbackReason, std::string_view> kReasonNames[] = {
    {FallbackReason::None, "none"},
    {FallbackReason::PrefilterDisabled, "prefilter_disabled"},
    {FallbackReason::ExtractionFailed, "extraction_failed"},
    {FallbackReason::ExtractionUnavailable, "extraction_unavailable"},
    {FallbackReason::EmptyPreparation, "empty_preparation"},
    {FallbackReason::UnconstrainedTarget, "unconstrained_target"},
    {FallbackReason::EmptyFilter, "empty_filter"},
};

json ids_to_json(const auto& ids) {
  json out = json::array();
  for (const NodeId& id : ids) out.push_back(id.str());
  return out;
}

std::vector<NodeId> ids_from_json(const json& j) {
  std::vector<NodeId> out;
  for (const auto& v : j) out.emplace_back(v.get<std::string>());
  return out;
}

json variable_to_json(const Variable& v) { return {{"variable", v.name}, {"type", v.var_type}}; }

Variable variable_from_json(const json& j) {
  return Variable{j.at("variable").get<std::string>(), j.at("type").get<std::string>()};
}

json term_to_json(const Term& t) {
  if (const auto* c = std::get_if<Constant>(&t)) return {{"constant", c->surface}};
  return variable_to_json(std::get<Variable>(t));
}

Term term_from_json(const json& j) {
  if (j.contains("constant")) return Constant{j.at("constant").get<std::string>()};
  return variable_from_json(j);
}

json grounded_term_to_json(const GroundedTerm& t) {
  if (const auto* c = std::get_if<GroundedConstant>(&t)) {
    return {{"constant", c->surface}, {"nodes", ids_to_json(c->nodes)}};
  }
  return variable_to_json(std::get<Variable>(t));
}

GroundedTerm grounded_term_from_json(const json& j) {
  if (j.contains("constant")) {
    return GroundedConstant{j.at("constant").get<std::string>(), ids_from_json(j.at("nodes"))};
  }
  return variable_from_json(j);
}

json scored_to_json(const std::vector<ScoredNode>& nodes) {
  json out = json::array();
  for (const auto& s : nodes) out.push_back({{"node", s.node.str()}, {"score", s.score}});
  return out;
}

std::vector<ScoredNode> scored_from_json(const json& j) {
  std::vector<ScoredNode> out;
  for (const auto& s : j)
    out.push_back(ScoredNode{NodeId(s.at("node").get<std::string>()), s.at("score").get<double>()});
  return out;
}

json filter_to_json(const FilterTrace& f) {
  json grounding = json::array();
  for (const auto& d : f.grounding) {
    json matches = json::array();
    for (const auto& m : d.matches) matches.push_back({{"node", m.node.str()}, {"score", m.score}});
    grounding.push_back({{"triplet", d.triplet},
                         {"outcome", d.outcome},
                         {"surface", d.surface},
                         {"matches", matches},
                         {"chosen", ids_to_json(d.chosen)}});
  }
  json steps = json::array();
  for (const auto& s : f.steps) {
    steps.push_back({{"sweep", s.sweep},
                     {"triplet", s.triplet},
                     {"variable", s.variable},
                     {"size_before", s.size_before},
                     {"size_after", s.size_after},
                     {"unconstrained_before", s.unconstrained_before},
                     {"unconstrained_after", s.unconstrained_after}});
  }
  json evidence = json::array();
  for (const auto& e : f.evidence) {
    evidence.push_back({{"triplet", e.triplet},
                        {"head", e.head.str()},
                        {"edge_type", e.edge_type},
                        {"tail", e.tail.str()}});
  }
  return {{"grounding", grounding},
          {"steps", steps},
          {"sweeps", f.sweeps},
          {"deferred_materialized", f.deferred_materialized},
          {"final_domain_sizes", f.final_domain_sizes},
          {"short_circuited", f.short_circuited},
          {"evidence", evidence}};
}

FilterTrace filter_from_json(const json& j) {
  FilterTrace f;
  for (const auto& d : j.at("grounding")) {
    GroundingDecision g;
    g.triplet = d.at("triplet").get<std::size_t>();
    g.outcome = d.at("outcome").get<std::string>();
    g.surface = d.at("surface").get<std::string>();
    for (const auto& m : d.at("matches")) {
      g.matches.push_back(
          AliasMatch{NodeId(m.at("node").get<std::string>()), m.at("score").get<double>()});
    }
    g.chosen = ids_from_json(d.at("chosen"));
    f.grounding.push_back(std::move(g));
  }
  for (const auto& s : j.at("steps")) {
    f.steps.push_back(PropagationStep{
        s.at("sweep").get<std::size_t>(), s.at("triplet").get<std::size_t>(),
        s.at("variable").get<std::string>(), s.at("size_before").get<std::size_t>(),
        s.at("size_after").get<std::size_t>(), s.at("unconstrained_before").get<bool>(),
        s.at("unconstrained_after").get<bool>()});
  }
  f.sweeps = j.at("sweeps").get<std::size_t>();
  f.deferred_materialized = j.at("deferred_materialized").get<std::vector<std::string>>();
  f.final_domain_sizes = j.at("final_domain_sizes").get<std::map<std::string, std::size_t>>();
  f.short_circuited = j.at("short_circuited").get<bool>();
  for (const auto& e : j.at("evidence")) {
    f.evidence.push_back(EvidenceEdge{
        e.at("triplet").get<std::size_t>(), NodeId(e.at("head").get<std::string>()),
        e.at("edge_type").get<std::string>(), NodeId(e.at("tail").get<std::string>())});
  }
  return f;
}

std::string name_of(const NodeId& id, const SemiStructuredKB* skb) {
  if (skb != nullptr) {
    if (auto index = skb->find(id))
      return skb->node(*index).canonical_name() + " [" + id.str() + "]";
  }
  return id.str();
}

std::string describe(const GroundedTerm& t, const SemiStructuredKB* skb) {
  if (const auto* v = std::get_if<Variable>(&t)) return "?" + v->name + " (" + v->var_type + ")";
  const auto& c = std::get<GroundedConstant>(t);
  std::string out = "\"" + c.surface + "\" = ";
  for (std::size_t i = 0; i < c.nodes.size(); ++i) {
    if (i > 0) out += " | ";
    out += name_of(c.nodes[i], skb);
  }
  return out;
}

std::string fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string_view to_string(FallbackReason r) noexcept {
  for (const auto& [reason, name] : kReasonNames) {
    if (reason == r) return name;
  }
  return "none";
}

FallbackReason parse_fallback_reason(std::string_view s) {
  for (const auto& [reason, name] : kReasonNames) {
    if (name == s) return reason;
  }
  throw IoError("unknown fallback reason '" + std::string(s) + "'");
}

json trace_to_json(const AnswerTrace& t, bool include_timings) {
  json notes = json::array();
  for (const auto& n : t.parse_notes)
    notes.push_back({{"line", n.line}, {"text", n.text}, {"message", n.message}});

  json triplets = nullptr;
  if (t.triplets) {
    json list = json::array();
    for (const auto& tr : t.triplets->triplets) {
      list.push_back({{"head", term_to_json(tr.head)},
                      {"edge_type", tr.edge_type},
                      {"tail", term_to_json(tr.tail)}});
    }
    triplets = {{"triplets", list}, {"target", variable_to_json(t.triplets->target)}};
  }

  json grounded = json::array();
  for (const auto& g : t.grounded) {
    grounded.push_back({{"head", grounded_term_to_json(g.head)},
                        {"edge_type", g.edge_type},
                        {"tail", grounded_term_to_json(g.tail)}});
  }

  json ranking = json::array();
  for (const auto& e : t.ranking) {
    ranking.push_back({{"node", e.node.str()},
                       {"block", to_string(e.block)},
                       {"vss_score", e.vss_score},
                       {"llm_score", e.llm_score ? json(*e.llm_score) : json(nullptr)},
                       {"rationale", e.rationale}});
  }

  json doc = {{"version", kTraceVersion},
              {"query", t.query},
              {"k_max", t.k_max},
              {"embedder_tag", t.embedder_tag},
              {"llm_model", t.llm_model},
              {"grammar", kTripletGrammarVersion},
              {"rerank_prompt", kRerankPromptVersion},
              {"extraction",
               {{"replies", t.extraction_replies},
                {"errors", t.extraction_errors},
                {"notes", notes},
                {"parsed", triplets}}},
              {"grounded", grounded},
              {"filter", filter_to_json(t.filter)},
              {"filtered", t.filtered ? ids_to_json(*t.filtered) : json(nullptr)},
              {"fallback", {{"reason", to_string(t.fallback)}, {"detail", t.fallback_detail}}},
              {"vss",
               {{"filtered", scored_to_json(t.vss.filtered)},
                {"additional", scored_to_json(t.vss.additional)}}},
              {"rerank", {{"unavailable", t.rerank_unavailable}, {"error", t.rerank_error}}},
              {"ranking", ranking}};
  if (include_timings) {
    doc["timings_ms"] = {{"extraction", t.timings.extraction_ms},
                         {"filter", t.timings.filter_ms},
                         {"vss", t.timings.vss_ms},
                         {"rerank", t.timings.rerank_ms},
                         {"total", t.timings.total_ms}};
  }
  return doc;
}

AnswerTrace trace_from_json(const json& doc) {
  if (!doc.is_object() || doc.value("version", "") != kTraceVersion) {
    throw IoError("not a '" + std::string(kTraceVersion) + "' document");
  }
  AnswerTrace t;
  try {
    t.query = doc.at("query").get<std::string>();
    t.k_max = doc.at("k_max").get<std::size_t>();
    t.embedder_tag = doc.at("embedder_tag").get<std::string>();
    t.llm_model = doc.at("llm_model").get<std::string>();

    const json& ex = doc.at("extraction");
    t.extraction_replies = ex.at("replies").get<std::vector<std::string>>();
    t.extraction_errors = ex.at("errors").get<std::vector<std::string>>();
    for (const auto& n : ex.at("notes")) {
      t.parse_notes.push_back(ParseNote{n.at("line").get<std::size_t>(),
                                        n.at("text").get<std::string>(),
                                        n.at("message").get<std::string>()});
    }
    if (const json& parsed = ex.at("parsed"); !parsed.is_null()) {
      TripletSet set;
      for (const auto& tr : parsed.at("triplets")) {
        set.triplets.push_back(Triplet{term_from_json(tr.at("head")),
                                       tr.at("edge_type").get<std::string>(),
                                       term_from_json(tr.at("tail"))});
      }
      set.target = variable_from_json(parsed.at("target"));
      t.triplets = std::move(set);
    }

    for (const auto& g : doc.at("grounded")) {
      t.grounded.push_back(GroundedTriplet{grounded_term_from_json(g.at("head")),
                                           g.at("edge_type").get<std::string>(),
                                           grounded_term_from_json(g.at("tail"))});
    }
    t.filter = filter_from_json(doc.at("filter"));
    if (const json& f = doc.at("filtered"); !f.is_null()) {
      const auto ids = ids_from_json(f);
      t.filtered = NodeSet(ids.begin(), ids.end());
    }
    t.fallback = parse_fallback_reason(doc.at("fallback").at("reason").get<std::string>());
    t.fallback_detail = doc.at("fallback").at("detail").get<std::string>();
    t.vss.filtered = scored_from_json(doc.at("vss").at("filtered"));
    t.vss.additional = scored_from_json(doc.at("vss").at("additional"));
    t.rerank_unavailable = doc.at("rerank").at("unavailable").get<bool>();
    t.rerank_error = doc.at("rerank").at("error").get<std::string>();
    for (const auto& e : doc.at("ranking")) {
      RerankEntry r{NodeId(e.at("node").get<std::string>()), Block::Filtered,
                    e.at("vss_score").get<double>(), std::nullopt,
                    e.at("rationale").get<std::string>()};
      const auto block = e.at("block").get<std::string>();
      if (block == "additional") {
        r.block = Block::Additional;
      } else if (block != "filtered") {
        throw IoError("unknown ranking block '" + block + "'");
      }
      if (!e.at("llm_score").is_null()) r.llm_score = e.at("llm_score").get<double>();
      t.ranking.push_back(std::move(r));
    }
    if (doc.contains("timings_ms")) {
      const json& tm = doc.at("timings_ms");
      t.timings = StepTimings{tm.at("extraction").get<double>(), tm.at("filter").get<double>(),
                              tm.at("vss").get<double>(), tm.at("rerank").get<double>(),
                              tm.at("total").get<double>()};
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed trace: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("malformed trace: ") + e.what());
  }
  return t;
}

std::string serialize_trace(const AnswerTrace& trace, const TraceWriteOptions& options) {
  return trace_to_json(trace, options.include_timings).dump(options.indent) + "\n";
}

AnswerTrace parse_trace(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("trace is not JSON: ") + e.what());
  }
  return trace_from_json(doc);
}

std::string render_summary(const AnswerTrace& t, const SemiStructuredKB* skb) {
  std::ostringstream out;
  out << "Query: " << t.query << "\n";

  if (t.triplets) {
    out << "\nExtracted constraints (answer is ?" << t.triplets->target.name << "):\n";
    for (const auto& tr : t.triplets->triplets) out << "  " << format_triplet(tr) << "\n";
  }
  for (const auto& n : t.parse_notes)
    out << "  note, reply line " << n.line << ": " << n.message << "\n";

  if (!t.grounded.empty()) {
    out << "\nGrounded constraints:\n";
    for (std::size_t i = 0; i < t.grounded.size(); ++i) {
      const auto& g = t.grounded[i];
      out << "  [" << i + 1 << "] " << describe(g.head, skb) << "  --" << g.edge_type << "-->  "
          << describe(g.tail, skb) << "\n";
    }
  }
  for (const auto& d : t.filter.grounding) {
    if (d.outcome == "no_match") out << "  dropped: no node matches \"" << d.surface << "\"\n";
    if (d.outcome == "skipped_constant_pair")
      out << "  dropped: constraint between two named entities\n";
    if (d.outcome == "skipped_self_loop") out << "  dropped: variable related to itself\n";
  }

  if (!t.filter.evidence.empty()) {
    out << "\nSupporting graph edges:\n";
    for (const auto& e : t.filter.evidence) {
      out << "  [" << e.triplet + 1 << "] " << name_of(e.head, skb) << " --" << e.edge_type
          << "--> " << name_of(e.tail, skb) << "\n";
    }
  }

  if (t.filtered) out << "\nCandidates surviving the constraints: " << t.filtered->size() << "\n";
  if (t.fallback != FallbackReason::None) {
    out << "\nFallback: " << to_string(t.fallback);
    if (!t.fallback_detail.empty()) out << " (" << t.fallback_detail << ")";
    out << "; ranked the whole candidate pool by similarity instead.\n";
  }
  if (t.rerank_unavailable)
    out << "\nReranker unavailable (" << t.rerank_error << "); showing similarity order.\n";

  out << "\nRanking:\n";
  for (std::size_t i = 0; i < t.ranking.size(); ++i) {
    const auto& e = t.ranking[i];
    out << "  " << i + 1 << ". " << name_of(e.node, skb) << "  " << to_string(e.block)
        << "  vss=" << fixed(e.vss_score, 4)
        << "  llm=" << (e.llm_score ? fixed(*e.llm_score, 2) : std::string("unscored")) << "\n";
  }
  return out.str();
}

}  // namespace skbf
