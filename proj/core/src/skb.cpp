#include "skbf/skb.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <nlohmann/json.hpp>

#include "skbf/errors.hpp"
#include "skbf/text.hpp"

namespace skbf {

using json = nlohmann::json;

NodeId::NodeId(std::string value) : value_(std::move(value)) {
  if (value_.empty()) throw std::invalid_argument("NodeId must not be empty");
}

std::string_view to_string(Direction d) noexcept {
  return d == Direction::Incoming ? "incoming" : "outgoing";
}

std::string_view to_string(TypeMode m) noexcept {
  return m == TypeMode::Strict ? "strict" : "relaxed";
}

std::optional<TypeMode> parse_type_mode(std::string_view s) noexcept {
  if (s == "strict") return TypeMode::Strict;
  if (s == "relaxed") return TypeMode::Relaxed;
  return std::nullopt;
}

namespace {

std::string where(std::string_view file, std::size_t line) {
  std::string out(file);
  if (line > 0) out += " line " + std::to_string(line);
  return out;
}

const json& require(const json& obj, const char* key, std::string_view file, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw LoadError(where(file, line) + ": missing field '" + key + "'");
  }
  return *it;
}

std::string require_string(const json& obj, const char* key, std::string_view file,
                           std::size_t line) {
  const json& v = require(obj, key, file, line);
  if (!v.is_string() || v.get_ref<const std::string&>().empty()) {
    throw LoadError(where(file, line) + ": field '" + key + "' must be a non-empty string");
  }
  return v.get<std::string>();
}

template <typename OnRecord>
void for_each_record(std::istream& in, std::string_view file, OnRecord&& on_record) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw LoadError(where(file, line_no) + ": malformed JSON: " + e.what());
    }
    if (!record.is_object()) {
      throw LoadError(where(file, line_no) + ": record must be a JSON object");
    }
    on_record(record, line_no);
  }
}

std::span<const NodeIndex> row(const std::vector<std::uint64_t>& offsets,
                               const std::vector<NodeIndex>& values, NodeIndex v) {
  const auto begin = offsets[v];
  const auto end = offsets[v + 1];
  return {values.data() + begin, static_cast<std::size_t>(end - begin)};
}

}  // namespace

SemiStructuredKB SemiStructuredKB::load(std::istream& node_source, std::istream& edge_source) {
  SkbBuilder builder;
  for_each_record(node_source, "node file", [&](const json& r, std::size_t line) {
    NodeId id(require_string(r, "id", "node file", line));
    std::string type = require_string(r, "type", "node file", line);

    const json& aliases = require(r, "aliases", "node file", line);
    if (!aliases.is_array() || aliases.empty()) {
      throw LoadError(where("node file", line) + ": 'aliases' must be a non-empty array");
    }
    std::vector<std::string> alias_list;
    for (const auto& a : aliases) {
      if (!a.is_string() || a.get_ref<const std::string&>().empty()) {
        throw LoadError(where("node file", line) + ": aliases must be non-empty strings");
      }
      alias_list.push_back(a.get<std::string>());
    }

    std::optional<std::string> document;
    if (auto it = r.find("document"); it != r.end() && !it->is_null()) {
      if (!it->is_string()) {
        throw LoadError(where("node file", line) + ": 'document' must be a string or null");
      }
      document = it->get<std::string>();
    }

    const json& candidate = require(r, "is_candidate", "node file", line);
    if (!candidate.is_boolean()) {
      throw LoadError(where("node file", line) + ": 'is_candidate' must be a boolean");
    }

    builder.add_node(Node{std::move(id), std::move(type), std::move(alias_list),
                          std::move(document), candidate.get<bool>()},
                     line);
  });

  for_each_record(edge_source, "edge file", [&](const json& r, std::size_t line) {
    Edge edge{NodeId(require_string(r, "head", "edge file", line)),
              require_string(r, "type", "edge file", line),
              NodeId(require_string(r, "tail", "edge file", line)), std::nullopt};
    if (auto it = r.find("weight"); it != r.end() && !it->is_null()) {
      if (!it->is_number()) {
        throw LoadError(where("edge file", line) + ": 'weight' must be a number");
      }
      edge.weight = it->get<double>();
    }
    bool directed = true;
    if (auto it = r.find("directed"); it != r.end()) {
      if (!it->is_boolean()) {
        throw LoadError(where("edge file", line) + ": 'directed' must be a boolean");
      }
      directed = it->get<bool>();
    }
    builder.add_edge(std::move(edge), directed, line);
  });

  return std::move(builder).build();
}

SemiStructuredKB SemiStructuredKB::load_files(const std::string& node_path,
                                              const std::string& edge_path) {
  std::ifstream nodes(node_path);
  if (!nodes) throw LoadError("cannot open node file " + node_path);
  std::ifstream edges(edge_path);
  if (!edges) throw LoadError("cannot open edge file " + edge_path);
  return load(nodes, edges);
}

SemiStructuredKB SemiStructuredKB::load_directory(const std::string& dir) {
  return load_files(dir + "/nodes.jsonl", dir + "/edges.jsonl");
}

void SkbBuilder::add_node(Node node, std::size_t source_line) {
  nodes_.emplace_back(std::move(node), source_line);
}

void SkbBuilder::add_edge(Edge edge, bool directed, std::size_t source_line) {
  if (!directed) {
    Edge reverse{edge.tail, edge.edge_type, edge.head, edge.weight};
    edges_.emplace_back(std::move(edge), source_line);
    edges_.emplace_back(std::move(reverse), source_line);
    return;
  }
  edges_.emplace_back(std::move(edge), source_line);
}

SemiStructuredKB SkbBuilder::build() && {
  SemiStructuredKB kb;

  std::stable_sort(nodes_.begin(), nodes_.end(),
                   [](const auto& a, const auto& b) { return a.first.id < b.first.id; });
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    if (nodes_[i].first.id == nodes_[i - 1].first.id) {
      throw LoadError(where("node file", nodes_[i].second) + ": duplicate node id '" +
                      nodes_[i].first.id.str() + "'");
    }
  }
  for (const auto& [node, line] : nodes_) {
    if (node.node_type.empty()) {
      throw LoadError(where("node file", line) + ": empty node type for '" + node.id.str() + "'");
    }
    if (node.aliases.empty()) {
      throw LoadError(where("node file", line) + ": node '" + node.id.str() + "' has no aliases");
    }
    kb.schema_.node_types.insert(node.node_type);
  }
  for (const auto& [edge, line] : edges_) {
    if (edge.edge_type.empty()) throw LoadError(where("edge file", line) + ": empty edge type");
    kb.schema_.edge_types.insert(edge.edge_type);
  }
  kb.node_type_labels_.assign(kb.schema_.node_types.begin(), kb.schema_.node_types.end());
  kb.edge_type_labels_.assign(kb.schema_.edge_types.begin(), kb.schema_.edge_types.end());

  kb.nodes_.reserve(nodes_.size());
  kb.node_type_ids_.reserve(nodes_.size());
  kb.candidates_by_type_.resize(kb.node_type_labels_.size());
  for (auto& [node, line] : nodes_) {
    const auto index = static_cast<NodeIndex>(kb.nodes_.size());
    const auto type = *kb.node_type_index(node.node_type);
    kb.id_index_.emplace(node.id.str(), index);
    kb.node_type_ids_.push_back(type);
    if (node.is_candidate) kb.candidates_by_type_[type].push_back(index);
    kb.nodes_.push_back(std::move(node));
  }

  std::vector<std::tuple<NodeIndex, LabelIndex, NodeIndex>> out_arcs;
  std::vector<std::tuple<NodeIndex, LabelIndex, NodeIndex>> in_arcs;
  out_arcs.reserve(edges_.size());
  in_arcs.reserve(edges_.size());
  kb.edges_.reserve(edges_.size());
  for (auto& [edge, line] : edges_) {
    const auto head = kb.find(edge.head);
    if (!head) {
      throw LoadError(where("edge file", line) + ": edge head references unknown node '" +
                      edge.head.str() + "'");
    }
    const auto tail = kb.find(edge.tail);
    if (!tail) {
      throw LoadError(where("edge file", line) + ": edge tail references unknown node '" +
                      edge.tail.str() + "'");
    }
    const auto type = *kb.edge_type_index(edge.edge_type);
    out_arcs.emplace_back(*head, type, *tail);
    in_arcs.emplace_back(*tail, type, *head);
    kb.edges_.push_back(std::move(edge));
  }
  kb.out_ = SemiStructuredKB::build_adjacency(kb.nodes_.size(), std::move(out_arcs));
  kb.in_ = SemiStructuredKB::build_adjacency(kb.nodes_.size(), std::move(in_arcs));

  std::map<std::string, std::vector<NodeIndex>> alias_nodes;
  for (NodeIndex i = 0; i < kb.nodes_.size(); ++i) {
    for (const auto& alias : kb.nodes_[i].aliases) {
      auto& bucket = alias_nodes[text::normalize(alias)];
      if (bucket.empty() || bucket.back() != i) bucket.push_back(i);
    }
  }
  kb.aliases_.reserve(alias_nodes.size());
  for (auto& [normalized, nodes] : alias_nodes) {
    kb.alias_lookup_.emplace(normalized, kb.aliases_.size());
    kb.aliases_.push_back(
        AliasEntry{normalized, text::to_code_points(normalized), std::move(nodes)});
  }

  nodes_.clear();
  edges_.clear();
  return kb;
}

SemiStructuredKB::Adjacency SemiStructuredKB::build_adjacency(
    std::size_t node_count, std::vector<std::tuple<NodeIndex, LabelIndex, NodeIndex>> arcs) {
  std::sort(arcs.begin(), arcs.end());
  arcs.erase(std::unique(arcs.begin(), arcs.end()), arcs.end());

  Adjacency adj;
  adj.typed_offsets.assign(node_count + 1, 0);
  adj.any_offsets.assign(node_count + 1, 0);
  adj.typed_types.reserve(arcs.size());
  adj.typed_nodes.reserve(arcs.size());

  std::size_t pos = 0;
  std::vector<NodeIndex> scratch;
  for (NodeIndex v = 0; v < node_count; ++v) {
    adj.typed_offsets[v] = adj.typed_nodes.size();
    adj.any_offsets[v] = adj.any_nodes.size();
    scratch.clear();
    while (pos < arcs.size() && std::get<0>(arcs[pos]) == v) {
      adj.typed_types.push_back(std::get<1>(arcs[pos]));
      adj.typed_nodes.push_back(std::get<2>(arcs[pos]));
      scratch.push_back(std::get<2>(arcs[pos]));
      ++pos;
    }
    std::sort(scratch.begin(), scratch.end());
    scratch.erase(std::unique(scratch.begin(), scratch.end()), scratch.end());
    adj.any_nodes.insert(adj.any_nodes.end(), scratch.begin(), scratch.end());
  }
  adj.typed_offsets[node_count] = adj.typed_nodes.size();
  adj.any_offsets[node_count] = adj.any_nodes.size();
  return adj;
}

std::optional<NodeIndex> SemiStructuredKB::find(const NodeId& id) const {
  auto it = id_index_.find(id.str());
  if (it == id_index_.end()) return std::nullopt;
  return it->second;
}

NodeIndex SemiStructuredKB::index_of(const NodeId& id) const {
  auto index = find(id);
  if (!index) throw UnknownNodeError(id.str());
  return *index;
}

std::optional<LabelIndex> SemiStructuredKB::node_type_index(std::string_view label) const {
  auto it = std::lower_bound(node_type_labels_.begin(), node_type_labels_.end(), label);
  if (it == node_type_labels_.end() || *it != label) return std::nullopt;
  return static_cast<LabelIndex>(it - node_type_labels_.begin());
}

std::optional<LabelIndex> SemiStructuredKB::edge_type_index(std::string_view label) const {
  auto it = std::lower_bound(edge_type_labels_.begin(), edge_type_labels_.end(), label);
  if (it == edge_type_labels_.end() || *it != label) return std::nullopt;
  return static_cast<LabelIndex>(it - edge_type_labels_.begin());
}

std::span<const NodeIndex> SemiStructuredKB::neighbor_indices(NodeIndex v,
                                                              std::optional<LabelIndex> edge_type,
                                                              Direction direction,
                                                              TypeMode mode) const {
  const Adjacency& adj = direction == Direction::Outgoing ? out_ : in_;
  if (mode == TypeMode::Relaxed) return row(adj.any_offsets, adj.any_nodes, v);
  if (!edge_type) return {};

  const auto begin = adj.typed_types.begin() + static_cast<std::ptrdiff_t>(adj.typed_offsets[v]);
  const auto end = adj.typed_types.begin() + static_cast<std::ptrdiff_t>(adj.typed_offsets[v + 1]);
  const auto [lo, hi] = std::equal_range(begin, end, *edge_type);
  const auto first = static_cast<std::size_t>(lo - adj.typed_types.begin());
  return {adj.typed_nodes.data() + first, static_cast<std::size_t>(hi - lo)};
}

std::vector<LabelIndex> SemiStructuredKB::edge_types_between(NodeIndex head, NodeIndex tail) const {
  std::vector<LabelIndex> out;
  for (auto i = out_.typed_offsets[head]; i < out_.typed_offsets[head + 1]; ++i) {
    if (out_.typed_nodes[i] == tail) out.push_back(out_.typed_types[i]);
  }
  return out;
}

std::span<const NodeIndex> SemiStructuredKB::candidate_indices(LabelIndex node_type) const {
  if (node_type >= candidates_by_type_.size()) return {};
  return candidates_by_type_[node_type];
}

std::vector<NodeIndex> SemiStructuredKB::all_candidate_indices() const {
  std::vector<NodeIndex> out;
  for (NodeIndex i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].is_candidate) out.push_back(i);
  }
  return out;
}

NodeSet SemiStructuredKB::neighbors(const NodeId& v, std::string_view edge_type,
                                    Direction direction, TypeMode mode) const {
  NodeSet out;
  for (NodeIndex n : neighbor_indices(index_of(v), edge_type_index(edge_type), direction, mode)) {
    out.insert(nodes_[n].id);
  }
  return out;
}

NodeSet SemiStructuredKB::candidates_of_type(std::string_view node_type) const {
  NodeSet out;
  if (auto type = node_type_index(node_type)) {
    for (NodeIndex n : candidate_indices(*type)) out.insert(nodes_[n].id);
  }
  return out;
}

NodeSet SemiStructuredKB::candidate_pool() const {
  NodeSet out;
  for (const auto& node : nodes_) {
    if (node.is_candidate) out.insert(node.id);
  }
  return out;
}

std::string SemiStructuredKB::document_of(const NodeId& v) const {
  return document_of(index_of(v));
}

std::string SemiStructuredKB::document_of(NodeIndex v) const {
  const Node& n = nodes_.at(v);
  if (n.document && !n.document->empty()) return *n.document;

  std::set<std::string> pairs;
  auto collect = [&](const Adjacency& adj, const char* suffix) {
    for (auto i = adj.typed_offsets[v]; i < adj.typed_offsets[v + 1]; ++i) {
      pairs.insert(edge_type_labels_[adj.typed_types[i]] + suffix + ": " +
                   nodes_[adj.typed_nodes[i]].canonical_name());
    }
  };
  collect(out_, "");
  collect(in_, " (from)");

  std::string summary = n.canonical_name() + ".";
  std::size_t emitted = 0;
  for (const auto& p : pairs) {
    if (emitted++ == kSummaryNeighborCap) break;
    summary += " " + p + ".";
  }
  return summary;
}

std::span<const NodeIndex> SemiStructuredKB::nodes_with_alias(std::string_view normalized) const {
  auto it = alias_lookup_.find(std::string(normalized));
  if (it == alias_lookup_.end()) return {};
  return aliases_[it->second].nodes;
}

}  // namespace skbf
