#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace skbf {

/// Stable, non-empty node identifier, unique within one knowledge base.
class NodeId {
 public:
  explicit NodeId(std::string value);

  [[nodiscard]] const std::string& str() const noexcept { return value_; }

  friend auto operator<=>(const NodeId&, const NodeId&) = default;
  friend bool operator==(const NodeId&, const NodeId&) = default;

 private:
  std::string value_;
};

struct NodeIdHash {
  std::size_t operator()(const NodeId& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};

using NodeSet = std::set<NodeId>;

/// Dense position of a node inside a loaded SKB. Indices follow the
/// lexicographic order of NodeIds, so sorted index ranges are sorted by id.
using NodeIndex = std::uint32_t;
/// Dense position of a node-type or edge-type label in the schema.
using LabelIndex = std::uint32_t;

enum class Direction { Incoming, Outgoing };

/// Strict matches the requested edge type; Relaxed ignores the edge type.
enum class TypeMode { Strict, Relaxed };

std::string_view to_string(Direction d) noexcept;
std::string_view to_string(TypeMode m) noexcept;
std::optional<TypeMode> parse_type_mode(std::string_view s) noexcept;

struct Node {
  NodeId id;
  std::string node_type;
  std::vector<std::string> aliases;  // non-empty; aliases.front() is the canonical name
  std::optional<std::string> document;
  bool is_candidate = false;

  [[nodiscard]] const std::string& canonical_name() const { return aliases.front(); }
};

struct Edge {
  NodeId head;
  std::string edge_type;
  NodeId tail;
  std::optional<double> weight;  // stored for completeness, not used by propagation
};

struct Schema {
  std::set<std::string> node_types;
  std::set<std::string> edge_types;
};

/// Normalized alias string together with every node that carries it.
struct AliasEntry {
  std::string normalized;
  std::u32string code_points;
  std::vector<NodeIndex> nodes;  // sorted
};

/// Immutable semi-structured knowledge base: a typed graph whose nodes carry
/// alias lists and optional text documents. Safe for concurrent readers.
class SemiStructuredKB {
 public:
  /// Parses the JSON Lines node and edge files (see docs/formats.md).
  /// Throws LoadError with a line number on malformed input, on duplicate
  /// node ids, and on edges that reference unknown nodes.
  static SemiStructuredKB load(std::istream& node_source, std::istream& edge_source);
  static SemiStructuredKB load_files(const std::string& node_path, const std::string& edge_path);
  /// Loads `<dir>/nodes.jsonl` and `<dir>/edges.jsonl`.
  static SemiStructuredKB load_directory(const std::string& dir);

  [[nodiscard]] const Schema& schema() const noexcept { return schema_; }
  [[nodiscard]] std::size_t node_count() const noexcept { return nodes_.size(); }
  [[nodiscard]] std::size_t edge_count() const noexcept { return edges_.size(); }
  [[nodiscard]] const std::vector<Node>& nodes() const noexcept { return nodes_; }
  [[nodiscard]] const std::vector<Edge>& edges() const noexcept { return edges_; }

  [[nodiscard]] bool contains(const NodeId& id) const { return find(id).has_value(); }
  [[nodiscard]] std::optional<NodeIndex> find(const NodeId& id) const;
  /// Throws UnknownNodeError.
  [[nodiscard]] NodeIndex index_of(const NodeId& id) const;
  [[nodiscard]] const Node& node(NodeIndex index) const { return nodes_.at(index); }
  [[nodiscard]] const Node& node(const NodeId& id) const { return nodes_[index_of(id)]; }

  [[nodiscard]] std::optional<LabelIndex> node_type_index(std::string_view label) const;
  [[nodiscard]] std::optional<LabelIndex> edge_type_index(std::string_view label) const;
  [[nodiscard]] LabelIndex node_type_of(NodeIndex index) const { return node_type_ids_[index]; }
  [[nodiscard]] const std::string& node_type_label(LabelIndex t) const {
    return node_type_labels_.at(t);
  }
  [[nodiscard]] const std::string& edge_type_label(LabelIndex t) const {
    return edge_type_labels_.at(t);
  }

  /// Types of all edges head -> tail, ascending.
  [[nodiscard]] std::vector<LabelIndex> edge_types_between(NodeIndex head, NodeIndex tail) const;

  /// Sorted, duplicate-free neighbors of `v`. In Strict mode an absent
  /// `edge_type` yields an empty range.
  [[nodiscard]] std::span<const NodeIndex> neighbor_indices(NodeIndex v,
                                                            std::optional<LabelIndex> edge_type,
                                                            Direction direction,
                                                            TypeMode mode) const;

  /// Sorted candidate nodes of one node type.
  [[nodiscard]] std::span<const NodeIndex> candidate_indices(LabelIndex node_type) const;
  [[nodiscard]] std::vector<NodeIndex> all_candidate_indices() const;
  [[nodiscard]] bool is_candidate_of_type(NodeIndex v, LabelIndex node_type) const {
    return nodes_[v].is_candidate && node_type_ids_[v] == node_type;
  }

  /// Nodes connected to `v` by an `edge_type` edge in the given direction.
  /// Outgoing: edges v -> n. Incoming: edges n -> v. Relaxed ignores the type;
  /// an unknown edge type in Strict mode gives an empty set. Throws
  /// UnknownNodeError for an unknown `v`.
  [[nodiscard]] NodeSet neighbors(const NodeId& v, std::string_view edge_type, Direction direction,
                                  TypeMode mode) const;

  /// Candidate nodes of type `node_type`; empty for an unknown label.
  [[nodiscard]] NodeSet candidates_of_type(std::string_view node_type) const;

  /// All nodes flagged as answer candidates.
  [[nodiscard]] NodeSet candidate_pool() const;

  /// The attached document, or a synthesized relational summary for
  /// document-less nodes: "Name. edge: neighbor. edge (from): neighbor."
  [[nodiscard]] std::string document_of(const NodeId& v) const;
  [[nodiscard]] std::string document_of(NodeIndex v) const;

  /// Nodes whose normalized aliases include `normalized` exactly.
  [[nodiscard]] std::span<const NodeIndex> nodes_with_alias(std::string_view normalized) const;
  [[nodiscard]] const std::vector<AliasEntry>& alias_entries() const noexcept { return aliases_; }

  static constexpr std::size_t kSummaryNeighborCap = 50;

 private:
  friend class SkbBuilder;
  SemiStructuredKB() = default;

  struct Adjacency {
    // CSR, one row per node. typed_*: entries sorted by (type, neighbor).
    std::vector<std::uint64_t> typed_offsets;
    std::vector<LabelIndex> typed_types;
    std::vector<NodeIndex> typed_nodes;
    // any_*: distinct neighbors regardless of type, sorted.
    std::vector<std::uint64_t> any_offsets;
    std::vector<NodeIndex> any_nodes;
  };

  static Adjacency build_adjacency(std::size_t node_count,
                                   std::vector<std::tuple<NodeIndex, LabelIndex, NodeIndex>> arcs);

  Schema schema_;
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::unordered_map<std::string, NodeIndex> id_index_;
  std::vector<std::string> node_type_labels_;
  std::vector<std::string> edge_type_labels_;
  std::vector<LabelIndex> node_type_ids_;
  std::vector<std::vector<NodeIndex>> candidates_by_type_;
  Adjacency out_;
  Adjacency in_;
  std::vector<AliasEntry> aliases_;  // sorted by normalized string
  std::unordered_map<std::string, std::size_t> alias_lookup_;
};

/// Accumulates nodes and edges, then validates and indexes them into an
/// immutable SemiStructuredKB. The loader is a thin layer over this.
class SkbBuilder {
 public:
  /// `source_line` (1-based, 0 = unknown) is only used in error messages.
  void add_node(Node node, std::size_t source_line = 0);
  /// Undirected edges are stored as two directed edges.
  void add_edge(Edge edge, bool directed = true, std::size_t source_line = 0);

  /// Throws LoadError on duplicate ids or dangling edge endpoints.
  [[nodiscard]] SemiStructuredKB build() &&;

 private:
  std::vector<std::pair<Node, std::size_t>> nodes_;
  std::vector<std::pair<Edge, std::size_t>> edges_;
};

}  // namespace skbf
