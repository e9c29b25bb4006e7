#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kgtopo/ids.hpp"

namespace kgtopo {

/// Label <-> dense id bijection, ids assigned in first-appearance order.
class Vocabulary {
 public:
  std::size_t size() const { return labels_.size(); }
  const std::string& label(std::size_t id) const { return labels_.at(id); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::optional<std::size_t> find(std::string_view label) const;
  /// Returns the existing id or appends a new one.
  std::size_t intern(std::string_view label);

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> ids_;
};

struct TripleStore {
  Vocabulary entities;
  Vocabulary relations;
  std::vector<Triple> triples;
  /// Empty unless a type file was loaded; otherwise one label per entity.
  std::vector<std::string> entity_types;
  /// Index of the input file each triple was first read from.
  std::vector<std::uint16_t> source_file;
  std::size_t duplicates_dropped = 0;

  std::size_t num_entities() const { return entities.size(); }
  std::size_t num_relations() const { return relations.size(); }
  std::size_t num_triples() const { return triples.size(); }
};

enum class TableFormat { kTsv, kCsv };

struct LoadOptions {
  TableFormat format = TableFormat::kTsv;
  // Column positions of head, relation, tail.
  std::size_t head_column = 0;
  std::size_t relation_column = 1;
  std::size_t tail_column = 2;
  bool has_header = false;
};

/// Parses "hrt", "htr", "rht", ... into column positions.
LoadOptions parse_column_order(std::string_view order, LoadOptions base = {});
TableFormat parse_table_format(std::string_view name);

TripleStore load_triples(const std::filesystem::path& path, const LoadOptions& options = {});
/// Concatenates several files into one store with a shared vocabulary.
TripleStore load_triples(std::span<const std::filesystem::path> paths,
                         const LoadOptions& options = {});

/// Reads a two-column (entity label, type label) TSV. Entities without an
/// entry get type "unknown"; rows naming entities absent from the store are
/// ignored.
void load_entity_types(TripleStore& store, const std::filesystem::path& path);

/// Writes triples as label TSV (head, relation, tail) in store order.
void write_triples_tsv(const TripleStore& store, const std::filesystem::path& path);

/// Drops one triple of every reverse pair (h,r,t)/(t,r,h) with h != t,
/// keeping the lexicographically smaller id tuple. Self-loops are kept.
TripleStore dedup_reverse(const TripleStore& store);

/// Immutable triple store plus CSR adjacency. Safe for concurrent reads.
class IndexedGraph {
 public:
  explicit IndexedGraph(TripleStore store);

  const TripleStore& store() const { return store_; }
  std::size_t num_entities() const { return store_.num_entities(); }
  std::size_t num_relations() const { return store_.num_relations(); }
  std::size_t num_triples() const { return store_.num_triples(); }
  std::span<const Triple> triples() const { return store_.triples; }

  /// Outgoing edges of h sorted by (relation, tail).
  std::span<const RelationId> out_relations(EntityId h) const;
  std::span<const EntityId> out_tails(EntityId h) const;
  /// Incoming edges of t sorted by (relation, head).
  std::span<const RelationId> in_relations(EntityId t) const;
  std::span<const EntityId> in_heads(EntityId t) const;

  /// Sorted tails of (h, r, ?).
  std::span<const EntityId> tails(EntityId h, RelationId r) const;
  /// Sorted heads of (?, r, t).
  std::span<const EntityId> heads(EntityId t, RelationId r) const;
  /// Sorted relations r with (h, r, t) in the graph.
  std::span<const RelationId> relations_between(EntityId h, EntityId t) const;

  /// Distinct sorted out-neighbours of h over any relation.
  std::span<const EntityId> out_neighbors(EntityId h) const;
  /// Distinct sorted in-neighbours of t over any relation.
  std::span<const EntityId> in_neighbors(EntityId t) const;

  bool contains(const Triple& t) const { return index_.contains(t); }
  std::optional<std::size_t> index_of(const Triple& t) const;

 private:
  std::span<const EntityId> slice(const std::vector<std::size_t>& offsets,
                                  const std::vector<EntityId>& values, EntityId v) const;

  TripleStore store_;
  std::vector<std::size_t> out_offsets_;
  std::vector<RelationId> out_rel_;
  std::vector<EntityId> out_tail_;
  std::vector<std::size_t> in_offsets_;
  std::vector<RelationId> in_rel_;
  std::vector<EntityId> in_head_;
  // Same edges as out_*, ordered by (tail, relation) within each head.
  std::vector<EntityId> pair_tail_;
  std::vector<RelationId> pair_rel_;
  std::vector<std::size_t> out_nbr_offsets_;
  std::vector<EntityId> out_nbr_;
  std::vector<std::size_t> in_nbr_offsets_;
  std::vector<EntityId> in_nbr_;
  std::unordered_map<Triple, std::size_t, TripleHash> index_;
};

IndexedGraph build_indexes(TripleStore store);

struct GraphStats {
  std::size_t num_entities = 0;
  std::size_t num_relations = 0;
  std::size_t num_triples = 0;
  double avg_node_degree = 0.0;
};

GraphStats graph_stats(const IndexedGraph& g);
std::string to_json(const GraphStats& stats);

}  // namespace kgtopo
