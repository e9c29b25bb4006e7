#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgtopo/graph_store.hpp"
#include "kgtopo/kge.hpp"
#include "kgtopo/split.hpp"
#include "kgtopo/topology.hpp"

namespace kgtopo {

enum class FilterSource : std::uint8_t { kFullGraph, kTrainOnly };
std::string_view to_string(FilterSource f);
FilterSource parse_filter_source(std::string_view name);

struct EvalConfig {
  FilterSource filter_source = FilterSource::kFullGraph;
  /// Empty means every entity is a candidate.
  std::vector<EntityId> candidates;
  std::size_t top_k = 100;
  /// Keep the filtered top-k predictions of every query.
  bool keep_top_k = false;
  unsigned threads = 0;
};

/// Rank of one scored candidate list. Masked candidates are ignored; the
/// truth is never masked. rank = 1 + #greater + ceil(#ties / 2), where ties
/// are other unmasked candidates scoring exactly the truth's score.
struct RankOutcome {
  std::size_t rank = 0;
  std::size_t greater = 0;
  std::size_t ties = 0;
  std::size_t candidate_count = 0;  // unmasked candidates, truth included
};
RankOutcome filtered_rank(std::span<const double> scores, std::size_t truth_pos,
                          std::span<const std::uint8_t> masked);

/// Positions of the k best unmasked scores, best first; ties by position.
std::vector<std::size_t> top_k_positions(std::span<const double> scores,
                                         std::span<const std::uint8_t> masked, std::size_t k);

struct RankRecord {
  Triple triple;
  std::size_t rank = 0;
  std::size_t candidate_count = 0;
  std::string model;
  TopologyRecord topology;
  CounterpartReport counterpart{};
};

/// Filtered rank of `truth` for query (h, r, ?). Candidates t' != truth with
/// (h, r, t') in `filter` are masked. An empty candidate list means all
/// entities; a custom list must contain the truth.
RankOutcome rank_tail(const EmbeddingModel& model, const IndexedGraph& filter, EntityId h,
                      RelationId r, EntityId truth, std::span<const EntityId> candidates = {});

struct EvalResult {
  std::vector<RankOutcome> ranks;
  /// Entity ids of the filtered top-k per query, when requested.
  std::vector<std::vector<EntityId>> top_k;
};

/// Ranks every query, in parallel over queries; output order is query order.
EvalResult evaluate(const EmbeddingModel& model, const IndexedGraph& filter,
                    std::span<const Triple> queries, const EvalConfig& config);

double mrr(std::span<const RankRecord> records);
double mrr(std::span<const RankOutcome> ranks);
double hits_at(std::span<const RankRecord> records, std::size_t k);

/// Per query, the fraction of its filtered top-k predictions that belong to
/// `tail_type_set` (a membership mask over entities).
std::vector<double> demixing(const EmbeddingModel& model, const IndexedGraph& filter,
                             std::span<const Triple> queries, const std::vector<bool>& tail_type_set,
                             std::size_t top_k, unsigned threads = 0);
/// Entities used as tails by `relations` anywhere in `g`.
std::vector<bool> tail_set_of(const IndexedGraph& g, std::span<const RelationId> relations);

struct RelationBias {
  RelationId relation = 0;
  std::size_t entities = 0;  // distinct entities seen in the top-k lists
  std::optional<double> spearman;
  std::string note;
};

/// For each relation, Spearman correlation between an entity's same-relation
/// in-degree in `g` and how often it appears in the top-k of that relation's
/// queries without being the truth. The population is every entity that
/// appears in at least one of those top-k lists; relations with fewer than
/// five such entities are skipped with a note.
std::vector<RelationBias> degree_bias(const IndexedGraph& g, std::span<const Triple> queries,
                                      std::span<const std::vector<EntityId>> top_k);

void write_rank_records_csv(const TripleStore& store, std::span<const RankRecord> records,
                            const std::filesystem::path& path);
std::vector<RankRecord> read_rank_records_csv(const TripleStore& store, const std::filesystem::path& path);

/// Overall MRR, hits@{1,3,10} and per-relation MRR.
std::string eval_summary_json(const TripleStore& store, std::span<const RankRecord> records);

}  // namespace kgtopo
