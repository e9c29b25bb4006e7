#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kgtopo/eval.hpp"
#include "kgtopo/split.hpp"
#include "kgtopo/stats.hpp"
#include "kgtopo/topology.hpp"

namespace kgtopo {

enum class StratifyKey : std::uint8_t {
  kCardinality,
  kDegreeBins,
  kSymmetricCounterpart,
  kInferenceCounterpart,
  kInverseCounterpart,
  kComposition,
  kRelationType,
};
std::string_view to_string(StratifyKey k);
/// cardinality | degree_bins | symmetric_counterpart | inference_counterpart |
/// inverse_counterpart | composition | relation_type
StratifyKey parse_stratify_key(std::string_view name);

struct StratumStats {
  std::size_t count = 0;
  double mrr = 0.0;
};

struct StratumReport {
  /// (dimension, value) pairs, e.g. {"cardinality", "one-to-many"}.
  std::vector<std::pair<std::string, std::string>> key;
  std::size_t count = 0;
  double mrr = 0.0;
  std::map<std::string, StratumStats> per_model;
};

struct StratifyOptions {
  /// Also split every stratum by (deg_r(h) bin, deg_r(t) bin).
  bool cross_degree_bins = false;
  DegreeBins bins = DegreeBins::log_default();
  /// Labels relation strata when set; otherwise relation ids are used.
  const TripleStore* store = nullptr;
};

/// Partitions the records by key; strata are ordered by key.
std::vector<StratumReport> stratify(std::span<const RankRecord> records, StratifyKey key,
                                    const StratifyOptions& options = {});

void write_strata_csv(std::span<const StratumReport> strata, const std::filesystem::path& path);

struct RelationLevelRow {
  RelationId relation = 0;
  std::size_t records = 0;
  std::size_t triples = 0;
  double avg_mrr = 0.0;
  std::array<double, 4> pattern_freq{};      // symmetric, inference, inverse, composition
  std::array<double, 4> cardinality_freq{};  // indexed by EdgeCardinality
};

struct RelationLevelReport {
  std::vector<RelationLevelRow> rows;
  /// Spearman rho between avg MRR and each frequency column across
  /// relations; nullopt when undefined (fewer than two relations or a
  /// constant column).
  std::vector<std::pair<std::string, std::optional<double>>> correlations;
};

/// Per relation with at least one record: mean reciprocal rank of its
/// records and the frequency of each pattern and cardinality among all of
/// its triples in `topology`.
RelationLevelReport relation_level_aggregate(std::span<const RankRecord> records,
                                             std::span<const TopologyRecord> topology);

/// Spearman rho between per-triple reciprocal rank and each degree column.
std::vector<std::pair<std::string, std::optional<double>>> triple_level_correlations(
    std::span<const RankRecord> records);

struct InteractionStats {
  std::string head_type, tail_type;
  std::size_t triples = 0;
  double median_head_out_same_rel = 0.0;
  double median_tail_in_same_rel = 0.0;
  std::size_t unique_tails = 0;
  PatternFractions patterns;
};

/// Statistics over triples whose head and tail carry the given types.
/// `topology` must be the per-triple report of `g`, in store order.
InteractionStats interaction_report(const IndexedGraph& g, std::span<const TopologyRecord> topology,
                                    std::string_view head_type, std::string_view tail_type);

/// Maps labels into a shared namespace; unmapped labels map to themselves.
class LabelNormalizer {
 public:
  LabelNormalizer() = default;
  explicit LabelNormalizer(std::unordered_map<std::string, std::string> mapping)
      : mapping_(std::move(mapping)) {}
  /// Two-column TSV: source label, normalized label.
  static LabelNormalizer load(const std::filesystem::path& path);
  const std::string& operator()(const std::string& label) const;

 private:
  std::unordered_map<std::string, std::string> mapping_;
};

struct RelationMatch {
  std::string relation;  // normalized label
  std::size_t triples_a = 0, triples_b = 0, matched = 0;
  double rate_a = 0.0, rate_b = 0.0;
};

struct MatchTable {
  /// (triple index in A, triple index in B) for every shared triple, in A order.
  std::vector<std::pair<std::size_t, std::size_t>> matches;
  /// Every normalized relation present in either graph, sorted by label.
  std::vector<RelationMatch> relations;
};

/// Exact (h, r, t) matches after normalization. Throws Error listing the
/// offending labels when two distinct labels of one store normalize to the
/// same key.
MatchTable match_shared_triples(const TripleStore& a, const TripleStore& b,
                                const LabelNormalizer& normalizer);

struct CaseStudySplit {
  std::string relation;
  SplitAssignment split_a, split_b;
  /// Indices into MatchTable::matches chosen as test triples.
  std::vector<std::size_t> test_matches;
  /// Tails of all shared triples of the relation, as ids of each graph;
  /// position i names the same entity in both lists.
  std::vector<EntityId> candidates_a, candidates_b;
};

/// Shuffles the shared triples of `relation` with the seeded permutation
/// and takes the first round(n * test_fraction) as the common test set;
/// every other triple of each graph is train.
CaseStudySplit case_study_split(const TripleStore& a, const TripleStore& b, const MatchTable& match,
                                const LabelNormalizer& normalizer, std::string_view relation,
                                double test_fraction, std::uint64_t seed);

/// Per-relation statistics of one graph in a twin-graph comparison.
struct RelationGraphStats {
  std::size_t relation_triples = 0;
  double matching_rate = 0.0;
  std::size_t test_triples = 0;
  std::size_t unique_heads = 0, unique_tails = 0;
  double median_head_out = 0, median_head_out_same_rel = 0, median_unique_out_relations = 0;
  double median_tail_in = 0, median_tail_in_same_rel = 0, median_unique_in_relations = 0;
  double has_inverse = 0, has_inference = 0, has_composition = 0;
};

/// Medians are over the relation's triples; fractions are of its triples.
RelationGraphStats relation_graph_stats(const IndexedGraph& g, std::span<const TopologyRecord> topology,
                                        RelationId relation, double matching_rate,
                                        std::size_t test_triples);

}  // namespace kgtopo
