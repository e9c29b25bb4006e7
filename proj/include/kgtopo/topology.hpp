#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgtopo/graph_store.hpp"

namespace kgtopo {

/// Distinct-neighbour degrees of one triple.
struct DegreeProfile {
  std::size_t head_out = 0;           // |{t' : (h, *, t')}|
  std::size_t tail_in = 0;            // |{h' : (h', *, t)}|
  std::size_t head_out_same_rel = 0;  // |{t' : (h, r, t')}|
  std::size_t tail_in_same_rel = 0;   // |{h' : (h', r, t)}|

  friend bool operator==(const DegreeProfile&, const DegreeProfile&) = default;
};

enum class EdgeCardinality : std::uint8_t { kOneToOne, kOneToMany, kManyToOne, kManyToMany };
inline constexpr std::array<EdgeCardinality, 4> kAllCardinalities = {
    EdgeCardinality::kOneToOne, EdgeCardinality::kOneToMany, EdgeCardinality::kManyToOne,
    EdgeCardinality::kManyToMany};

std::string_view to_string(EdgeCardinality c);
EdgeCardinality parse_cardinality(std::string_view name);

struct PatternFlags {
  bool is_symmetric = false;
  bool has_inference = false;
  bool has_inverse = false;
  bool has_composition = false;

  friend bool operator==(const PatternFlags&, const PatternFlags&) = default;
};

struct TopologyRecord {
  Triple triple;
  DegreeProfile degrees;
  EdgeCardinality cardinality = EdgeCardinality::kOneToOne;
  PatternFlags patterns;
  std::size_t composition_count = 0;
};

/// Throws InvalidArgument unless `triple` is in `g`.
DegreeProfile triple_degrees(const IndexedGraph& g, const Triple& triple);

/// deg_r(h) = 1 and deg_r(t) = 1 -> one-to-one; deg_r(h) = 1, deg_r(t) > 1 ->
/// many-to-one; deg_r(h) > 1, deg_r(t) = 1 -> one-to-many; else many-to-many.
EdgeCardinality edge_cardinality(const DegreeProfile& d);

PatternFlags pattern_flags(const IndexedGraph& g, const Triple& triple);

/// Number of distinct intermediates n not in {h, t} with (h, *, n) and (n, *, t).
std::size_t composition_count(const IndexedGraph& g, const Triple& triple);

/// Size of the intersection of two sorted ranges minus any of `exclude`.
/// Gallops through the longer range when the sizes are skewed.
std::size_t sorted_intersection_size(std::span<const EntityId> a, std::span<const EntityId> b,
                                     EntityId exclude_a, EntityId exclude_b);

/// Full per-triple report in store order. Deterministic for any thread count.
std::vector<TopologyRecord> compute_topology(const IndexedGraph& g, unsigned threads = 0);

struct PatternFractions {
  double symmetric = 0, inference = 0, inverse = 0, composition = 0;
};
PatternFractions pattern_fractions(std::span<const TopologyRecord> records);
PatternFractions dataset_pattern_fractions(const IndexedGraph& g, unsigned threads = 0);

/// Fractions indexed by static_cast<int>(EdgeCardinality).
std::array<double, 4> cardinality_histogram(std::span<const TopologyRecord> records);
std::array<double, 4> cardinality_histogram(const IndexedGraph& g, unsigned threads = 0);

/// Half-open degree bins [edge_i, edge_{i+1}); the last edge may be infinity.
class DegreeBins {
 public:
  static constexpr double kInf = std::numeric_limits<double>::infinity();
  /// {1, 2, 4, 11, 32, 101, inf}
  static DegreeBins log_default();

  /// Edges must be strictly increasing with the first edge <= 1.
  explicit DegreeBins(std::vector<double> edges);
  /// Parses a comma list such as "1,2,4,11,32,101,inf".
  static DegreeBins parse(std::string_view spec);

  std::size_t size() const { return edges_.size() - 1; }
  std::size_t bin_of(std::size_t degree) const;
  std::string label(std::size_t bin) const;
  const std::vector<double>& edges() const { return edges_; }

 private:
  std::vector<double> edges_;
};

/// Relative frequency over (deg_r(h) bin, deg_r(t) bin); cells[i][j].
struct DegreeHistogram2d {
  DegreeBins bins;
  std::vector<std::vector<double>> cells;
};
DegreeHistogram2d degree_histogram2d(std::span<const TopologyRecord> records, const DegreeBins& bins);

void write_topology_csv(const IndexedGraph& g, std::span<const TopologyRecord> records,
                        const std::filesystem::path& path);

/// Pattern fractions, cardinality fractions and the degree histogram as JSON.
std::string topology_summary_json(std::span<const TopologyRecord> records, const DegreeBins& bins);

}  // namespace kgtopo
