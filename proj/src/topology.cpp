#include "kgtopo/topology.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "json.hpp"
#include "kgtopo/csv.hpp"
#include "kgtopo/parallel.hpp"

namespace kgtopo {

std::string_view to_string(EdgeCardinality c) {
  switch (c) {
    case EdgeCardinality::kOneToOne: return "one-to-one";
    case EdgeCardinality::kOneToMany: return "one-to-many";
    case EdgeCardinality::kManyToOne: return "many-to-one";
    case EdgeCardinality::kManyToMany: return "many-to-many";
  }
  return "?";
}

EdgeCardinality parse_cardinality(std::string_view name) {
  for (auto c : kAllCardinalities)
    if (to_string(c) == name) return c;
  throw InvalidArgument("unknown cardinality '" + std::string(name) + "'");
}

namespace {

void require_member(const IndexedGraph& g, const Triple& triple) {
  if (!g.contains(triple))
    throw InvalidArgument("triple (" + std::to_string(triple.head) + "," +
                          std::to_string(triple.relation) + "," + std::to_string(triple.tail) +
                          ") is not in the graph");
}

}  // namespace

DegreeProfile triple_degrees(const IndexedGraph& g, const Triple& triple) {
  require_member(g, triple);
  DegreeProfile d;
  d.head_out = g.out_neighbors(triple.head).size();
  d.tail_in = g.in_neighbors(triple.tail).size();
  d.head_out_same_rel = g.tails(triple.head, triple.relation).size();
  d.tail_in_same_rel = g.heads(triple.tail, triple.relation).size();
  return d;
}

EdgeCardinality edge_cardinality(const DegreeProfile& d) {
  const bool one_head = d.head_out_same_rel <= 1;
  const bool one_tail = d.tail_in_same_rel <= 1;
  if (one_head && one_tail) return EdgeCardinality::kOneToOne;
  if (one_head) return EdgeCardinality::kManyToOne;
  if (one_tail) return EdgeCardinality::kOneToMany;
  return EdgeCardinality::kManyToMany;
}

namespace {

PatternFlags flags_unchecked(const IndexedGraph& g, const Triple& x) {
  PatternFlags f;
  f.is_symmetric = x.head != x.tail && g.contains(Triple{x.tail, x.relation, x.head});
  // relations_between(h, t) always contains r itself.
  f.has_inference = g.relations_between(x.head, x.tail).size() > 1;
  auto back = g.relations_between(x.tail, x.head);
  f.has_inverse = std::any_of(back.begin(), back.end(), [&](RelationId r) { return r != x.relation; });
  return f;
}

std::size_t gallop_count(std::span<const EntityId> small, std::span<const EntityId> large,
                         EntityId ex_a, EntityId ex_b) {
  std::size_t count = 0;
  auto it = large.begin();
  for (EntityId v : small) {
    if (v == ex_a || v == ex_b) continue;
    std::size_t step = 1;
    auto lo = it;
    auto hi = it;
    while (hi != large.end() && *hi < v) {
      lo = hi;
      const auto remaining = static_cast<std::size_t>(large.end() - hi);
      hi += static_cast<std::ptrdiff_t>(std::min(step, remaining));
      step *= 2;
    }
    it = std::lower_bound(lo, hi, v);
    if (it == large.end()) break;
    if (*it == v) ++count;
  }
  return count;
}

}  // namespace

std::size_t sorted_intersection_size(std::span<const EntityId> a, std::span<const EntityId> b,
                                     EntityId exclude_a, EntityId exclude_b) {
  if (a.size() > b.size()) std::swap(a, b);
  if (a.empty()) return 0;
  if (b.size() / a.size() >= 16) return gallop_count(a, b, exclude_a, exclude_b);
  std::size_t count = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      if (a[i] != exclude_a && a[i] != exclude_b) ++count;
      ++i;
      ++j;
    }
  }
  return count;
}

namespace {

std::size_t composition_unchecked(const IndexedGraph& g, const Triple& x) {
  return sorted_intersection_size(g.out_neighbors(x.head), g.in_neighbors(x.tail), x.head, x.tail);
}

}  // namespace

PatternFlags pattern_flags(const IndexedGraph& g, const Triple& triple) {
  require_member(g, triple);
  auto f = flags_unchecked(g, triple);
  f.has_composition = composition_unchecked(g, triple) > 0;
  return f;
}

std::size_t composition_count(const IndexedGraph& g, const Triple& triple) {
  require_member(g, triple);
  return composition_unchecked(g, triple);
}

std::vector<TopologyRecord> compute_topology(const IndexedGraph& g, unsigned threads) {
  const auto triples = g.triples();
  std::vector<TopologyRecord> out(triples.size());
  parallel_for(triples.size(), threads, [&](std::size_t i) {
    const Triple& x = triples[i];
    TopologyRecord rec;
    rec.triple = x;
    rec.degrees.head_out = g.out_neighbors(x.head).size();
    rec.degrees.tail_in = g.in_neighbors(x.tail).size();
    rec.degrees.head_out_same_rel = g.tails(x.head, x.relation).size();
    rec.degrees.tail_in_same_rel = g.heads(x.tail, x.relation).size();
    rec.cardinality = edge_cardinality(rec.degrees);
    rec.patterns = flags_unchecked(g, x);
    rec.composition_count = composition_unchecked(g, x);
    rec.patterns.has_composition = rec.composition_count > 0;
    out[i] = rec;
  });
  return out;
}

PatternFractions pattern_fractions(std::span<const TopologyRecord> records) {
  if (records.empty()) throw InvalidArgument("pattern fractions of an empty record set");
  std::size_t sym = 0, inf = 0, inv = 0, comp = 0;
  for (const auto& r : records) {
    sym += r.patterns.is_symmetric;
    inf += r.patterns.has_inference;
    inv += r.patterns.has_inverse;
    comp += r.patterns.has_composition;
  }
  const double n = static_cast<double>(records.size());
  return {sym / n, inf / n, inv / n, comp / n};
}

PatternFractions dataset_pattern_fractions(const IndexedGraph& g, unsigned threads) {
  return pattern_fractions(compute_topology(g, threads));
}

std::array<double, 4> cardinality_histogram(std::span<const TopologyRecord> records) {
  if (records.empty()) throw InvalidArgument("cardinality histogram of an empty record set");
  std::array<std::size_t, 4> counts{};
  for (const auto& r : records) ++counts[static_cast<int>(r.cardinality)];
  std::array<double, 4> out{};
  for (int i = 0; i < 4; ++i) out[i] = static_cast<double>(counts[i]) / static_cast<double>(records.size());
  return out;
}

std::array<double, 4> cardinality_histogram(const IndexedGraph& g, unsigned threads) {
  return cardinality_histogram(compute_topology(g, threads));
}

DegreeBins DegreeBins::log_default() { return DegreeBins({1, 2, 4, 11, 32, 101, kInf}); }

DegreeBins::DegreeBins(std::vector<double> edges) : edges_(std::move(edges)) {
  if (edges_.size() < 2) throw InvalidArgument("degree bins need at least two edges");
  if (!(edges_.front() <= 1.0)) throw InvalidArgument("first degree bin edge must be <= 1");
  for (std::size_t i = 1; i < edges_.size(); ++i) {
    if (std::isnan(edges_[i]) || !(edges_[i] > edges_[i - 1]))
      throw InvalidArgument("degree bin edges must be strictly increasing");
  }
}

DegreeBins DegreeBins::parse(std::string_view spec) {
  std::vector<double> edges;
  std::size_t start = 0;
  while (start <= spec.size()) {
    auto pos = spec.find(',', start);
    auto tok = spec.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
    while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
    if (tok == "inf" || tok == "Inf" || tok == "INF") {
      edges.push_back(kInf);
    } else {
      double v = 0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw InvalidArgument("bad degree bin edge '" + std::string(tok) + "'");
      edges.push_back(v);
    }
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return DegreeBins(std::move(edges));
}

std::size_t DegreeBins::bin_of(std::size_t degree) const {
  const double d = static_cast<double>(degree);
  auto it = std::upper_bound(edges_.begin(), edges_.end(), d);
  if (it == edges_.begin()) return 0;
  const auto idx = static_cast<std::size_t>(it - edges_.begin()) - 1;
  return std::min(idx, size() - 1);
}

std::string DegreeBins::label(std::size_t bin) const {
  auto edge = [](double v) { return std::isinf(v) ? std::string("inf") : format_double(v); };
  return "[" + edge(edges_.at(bin)) + "," + edge(edges_.at(bin + 1)) + ")";
}

DegreeHistogram2d degree_histogram2d(std::span<const TopologyRecord> records, const DegreeBins& bins) {
  if (records.empty()) throw InvalidArgument("degree histogram of an empty record set");
  DegreeHistogram2d h{bins, std::vector<std::vector<double>>(bins.size(), std::vector<double>(bins.size(), 0.0))};
  std::vector<std::vector<std::size_t>> counts(bins.size(), std::vector<std::size_t>(bins.size(), 0));
  for (const auto& r : records)
    ++counts[bins.bin_of(r.degrees.head_out_same_rel)][bins.bin_of(r.degrees.tail_in_same_rel)];
  const double n = static_cast<double>(records.size());
  for (std::size_t i = 0; i < bins.size(); ++i)
    for (std::size_t j = 0; j < bins.size(); ++j) h.cells[i][j] = static_cast<double>(counts[i][j]) / n;
  return h;
}

void write_topology_csv(const IndexedGraph& g, std::span<const TopologyRecord> records,
                        const std::filesystem::path& path) {
  CsvWriter w(path, {"h", "r", "t", "head_out", "tail_in", "head_out_same_rel", "tail_in_same_rel",
                     "cardinality", "is_symmetric", "has_inference", "has_inverse", "has_composition",
                     "composition_count"});
  const auto& s = g.store();
  for (const auto& r : records) {
    w.field(s.entities.label(r.triple.head))
        .field(s.relations.label(r.triple.relation))
        .field(s.entities.label(r.triple.tail))
        .field(r.degrees.head_out)
        .field(r.degrees.tail_in)
        .field(r.degrees.head_out_same_rel)
        .field(r.degrees.tail_in_same_rel)
        .field(to_string(r.cardinality))
        .field(r.patterns.is_symmetric)
        .field(r.patterns.has_inference)
        .field(r.patterns.has_inverse)
        .field(r.patterns.has_composition)
        .field(r.composition_count);
    w.end_row();
  }
}

std::string topology_summary_json(std::span<const TopologyRecord> records, const DegreeBins& bins) {
  nlohmann::ordered_json j;
  j["num_triples"] = records.size();
  const auto pf = pattern_fractions(records);
  j["pattern_fractions"] = {{"symmetric", pf.symmetric},
                            {"inference", pf.inference},
                            {"inverse", pf.inverse},
                            {"composition", pf.composition}};
  const auto card = cardinality_histogram(records);
  nlohmann::ordered_json cj;
  for (auto c : kAllCardinalities) cj[std::string(to_string(c))] = card[static_cast<int>(c)];
  j["cardinality_fractions"] = cj;
  const auto hist = degree_histogram2d(records, bins);
  nlohmann::ordered_json labels = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < bins.size(); ++i) labels.push_back(bins.label(i));
  j["degree_bins"] = labels;
  j["degree_histogram_same_rel"] = hist.cells;
  return j.dump(2);
}

}  // namespace kgtopo
