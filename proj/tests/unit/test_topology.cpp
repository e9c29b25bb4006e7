#include <numeric>

#include "doctest.h"
#include "kgtopo/csv.hpp"
#include "kgtopo/topology.hpp"
#include "support/oracles.hpp"
#include "support/tempdir.hpp"

using namespace kgtopo;

namespace {

IndexedGraph graph_of(std::vector<Triple> triples, std::size_t entities, std::size_t relations) {
  TripleStore s;
  for (std::size_t e = 0; e < entities; ++e) s.entities.intern("e" + std::to_string(e));
  for (std::size_t r = 0; r < relations; ++r) s.relations.intern("r" + std::to_string(r));
  s.triples = std::move(triples);
  s.source_file.assign(s.triples.size(), 0);
  return build_indexes(std::move(s));
}

}  // namespace

TEST_CASE("triple degrees") {
  CHECK(triple_degrees(graph_of({{0, 0, 1}}, 2, 1), {0, 0, 1}) == DegreeProfile{1, 1, 1, 1});
  // A tail reached through two relations counts once.
  CHECK(triple_degrees(graph_of({{0, 0, 1}, {0, 1, 1}}, 2, 2), {0, 0, 1}) == DegreeProfile{1, 1, 1, 1});
  CHECK_THROWS_AS(triple_degrees(graph_of({{0, 0, 1}}, 2, 1), {1, 0, 0}), InvalidArgument);
}

TEST_CASE("edge cardinality table") {
  CHECK(edge_cardinality({9, 9, 1, 1}) == EdgeCardinality::kOneToOne);
  CHECK(edge_cardinality({9, 9, 1, 5}) == EdgeCardinality::kManyToOne);
  CHECK(edge_cardinality({9, 9, 3, 1}) == EdgeCardinality::kOneToMany);
  CHECK(edge_cardinality({9, 9, 2, 2}) == EdgeCardinality::kManyToMany);
  for (auto c : kAllCardinalities) CHECK(parse_cardinality(to_string(c)) == c);
}

TEST_CASE("pattern flag examples") {
  const auto sym = pattern_flags(graph_of({{0, 0, 1}, {1, 0, 0}}, 2, 1), {0, 0, 1});
  CHECK(sym.is_symmetric);
  CHECK_FALSE(sym.has_inverse);

  const auto g = graph_of({{0, 0, 1}, {0, 1, 2}, {2, 0, 1}}, 3, 2);
  CHECK(pattern_flags(g, {0, 0, 1}).has_composition);
  CHECK(composition_count(g, {0, 0, 1}) == 1);

  const auto loop = graph_of({{0, 0, 0}}, 1, 1);
  CHECK_FALSE(pattern_flags(loop, {0, 0, 0}).is_symmetric);

  const auto none = graph_of({{0, 0, 1}, {2, 0, 3}}, 4, 1);
  CHECK(composition_count(none, {0, 0, 1}) == 0);
  CHECK_FALSE(pattern_flags(none, {0, 0, 1}).has_composition);
}

TEST_CASE("sorted intersection with exclusions, merge and gallop paths") {
  std::vector<EntityId> a = {1, 3, 5, 7, 9};
  std::vector<EntityId> b = {0, 3, 4, 5, 9, 10};
  CHECK(sorted_intersection_size(a, b, 99, 99) == 3);
  CHECK(sorted_intersection_size(a, b, 3, 9) == 1);
  std::vector<EntityId> big(1000);
  std::iota(big.begin(), big.end(), 0);
  std::vector<EntityId> small = {2, 500, 999, 1500};
  CHECK(sorted_intersection_size(small, big, 500, 99999) == 2);
  CHECK(sorted_intersection_size(big, small, 99999, 99999) == 3);
}

TEST_CASE("per-triple topology equals the brute-force oracle on random graphs") {
  std::size_t mismatches = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto s = oracle::random_store(seed, 25, 4, 120);
    oracle::plant_patterns(s, seed, 4);
    const auto g = build_indexes(s);
    const auto report = compute_topology(g, 1);
    REQUIRE(report.size() == g.num_triples());
    for (const auto& rec : report) {
      const auto o = oracle::topology(g.triples(), rec.triple);
      mismatches += !(rec.degrees == o.degrees) + (rec.cardinality != o.cardinality) +
                    !(rec.patterns == o.patterns) + (rec.composition_count != o.composition);
    }
  }
  CHECK(mismatches == 0);
}

TEST_CASE("pattern properties") {
  auto s = oracle::random_store(77, 20, 3, 150);
  oracle::plant_patterns(s, 78, 3);
  const auto g = build_indexes(s);
  for (const auto& t : g.triples()) {
    const Triple rev{t.tail, t.relation, t.head};
    if (t.head != t.tail && g.contains(rev))
      CHECK(pattern_flags(g, t).is_symmetric == pattern_flags(g, rev).is_symmetric);
    // has_inverse(h,r,t) with witness r' means (t,r',h) has inference via r.
    for (RelationId r2 : g.relations_between(t.tail, t.head)) {
      if (r2 == t.relation) continue;
      CHECK(pattern_flags(g, t).has_inverse);
      CHECK(pattern_flags(g, {t.tail, r2, t.head}).has_inverse);
    }
    const auto d = triple_degrees(g, t);
    CHECK(d.head_out >= 1);
    CHECK(d.tail_in >= 1);
    CHECK(d.head_out_same_rel >= 1);
    CHECK(d.tail_in_same_rel >= 1);
  }
}

TEST_CASE("parallel topology report is identical to the sequential one") {
  auto s = oracle::random_store(5, 200, 6, 3000);
  oracle::plant_patterns(s, 6, 6);
  const auto g = build_indexes(s);
  testutil::TempDir dir;
  write_topology_csv(g, compute_topology(g, 1), dir / "a.csv");
  write_topology_csv(g, compute_topology(g, 4), dir / "b.csv");
  CHECK(testutil::slurp(dir / "a.csv") == testutil::slurp(dir / "b.csv"));
  CsvTable t(dir / "a.csv");
  CHECK(t.header() == std::vector<std::string>{"h", "r", "t", "head_out", "tail_in", "head_out_same_rel",
                                                "tail_in_same_rel", "cardinality", "is_symmetric", "has_inference",
                                                "has_inverse", "has_composition", "composition_count"});
  CHECK(t.rows() == g.num_triples());
}

TEST_CASE("dataset fractions and histograms") {
  SUBCASE("reciprocal pairs are all symmetric") {
    const auto g = graph_of({{0, 0, 1}, {1, 0, 0}, {2, 0, 3}, {3, 0, 2}}, 4, 1);
    CHECK(dataset_pattern_fractions(g).symmetric == 1.0);
  }
  SUBCASE("single triple is one-to-one") {
    const auto h = cardinality_histogram(graph_of({{0, 0, 1}}, 2, 1));
    CHECK(h[static_cast<int>(EdgeCardinality::kOneToOne)] == 1.0);
  }
  SUBCASE("random graph recount") {
    auto s = oracle::random_store(9, 40, 3, 300);
    const auto g = build_indexes(s);
    const auto recs = compute_topology(g);
    const auto hist = cardinality_histogram(recs);
    CHECK(std::accumulate(hist.begin(), hist.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
    const auto bins = DegreeBins::log_default();
    const auto h2 = degree_histogram2d(recs, bins);
    std::vector<std::vector<double>> expect(bins.size(), std::vector<double>(bins.size(), 0.0));
    std::array<double, 4> card{};
    for (const auto& t : g.triples()) {
      const auto o = oracle::topology(g.triples(), t);
      auto bin = [&](std::size_t deg) {
        std::size_t b = 0;
        while (b + 1 < bins.edges().size() && static_cast<double>(deg) >= bins.edges()[b + 1]) ++b;
        return b;
      };
      expect[bin(o.degrees.head_out_same_rel)][bin(o.degrees.tail_in_same_rel)] += 1.0 / static_cast<double>(g.num_triples());
      card[static_cast<int>(o.cardinality)] += 1.0 / static_cast<double>(g.num_triples());
    }
    double total = 0;
    for (std::size_t i = 0; i < bins.size(); ++i)
      for (std::size_t j = 0; j < bins.size(); ++j) {
        CHECK(h2.cells[i][j] == doctest::Approx(expect[i][j]));
        total += h2.cells[i][j];
      }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    for (int c = 0; c < 4; ++c) CHECK(hist[c] == doctest::Approx(card[c]));
  }
}

TEST_CASE("degree bins") {
  const auto b = DegreeBins::log_default();
  CHECK(b.size() == 6);
  CHECK(b.bin_of(1) == 0);
  CHECK(b.bin_of(3) == 1);
  CHECK(b.bin_of(10) == 2);
  CHECK(b.bin_of(101) == 5);
  CHECK(b.bin_of(1000000) == 5);
  CHECK(DegreeBins::parse("1,2,4,11,32,101,inf").edges() == b.edges());
  CHECK_THROWS_AS(DegreeBins({1, 1, 3}), InvalidArgument);
  CHECK_THROWS_AS(DegreeBins({2, 3}), InvalidArgument);
  CHECK_THROWS_AS(DegreeBins::parse("1,x"), InvalidArgument);
}
