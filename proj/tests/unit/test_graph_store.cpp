#include <algorithm>
#include <set>

#include "doctest.h"
#include "kgtopo/graph_store.hpp"
#include "support/oracles.hpp"
#include "support/tempdir.hpp"

using namespace kgtopo;

namespace {

TripleStore store_of(std::initializer_list<Triple> triples, std::size_t entities, std::size_t relations) {
  TripleStore s;
  for (std::size_t e = 0; e < entities; ++e) s.entities.intern("e" + std::to_string(e));
  for (std::size_t r = 0; r < relations; ++r) s.relations.intern("r" + std::to_string(r));
  s.triples = triples;
  s.source_file.assign(s.triples.size(), 0);
  return s;
}

}  // namespace

TEST_CASE("load_triples drops an exact duplicate row and counts it") {
  testutil::TempDir dir;
  const auto p = dir.write("g.tsv", "a\tr\tb\nb\tr\tc\na\tr\tb\n");
  const auto s = load_triples(p);
  CHECK(s.num_triples() == 2);
  CHECK(s.duplicates_dropped == 1);
  CHECK(s.num_entities() == 3);
  CHECK(s.entities.label(0) == "a");
  CHECK(s.entities.label(2) == "c");
}

TEST_CASE("load_triples reports the line of a two-column row") {
  testutil::TempDir dir;
  const auto p = dir.write("g.tsv", "a\tr\tb\nA\tr1\n");
  try {
    load_triples(p);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("load_triples errors") {
  testutil::TempDir dir;
  CHECK_THROWS_AS(load_triples(dir.write("empty.tsv", "")), Error);
  CHECK_THROWS_AS(load_triples(dir / "missing.tsv"), Error);
}

TEST_CASE("csv input with header and custom column order") {
  testutil::TempDir dir;
  const auto p = dir.write("g.csv", "head,tail,rel\nx,y,likes\n\"q,1\",x,likes\n");
  LoadOptions opt = parse_column_order("htr");
  opt.format = TableFormat::kCsv;
  opt.has_header = true;
  const auto s = load_triples(p, opt);
  REQUIRE(s.num_triples() == 2);
  CHECK(s.relations.label(s.triples[0].relation) == "likes");
  CHECK(s.entities.label(s.triples[1].head) == "q,1");
  CHECK(s.entities.label(s.triples[1].tail) == "x");
}

TEST_CASE("several files share one vocabulary and remember their source") {
  testutil::TempDir dir;
  const std::vector<std::filesystem::path> files = {dir.write("a.tsv", "a\tr\tb\n"), dir.write("b.tsv", "b\tr\ta\na\tr\tb\n")};
  const auto s = load_triples(files);
  CHECK(s.num_triples() == 2);
  CHECK(s.source_file == std::vector<std::uint16_t>{0, 1});
  CHECK(s.duplicates_dropped == 1);
}

TEST_CASE("TSV round trip keeps ids and triples") {
  testutil::TempDir dir;
  const auto s = oracle::random_store(3, 40, 4, 200);
  write_triples_tsv(s, dir / "out.tsv");
  const auto back = load_triples(dir / "out.tsv");
  REQUIRE(back.num_triples() == s.num_triples());
  for (std::size_t i = 0; i < s.num_triples(); ++i) {
    const auto& a = s.triples[i];
    const auto& b = back.triples[i];
    CHECK(back.entities.label(b.head) == s.entities.label(a.head));
    CHECK(back.relations.label(b.relation) == s.relations.label(a.relation));
    CHECK(back.entities.label(b.tail) == s.entities.label(a.tail));
  }
  // First-appearance order of the reloaded store is a function of the file.
  const auto again = load_triples(dir / "out.tsv");
  CHECK(again.entities.labels() == back.entities.labels());
  CHECK(again.triples == back.triples);
}

TEST_CASE("entity types default to unknown") {
  testutil::TempDir dir;
  auto s = load_triples(dir.write("g.tsv", "a\tr\tb\nb\tr\tc\n"));
  load_entity_types(s, dir.write("types.tsv", "a\tGene\nc\tDrug\nzzz\tGene\n"));
  CHECK(s.entity_types == std::vector<std::string>{"Gene", "unknown", "Drug"});
}

TEST_CASE("dedup_reverse examples") {
  SUBCASE("reverse pair keeps the smaller tuple") {
    const auto out = dedup_reverse(store_of({{1, 0, 0}, {0, 0, 1}}, 2, 1));
    CHECK(out.triples == std::vector<Triple>{{0, 0, 1}});
  }
  SUBCASE("different relations are left alone") {
    const auto out = dedup_reverse(store_of({{0, 0, 1}, {1, 1, 0}}, 2, 2));
    CHECK(out.triples.size() == 2);
  }
  SUBCASE("self loops survive") {
    const auto out = dedup_reverse(store_of({{0, 0, 0}, {1, 0, 1}}, 2, 1));
    CHECK(out.triples.size() == 2);
  }
}

TEST_CASE("dedup_reverse matches a pairwise scan on planted reverse pairs") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto s = oracle::random_store(seed, 30, 3, 200);
    oracle::plant_patterns(s, seed + 100, 3);
    const auto out = dedup_reverse(s);

    std::vector<Triple> expected;
    for (const auto& a : s.triples) {
      bool drop = false;
      for (const auto& b : s.triples)
        if (a.head != a.tail && b.head == a.tail && b.tail == a.head && b.relation == a.relation &&
            std::tie(b.head, b.relation, b.tail) < std::tie(a.head, a.relation, a.tail))
          drop = true;
      if (!drop) expected.push_back(a);
    }
    CHECK(out.triples == expected);
    CHECK(dedup_reverse(out).triples == out.triples);  // idempotent
  }
}

TEST_CASE("single triple indexes") {
  const auto g = build_indexes(store_of({{0, 0, 1}}, 2, 1));
  REQUIRE(g.out_relations(0).size() == 1);
  CHECK(g.out_relations(0)[0] == 0);
  CHECK(g.out_tails(0)[0] == 1);
  REQUIRE(g.in_relations(1).size() == 1);
  CHECK(g.in_heads(1)[0] == 0);
  CHECK(g.contains({0, 0, 1}));
  CHECK_FALSE(g.contains({1, 0, 0}));
  CHECK(g.out_relations(1).empty());
}

TEST_CASE("indexes agree with a linear scan on random graphs") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto s = oracle::random_store(seed, 60, 5, 500);
    const auto g = build_indexes(s);
    std::size_t out_sum = 0, in_sum = 0;
    for (EntityId e = 0; e < s.num_entities(); ++e) {
      std::vector<std::pair<RelationId, EntityId>> out, in;
      std::set<EntityId> out_n, in_n;
      for (const auto& t : s.triples) {
        if (t.head == e) out.emplace_back(t.relation, t.tail), out_n.insert(t.tail);
        if (t.tail == e) in.emplace_back(t.relation, t.head), in_n.insert(t.head);
      }
      std::sort(out.begin(), out.end());
      std::sort(in.begin(), in.end());
      const auto orl = g.out_relations(e), ot = g.out_tails(e);
      REQUIRE(orl.size() == out.size());
      for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(orl[i] == out[i].first);
        CHECK(ot[i] == out[i].second);
      }
      const auto irl = g.in_relations(e), ih = g.in_heads(e);
      REQUIRE(irl.size() == in.size());
      for (std::size_t i = 0; i < in.size(); ++i) {
        CHECK(irl[i] == in[i].first);
        CHECK(ih[i] == in[i].second);
      }
      CHECK(std::vector<EntityId>(g.out_neighbors(e).begin(), g.out_neighbors(e).end()) ==
            std::vector<EntityId>(out_n.begin(), out_n.end()));
      CHECK(std::vector<EntityId>(g.in_neighbors(e).begin(), g.in_neighbors(e).end()) ==
            std::vector<EntityId>(in_n.begin(), in_n.end()));
      out_sum += out.size();
      in_sum += in.size();

      for (RelationId r = 0; r < s.num_relations(); ++r) {
        std::vector<EntityId> tails, heads;
        for (const auto& t : s.triples) {
          if (t.head == e && t.relation == r) tails.push_back(t.tail);
          if (t.tail == e && t.relation == r) heads.push_back(t.head);
        }
        std::sort(tails.begin(), tails.end());
        std::sort(heads.begin(), heads.end());
        CHECK(std::vector<EntityId>(g.tails(e, r).begin(), g.tails(e, r).end()) == tails);
        CHECK(std::vector<EntityId>(g.heads(e, r).begin(), g.heads(e, r).end()) == heads);
      }
    }
    CHECK(out_sum == s.num_triples());
    CHECK(in_sum == s.num_triples());

    for (std::size_t i = 0; i < s.num_triples(); ++i) {
      CHECK(g.contains(s.triples[i]));
      CHECK(g.index_of(s.triples[i]) == i);
      const auto& t = s.triples[i];
      std::vector<RelationId> rels;
      for (const auto& u : s.triples)
        if (u.head == t.head && u.tail == t.tail) rels.push_back(u.relation);
      std::sort(rels.begin(), rels.end());
      const auto between = g.relations_between(t.head, t.tail);
      CHECK(std::vector<RelationId>(between.begin(), between.end()) == rels);
    }
    // Membership is exact: probe random absent triples too.
    std::mt19937_64 gen(seed);
    const std::set<Triple> present(s.triples.begin(), s.triples.end());
    for (int i = 0; i < 500; ++i) {
      Triple t{static_cast<EntityId>(gen() % 60), static_cast<RelationId>(gen() % 5), static_cast<EntityId>(gen() % 60)};
      CHECK(g.contains(t) == present.contains(t));
    }
  }
}

TEST_CASE("graph stats") {
  const auto g = build_indexes(store_of({{0, 0, 1}}, 2, 1));
  const auto st = graph_stats(g);
  CHECK(st.num_entities == 2);
  CHECK(st.num_relations == 1);
  CHECK(st.num_triples == 1);
  CHECK(st.avg_node_degree == doctest::Approx(1.0));
  CHECK(to_json(st).find("\"avg_node_degree\"") != std::string::npos);
}
