#include "kgtopo/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "kgtopo/csv.hpp"
#include "kgtopo/rng.hpp"

namespace kgtopo {

namespace {

constexpr std::array<std::string_view, 7> kKeyNames = {
    "cardinality",           "degree_bins",          "symmetric_counterpart", "inference_counterpart",
    "inverse_counterpart",   "composition",          "relation_type"};

struct KeyPart {
  std::size_t order;
  std::string dimension;
  std::string value;
};

void degree_parts(const RankRecord& rec, const DegreeBins& bins, std::vector<KeyPart>& out) {
  const std::size_t hb = bins.bin_of(rec.topology.degrees.head_out_same_rel);
  const std::size_t tb = bins.bin_of(rec.topology.degrees.tail_in_same_rel);
  out.push_back({hb, "head_out_same_rel_bin", bins.label(hb)});
  out.push_back({tb, "tail_in_same_rel_bin", bins.label(tb)});
}

std::vector<KeyPart> key_of(const RankRecord& rec, StratifyKey key, const StratifyOptions& opt) {
  std::vector<KeyPart> parts;
  switch (key) {
    case StratifyKey::kCardinality: {
      const auto c = rec.topology.cardinality;
      parts.push_back({static_cast<std::size_t>(c), "cardinality", std::string(to_string(c))});
      break;
    }
    case StratifyKey::kDegreeBins:
      degree_parts(rec, opt.bins, parts);
      return parts;
    case StratifyKey::kSymmetricCounterpart:
    case StratifyKey::kInferenceCounterpart:
    case StratifyKey::kInverseCounterpart: {
      const int p = static_cast<int>(key) - static_cast<int>(StratifyKey::kSymmetricCounterpart);
      const auto s = rec.counterpart[p];
      parts.push_back({static_cast<std::size_t>(s), std::string(kKeyNames[static_cast<int>(key)]),
                       std::string(to_string(s))});
      break;
    }
    case StratifyKey::kComposition: {
      const bool c = rec.topology.patterns.has_composition;
      parts.push_back({c ? 1u : 0u, "composition", c ? "present" : "absent"});
      break;
    }
    case StratifyKey::kRelationType: {
      const RelationId r = rec.triple.relation;
      std::string label = opt.store ? opt.store->relations.label(r) : std::to_string(r);
      parts.push_back({static_cast<std::size_t>(r), "relation", std::move(label)});
      break;
    }
  }
  if (opt.cross_degree_bins) degree_parts(rec, opt.bins, parts);
  return parts;
}

struct Accum {
  std::vector<std::pair<std::string, std::string>> key;
  std::size_t count = 0;
  double rr = 0.0;
  std::map<std::string, std::pair<std::size_t, double>> models;
};

std::optional<double> maybe_spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() < 2) return std::nullopt;
  return spearman(x, y);
}

}  // namespace

std::string_view to_string(StratifyKey k) { return kKeyNames.at(static_cast<std::size_t>(k)); }

StratifyKey parse_stratify_key(std::string_view name) {
  for (std::size_t i = 0; i < kKeyNames.size(); ++i)
    if (kKeyNames[i] == name) return static_cast<StratifyKey>(i);
  throw InvalidArgument("unknown stratify key: " + std::string(name));
}

std::vector<StratumReport> stratify(std::span<const RankRecord> records, StratifyKey key,
                                    const StratifyOptions& options) {
  std::map<std::vector<std::size_t>, Accum> groups;
  for (const auto& rec : records) {
    if (rec.rank == 0) throw InvalidArgument("rank record with rank 0");
    const auto parts = key_of(rec, key, options);
    std::vector<std::size_t> order;
    order.reserve(parts.size());
    for (const auto& p : parts) order.push_back(p.order);
    auto& acc = groups[order];
    if (acc.key.empty())
      for (const auto& p : parts) acc.key.emplace_back(p.dimension, p.value);
    const double rr = 1.0 / static_cast<double>(rec.rank);
    ++acc.count;
    acc.rr += rr;
    auto& m = acc.models[rec.model];
    ++m.first;
    m.second += rr;
  }
  std::vector<StratumReport> out;
  out.reserve(groups.size());
  for (auto& [order, acc] : groups) {
    StratumReport s;
    s.key = std::move(acc.key);
    s.count = acc.count;
    s.mrr = acc.rr / static_cast<double>(acc.count);
    for (const auto& [model, m] : acc.models) s.per_model[model] = {m.first, m.second / static_cast<double>(m.first)};
    out.push_back(std::move(s));
  }
  return out;
}

void write_strata_csv(std::span<const StratumReport> strata, const std::filesystem::path& path) {
  std::vector<std::string> header;
  if (!strata.empty())
    for (const auto& [dim, value] : strata.front().key) header.push_back(dim);
  for (const char* c : {"model", "count", "mrr"}) header.emplace_back(c);
  CsvWriter w(path, header);
  for (const auto& s : strata) {
    auto row = [&](std::string_view model, std::size_t count, double mrr) {
      for (const auto& kv : s.key) w.field(kv.second);
      w.field(model).field(count).field(mrr);
      w.end_row();
    };
    row("ALL", s.count, s.mrr);
    for (const auto& [model, m] : s.per_model) row(model, m.count, m.mrr);
  }
}

RelationLevelReport relation_level_aggregate(std::span<const RankRecord> records,
                                             std::span<const TopologyRecord> topology) {
  std::map<RelationId, std::pair<std::size_t, double>> rr;
  for (const auto& rec : records) {
    if (rec.rank == 0) throw InvalidArgument("rank record with rank 0");
    auto& a = rr[rec.triple.relation];
    ++a.first;
    a.second += 1.0 / static_cast<double>(rec.rank);
  }
  std::map<RelationId, RelationLevelRow> rows;
  for (const auto& t : topology) {
    if (!rr.contains(t.triple.relation)) continue;
    auto& row = rows[t.triple.relation];
    ++row.triples;
    row.pattern_freq[0] += t.patterns.is_symmetric;
    row.pattern_freq[1] += t.patterns.has_inference;
    row.pattern_freq[2] += t.patterns.has_inverse;
    row.pattern_freq[3] += t.patterns.has_composition;
    row.cardinality_freq[static_cast<int>(t.cardinality)] += 1.0;
  }
  RelationLevelReport report;
  for (const auto& [r, a] : rr) {
    auto it = rows.find(r);
    if (it == rows.end())
      throw InvalidArgument("relation " + std::to_string(r) + " has ranked triples but no topology records");
    RelationLevelRow row = it->second;
    row.relation = r;
    row.records = a.first;
    row.avg_mrr = a.second / static_cast<double>(a.first);
    const double n = static_cast<double>(row.triples);
    for (auto& f : row.pattern_freq) f /= n;
    for (auto& f : row.cardinality_freq) f /= n;
    report.rows.push_back(row);
  }

  std::vector<double> mrrs;
  for (const auto& row : report.rows) mrrs.push_back(row.avg_mrr);
  auto column = [&](auto get) {
    std::vector<double> v;
    for (const auto& row : report.rows) v.push_back(get(row));
    return maybe_spearman(mrrs, v);
  };
  const std::array<std::string_view, 4> pattern_names = {"symmetric", "inference", "inverse", "composition"};
  for (int i = 0; i < 4; ++i)
    report.correlations.emplace_back(std::string(pattern_names[i]),
                                     column([i](const RelationLevelRow& r) { return r.pattern_freq[i]; }));
  for (auto c : kAllCardinalities) {
    const int i = static_cast<int>(c);
    report.correlations.emplace_back(std::string(to_string(c)),
                                     column([i](const RelationLevelRow& r) { return r.cardinality_freq[i]; }));
  }
  return report;
}

std::vector<std::pair<std::string, std::optional<double>>> triple_level_correlations(
    std::span<const RankRecord> records) {
  std::vector<double> rr, ho, ti, hs, ts;
  for (const auto& rec : records) {
    if (rec.rank == 0) throw InvalidArgument("rank record with rank 0");
    rr.push_back(1.0 / static_cast<double>(rec.rank));
    const auto& d = rec.topology.degrees;
    ho.push_back(static_cast<double>(d.head_out));
    ti.push_back(static_cast<double>(d.tail_in));
    hs.push_back(static_cast<double>(d.head_out_same_rel));
    ts.push_back(static_cast<double>(d.tail_in_same_rel));
  }
  return {{"head_out", maybe_spearman(rr, ho)},
          {"tail_in", maybe_spearman(rr, ti)},
          {"head_out_same_rel", maybe_spearman(rr, hs)},
          {"tail_in_same_rel", maybe_spearman(rr, ts)}};
}

InteractionStats interaction_report(const IndexedGraph& g, std::span<const TopologyRecord> topology,
                                    std::string_view head_type, std::string_view tail_type) {
  const auto& types = g.store().entity_types;
  if (types.empty()) throw InvalidArgument("entity types were not loaded");
  if (topology.size() != g.num_triples()) throw InvalidArgument("topology does not match the graph");
  for (std::string_view t : {head_type, tail_type})
    if (std::find(types.begin(), types.end(), t) == types.end())
      throw InvalidArgument("unknown entity type: " + std::string(t));

  InteractionStats s;
  s.head_type = head_type;
  s.tail_type = tail_type;
  std::vector<TopologyRecord> selected;
  std::vector<double> hs, ts;
  std::set<EntityId> tails;
  for (const auto& rec : topology) {
    if (types[rec.triple.head] != head_type || types[rec.triple.tail] != tail_type) continue;
    selected.push_back(rec);
    hs.push_back(static_cast<double>(rec.degrees.head_out_same_rel));
    ts.push_back(static_cast<double>(rec.degrees.tail_in_same_rel));
    tails.insert(rec.triple.tail);
  }
  s.triples = selected.size();
  s.unique_tails = tails.size();
  if (!selected.empty()) {
    s.median_head_out_same_rel = median(hs);
    s.median_tail_in_same_rel = median(ts);
    s.patterns = pattern_fractions(selected);
  }
  return s;
}

LabelNormalizer LabelNormalizer::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  std::unordered_map<std::string, std::string> mapping;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
      throw ParseError(path.string(), n, "expected two tab-separated columns");
    auto [it, fresh] = mapping.emplace(line.substr(0, tab), line.substr(tab + 1));
    if (!fresh && it->second != line.substr(tab + 1))
      throw ParseError(path.string(), n, "label mapped twice: " + it->first);
  }
  return LabelNormalizer(std::move(mapping));
}

const std::string& LabelNormalizer::operator()(const std::string& label) const {
  auto it = mapping_.find(label);
  return it == mapping_.end() ? label : it->second;
}

namespace {

void check_collisions(const Vocabulary& vocab, const LabelNormalizer& norm, std::string_view what,
                      std::string_view store_name) {
  std::unordered_map<std::string, std::size_t> seen;
  std::ostringstream msg;
  std::size_t bad = 0;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    auto [it, fresh] = seen.emplace(norm(vocab.label(i)), i);
    if (!fresh) {
      if (bad++ < 10)
        msg << " '" << vocab.label(it->second) << "' and '" << vocab.label(i) << "' -> '" << it->first << "';";
    }
  }
  if (bad)
    throw Error(std::to_string(bad) + " " + std::string(what) + " collisions in " + std::string(store_name) +
                ":" + msg.str());
}

std::string triple_key(const TripleStore& s, const Triple& t, const LabelNormalizer& norm) {
  std::string k = norm(s.entities.label(t.head));
  k += '\t';
  k += norm(s.relations.label(t.relation));
  k += '\t';
  k += norm(s.entities.label(t.tail));
  return k;
}

}  // namespace

MatchTable match_shared_triples(const TripleStore& a, const TripleStore& b, const LabelNormalizer& normalizer) {
  check_collisions(a.entities, normalizer, "entity", "first graph");
  check_collisions(b.entities, normalizer, "entity", "second graph");
  check_collisions(a.relations, normalizer, "relation", "first graph");
  check_collisions(b.relations, normalizer, "relation", "second graph");

  std::unordered_map<std::string, std::size_t> in_b;
  in_b.reserve(b.num_triples());
  for (std::size_t i = 0; i < b.num_triples(); ++i) in_b.emplace(triple_key(b, b.triples[i], normalizer), i);

  MatchTable table;
  std::map<std::string, RelationMatch> rel;
  for (const auto& t : b.triples) ++rel[normalizer(b.relations.label(t.relation))].triples_b;
  for (std::size_t i = 0; i < a.num_triples(); ++i) {
    auto& rm = rel[normalizer(a.relations.label(a.triples[i].relation))];
    ++rm.triples_a;
    auto it = in_b.find(triple_key(a, a.triples[i], normalizer));
    if (it != in_b.end()) {
      table.matches.emplace_back(i, it->second);
      ++rm.matched;
    }
  }
  for (auto& [label, rm] : rel) {
    rm.relation = label;
    rm.rate_a = rm.triples_a ? static_cast<double>(rm.matched) / static_cast<double>(rm.triples_a) : 0.0;
    rm.rate_b = rm.triples_b ? static_cast<double>(rm.matched) / static_cast<double>(rm.triples_b) : 0.0;
    table.relations.push_back(rm);
  }
  return table;
}

CaseStudySplit case_study_split(const TripleStore& a, const TripleStore& b, const MatchTable& match,
                                const LabelNormalizer& normalizer, std::string_view relation,
                                double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw InvalidArgument("case-study test fraction must be in (0, 1)");
  std::vector<std::size_t> shared;
  for (std::size_t m = 0; m < match.matches.size(); ++m) {
    const auto& t = a.triples[match.matches[m].first];
    if (normalizer(a.relations.label(t.relation)) == relation) shared.push_back(m);
  }
  if (shared.empty()) throw InvalidArgument("no shared triples for relation " + std::string(relation));
  const std::size_t n_test =
      static_cast<std::size_t>(std::llround(static_cast<double>(shared.size()) * test_fraction));
  if (n_test == 0 || n_test >= shared.size())
    throw InvalidArgument("relation " + std::string(relation) + " has too few shared triples (" +
                          std::to_string(shared.size()) + ") for a train/test split");

  const auto perm = seeded_permutation(shared.size(), seed, streams::kCaseStudy);
  CaseStudySplit out;
  out.relation = relation;
  const SplitRatios ratios{1.0 - test_fraction, 0.0, test_fraction};
  out.split_a = {std::vector<SplitLabel>(a.num_triples(), SplitLabel::kTrain), ratios, seed};
  out.split_b = {std::vector<SplitLabel>(b.num_triples(), SplitLabel::kTrain), ratios, seed};
  for (std::size_t i = 0; i < n_test; ++i) {
    const std::size_t m = shared[perm[i]];
    out.test_matches.push_back(m);
    out.split_a.labels[match.matches[m].first] = SplitLabel::kTest;
    out.split_b.labels[match.matches[m].second] = SplitLabel::kTest;
  }
  std::sort(out.test_matches.begin(), out.test_matches.end());

  std::set<EntityId> seen;
  for (std::size_t m : shared) {
    const EntityId ta = a.triples[match.matches[m].first].tail;
    if (seen.insert(ta).second) {
      out.candidates_a.push_back(ta);
      out.candidates_b.push_back(b.triples[match.matches[m].second].tail);
    }
  }
  return out;
}

RelationGraphStats relation_graph_stats(const IndexedGraph& g, std::span<const TopologyRecord> topology,
                                        RelationId relation, double matching_rate, std::size_t test_triples) {
  RelationGraphStats s;
  s.matching_rate = matching_rate;
  s.test_triples = test_triples;
  std::set<EntityId> heads, tails;
  std::vector<double> ho, hs, hr, ti, ts, tr;
  std::size_t inv = 0, inf = 0, comp = 0;
  auto distinct = [](std::span<const RelationId> rels) {
    // Adjacency is sorted by relation.
    std::size_t n = 0;
    for (std::size_t i = 0; i < rels.size(); ++i) n += (i == 0 || rels[i] != rels[i - 1]);
    return static_cast<double>(n);
  };
  for (const auto& rec : topology) {
    if (rec.triple.relation != relation) continue;
    ++s.relation_triples;
    heads.insert(rec.triple.head);
    tails.insert(rec.triple.tail);
    ho.push_back(static_cast<double>(rec.degrees.head_out));
    hs.push_back(static_cast<double>(rec.degrees.head_out_same_rel));
    hr.push_back(distinct(g.out_relations(rec.triple.head)));
    ti.push_back(static_cast<double>(rec.degrees.tail_in));
    ts.push_back(static_cast<double>(rec.degrees.tail_in_same_rel));
    tr.push_back(distinct(g.in_relations(rec.triple.tail)));
    inv += rec.patterns.has_inverse;
    inf += rec.patterns.has_inference;
    comp += rec.patterns.has_composition;
  }
  if (s.relation_triples == 0) throw InvalidArgument("relation has no triples in this graph");
  s.unique_heads = heads.size();
  s.unique_tails = tails.size();
  s.median_head_out = median(ho);
  s.median_head_out_same_rel = median(hs);
  s.median_unique_out_relations = median(hr);
  s.median_tail_in = median(ti);
  s.median_tail_in_same_rel = median(ts);
  s.median_unique_in_relations = median(tr);
  const double n = static_cast<double>(s.relation_triples);
  s.has_inverse = static_cast<double>(inv) / n;
  s.has_inference = static_cast<double>(inf) / n;
  s.has_composition = static_cast<double>(comp) / n;
  return s;
}

}  // namespace kgtopo
