#include "kgtopo/eval.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <numeric>
#include <unordered_map>

#include "json.hpp"
#include "kgtopo/csv.hpp"
#include "kgtopo/parallel.hpp"
#include "kgtopo/stats.hpp"

namespace kgtopo {

std::string_view to_string(FilterSource f) {
  return f == FilterSource::kFullGraph ? "graph" : "train";
}

FilterSource parse_filter_source(std::string_view name) {
  if (name == "graph" || name == "full_graph") return FilterSource::kFullGraph;
  if (name == "train" || name == "train_only") return FilterSource::kTrainOnly;
  throw InvalidArgument("unknown filter source '" + std::string(name) + "' (expected graph or train)");
}

RankOutcome filtered_rank(std::span<const double> scores, std::size_t truth_pos,
                          std::span<const std::uint8_t> masked) {
  if (truth_pos >= scores.size()) throw InvalidArgument("truth position out of range");
  if (!masked.empty() && masked.size() != scores.size()) throw InvalidArgument("mask size mismatch");
  const double truth = scores[truth_pos];
  RankOutcome out;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i == truth_pos) continue;
    if (!masked.empty() && masked[i]) continue;
    ++out.candidate_count;
    if (scores[i] > truth) {
      ++out.greater;
    } else if (scores[i] == truth) {
      ++out.ties;
    }
  }
  ++out.candidate_count;
  out.rank = 1 + out.greater + (out.ties + 1) / 2;
  return out;
}

std::vector<std::size_t> top_k_positions(std::span<const double> scores,
                                         std::span<const std::uint8_t> masked, std::size_t k) {
  std::vector<std::size_t> idx;
  idx.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (masked.empty() || !masked[i]) idx.push_back(i);
  auto better = [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  };
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), better);
  idx.resize(k);
  return idx;
}

namespace {

struct QueryScratch {
  std::vector<double> scores;
  std::vector<std::uint8_t> mask;
};

// Scores one query and fills the mask; returns the truth position.
std::size_t score_query(const EmbeddingModel& model, const IndexedGraph& filter, EntityId h,
                        RelationId r, EntityId truth, std::span<const EntityId> candidates,
                        QueryScratch& s) {
  if (truth >= model.num_entities()) throw InvalidArgument("truth id out of range");
  if (candidates.empty()) {
    s.scores.resize(model.num_entities());
    s.mask.assign(model.num_entities(), 0);
    score_all_tails(model, h, r, s.scores);
    if (h < filter.num_entities() && r < filter.num_relations())
      for (EntityId t : filter.tails(h, r))
        if (t != truth) s.mask[t] = 1;
    return truth;
  }
  auto it = std::find(candidates.begin(), candidates.end(), truth);
  if (it == candidates.end()) throw InvalidArgument("truth tail is not in the candidate list");
  s.scores.resize(candidates.size());
  s.mask.assign(candidates.size(), 0);
  score_tails(model, h, r, candidates, s.scores);
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (candidates[i] != truth && filter.contains(Triple{h, r, candidates[i]})) s.mask[i] = 1;
  return static_cast<std::size_t>(it - candidates.begin());
}

}  // namespace

RankOutcome rank_tail(const EmbeddingModel& model, const IndexedGraph& filter, EntityId h,
                      RelationId r, EntityId truth, std::span<const EntityId> candidates) {
  QueryScratch s;
  const auto pos = score_query(model, filter, h, r, truth, candidates, s);
  return filtered_rank(s.scores, pos, s.mask);
}

EvalResult evaluate(const EmbeddingModel& model, const IndexedGraph& filter,
                    std::span<const Triple> queries, const EvalConfig& config) {
  if (config.top_k < 1) throw InvalidArgument("top_k must be >= 1");
  EvalResult result;
  result.ranks.resize(queries.size());
  if (config.keep_top_k) result.top_k.resize(queries.size());
  parallel_for(queries.size(), config.threads, [&](std::size_t i) {
    thread_local QueryScratch s;
    const Triple& q = queries[i];
    const auto pos = score_query(model, filter, q.head, q.relation, q.tail, config.candidates, s);
    result.ranks[i] = filtered_rank(s.scores, pos, s.mask);
    if (config.keep_top_k) {
      auto top = top_k_positions(s.scores, s.mask, config.top_k);
      auto& ids = result.top_k[i];
      ids.reserve(top.size());
      for (auto p : top)
        ids.push_back(config.candidates.empty() ? static_cast<EntityId>(p) : config.candidates[p]);
    }
  });
  return result;
}

double mrr(std::span<const RankOutcome> ranks) {
  if (ranks.empty()) throw InvalidArgument("MRR of an empty rank list");
  double sum = 0.0;
  for (const auto& r : ranks) sum += 1.0 / static_cast<double>(r.rank);
  return sum / static_cast<double>(ranks.size());
}

double mrr(std::span<const RankRecord> records) {
  if (records.empty()) throw InvalidArgument("MRR of an empty record list");
  double sum = 0.0;
  for (const auto& r : records) sum += 1.0 / static_cast<double>(r.rank);
  return sum / static_cast<double>(records.size());
}

double hits_at(std::span<const RankRecord> records, std::size_t k) {
  if (records.empty()) throw InvalidArgument("hits@k of an empty record list");
  std::size_t hits = 0;
  for (const auto& r : records) hits += r.rank <= k;
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

std::vector<bool> tail_set_of(const IndexedGraph& g, std::span<const RelationId> relations) {
  std::vector<bool> set(g.num_entities(), false);
  for (const auto& t : g.triples())
    if (std::find(relations.begin(), relations.end(), t.relation) != relations.end()) set[t.tail] = true;
  return set;
}

std::vector<double> demixing(const EmbeddingModel& model, const IndexedGraph& filter,
                             std::span<const Triple> queries, const std::vector<bool>& tail_type_set,
                             std::size_t top_k, unsigned threads) {
  if (top_k < 1 || top_k > model.num_entities()) throw InvalidArgument("demixing: k must be in [1, E]");
  if (std::find(tail_type_set.begin(), tail_type_set.end(), true) == tail_type_set.end())
    throw InvalidArgument("demixing: tail type set is empty");
  EvalConfig config;
  config.top_k = top_k;
  config.keep_top_k = true;
  config.threads = threads;
  const auto result = evaluate(model, filter, queries, config);
  std::vector<double> out(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto& top = result.top_k[i];
    std::size_t in_set = 0;
    for (EntityId e : top) in_set += e < tail_type_set.size() && tail_type_set[e];
    out[i] = top.empty() ? 0.0 : static_cast<double>(in_set) / static_cast<double>(top.size());
  }
  return out;
}

std::vector<RelationBias> degree_bias(const IndexedGraph& g, std::span<const Triple> queries,
                                      std::span<const std::vector<EntityId>> top_k) {
  if (top_k.size() != queries.size()) throw InvalidArgument("degree_bias: one top-k list per query required");
  std::map<RelationId, std::vector<std::size_t>> by_relation;
  for (std::size_t i = 0; i < queries.size(); ++i) by_relation[queries[i].relation].push_back(i);

  std::vector<RelationBias> out;
  for (const auto& [r, idx] : by_relation) {
    std::map<EntityId, std::size_t> wrong_picks;  // ordered for a stable population
    for (std::size_t i : idx) {
      for (EntityId e : top_k[i]) {
        auto& c = wrong_picks[e];
        if (e != queries[i].tail) ++c;
      }
    }
    RelationBias bias;
    bias.relation = r;
    bias.entities = wrong_picks.size();
    if (wrong_picks.size() < 5) {
      bias.note = "skipped: fewer than 5 distinct predicted entities";
      out.push_back(bias);
      continue;
    }
    std::vector<double> degree, count;
    for (const auto& [e, c] : wrong_picks) {
      degree.push_back(static_cast<double>(e < g.num_entities() ? g.heads(e, r).size() : 0));
      count.push_back(static_cast<double>(c));
    }
    bias.spearman = spearman(degree, count);
    if (!bias.spearman) bias.note = "undefined: constant ranks";
    out.push_back(bias);
  }
  return out;
}

void write_rank_records_csv(const TripleStore& store, std::span<const RankRecord> records,
                            const std::filesystem::path& path) {
  CsvWriter w(path, {"h", "r", "t", "model", "rank", "candidate_count", "head_out", "tail_in",
                     "head_out_same_rel", "tail_in_same_rel", "cardinality", "is_symmetric",
                     "has_inference", "has_inverse", "has_composition", "composition_count",
                     "cp_symmetric", "cp_inference", "cp_inverse"});
  for (const auto& r : records) {
    const auto& tp = r.topology;
    w.field(store.entities.label(r.triple.head))
        .field(store.relations.label(r.triple.relation))
        .field(store.entities.label(r.triple.tail))
        .field(r.model)
        .field(r.rank)
        .field(r.candidate_count)
        .field(tp.degrees.head_out)
        .field(tp.degrees.tail_in)
        .field(tp.degrees.head_out_same_rel)
        .field(tp.degrees.tail_in_same_rel)
        .field(to_string(tp.cardinality))
        .field(tp.patterns.is_symmetric)
        .field(tp.patterns.has_inference)
        .field(tp.patterns.has_inverse)
        .field(tp.patterns.has_composition)
        .field(tp.composition_count);
    for (auto s : r.counterpart) w.field(to_string(s));
    w.end_row();
  }
}

namespace {

std::size_t to_size(const std::string& s, const std::filesystem::path& path, std::size_t line) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError(path.string(), line, "expected an integer, got '" + s + "'");
  return v;
}

}  // namespace

std::vector<RankRecord> read_rank_records_csv(const TripleStore& store, const std::filesystem::path& path) {
  CsvTable t(path);
  const auto c = [&](std::string_view n) { return t.column(n); };
  const std::size_t ch = c("h"), cr = c("r"), ct = c("t"), cm = c("model"), crank = c("rank"),
                    ccand = c("candidate_count"), cho = c("head_out"), cti = c("tail_in"),
                    chs = c("head_out_same_rel"), cts = c("tail_in_same_rel"), ccard = c("cardinality"),
                    csym = c("is_symmetric"), cinf = c("has_inference"), cinv = c("has_inverse"),
                    ccomp = c("has_composition"), cccount = c("composition_count"),
                    cps = c("cp_symmetric"), cpi = c("cp_inference"), cpv = c("cp_inverse");
  std::vector<RankRecord> out;
  out.reserve(t.rows());
  for (std::size_t row = 0; row < t.rows(); ++row) {
    const std::size_t line = row + 2;
    auto h = store.entities.find(t.at(row, ch));
    auto r = store.relations.find(t.at(row, cr));
    auto tl = store.entities.find(t.at(row, ct));
    if (!h || !r || !tl) throw ParseError(path.string(), line, "triple labels not in dataset");
    RankRecord rec;
    rec.triple = {static_cast<EntityId>(*h), static_cast<RelationId>(*r), static_cast<EntityId>(*tl)};
    rec.model = t.at(row, cm);
    rec.rank = to_size(t.at(row, crank), path, line);
    rec.candidate_count = to_size(t.at(row, ccand), path, line);
    auto& tp = rec.topology;
    tp.triple = rec.triple;
    tp.degrees.head_out = to_size(t.at(row, cho), path, line);
    tp.degrees.tail_in = to_size(t.at(row, cti), path, line);
    tp.degrees.head_out_same_rel = to_size(t.at(row, chs), path, line);
    tp.degrees.tail_in_same_rel = to_size(t.at(row, cts), path, line);
    tp.cardinality = parse_cardinality(t.at(row, ccard));
    tp.patterns.is_symmetric = t.at(row, csym) == "1";
    tp.patterns.has_inference = t.at(row, cinf) == "1";
    tp.patterns.has_inverse = t.at(row, cinv) == "1";
    tp.patterns.has_composition = t.at(row, ccomp) == "1";
    tp.composition_count = to_size(t.at(row, cccount), path, line);
    rec.counterpart = {parse_counterpart_status(t.at(row, cps)), parse_counterpart_status(t.at(row, cpi)),
                       parse_counterpart_status(t.at(row, cpv))};
    if (rec.rank < 1 || rec.rank > rec.candidate_count)
      throw ParseError(path.string(), line, "rank outside [1, candidate_count]");
    out.push_back(std::move(rec));
  }
  return out;
}

std::string eval_summary_json(const TripleStore& store, std::span<const RankRecord> records) {
  nlohmann::ordered_json j;
  j["num_queries"] = records.size();
  j["mrr"] = mrr(records);
  j["hits@1"] = hits_at(records, 1);
  j["hits@3"] = hits_at(records, 3);
  j["hits@10"] = hits_at(records, 10);
  std::map<RelationId, std::pair<std::size_t, double>> per_rel;
  for (const auto& r : records) {
    auto& [n, sum] = per_rel[r.triple.relation];
    ++n;
    sum += 1.0 / static_cast<double>(r.rank);
  }
  nlohmann::ordered_json rel = nlohmann::ordered_json::object();
  for (const auto& [r, v] : per_rel)
    rel[store.relations.label(r)] = {{"count", v.first}, {"mrr", v.second / static_cast<double>(v.first)}};
  j["per_relation_mrr"] = rel;
  return j.dump(2);
}

}  // namespace kgtopo
