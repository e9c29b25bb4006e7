#include "kgtopo/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "kgtopo/analysis.hpp"
#include "kgtopo/csv.hpp"
#include "kgtopo/parallel.hpp"
#include "kgtopo/simd/kernels.hpp"
#include "kgtopo/topology.hpp"

namespace kgtopo {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

constexpr std::array<std::string_view, 8> kStageNames = {"stats", "topology", "split", "train",
                                                         "eval",  "stratify", "case-study", "all"};

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string optional_field(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

/// Lazily loaded state shared by the stages of one run.
class Context {
 public:
  Context(const ExperimentConfig& config, std::ostream& log) : cfg(config), log(log) {
    threads = cfg.threads ? cfg.threads : default_threads();
  }

  const ExperimentConfig& cfg;
  std::ostream& log;
  unsigned threads;

  const IndexedGraph& graph() {
    if (!graph_) graph_ = load_graph(cfg.data, true);
    return *graph_;
  }

  IndexedGraph load_graph(const std::vector<fs::path>& paths, bool with_types) const {
    TripleStore store = load_triples(paths, cfg.load);
    if (cfg.entity_types && with_types) load_entity_types(store, *cfg.entity_types);
    if (cfg.dedup_reverse) store = dedup_reverse(store);
    log << "loaded " << store.num_triples() << " triples, " << store.num_entities() << " entities, "
        << store.num_relations() << " relations\n";
    return build_indexes(std::move(store));
  }

  const std::vector<TopologyRecord>& topology() {
    if (!topology_) topology_ = compute_topology(graph(), threads);
    return *topology_;
  }

  SplitAssignment compute_split() {
    const auto& store = graph().store();
    if (cfg.split_mode == "provided") return provided_split(store);
    return random_split(store, cfg.ratios, cfg.seed);
  }

  /// The split written by an earlier stage, or a fresh one.
  const SplitAssignment& split() {
    if (!split_) {
      const fs::path p = cfg.out / "split.csv";
      if (fs::exists(p)) {
        split_ = read_split_csv(graph().store(), p);
      } else {
        split_ = compute_split();
        write_split_csv(graph().store(), *split_, p);
      }
    }
    return *split_;
  }
  void set_split(SplitAssignment s) { split_ = std::move(s); }

 private:
  std::optional<IndexedGraph> graph_;
  std::optional<std::vector<TopologyRecord>> topology_;
  std::optional<SplitAssignment> split_;
};

ModelConfig resolved_model(const ExperimentConfig& cfg) {
  ModelConfig m = cfg.model;
  m.seed = cfg.seed;
  if (!m.init_scale) m.init_scale = cfg.train.margin / static_cast<double>(m.dim);
  return m;
}

TrainConfig resolved_train(const ExperimentConfig& cfg) {
  TrainConfig t = cfg.train;
  t.seed = cfg.seed;
  return t;
}

TopologyRecord topology_of(const IndexedGraph& g, const Triple& t) {
  TopologyRecord rec;
  rec.triple = t;
  rec.degrees = triple_degrees(g, t);
  rec.cardinality = edge_cardinality(rec.degrees);
  rec.patterns = pattern_flags(g, t);
  rec.composition_count = composition_count(g, t);
  return rec;
}

std::vector<RankRecord> build_records(const IndexedGraph& full, const SplitAssignment& split,
                                      std::span<const Triple> queries, std::span<const RankOutcome> ranks,
                                      const std::string& model_name, unsigned threads) {
  std::vector<RankRecord> records(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t i) {
    auto& r = records[i];
    r.triple = queries[i];
    r.rank = ranks[i].rank;
    r.candidate_count = ranks[i].candidate_count;
    r.model = model_name;
    r.topology = topology_of(full, queries[i]);
    r.counterpart = counterpart_status(full, split, queries[i]);
  });
  return records;
}

std::vector<Triple> triples_labelled(const TripleStore& store, const SplitAssignment& split, SplitLabel l,
                                     std::size_t limit = 0) {
  std::vector<Triple> out;
  for (std::size_t i : split.indices(l)) {
    if (limit && out.size() == limit) break;
    out.push_back(store.triples[i]);
  }
  return out;
}

/// Trains on the train triples of `split`, logging to `log_path`.
EmbeddingModel train_model(Context& ctx, const IndexedGraph& g, const SplitAssignment& split,
                           const fs::path& log_path) {
  const auto& cfg = ctx.cfg;
  const auto train_triples = triples_labelled(g.store(), split, SplitLabel::kTrain);
  const auto valid = triples_labelled(g.store(), split, SplitLabel::kValid, cfg.val_queries);
  EmbeddingModel model = init_model(resolved_model(cfg), g.num_entities(), g.num_relations());

  std::ofstream log(log_path, std::ios::binary);
  if (!log) throw Error("cannot write " + log_path.string());
  TrainHooks hooks;
  if (!valid.empty()) {
    hooks.validate = [&](const EmbeddingModel& m) {
      EvalConfig ec;
      ec.threads = ctx.threads;
      return mrr(evaluate(m, g, valid, ec).ranks);
    };
  }
  hooks.on_epoch = [&](const EpochLog& e) {
    Json j;
    j["epoch"] = e.epoch;
    j["loss"] = e.loss;
    j["val_mrr"] = e.val_mrr ? Json(*e.val_mrr) : Json(nullptr);
    j["seconds"] = e.seconds;
    log << j.dump() << '\n';
    log.flush();
    ctx.log << "epoch " << e.epoch << " loss " << e.loss;
    if (e.val_mrr) ctx.log << " val_mrr " << *e.val_mrr;
    ctx.log << '\n';
  };
  const auto report = train(train_triples, resolved_train(cfg), model, hooks);
  if (report.early_stopped) ctx.log << "early stop; best epoch " << report.best_epoch.value_or(0) << '\n';
  return model;
}

// --- stages ----------------------------------------------------------------

void stage_stats(Context& ctx) {
  write_text(ctx.cfg.out / "stats.json", to_json(graph_stats(ctx.graph())));
}

void stage_topology(Context& ctx) {
  if (ctx.cfg.topology_scope == "train") {
    const auto train_graph = build_indexes(subset(ctx.graph().store(), ctx.split(), SplitLabel::kTrain));
    const auto topo = compute_topology(train_graph, ctx.threads);
    write_topology_csv(train_graph, topo, ctx.cfg.out / "topology.csv");
    write_text(ctx.cfg.out / "topology_summary.json",
               topology_summary_json(topo, DegreeBins::parse(ctx.cfg.degree_bins)));
    return;
  }
  const auto& topo = ctx.topology();
  write_topology_csv(ctx.graph(), topo, ctx.cfg.out / "topology.csv");
  write_text(ctx.cfg.out / "topology_summary.json",
             topology_summary_json(topo, DegreeBins::parse(ctx.cfg.degree_bins)));
}

void stage_split(Context& ctx) {
  auto split = ctx.compute_split();
  write_split_csv(ctx.graph().store(), split, ctx.cfg.out / "split.csv");
  write_counterpart_csv(ctx.graph(), split, ctx.cfg.out / "counterpart.csv");
  ctx.log << "split: " << split.count(SplitLabel::kTrain) << " train, " << split.count(SplitLabel::kValid)
          << " valid, " << split.count(SplitLabel::kTest) << " test\n";
  ctx.set_split(std::move(split));
}

void stage_train(Context& ctx) {
  const auto& g = ctx.graph();
  auto model = train_model(ctx, g, ctx.split(), ctx.cfg.out / "train_log.jsonl");
  save_checkpoint(model, ctx.cfg.out / "model.bin");
}

/// Tail-set membership per relation: entities whose type occurs among the
/// relation's tails when types are loaded, else the relation's tails.
std::vector<bool> demixing_set(const IndexedGraph& g, RelationId r) {
  const RelationId rels[] = {r};
  auto tails = tail_set_of(g, rels);
  const auto& types = g.store().entity_types;
  if (types.empty()) return tails;
  std::set<std::string> tail_types;
  for (std::size_t e = 0; e < tails.size(); ++e)
    if (tails[e]) tail_types.insert(types[e]);
  std::vector<bool> set(g.num_entities());
  for (std::size_t e = 0; e < set.size(); ++e) set[e] = tail_types.contains(types[e]);
  return set;
}

void write_demixing(const IndexedGraph& g, std::span<const Triple> queries,
                    std::span<const std::vector<EntityId>> top_k, std::size_t k, const fs::path& path) {
  if (k > g.num_entities()) throw InvalidArgument("analysis.demixing_top_k exceeds the number of entities");
  std::map<RelationId, std::vector<std::size_t>> by_rel;
  for (std::size_t i = 0; i < queries.size(); ++i) by_rel[queries[i].relation].push_back(i);
  CsvWriter w(path, {"relation", "queries", "top_k", "mean_demixing"});
  for (const auto& [r, idx] : by_rel) {
    const auto set = demixing_set(g, r);
    double sum = 0.0;
    for (std::size_t i : idx) {
      const std::size_t n = std::min(k, top_k[i].size());
      std::size_t in = 0;
      for (std::size_t j = 0; j < n; ++j) in += set[top_k[i][j]];
      sum += n ? static_cast<double>(in) / static_cast<double>(n) : 0.0;
    }
    w.field(g.store().relations.label(r)).field(idx.size()).field(k).field(sum / static_cast<double>(idx.size()));
    w.end_row();
  }
}

void stage_eval(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& g = ctx.graph();
  const auto& split = ctx.split();
  const fs::path model_path = cfg.out / "model.bin";
  if (!fs::exists(model_path)) throw Error("no trained model at " + model_path.string() + "; run train first");
  const auto model = load_checkpoint(model_path);
  if (model.num_entities() != g.num_entities() || model.num_relations() != g.num_relations())
    throw Error("checkpoint does not match the loaded graph");

  const auto queries = triples_labelled(g.store(), split, SplitLabel::kTest);
  std::optional<IndexedGraph> train_graph;
  if (cfg.filter == FilterSource::kTrainOnly)
    train_graph = build_indexes(subset(g.store(), split, SplitLabel::kTrain));
  const IndexedGraph& filter = train_graph ? *train_graph : g;

  EvalConfig ec;
  ec.filter_source = cfg.filter;
  ec.top_k = std::max(cfg.top_k, cfg.demixing_top_k);
  ec.keep_top_k = true;
  ec.threads = ctx.threads;
  const auto result = evaluate(model, filter, queries, ec);
  const auto records =
      build_records(g, split, queries, result.ranks, std::string(to_string(model.config().scorer)), ctx.threads);
  write_rank_records_csv(g.store(), records, cfg.out / "ranks.csv");
  write_text(cfg.out / "summary.json", eval_summary_json(g.store(), records));
  ctx.log << "test MRR " << mrr(records) << " over " << records.size() << " queries\n";

  std::vector<std::vector<EntityId>> bias_lists;
  bias_lists.reserve(result.top_k.size());
  for (const auto& list : result.top_k)
    bias_lists.emplace_back(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(std::min(cfg.top_k, list.size())));
  CsvWriter w(cfg.out / "degree_bias.csv", {"relation", "entities", "spearman", "note"});
  for (const auto& b : degree_bias(g, queries, bias_lists)) {
    w.field(g.store().relations.label(b.relation)).field(b.entities).field(optional_field(b.spearman)).field(b.note);
    w.end_row();
  }
  write_demixing(g, queries, result.top_k, cfg.demixing_top_k, cfg.out / "demixing.csv");
}

const std::map<std::string, std::string>& plot_descriptions() {
  static const std::map<std::string, std::string> d = {
      {"fig5_cardinality.csv", "MRR by edge cardinality"},
      {"fig6_degrees.csv", "MRR by same-relation head and tail degree bins"},
      {"fig7_composition.csv", "MRR by composition presence and degree bins"},
      {"figC2_relation_level.csv", "per-relation MRR and pattern/cardinality frequencies"},
      {"figC2_correlations.csv", "Spearman rho between relation MRR and each frequency"},
      {"figC3_triple_level.csv", "Spearman rho between triple reciprocal rank and degrees"},
      {"figC6_degree_bias.csv", "Spearman rho between tail in-degree and top-k frequency per relation"},
      {"figC7_counterpart.csv", "MRR by pattern presence and counterpart status"},
      {"figC8_interaction.csv", "statistics per head/tail entity-type pair"},
      {"figC9_demixing.csv", "fraction of top-k predictions in the expected tail set"},
      {"tabC1_matchstats.csv", "matched-relation statistics for both graphs"},
  };
  return d;
}

void write_plot_index(const fs::path& plots) {
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(plots))
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path().filename().string());
  std::sort(files.begin(), files.end());
  Json j;
  j["files"] = Json::array();
  for (const auto& f : files) {
    auto it = plot_descriptions().find(f);
    j["files"].push_back({{"file", f}, {"description", it == plot_descriptions().end() ? "" : it->second}});
  }
  write_text(plots / "index.json", j.dump(2));
}

void copy_if_exists(const fs::path& from, const fs::path& to) {
  if (fs::exists(from)) fs::copy_file(from, to, fs::copy_options::overwrite_existing);
}

void stage_stratify(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& g = ctx.graph();
  const fs::path ranks = cfg.out / "ranks.csv";
  if (!fs::exists(ranks)) throw Error("no rank records at " + ranks.string() + "; run eval first");
  const auto records = read_rank_records_csv(g.store(), ranks);
  if (records.empty()) throw Error("rank record table is empty");

  StratifyOptions opt;
  opt.bins = DegreeBins::parse(cfg.degree_bins);
  opt.store = &g.store();

  std::vector<StratifyKey> keys;
  if (cfg.stratify_keys.empty()) {
    for (int k = 0; k <= static_cast<int>(StratifyKey::kRelationType); ++k) keys.push_back(static_cast<StratifyKey>(k));
  } else {
    for (const auto& k : cfg.stratify_keys) keys.push_back(parse_stratify_key(k));
  }
  for (auto k : keys)
    write_strata_csv(stratify(records, k, opt), cfg.out / ("strata_" + std::string(to_string(k)) + ".csv"));

  const fs::path plots = cfg.out / "plots";
  fs::create_directories(plots);
  write_strata_csv(stratify(records, StratifyKey::kCardinality, opt), plots / "fig5_cardinality.csv");
  write_strata_csv(stratify(records, StratifyKey::kDegreeBins, opt), plots / "fig6_degrees.csv");
  {
    auto crossed = opt;
    crossed.cross_degree_bins = true;
    write_strata_csv(stratify(records, StratifyKey::kComposition, crossed), plots / "fig7_composition.csv");
  }
  {
    std::vector<StratumReport> all;
    const std::pair<StratifyKey, std::string_view> parts[] = {
        {StratifyKey::kSymmetricCounterpart, "symmetric"},
        {StratifyKey::kInferenceCounterpart, "inference"},
        {StratifyKey::kInverseCounterpart, "inverse"}};
    for (const auto& [key, name] : parts) {
      for (auto s : stratify(records, key, opt)) {
        const std::string status = s.key.front().second;
        s.key = {{"pattern", std::string(name)}, {"status", status}};
        all.push_back(std::move(s));
      }
    }
    write_strata_csv(all, plots / "figC7_counterpart.csv");
  }
  {
    const auto rel = relation_level_aggregate(records, ctx.topology());
    CsvWriter w(plots / "figC2_relation_level.csv",
                {"relation", "records", "triples", "avg_mrr", "symmetric", "inference", "inverse", "composition",
                 "one-to-one", "one-to-many", "many-to-one", "many-to-many"});
    for (const auto& row : rel.rows) {
      w.field(g.store().relations.label(row.relation)).field(row.records).field(row.triples).field(row.avg_mrr);
      for (double f : row.pattern_freq) w.field(f);
      for (double f : row.cardinality_freq) w.field(f);
      w.end_row();
    }
    CsvWriter c(plots / "figC2_correlations.csv", {"column", "spearman"});
    for (const auto& [name, rho] : rel.correlations) {
      c.field(name).field(optional_field(rho));
      c.end_row();
    }
  }
  {
    CsvWriter w(plots / "figC3_triple_level.csv", {"column", "spearman"});
    for (const auto& [name, rho] : triple_level_correlations(records)) {
      w.field(name).field(optional_field(rho));
      w.end_row();
    }
  }
  if (!g.store().entity_types.empty()) {
    std::vector<std::pair<std::string, std::string>> pairs;
    if (cfg.interaction_pairs.empty()) {
      std::set<std::pair<std::string, std::string>> seen;
      const auto& types = g.store().entity_types;
      for (const auto& t : g.triples()) seen.emplace(types[t.head], types[t.tail]);
      pairs.assign(seen.begin(), seen.end());
    } else {
      for (const auto& p : cfg.interaction_pairs) {
        const auto colon = p.find(':');
        if (colon == std::string::npos) throw InvalidArgument("interaction pair must be Head:Tail, got " + p);
        pairs.emplace_back(p.substr(0, colon), p.substr(colon + 1));
      }
    }
    CsvWriter w(plots / "figC8_interaction.csv",
                {"head_type", "tail_type", "triples", "median_head_out_same_rel", "median_tail_in_same_rel",
                 "unique_tails", "symmetric", "inference", "inverse", "composition"});
    for (const auto& [h, t] : pairs) {
      const auto s = interaction_report(g, ctx.topology(), h, t);
      w.field(h).field(t).field(s.triples).field(s.median_head_out_same_rel).field(s.median_tail_in_same_rel);
      w.field(s.unique_tails).field(s.patterns.symmetric).field(s.patterns.inference);
      w.field(s.patterns.inverse).field(s.patterns.composition);
      w.end_row();
    }
  }
  copy_if_exists(cfg.out / "degree_bias.csv", plots / "figC6_degree_bias.csv");
  copy_if_exists(cfg.out / "demixing.csv", plots / "figC9_demixing.csv");
  write_plot_index(plots);
}

std::optional<RelationId> find_relation(const TripleStore& s, const LabelNormalizer& norm, const std::string& label) {
  for (std::size_t r = 0; r < s.num_relations(); ++r)
    if (norm(s.relations.label(r)) == label) return static_cast<RelationId>(r);
  return std::nullopt;
}

void stage_case_study(Context& ctx) {
  const auto& cfg = ctx.cfg;
  if (cfg.case_data.empty()) throw InvalidArgument("case-study needs case_study.data");
  if (cfg.case_relation.empty()) throw InvalidArgument("case-study needs case_study.relation");
  const auto& ga = ctx.graph();
  const IndexedGraph gb = ctx.load_graph(cfg.case_data, false);
  const LabelNormalizer norm = cfg.normalizer ? LabelNormalizer::load(*cfg.normalizer) : LabelNormalizer{};

  const auto match = match_shared_triples(ga.store(), gb.store(), norm);
  const auto cs = case_study_split(ga.store(), gb.store(), match, norm, cfg.case_relation, cfg.case_test_fraction,
                                   cfg.seed);
  const fs::path dir = cfg.out / "case_study";
  fs::create_directories(dir);
  {
    CsvWriter w(dir / "relations.csv", {"relation", "triples_a", "triples_b", "matched", "rate_a", "rate_b"});
    for (const auto& r : match.relations) {
      w.field(r.relation).field(r.triples_a).field(r.triples_b).field(r.matched).field(r.rate_a).field(r.rate_b);
      w.end_row();
    }
  }
  {
    CsvWriter w(dir / "candidates.csv", {"entity", "label_a", "label_b"});
    for (std::size_t i = 0; i < cs.candidates_a.size(); ++i) {
      const auto& la = ga.store().entities.label(cs.candidates_a[i]);
      w.field(norm(la)).field(la).field(gb.store().entities.label(cs.candidates_b[i]));
      w.end_row();
    }
  }
  {
    CsvWriter w(dir / "test.csv", {"h", "r", "t"});
    for (std::size_t m : cs.test_matches) {
      const auto& t = ga.store().triples[match.matches[m].first];
      w.field(norm(ga.store().entities.label(t.head)))
          .field(norm(ga.store().relations.label(t.relation)))
          .field(norm(ga.store().entities.label(t.tail)));
      w.end_row();
    }
  }

  const std::pair<const IndexedGraph*, std::string> sides[] = {{&ga, "a"}, {&gb, "b"}};
  std::array<RelationGraphStats, 2> stats;
  for (int side = 0; side < 2; ++side) {
    const IndexedGraph& g = *sides[side].first;
    const SplitAssignment& split = side == 0 ? cs.split_a : cs.split_b;
    const auto& candidates = side == 0 ? cs.candidates_a : cs.candidates_b;
    const fs::path sdir = dir / sides[side].second;
    fs::create_directories(sdir);
    write_split_csv(g.store(), split, sdir / "split.csv");
    ctx.log << "case study: training graph " << sides[side].second << '\n';
    auto model = train_model(ctx, g, split, sdir / "train_log.jsonl");
    save_checkpoint(model, sdir / "model.bin");

    const auto queries = triples_labelled(g.store(), split, SplitLabel::kTest);
    EvalConfig ec;
    ec.candidates = candidates;
    ec.threads = ctx.threads;
    const auto result = evaluate(model, g, queries, ec);
    const auto records =
        build_records(g, split, queries, result.ranks, std::string(to_string(model.config().scorer)), ctx.threads);
    write_rank_records_csv(g.store(), records, sdir / "ranks.csv");
    write_text(sdir / "summary.json", eval_summary_json(g.store(), records));
    ctx.log << "case study " << sides[side].second << ": MRR " << mrr(records) << '\n';

    const auto rel = find_relation(g.store(), norm, cfg.case_relation);
    const auto topo = compute_topology(g, ctx.threads);
    double rate = 0.0;
    for (const auto& r : match.relations)
      if (r.relation == cfg.case_relation) rate = side == 0 ? r.rate_a : r.rate_b;
    stats[side] = relation_graph_stats(g, topo, *rel, rate, queries.size());
  }

  const fs::path plots = cfg.out / "plots";
  fs::create_directories(plots);
  CsvWriter w(plots / "tabC1_matchstats.csv", {"statistic", "graph_a", "graph_b"});
  auto row = [&](std::string_view name, auto get) {
    w.field(name).field(get(stats[0])).field(get(stats[1]));
    w.end_row();
  };
  using S = RelationGraphStats;
  row("relation_triples", [](const S& s) { return s.relation_triples; });
  row("matching_rate", [](const S& s) { return s.matching_rate; });
  row("test_triples", [](const S& s) { return s.test_triples; });
  row("unique_heads", [](const S& s) { return s.unique_heads; });
  row("unique_tails", [](const S& s) { return s.unique_tails; });
  row("median_head_out", [](const S& s) { return s.median_head_out; });
  row("median_head_out_same_rel", [](const S& s) { return s.median_head_out_same_rel; });
  row("median_unique_out_relations", [](const S& s) { return s.median_unique_out_relations; });
  row("median_tail_in", [](const S& s) { return s.median_tail_in; });
  row("median_tail_in_same_rel", [](const S& s) { return s.median_tail_in_same_rel; });
  row("median_unique_in_relations", [](const S& s) { return s.median_unique_in_relations; });
  row("has_inverse", [](const S& s) { return s.has_inverse; });
  row("has_inference", [](const S& s) { return s.has_inference; });
  row("has_composition", [](const S& s) { return s.has_composition; });
  write_plot_index(plots);
}

void run_one(Stage s, Context& ctx) {
  switch (s) {
    case Stage::kStats: return stage_stats(ctx);
    case Stage::kTopology: return stage_topology(ctx);
    case Stage::kSplit: return stage_split(ctx);
    case Stage::kTrain: return stage_train(ctx);
    case Stage::kEval: return stage_eval(ctx);
    case Stage::kStratify: return stage_stratify(ctx);
    case Stage::kCaseStudy: return stage_case_study(ctx);
    case Stage::kAll: break;
  }
  throw InvalidArgument("run_one called with 'all'");
}

Json config_to_json(const ExperimentConfig& c) {
  Json j;
  Json data;
  data["paths"] = Json::array();
  for (const auto& p : c.data) data["paths"].push_back(p.string());
  data["format"] = c.load.format == TableFormat::kCsv ? "csv" : "tsv";
  data["columns"] = {c.load.head_column, c.load.relation_column, c.load.tail_column};
  data["header"] = c.load.has_header;
  data["entity_types"] = c.entity_types ? Json(c.entity_types->string()) : Json(nullptr);
  data["dedup_reverse"] = c.dedup_reverse;
  j["data"] = data;
  j["split"] = {{"mode", c.split_mode}, {"train", c.ratios.train}, {"valid", c.ratios.valid}, {"test", c.ratios.test}};
  const auto m = resolved_model(c);
  j["model"] = {{"scorer", to_string(m.scorer)}, {"dim", m.dim}, {"norm", m.norm}, {"init_scale", *m.init_scale}};
  const auto& t = c.train;
  j["train"] = {{"margin", t.margin},
                {"batch_size", t.batch_size},
                {"negatives", t.negatives},
                {"adversarial_temperature", t.adversarial_temperature},
                {"learning_rate", t.learning_rate},
                {"epochs", t.epochs},
                {"beta1", t.beta1},
                {"beta2", t.beta2},
                {"epsilon", t.epsilon},
                {"negative_mode", to_string(t.negative_mode)},
                {"patience", t.patience},
                {"validate_every", t.validate_every},
                {"val_queries", c.val_queries}};
  j["topology"] = {{"scope", c.topology_scope}};
  j["eval"] = {{"filter", to_string(c.filter)}, {"top_k", c.top_k}};
  j["analysis"] = {{"stratify_keys", c.stratify_keys},
                   {"degree_bins", c.degree_bins},
                   {"demixing_top_k", c.demixing_top_k},
                   {"interaction_pairs", c.interaction_pairs}};
  Json cs;
  cs["data"] = Json::array();
  for (const auto& p : c.case_data) cs["data"].push_back(p.string());
  cs["normalizer"] = c.normalizer ? Json(c.normalizer->string()) : Json(nullptr);
  cs["relation"] = c.case_relation;
  cs["test_fraction"] = c.case_test_fraction;
  j["case_study"] = cs;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["kernel"] = c.kernel;
  return j;
}

Json input_entry(const fs::path& p) {
  return {{"path", p.string()}, {"bytes", fs::file_size(p)}, {"fnv1a64", hex64(fnv1a64_file(p))}};
}

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h = fnv1a64(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())), h);
  }
  return h;
}

std::string_view to_string(Stage s) { return kStageNames.at(static_cast<std::size_t>(s)); }

Stage parse_stage(std::string_view name) {
  for (std::size_t i = 0; i < kStageNames.size(); ++i)
    if (kStageNames[i] == name) return static_cast<Stage>(i);
  throw InvalidArgument("unknown stage: " + std::string(name));
}

void validate(const ExperimentConfig& c) {
  if (c.data.empty()) throw InvalidArgument("data.paths: at least one triple file is required");
  auto must_exist = [](const fs::path& p, std::string_view key) {
    if (!fs::is_regular_file(p)) throw InvalidArgument(std::string(key) + ": no such file: " + p.string());
  };
  for (const auto& p : c.data) must_exist(p, "data.paths");
  if (c.entity_types) must_exist(*c.entity_types, "data.entity_types");
  for (const auto& p : c.case_data) must_exist(p, "case_study.data");
  if (c.normalizer) must_exist(*c.normalizer, "case_study.normalizer");
  if (c.split_mode != "random" && c.split_mode != "provided")
    throw InvalidArgument("split.mode must be 'random' or 'provided'");
  if (c.split_mode == "provided" && c.data.size() != 3)
    throw InvalidArgument("split.mode = provided needs three data files (train, valid, test)");
  if (c.split_mode == "random") {
    const auto& r = c.ratios;
    if (!(r.train > 0 && r.valid > 0 && r.test > 0)) throw InvalidArgument("split ratios must all be positive");
    if (std::abs(r.train + r.valid + r.test - 1.0) > 1e-9) throw InvalidArgument("split ratios must sum to 1");
  }
  if (c.topology_scope != "graph" && c.topology_scope != "train")
    throw InvalidArgument("topology.scope must be 'graph' or 'train'");
  if (c.out.empty()) throw InvalidArgument("out: output directory is empty");
  if (c.top_k == 0 || c.demixing_top_k == 0) throw InvalidArgument("eval.top_k and analysis.demixing_top_k must be >= 1");
  if (!(c.case_test_fraction > 0.0 && c.case_test_fraction < 1.0))
    throw InvalidArgument("case_study.test_fraction must be in (0, 1)");
  if (c.kernel != "auto") (void)simd::parse_isa(c.kernel);
  for (const auto& k : c.stratify_keys) (void)parse_stratify_key(k);
  (void)DegreeBins::parse(c.degree_bins);
  (void)validate(resolved_model(c));
  validate(resolved_train(c));
}

std::string config_json(const ExperimentConfig& config) { return config_to_json(config).dump(); }

int run_stage(Stage stage, const ExperimentConfig& config, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  validate(config);
  for (const auto& w : validate(resolved_model(config))) log << "warning: " << w << '\n';
  if (config.kernel != "auto") simd::select_kernels(simd::parse_isa(config.kernel));
  fs::create_directories(config.out);

  Json manifest;
  manifest["subcommand"] = to_string(stage);
  manifest["started_at"] = utc_now();
  manifest["inputs"] = Json::array();
  for (const auto& p : config.data) manifest["inputs"].push_back(input_entry(p));
  if (config.entity_types) manifest["inputs"].push_back(input_entry(*config.entity_types));
  if (stage == Stage::kCaseStudy || stage == Stage::kAll) {
    for (const auto& p : config.case_data) manifest["inputs"].push_back(input_entry(p));
    if (config.normalizer) manifest["inputs"].push_back(input_entry(*config.normalizer));
  }
  const std::string cfg_json = config_json(config);
  manifest["config"] = Json::parse(cfg_json);
  manifest["config_hash"] = hex64(fnv1a64(cfg_json));
  manifest["versions"] = {{"kgtopo", kVersion},
                          {"compiler", __VERSION__},
                          {"kernel", simd::to_string(simd::active_kernels().isa)}};
  manifest["stages"] = Json::array();

  std::vector<Stage> stages;
  if (stage == Stage::kAll) {
    stages = {Stage::kStats, Stage::kTopology, Stage::kSplit, Stage::kTrain, Stage::kEval, Stage::kStratify};
    if (!config.case_data.empty()) stages.push_back(Stage::kCaseStudy);
  } else {
    stages = {stage};
  }

  const fs::path manifest_path = config.out / ("manifest_" + std::string(to_string(stage)) + ".json");
  auto finish = [&](std::string_view status) {
    manifest["status"] = status;
    manifest["wall_seconds"] = seconds_since(t0);
    write_text(manifest_path, manifest.dump(2));
  };

  Context ctx(config, log);
  for (Stage s : stages) {
    const auto ts = std::chrono::steady_clock::now();
    log << "== " << to_string(s) << '\n';
    try {
      run_one(s, ctx);
    } catch (const std::exception& e) {
      manifest["stages"].push_back({{"name", to_string(s)}, {"status", "failed"}, {"seconds", seconds_since(ts)}});
      manifest["error"] = e.what();
      finish("failed");
      throw;
    }
    manifest["stages"].push_back({{"name", to_string(s)}, {"status", "ok"}, {"seconds", seconds_since(ts)}});
  }
  finish("ok");
  return 0;
}

}  // namespace kgtopo
