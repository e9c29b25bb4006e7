#include "kgtopo/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "kgtopo/csv.hpp"
#include "kgtopo/rng.hpp"

namespace kgtopo {

std::string_view to_string(SplitLabel l) {
  switch (l) {
    case SplitLabel::kTrain: return "train";
    case SplitLabel::kValid: return "valid";
    case SplitLabel::kTest: return "test";
  }
  return "?";
}

SplitLabel parse_split_label(std::string_view name) {
  if (name == "train") return SplitLabel::kTrain;
  if (name == "valid") return SplitLabel::kValid;
  if (name == "test") return SplitLabel::kTest;
  throw InvalidArgument("unknown split label '" + std::string(name) + "'");
}

std::vector<std::size_t> SplitAssignment::indices(SplitLabel l) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == l) out.push_back(i);
  return out;
}

std::size_t SplitAssignment::count(SplitLabel l) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), l));
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed, std::uint64_t stream) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  CounterRng rng(seed, stream);
  for (std::size_t i = n; i-- > 1;) std::swap(p[i], p[rng.below(i + 1)]);
  return p;
}

SplitAssignment random_split(const TripleStore& store, const SplitRatios& ratios, std::uint64_t seed) {
  if (!(ratios.train > 0 && ratios.valid > 0 && ratios.test > 0))
    throw InvalidArgument("split ratios must be positive");
  if (std::abs(ratios.train + ratios.valid + ratios.test - 1.0) > 1e-9)
    throw InvalidArgument("split ratios must sum to 1");
  const std::size_t n = store.num_triples();
  const auto n_valid = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios.valid));
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios.test));
  if (n_valid == 0 || n_test == 0 || n_valid + n_test >= n)
    throw InvalidArgument("graph of " + std::to_string(n) + " triples is too small for the requested split");
  const std::size_t n_train = n - n_valid - n_test;

  SplitAssignment s;
  s.ratios = ratios;
  s.seed = seed;
  s.labels.assign(n, SplitLabel::kTrain);
  const auto perm = seeded_permutation(n, seed, streams::kSplit);
  for (std::size_t k = n_train; k < n_train + n_valid; ++k) s.labels[perm[k]] = SplitLabel::kValid;
  for (std::size_t k = n_train + n_valid; k < n; ++k) s.labels[perm[k]] = SplitLabel::kTest;
  return s;
}

SplitAssignment provided_split(const TripleStore& store) {
  if (store.source_file.size() != store.num_triples())
    throw InvalidArgument("store has no per-file provenance");
  SplitAssignment s;
  s.labels.reserve(store.num_triples());
  for (auto f : store.source_file) {
    if (f > 2) throw InvalidArgument("provided splits need exactly three files (train, valid, test)");
    s.labels.push_back(static_cast<SplitLabel>(f));
  }
  const double n = static_cast<double>(store.num_triples());
  s.ratios = {s.count(SplitLabel::kTrain) / n, s.count(SplitLabel::kValid) / n,
              s.count(SplitLabel::kTest) / n};
  return s;
}

std::string_view to_string(CounterpartStatus s) {
  switch (s) {
    case CounterpartStatus::kNoCounterpart: return "NO_COUNTERPART";
    case CounterpartStatus::kInTrain: return "COUNTERPART_IN_TRAIN";
    case CounterpartStatus::kElsewhere: return "COUNTERPART_ELSEWHERE";
  }
  return "?";
}

CounterpartStatus parse_counterpart_status(std::string_view name) {
  for (auto s : {CounterpartStatus::kNoCounterpart, CounterpartStatus::kInTrain,
                 CounterpartStatus::kElsewhere})
    if (to_string(s) == name) return s;
  throw InvalidArgument("unknown counterpart status '" + std::string(name) + "'");
}

std::string_view to_string(CounterpartPattern p) {
  switch (p) {
    case CounterpartPattern::kSymmetric: return "symmetric";
    case CounterpartPattern::kInference: return "inference";
    case CounterpartPattern::kInverse: return "inverse";
  }
  return "?";
}

CounterpartReport counterpart_status(const IndexedGraph& full, const SplitAssignment& split,
                                     const Triple& x) {
  auto idx = full.index_of(x);
  if (!idx || *idx >= split.labels.size() || split.labels[*idx] != SplitLabel::kTest)
    throw InvalidArgument("counterpart_status: triple is not in the test split");

  auto classify = [&](auto&& witnesses) {
    bool any = false;
    for (const Triple& w : witnesses) {
      any = true;
      if (split.labels[*full.index_of(w)] == SplitLabel::kTrain) return CounterpartStatus::kInTrain;
    }
    return any ? CounterpartStatus::kElsewhere : CounterpartStatus::kNoCounterpart;
  };

  CounterpartReport report{};
  std::vector<Triple> w;
  if (x.head != x.tail && full.contains(Triple{x.tail, x.relation, x.head}))
    w.push_back(Triple{x.tail, x.relation, x.head});
  report[0] = classify(w);

  w.clear();
  for (RelationId r : full.relations_between(x.head, x.tail))
    if (r != x.relation) w.push_back(Triple{x.head, r, x.tail});
  report[1] = classify(w);

  w.clear();
  for (RelationId r : full.relations_between(x.tail, x.head))
    if (r != x.relation) w.push_back(Triple{x.tail, r, x.head});
  report[2] = classify(w);
  return report;
}

void write_split_csv(const TripleStore& store, const SplitAssignment& split,
                     const std::filesystem::path& path) {
  CsvWriter w(path, {"h", "r", "t", "label"});
  for (std::size_t i = 0; i < store.triples.size(); ++i) {
    const auto& t = store.triples[i];
    w.field(store.entities.label(t.head))
        .field(store.relations.label(t.relation))
        .field(store.entities.label(t.tail))
        .field(to_string(split.labels[i]));
    w.end_row();
  }
}

void write_counterpart_csv(const IndexedGraph& full, const SplitAssignment& split,
                           const std::filesystem::path& path) {
  const auto& store = full.store();
  CsvWriter w(path, {"h", "r", "t", "pattern", "status"});
  for (std::size_t i : split.indices(SplitLabel::kTest)) {
    const auto& t = store.triples[i];
    const auto report = counterpart_status(full, split, t);
    for (auto p : kCounterpartPatterns) {
      w.field(store.entities.label(t.head))
          .field(store.relations.label(t.relation))
          .field(store.entities.label(t.tail))
          .field(to_string(p))
          .field(to_string(report[static_cast<int>(p)]));
      w.end_row();
    }
  }
}

SplitAssignment read_split_csv(const TripleStore& store, const std::filesystem::path& path) {
  CsvTable table(path);
  const auto ch = table.column("h"), cr = table.column("r"), ct = table.column("t"),
             cl = table.column("label");
  std::unordered_map<Triple, std::size_t, TripleHash> position;
  position.reserve(store.num_triples());
  for (std::size_t i = 0; i < store.triples.size(); ++i) position.emplace(store.triples[i], i);

  SplitAssignment s;
  s.labels.assign(store.num_triples(), SplitLabel::kTrain);
  std::vector<bool> seen(store.num_triples(), false);
  for (std::size_t row = 0; row < table.rows(); ++row) {
    auto h = store.entities.find(table.at(row, ch));
    auto r = store.relations.find(table.at(row, cr));
    auto t = store.entities.find(table.at(row, ct));
    if (!h || !r || !t) throw ParseError(path.string(), row + 2, "triple not in dataset");
    auto it = position.find(Triple{static_cast<EntityId>(*h), static_cast<RelationId>(*r),
                                   static_cast<EntityId>(*t)});
    if (it == position.end()) throw ParseError(path.string(), row + 2, "triple not in dataset");
    s.labels[it->second] = parse_split_label(table.at(row, cl));
    seen[it->second] = true;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end())
    throw ParseError(path.string(), 0, "split file does not cover every triple of the dataset");
  const double n = static_cast<double>(store.num_triples());
  s.ratios = {s.count(SplitLabel::kTrain) / n, s.count(SplitLabel::kValid) / n,
              s.count(SplitLabel::kTest) / n};
  return s;
}

TripleStore subset(const TripleStore& store, const SplitAssignment& split, SplitLabel label) {
  TripleStore out;
  out.entities = store.entities;
  out.relations = store.relations;
  out.entity_types = store.entity_types;
  for (std::size_t i = 0; i < store.triples.size(); ++i)
    if (split.labels[i] == label) out.triples.push_back(store.triples[i]);
  return out;
}

}  // namespace kgtopo
