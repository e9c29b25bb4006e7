#include "kgtopo/graph_store.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <tuple>
#include <unordered_set>

#include "json.hpp"

namespace kgtopo {

std::optional<std::size_t> Vocabulary::find(std::string_view label) const {
  auto it = ids_.find(std::string(label));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::size_t Vocabulary::intern(std::string_view label) {
  auto [it, inserted] = ids_.try_emplace(std::string(label), labels_.size());
  if (inserted) labels_.emplace_back(label);
  return it->second;
}

LoadOptions parse_column_order(std::string_view order, LoadOptions base) {
  if (order.size() != 3) throw InvalidArgument("column order must be a permutation of 'hrt'");
  bool seen[3] = {false, false, false};
  for (std::size_t i = 0; i < 3; ++i) {
    switch (order[i]) {
      case 'h': base.head_column = i; seen[0] = true; break;
      case 'r': base.relation_column = i; seen[1] = true; break;
      case 't': base.tail_column = i; seen[2] = true; break;
      default: throw InvalidArgument("column order must be a permutation of 'hrt'");
    }
  }
  if (!(seen[0] && seen[1] && seen[2]))
    throw InvalidArgument("column order must be a permutation of 'hrt'");
  return base;
}

TableFormat parse_table_format(std::string_view name) {
  if (name == "tsv") return TableFormat::kTsv;
  if (name == "csv") return TableFormat::kCsv;
  throw InvalidArgument("unknown table format '" + std::string(name) + "' (expected tsv or csv)");
}

namespace {

// Splits one row. CSV fields may be double-quoted with "" as escape.
void split_row(std::string_view line, TableFormat format, std::vector<std::string>& out) {
  out.clear();
  if (format == TableFormat::kTsv) {
    std::size_t start = 0;
    while (true) {
      auto pos = line.find('\t', start);
      out.emplace_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }
    return;
  }
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  out.push_back(std::move(field));
}

void read_file_into(TripleStore& store, std::unordered_set<Triple, TripleHash>& seen,
                    const std::filesystem::path& path, const LoadOptions& options,
                    std::uint16_t file_index) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  const std::size_t needed =
      std::max({options.head_column, options.relation_column, options.tail_column}) + 1;
  std::string line;
  std::vector<std::string> fields;
  std::size_t line_no = 0;
  bool header_pending = options.has_header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    split_row(line, options.format, fields);
    if (fields.size() < needed)
      throw ParseError(path.string(), line_no,
                       "expected at least " + std::to_string(needed) + " columns, found " +
                           std::to_string(fields.size()));
    const auto& h = fields[options.head_column];
    const auto& r = fields[options.relation_column];
    const auto& t = fields[options.tail_column];
    if (h.empty() || r.empty() || t.empty())
      throw ParseError(path.string(), line_no, "empty head, relation or tail field");
    Triple triple{static_cast<EntityId>(store.entities.intern(h)),
                  static_cast<RelationId>(store.relations.intern(r)),
                  static_cast<EntityId>(store.entities.intern(t))};
    if (!seen.insert(triple).second) {
      ++store.duplicates_dropped;
      continue;
    }
    store.triples.push_back(triple);
    store.source_file.push_back(file_index);
  }
  if (in.bad()) throw ParseError(path.string(), line_no, "read error");
}

}  // namespace

TripleStore load_triples(std::span<const std::filesystem::path> paths, const LoadOptions& options) {
  if (paths.empty()) throw InvalidArgument("no input files given");
  TripleStore store;
  std::unordered_set<Triple, TripleHash> seen;
  for (std::size_t i = 0; i < paths.size(); ++i)
    read_file_into(store, seen, paths[i], options, static_cast<std::uint16_t>(i));
  if (store.triples.empty()) throw Error("input contains no triples: " + paths.front().string());
  return store;
}

TripleStore load_triples(const std::filesystem::path& path, const LoadOptions& options) {
  return load_triples(std::span<const std::filesystem::path>(&path, 1), options);
}

void load_entity_types(TripleStore& store, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  store.entity_types.assign(store.num_entities(), "unknown");
  std::string line;
  std::vector<std::string> fields;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    split_row(line, TableFormat::kTsv, fields);
    if (fields.size() < 2) throw ParseError(path.string(), line_no, "expected entity<TAB>type");
    if (auto id = store.entities.find(fields[0])) store.entity_types[*id] = fields[1];
  }
}

void write_triples_tsv(const TripleStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& t : store.triples) {
    out << store.entities.label(t.head) << '\t' << store.relations.label(t.relation) << '\t'
        << store.entities.label(t.tail) << '\n';
  }
}

TripleStore dedup_reverse(const TripleStore& store) {
  std::unordered_set<Triple, TripleHash> present(store.triples.begin(), store.triples.end());
  TripleStore result;
  result.entities = store.entities;
  result.relations = store.relations;
  result.entity_types = store.entity_types;
  result.duplicates_dropped = store.duplicates_dropped;
  for (std::size_t i = 0; i < store.triples.size(); ++i) {
    const auto& t = store.triples[i];
    // (h,r,t) < (t,r,h) iff h < t, so the reverse is dropped when h > t.
    if (t.head > t.tail && present.contains(Triple{t.tail, t.relation, t.head})) continue;
    result.triples.push_back(t);
    if (!store.source_file.empty()) result.source_file.push_back(store.source_file[i]);
  }
  return result;
}

namespace {

// Builds a CSR over `n` keys; order[i] lists edge indices grouped by key and
// sorted by `less` inside each group.
template <typename Key, typename Less>
std::vector<std::size_t> grouped_order(const std::vector<Triple>& triples, std::size_t n,
                                       Key key, Less less, std::vector<std::size_t>& offsets) {
  offsets.assign(n + 1, 0);
  for (const auto& t : triples) ++offsets[key(t) + 1];
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  std::vector<std::size_t> order(triples.size());
  std::vector<std::size_t> fill(offsets.begin(), offsets.end() - 1);
  for (std::size_t i = 0; i < triples.size(); ++i) order[fill[key(triples[i])]++] = i;
  for (std::size_t v = 0; v < n; ++v) {
    std::sort(order.begin() + offsets[v], order.begin() + offsets[v + 1],
              [&](std::size_t a, std::size_t b) { return less(triples[a], triples[b]); });
  }
  return order;
}

void distinct_neighbors(const std::vector<std::size_t>& edge_offsets,
                        const std::vector<EntityId>& sorted_values, std::size_t n,
                        std::vector<std::size_t>& offsets, std::vector<EntityId>& values) {
  offsets.assign(n + 1, 0);
  values.clear();
  std::vector<EntityId> scratch;
  for (std::size_t v = 0; v < n; ++v) {
    scratch.assign(sorted_values.begin() + edge_offsets[v], sorted_values.begin() + edge_offsets[v + 1]);
    std::sort(scratch.begin(), scratch.end());
    scratch.erase(std::unique(scratch.begin(), scratch.end()), scratch.end());
    values.insert(values.end(), scratch.begin(), scratch.end());
    offsets[v + 1] = values.size();
  }
}

}  // namespace

IndexedGraph::IndexedGraph(TripleStore store) : store_(std::move(store)) {
  const auto& tr = store_.triples;
  const std::size_t n = store_.num_entities();

  auto by_head = grouped_order(
      tr, n, [](const Triple& t) { return t.head; },
      [](const Triple& a, const Triple& b) {
        return std::tie(a.relation, a.tail) < std::tie(b.relation, b.tail);
      },
      out_offsets_);
  out_rel_.resize(tr.size());
  out_tail_.resize(tr.size());
  for (std::size_t i = 0; i < by_head.size(); ++i) {
    out_rel_[i] = tr[by_head[i]].relation;
    out_tail_[i] = tr[by_head[i]].tail;
  }

  auto by_tail = grouped_order(
      tr, n, [](const Triple& t) { return t.tail; },
      [](const Triple& a, const Triple& b) {
        return std::tie(a.relation, a.head) < std::tie(b.relation, b.head);
      },
      in_offsets_);
  in_rel_.resize(tr.size());
  in_head_.resize(tr.size());
  for (std::size_t i = 0; i < by_tail.size(); ++i) {
    in_rel_[i] = tr[by_tail[i]].relation;
    in_head_[i] = tr[by_tail[i]].head;
  }

  std::vector<std::size_t> pair_offsets;
  auto by_pair = grouped_order(
      tr, n, [](const Triple& t) { return t.head; },
      [](const Triple& a, const Triple& b) {
        return std::tie(a.tail, a.relation) < std::tie(b.tail, b.relation);
      },
      pair_offsets);
  pair_tail_.resize(tr.size());
  pair_rel_.resize(tr.size());
  for (std::size_t i = 0; i < by_pair.size(); ++i) {
    pair_tail_[i] = tr[by_pair[i]].tail;
    pair_rel_[i] = tr[by_pair[i]].relation;
  }

  distinct_neighbors(out_offsets_, pair_tail_, n, out_nbr_offsets_, out_nbr_);
  distinct_neighbors(in_offsets_, in_head_, n, in_nbr_offsets_, in_nbr_);

  index_.reserve(tr.size());
  for (std::size_t i = 0; i < tr.size(); ++i) index_.emplace(tr[i], i);
}

std::span<const EntityId> IndexedGraph::slice(const std::vector<std::size_t>& offsets,
                                              const std::vector<EntityId>& values, EntityId v) const {
  if (v >= num_entities()) throw InvalidArgument("entity id out of range");
  return {values.data() + offsets[v], offsets[v + 1] - offsets[v]};
}

std::span<const RelationId> IndexedGraph::out_relations(EntityId h) const {
  if (h >= num_entities()) throw InvalidArgument("entity id out of range");
  return {out_rel_.data() + out_offsets_[h], out_offsets_[h + 1] - out_offsets_[h]};
}

std::span<const EntityId> IndexedGraph::out_tails(EntityId h) const {
  return slice(out_offsets_, out_tail_, h);
}

std::span<const RelationId> IndexedGraph::in_relations(EntityId t) const {
  if (t >= num_entities()) throw InvalidArgument("entity id out of range");
  return {in_rel_.data() + in_offsets_[t], in_offsets_[t + 1] - in_offsets_[t]};
}

std::span<const EntityId> IndexedGraph::in_heads(EntityId t) const {
  return slice(in_offsets_, in_head_, t);
}

std::span<const EntityId> IndexedGraph::tails(EntityId h, RelationId r) const {
  auto rels = out_relations(h);
  auto [lo, hi] = std::equal_range(rels.begin(), rels.end(), r);
  const std::size_t begin = out_offsets_[h] + static_cast<std::size_t>(lo - rels.begin());
  return {out_tail_.data() + begin, static_cast<std::size_t>(hi - lo)};
}

std::span<const EntityId> IndexedGraph::heads(EntityId t, RelationId r) const {
  auto rels = in_relations(t);
  auto [lo, hi] = std::equal_range(rels.begin(), rels.end(), r);
  const std::size_t begin = in_offsets_[t] + static_cast<std::size_t>(lo - rels.begin());
  return {in_head_.data() + begin, static_cast<std::size_t>(hi - lo)};
}

std::span<const RelationId> IndexedGraph::relations_between(EntityId h, EntityId t) const {
  auto tails = slice(out_offsets_, pair_tail_, h);
  auto [lo, hi] = std::equal_range(tails.begin(), tails.end(), t);
  const std::size_t begin = out_offsets_[h] + static_cast<std::size_t>(lo - tails.begin());
  return {pair_rel_.data() + begin, static_cast<std::size_t>(hi - lo)};
}

std::span<const EntityId> IndexedGraph::out_neighbors(EntityId h) const {
  return slice(out_nbr_offsets_, out_nbr_, h);
}

std::span<const EntityId> IndexedGraph::in_neighbors(EntityId t) const {
  return slice(in_nbr_offsets_, in_nbr_, t);
}

std::optional<std::size_t> IndexedGraph::index_of(const Triple& t) const {
  auto it = index_.find(t);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

IndexedGraph build_indexes(TripleStore store) { return IndexedGraph(std::move(store)); }

GraphStats graph_stats(const IndexedGraph& g) {
  if (g.num_triples() == 0) throw InvalidArgument("graph_stats on empty graph");
  GraphStats s;
  s.num_entities = g.num_entities();
  s.num_relations = g.num_relations();
  s.num_triples = g.num_triples();
  s.avg_node_degree = 2.0 * static_cast<double>(s.num_triples) / static_cast<double>(s.num_entities);
  return s;
}

std::string to_json(const GraphStats& stats) {
  nlohmann::ordered_json j;
  j["num_entities"] = stats.num_entities;
  j["num_relations"] = stats.num_relations;
  j["num_triples"] = stats.num_triples;
  j["avg_node_degree"] = stats.avg_node_degree;
  return j.dump(2);
}

}  // namespace kgtopo
