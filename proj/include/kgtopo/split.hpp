#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "kgtopo/graph_store.hpp"

namespace kgtopo {

enum class SplitLabel : std::uint8_t { kTrain, kValid, kTest };
std::string_view to_string(SplitLabel l);
SplitLabel parse_split_label(std::string_view name);

struct SplitRatios {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
};

struct SplitAssignment {
  /// One label per triple, in store order.
  std::vector<SplitLabel> labels;
  SplitRatios ratios;
  std::uint64_t seed = 0;

  std::vector<std::size_t> indices(SplitLabel l) const;
  std::size_t count(SplitLabel l) const;
};

/// Fisher-Yates permutation of [0, n) driven by CounterRng(seed, kSplit):
/// for i = n-1 down to 1, swap(p[i], p[below(i + 1)]).
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed, std::uint64_t stream);

/// Shuffles triple positions, then slices: the first n - n_valid - n_test
/// positions are train, the next n_valid valid, the rest test, with
/// n_valid = round(n * valid) and n_test = round(n * test).
SplitAssignment random_split(const TripleStore& store, const SplitRatios& ratios, std::uint64_t seed);

/// Uses the file each triple came from: file 0 train, 1 valid, 2 test.
SplitAssignment provided_split(const TripleStore& store);

enum class CounterpartStatus : std::uint8_t { kNoCounterpart, kInTrain, kElsewhere };
std::string_view to_string(CounterpartStatus s);
CounterpartStatus parse_counterpart_status(std::string_view name);

enum class CounterpartPattern : std::uint8_t { kSymmetric, kInference, kInverse };
inline constexpr std::array<CounterpartPattern, 3> kCounterpartPatterns = {
    CounterpartPattern::kSymmetric, CounterpartPattern::kInference, CounterpartPattern::kInverse};
std::string_view to_string(CounterpartPattern p);

/// Status per pattern, indexed by static_cast<int>(CounterpartPattern).
using CounterpartReport = std::array<CounterpartStatus, 3>;

/// Witnesses come from the full graph; a status is kInTrain when at least
/// one witness is labelled train. Throws unless the triple is labelled test.
CounterpartReport counterpart_status(const IndexedGraph& full, const SplitAssignment& split,
                                     const Triple& test_triple);

void write_split_csv(const TripleStore& store, const SplitAssignment& split,
                     const std::filesystem::path& path);
/// One row per (test triple, pattern): h,r,t,pattern,status.
void write_counterpart_csv(const IndexedGraph& full, const SplitAssignment& split,
                           const std::filesystem::path& path);
/// Reads labels back, matching rows to `store` by label.
SplitAssignment read_split_csv(const TripleStore& store, const std::filesystem::path& path);

/// Triples of `store` carrying `label`, as a new store sharing the vocabulary.
TripleStore subset(const TripleStore& store, const SplitAssignment& split, SplitLabel label);

}  // namespace kgtopo
