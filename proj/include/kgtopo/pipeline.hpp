#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "kgtopo/eval.hpp"
#include "kgtopo/graph_store.hpp"
#include "kgtopo/kge.hpp"
#include "kgtopo/split.hpp"
#include "kgtopo/training.hpp"

namespace kgtopo {

inline constexpr std::string_view kVersion = "0.1.0";

struct ExperimentConfig {
  // data
  std::vector<std::filesystem::path> data;
  LoadOptions load;
  std::optional<std::filesystem::path> entity_types;
  bool dedup_reverse = false;

  // split: "random" or "provided" (one file per split, train/valid/test)
  std::string split_mode = "random";
  SplitRatios ratios;

  /// "graph" computes topology on the full graph, "train" on the train split.
  std::string topology_scope = "graph";

  ModelConfig model;
  TrainConfig train;
  /// Validation queries per check, taken in store order; 0 means all.
  std::size_t val_queries = 0;

  FilterSource filter = FilterSource::kFullGraph;
  std::size_t top_k = 100;

  // analysis
  std::vector<std::string> stratify_keys;  // empty means every key
  std::string degree_bins = "1,2,4,11,32,101,inf";
  std::size_t demixing_top_k = 10;
  /// "HeadType:TailType"; empty means every pair present in the graph.
  std::vector<std::string> interaction_pairs;

  // case study
  std::vector<std::filesystem::path> case_data;
  std::optional<std::filesystem::path> normalizer;
  std::string case_relation;
  double case_test_fraction = 0.10;

  std::filesystem::path out = "kgtopo_out";
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::string kernel = "auto";
};

/// Throws InvalidArgument naming the first problem found.
void validate(const ExperimentConfig& config);

/// Canonical JSON of every setting that affects results (the output
/// directory is excluded).
std::string config_json(const ExperimentConfig& config);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64_file(const std::filesystem::path& path);

enum class Stage : std::uint8_t { kStats, kTopology, kSplit, kTrain, kEval, kStratify, kCaseStudy, kAll };
std::string_view to_string(Stage s);
Stage parse_stage(std::string_view name);

/// Runs one subcommand and writes manifest_<stage>.json into config.out.
/// Returns 0 on success. A failing stage stops the run, is recorded in the
/// manifest with the completed stages, and its error is rethrown.
int run_stage(Stage stage, const ExperimentConfig& config, std::ostream& log);

}  // namespace kgtopo
