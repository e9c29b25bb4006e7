#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgtopo/ids.hpp"

namespace kgtopo {

enum class Scorer : std::uint8_t { kTransE, kDistMult, kRotatE, kTripleRE };
std::string_view to_string(Scorer s);
Scorer parse_scorer(std::string_view name);

struct ModelConfig {
  Scorer scorer = Scorer::kDistMult;
  std::size_t dim = 64;
  int norm = 1;  // p in {1, 2}; ignored by DistMult
  /// Entries start uniform in [-init_scale, init_scale]. Unset means margin / dim.
  std::optional<double> init_scale;
  std::uint64_t seed = 0;
};

/// Throws InvalidArgument on an invalid config; returns warnings for
/// settings that are accepted but ignored.
std::vector<std::string> validate(const ModelConfig& config);

/// Entity rows hold `dim` reals; for RotatE the first dim/2 are real parts
/// and the last dim/2 imaginary parts. Relation rows hold dim reals
/// (TransE, DistMult), dim/2 phases (RotatE) or [r_h | r_m | r_t] (TripleRE).
class EmbeddingModel {
 public:
  EmbeddingModel(ModelConfig config, std::size_t num_entities, std::size_t num_relations);

  const ModelConfig& config() const { return config_; }
  Scorer scorer() const { return config_.scorer; }
  std::size_t dim() const { return config_.dim; }
  std::size_t relation_width() const { return relation_width_; }
  std::size_t num_entities() const { return num_entities_; }
  std::size_t num_relations() const { return num_relations_; }

  std::span<float> entity(EntityId e) { return {entities_.data() + e * config_.dim, config_.dim}; }
  std::span<const float> entity(EntityId e) const {
    return {entities_.data() + e * config_.dim, config_.dim};
  }
  std::span<float> relation(RelationId r) {
    return {relations_.data() + r * relation_width_, relation_width_};
  }
  std::span<const float> relation(RelationId r) const {
    return {relations_.data() + r * relation_width_, relation_width_};
  }

  std::vector<float>& entity_table() { return entities_; }
  const std::vector<float>& entity_table() const { return entities_; }
  std::vector<float>& relation_table() { return relations_; }
  const std::vector<float>& relation_table() const { return relations_; }

  bool all_finite() const;

 private:
  ModelConfig config_;
  std::size_t num_entities_;
  std::size_t num_relations_;
  std::size_t relation_width_;
  std::vector<float> entities_;
  std::vector<float> relations_;
};

std::size_t relation_width(Scorer scorer, std::size_t dim);
double resolved_init_scale(const ModelConfig& config, double margin = 12.0);

/// Uniform init from CounterRng(seed, streams::kInit); RotatE phases are
/// uniform in [-pi, pi].
EmbeddingModel init_model(const ModelConfig& config, std::size_t num_entities,
                          std::size_t num_relations);

/// (h, r) folded into a 64-bit query vector so tails score with one kernel call.
class TailQuery {
 public:
  TailQuery(const EmbeddingModel& model, EntityId h, RelationId r);
  double score(EntityId t) const;

 private:
  const EmbeddingModel* model_;
  std::vector<double> q_;
  std::vector<double> w_;  // TripleRE r_t
};

double score(const EmbeddingModel& model, EntityId h, RelationId r, EntityId t);

/// out[i] = score(model, h, r, candidates[i]); bit-identical to the scalar loop.
void score_tails(const EmbeddingModel& model, EntityId h, RelationId r,
                 std::span<const EntityId> candidates, std::span<double> out);
std::vector<double> score_tails(const EmbeddingModel& model, EntityId h, RelationId r,
                                std::span<const EntityId> candidates);
/// Scores every entity as a tail; out.size() == num_entities.
void score_all_tails(const EmbeddingModel& model, EntityId h, RelationId r, std::span<double> out);

/// Adds upstream * d score(h, r, t) / d param into the three row buffers
/// (sizes dim, relation_width, dim). When h == t the same buffer may be
/// passed twice. Subgradient 0 is used where the norm is not differentiable.
void score_backward(const EmbeddingModel& model, EntityId h, RelationId r, EntityId t,
                    double upstream, std::span<double> grad_head, std::span<double> grad_relation,
                    std::span<double> grad_tail);

// Checkpoint layout (all integers little-endian):
//   bytes 0..7   magic "KGTOPOCK"
//   u32          format version (1)
//   u32          reserved (0)
//   u64          N = JSON header length in bytes
//   N bytes      UTF-8 JSON: scorer, dim, norm, init_scale, seed,
//                num_entities, num_relations, relation_width
//   E*dim f32    entity table, row-major
//   R*width f32  relation table, row-major
void save_checkpoint(const EmbeddingModel& model, const std::filesystem::path& path);
EmbeddingModel load_checkpoint(const std::filesystem::path& path);

}  // namespace kgtopo
