#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "kgtopo/kge.hpp"
#include "kgtopo/rng.hpp"

namespace kgtopo {

enum class NegativeMode : std::uint8_t { kShared, kIndependent };
std::string_view to_string(NegativeMode m);
NegativeMode parse_negative_mode(std::string_view name);

struct TrainConfig {
  double margin = 12.0;
  std::size_t batch_size = 128;
  std::size_t negatives = 16;
  double adversarial_temperature = 1.0;
  double learning_rate = 1e-3;
  std::size_t epochs = 50;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  NegativeMode negative_mode = NegativeMode::kShared;
  /// Early stop after this many validations without improvement; 0 disables.
  std::size_t patience = 5;
  std::size_t validate_every = 1;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& config);

/// Corrupted tails for one batch. Shared mode holds one pool of `per_positive`
/// ids used by every positive; independent mode holds batch * per_positive.
struct NegativeBatch {
  NegativeMode mode = NegativeMode::kShared;
  std::size_t per_positive = 0;
  std::vector<EntityId> ids;

  std::span<const EntityId> for_positive(std::size_t i) const {
    if (mode == NegativeMode::kShared) return ids;
    return {ids.data() + i * per_positive, per_positive};
  }
};

/// Uniform draws with replacement; true tails are not rejected.
NegativeBatch sample_negatives(std::size_t batch_size, std::size_t num_entities,
                               std::size_t per_positive, NegativeMode mode, CounterRng& rng);

/// Gradient rows for the embedding rows a batch touched.
class SparseGradient {
 public:
  SparseGradient(std::size_t entity_width, std::size_t relation_width)
      : entity_width_(entity_width), relation_width_(relation_width) {}

  std::span<double> entity_row(EntityId e);
  std::span<double> relation_row(RelationId r);

  /// Touched ids, in first-touch order.
  const std::vector<EntityId>& entities() const { return entity_ids_; }
  const std::vector<RelationId>& relations() const { return relation_ids_; }
  std::span<const double> entity_grad(std::size_t slot) const {
    return {entity_values_.data() + slot * entity_width_, entity_width_};
  }
  std::span<const double> relation_grad(std::size_t slot) const {
    return {relation_values_.data() + slot * relation_width_, relation_width_};
  }
  /// nullopt if the row was not touched.
  std::optional<std::span<const double>> find_entity(EntityId e) const;
  std::optional<std::span<const double>> find_relation(RelationId r) const;

  void clear();

 private:
  std::size_t entity_width_, relation_width_;
  std::unordered_map<EntityId, std::size_t> entity_slot_;
  std::unordered_map<RelationId, std::size_t> relation_slot_;
  std::vector<EntityId> entity_ids_;
  std::vector<RelationId> relation_ids_;
  std::vector<double> entity_values_;
  std::vector<double> relation_values_;
};

/// Numerically stable log(sigmoid(x)).
double log_sigmoid(double x);

/// Mean over positives of
///   -log s(margin + s_i) - sum_j w_ij log s(-margin - s'_ij),
///   w_ij = softmax_j(temperature * s'_ij), held constant for the gradient.
/// Writes d loss / d param into `grad` when non-null.
double adversarial_loss(const EmbeddingModel& model, std::span<const Triple> positives,
                        const NegativeBatch& negatives, double margin, double temperature,
                        SparseGradient* grad);

/// Adam with bias correction, applied only to rows present in the gradient.
class AdamOptimizer {
 public:
  AdamOptimizer(const EmbeddingModel& model, const TrainConfig& config);
  void step(EmbeddingModel& model, const SparseGradient& grad);
  std::uint64_t steps() const { return steps_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t steps_ = 0;
  std::vector<float> m_entity_, v_entity_, m_relation_, v_relation_;
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;
  std::optional<double> val_mrr;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<double> epoch_loss;
  std::vector<std::optional<double>> val_mrr;
  double wall_seconds = 0.0;
  std::uint64_t steps = 0;
  bool early_stopped = false;
  std::optional<std::size_t> best_epoch;
};

class TrainingDiverged : public Error {
 public:
  TrainingDiverged(std::size_t epoch, std::uint64_t step, double loss);
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};

struct TrainHooks {
  /// Returns validation MRR for the current parameters.
  std::function<double(const EmbeddingModel&)> validate;
  std::function<void(const EpochLog&)> on_epoch;
};

/// epochs * ceil(|train| / batch) Adam steps over a seeded per-epoch shuffle.
/// With a validation hook, training stops after `patience` validations
/// without improvement and the best parameters are restored. On a non-finite
/// loss the parameters are rolled back to the start of the epoch and
/// TrainingDiverged is thrown.
TrainReport train(std::span<const Triple> train_triples, const TrainConfig& config,
                  EmbeddingModel& model, const TrainHooks& hooks = {});

}  // namespace kgtopo
