#include "kgtopo/training.hpp"

#include <chrono>
#include <cmath>

#include "kgtopo/split.hpp"

namespace kgtopo {

std::string_view to_string(NegativeMode m) {
  return m == NegativeMode::kShared ? "shared" : "independent";
}

NegativeMode parse_negative_mode(std::string_view name) {
  if (name == "shared") return NegativeMode::kShared;
  if (name == "independent") return NegativeMode::kIndependent;
  throw InvalidArgument("unknown negative mode '" + std::string(name) + "'");
}

void validate(const TrainConfig& c) {
  if (!(c.margin > 0)) throw InvalidArgument("margin must be > 0");
  if (c.batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (c.negatives < 1) throw InvalidArgument("negatives must be >= 1");
  if (!(c.adversarial_temperature >= 0)) throw InvalidArgument("adversarial temperature must be >= 0");
  if (!(c.learning_rate >= 0)) throw InvalidArgument("learning rate must be >= 0");
  if (!(c.beta1 >= 0 && c.beta1 < 1 && c.beta2 >= 0 && c.beta2 < 1))
    throw InvalidArgument("Adam decay rates must be in [0, 1)");
  if (!(c.epsilon > 0)) throw InvalidArgument("Adam epsilon must be > 0");
}

NegativeBatch sample_negatives(std::size_t batch_size, std::size_t num_entities,
                               std::size_t per_positive, NegativeMode mode, CounterRng& rng) {
  if (num_entities < 2) throw InvalidArgument("negative sampling needs at least two entities");
  NegativeBatch nb;
  nb.mode = mode;
  nb.per_positive = per_positive;
  const std::size_t draws = mode == NegativeMode::kShared ? per_positive : batch_size * per_positive;
  nb.ids.resize(draws);
  for (auto& id : nb.ids) id = static_cast<EntityId>(rng.below(num_entities));
  return nb;
}

std::span<double> SparseGradient::entity_row(EntityId e) {
  auto [it, inserted] = entity_slot_.try_emplace(e, entity_ids_.size());
  if (inserted) {
    entity_ids_.push_back(e);
    entity_values_.resize(entity_values_.size() + entity_width_, 0.0);
  }
  return {entity_values_.data() + it->second * entity_width_, entity_width_};
}

std::span<double> SparseGradient::relation_row(RelationId r) {
  auto [it, inserted] = relation_slot_.try_emplace(r, relation_ids_.size());
  if (inserted) {
    relation_ids_.push_back(r);
    relation_values_.resize(relation_values_.size() + relation_width_, 0.0);
  }
  return {relation_values_.data() + it->second * relation_width_, relation_width_};
}

std::optional<std::span<const double>> SparseGradient::find_entity(EntityId e) const {
  auto it = entity_slot_.find(e);
  if (it == entity_slot_.end()) return std::nullopt;
  return entity_grad(it->second);
}

std::optional<std::span<const double>> SparseGradient::find_relation(RelationId r) const {
  auto it = relation_slot_.find(r);
  if (it == relation_slot_.end()) return std::nullopt;
  return relation_grad(it->second);
}

void SparseGradient::clear() {
  entity_slot_.clear();
  relation_slot_.clear();
  entity_ids_.clear();
  relation_ids_.clear();
  entity_values_.clear();
  relation_values_.clear();
}

double log_sigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

double adversarial_loss(const EmbeddingModel& model, std::span<const Triple> positives,
                        const NegativeBatch& negatives, double margin, double temperature,
                        SparseGradient* grad) {
  if (positives.empty()) throw InvalidArgument("adversarial_loss needs at least one positive");
  const double inv_batch = 1.0 / static_cast<double>(positives.size());
  double total = 0.0;
  std::vector<double> neg_scores, weights;
  for (std::size_t i = 0; i < positives.size(); ++i) {
    const Triple& x = positives[i];
    const TailQuery query(model, x.head, x.relation);
    const double pos = query.score(x.tail);
    const auto neg_ids = negatives.for_positive(i);
    neg_scores.resize(neg_ids.size());
    for (std::size_t j = 0; j < neg_ids.size(); ++j) neg_scores[j] = query.score(neg_ids[j]);

    // Softmax with max subtraction; the weights carry no gradient.
    weights.resize(neg_ids.size());
    double peak = -INFINITY;
    for (double s : neg_scores) peak = std::max(peak, temperature * s);
    double z = 0.0;
    for (std::size_t j = 0; j < neg_ids.size(); ++j) {
      weights[j] = std::exp(temperature * neg_scores[j] - peak);
      z += weights[j];
    }
    for (auto& w : weights) w /= z;

    double loss = -log_sigmoid(margin + pos);
    for (std::size_t j = 0; j < neg_ids.size(); ++j) loss -= weights[j] * log_sigmoid(-margin - neg_scores[j]);
    total += loss;

    if (grad == nullptr) continue;
    grad->entity_row(x.head);
    grad->entity_row(x.tail);
    grad->relation_row(x.relation);
    for (EntityId n : neg_ids) grad->entity_row(n);
    auto gh = grad->entity_row(x.head);
    auto gr = grad->relation_row(x.relation);
    // d/ds [-log s(m + s)] = -s(-(m + s))
    score_backward(model, x.head, x.relation, x.tail, -sigmoid(-(margin + pos)) * inv_batch, gh, gr,
                   grad->entity_row(x.tail));
    for (std::size_t j = 0; j < neg_ids.size(); ++j) {
      // d/ds' [-w log s(-m - s')] = w s(m + s')
      const double up = weights[j] * sigmoid(margin + neg_scores[j]) * inv_batch;
      score_backward(model, x.head, x.relation, neg_ids[j], up, gh, gr, grad->entity_row(neg_ids[j]));
    }
  }
  return total * inv_batch;
}

AdamOptimizer::AdamOptimizer(const EmbeddingModel& model, const TrainConfig& c)
    : lr_(c.learning_rate),
      beta1_(c.beta1),
      beta2_(c.beta2),
      eps_(c.epsilon),
      m_entity_(model.entity_table().size(), 0.0f),
      v_entity_(model.entity_table().size(), 0.0f),
      m_relation_(model.relation_table().size(), 0.0f),
      v_relation_(model.relation_table().size(), 0.0f) {}

void AdamOptimizer::step(EmbeddingModel& model, const SparseGradient& grad) {
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(beta1_, t);
  const double c2 = 1.0 - std::pow(beta2_, t);
  auto update = [&](float* p, float* m, float* v, std::span<const double> g) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double mi = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      const double vi = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      p[i] = static_cast<float>(p[i] - lr_ * (mi / c1) / (std::sqrt(vi / c2) + eps_));
    }
  };
  const std::size_t d = model.dim();
  for (std::size_t s = 0; s < grad.entities().size(); ++s) {
    const std::size_t off = static_cast<std::size_t>(grad.entities()[s]) * d;
    update(model.entity_table().data() + off, m_entity_.data() + off, v_entity_.data() + off,
           grad.entity_grad(s));
  }
  const std::size_t k = model.relation_width();
  for (std::size_t s = 0; s < grad.relations().size(); ++s) {
    const std::size_t off = static_cast<std::size_t>(grad.relations()[s]) * k;
    update(model.relation_table().data() + off, m_relation_.data() + off, v_relation_.data() + off,
           grad.relation_grad(s));
  }
}

TrainingDiverged::TrainingDiverged(std::size_t epoch, std::uint64_t step, double loss)
    : Error("training diverged in epoch " + std::to_string(epoch) + " at step " +
            std::to_string(step) + " (loss " + std::to_string(loss) +
            "); parameters restored to the start of the epoch"),
      epoch_(epoch) {}

TrainReport train(std::span<const Triple> train_triples, const TrainConfig& config,
                  EmbeddingModel& model, const TrainHooks& hooks) {
  validate(config);
  if (train_triples.empty()) throw InvalidArgument("training split is empty");
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();

  TrainReport report;
  AdamOptimizer adam(model, config);
  CounterRng neg_rng(config.seed, streams::kNegatives);
  SparseGradient grad(model.dim(), model.relation_width());
  std::vector<Triple> batch;
  batch.reserve(config.batch_size);

  double best_mrr = -1.0;
  std::size_t since_best = 0;
  std::vector<float> best_entities, best_relations;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto epoch_start = clock::now();
    const std::vector<float> epoch_entities = model.entity_table();
    const std::vector<float> epoch_relations = model.relation_table();
    const auto order = seeded_permutation(train_triples.size(), config.seed,
                                          (streams::kEpochOrder << 32) + epoch);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      batch.clear();
      for (std::size_t k = begin; k < end; ++k) batch.push_back(train_triples[order[k]]);
      const auto negatives = sample_negatives(batch.size(), model.num_entities(), config.negatives,
                                              config.negative_mode, neg_rng);
      grad.clear();
      const double loss = adversarial_loss(model, batch, negatives, config.margin,
                                           config.adversarial_temperature, &grad);
      if (!std::isfinite(loss)) {
        model.entity_table() = epoch_entities;
        model.relation_table() = epoch_relations;
        throw TrainingDiverged(epoch, adam.steps() + 1, loss);
      }
      adam.step(model, grad);
      loss_sum += loss * static_cast<double>(batch.size());
    }
    if (!model.all_finite()) {
      model.entity_table() = epoch_entities;
      model.relation_table() = epoch_relations;
      throw TrainingDiverged(epoch, adam.steps(), NAN);
    }

    EpochLog log;
    log.epoch = epoch;
    log.loss = loss_sum / static_cast<double>(train_triples.size());
    report.epoch_loss.push_back(log.loss);
    bool stop = false;
    if (hooks.validate && config.validate_every > 0 && epoch % config.validate_every == 0) {
      const double mrr = hooks.validate(model);
      log.val_mrr = mrr;
      if (mrr > best_mrr) {
        best_mrr = mrr;
        since_best = 0;
        report.best_epoch = epoch;
        best_entities = model.entity_table();
        best_relations = model.relation_table();
      } else if (config.patience > 0 && ++since_best >= config.patience) {
        stop = true;
      }
    }
    report.val_mrr.push_back(log.val_mrr);
    log.seconds = std::chrono::duration<double>(clock::now() - epoch_start).count();
    if (hooks.on_epoch) hooks.on_epoch(log);
    if (stop) {
      report.early_stopped = true;
      break;
    }
  }
  if (report.best_epoch) {
    model.entity_table() = std::move(best_entities);
    model.relation_table() = std::move(best_relations);
  }
  report.steps = adam.steps();
  report.wall_seconds = std::chrono::duration<double>(clock::now() - start).count();
  return report;
}

}  // namespace kgtopo
