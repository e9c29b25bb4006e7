#include "kgtopo/kge.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "json.hpp"
#include "kgtopo/rng.hpp"
#include "kgtopo/simd/kernels.hpp"

namespace kgtopo {

std::string_view to_string(Scorer s) {
  switch (s) {
    case Scorer::kTransE: return "TransE";
    case Scorer::kDistMult: return "DistMult";
    case Scorer::kRotatE: return "RotatE";
    case Scorer::kTripleRE: return "TripleRE";
  }
  return "?";
}

Scorer parse_scorer(std::string_view name) {
  std::string lower(name);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "transe") return Scorer::kTransE;
  if (lower == "distmult") return Scorer::kDistMult;
  if (lower == "rotate") return Scorer::kRotatE;
  if (lower == "triplere") return Scorer::kTripleRE;
  throw InvalidArgument("unknown scorer '" + std::string(name) +
                        "' (expected TransE, DistMult, RotatE or TripleRE)");
}

std::vector<std::string> validate(const ModelConfig& config) {
  std::vector<std::string> warnings;
  if (config.dim < 2) throw InvalidArgument("embedding dim must be >= 2");
  if (config.scorer == Scorer::kRotatE && config.dim % 2 != 0)
    throw InvalidArgument("RotatE needs an even embedding dim, got " + std::to_string(config.dim));
  if (config.scorer == Scorer::kDistMult) {
    if (config.norm != 1) warnings.push_back("DistMult ignores the norm setting");
  } else if (config.norm != 1 && config.norm != 2) {
    throw InvalidArgument("norm must be 1 or 2");
  }
  if (config.init_scale && !(*config.init_scale >= 0.0 && std::isfinite(*config.init_scale)))
    throw InvalidArgument("init_scale must be finite and >= 0");
  return warnings;
}

std::size_t relation_width(Scorer scorer, std::size_t dim) {
  switch (scorer) {
    case Scorer::kRotatE: return dim / 2;
    case Scorer::kTripleRE: return 3 * dim;
    default: return dim;
  }
}

double resolved_init_scale(const ModelConfig& config, double margin) {
  return config.init_scale ? *config.init_scale : margin / static_cast<double>(config.dim);
}

EmbeddingModel::EmbeddingModel(ModelConfig config, std::size_t num_entities, std::size_t num_relations)
    : config_(std::move(config)),
      num_entities_(num_entities),
      num_relations_(num_relations),
      relation_width_(kgtopo::relation_width(config_.scorer, config_.dim)),
      entities_(num_entities * config_.dim, 0.0f),
      relations_(num_relations * relation_width_, 0.0f) {}

bool EmbeddingModel::all_finite() const {
  for (float v : entities_)
    if (!std::isfinite(v)) return false;
  for (float v : relations_)
    if (!std::isfinite(v)) return false;
  return true;
}

EmbeddingModel init_model(const ModelConfig& config, std::size_t num_entities, std::size_t num_relations) {
  validate(config);
  if (num_entities == 0 || num_relations == 0)
    throw InvalidArgument("init_model needs at least one entity and one relation");
  EmbeddingModel model(config, num_entities, num_relations);
  const double scale = resolved_init_scale(config);
  CounterRng rng(config.seed, streams::kInit);
  for (auto& v : model.entity_table()) v = static_cast<float>(rng.uniform(-scale, scale));
  if (config.scorer == Scorer::kRotatE) {
    for (auto& v : model.relation_table())
      v = static_cast<float>(rng.uniform(-std::numbers::pi, std::numbers::pi));
  } else {
    for (auto& v : model.relation_table()) v = static_cast<float>(rng.uniform(-scale, scale));
  }
  return model;
}

namespace {

void check_ids(const EmbeddingModel& m, EntityId h, RelationId r) {
  if (h >= m.num_entities()) throw InvalidArgument("head id out of range");
  if (r >= m.num_relations()) throw InvalidArgument("relation id out of range");
}

}  // namespace

TailQuery::TailQuery(const EmbeddingModel& model, EntityId h, RelationId r) : model_(&model) {
  check_ids(model, h, r);
  const std::size_t d = model.dim();
  const auto he = model.entity(h);
  const auto re = model.relation(r);
  q_.resize(d);
  switch (model.scorer()) {
    case Scorer::kTransE:
      for (std::size_t i = 0; i < d; ++i) q_[i] = static_cast<double>(he[i]) + static_cast<double>(re[i]);
      break;
    case Scorer::kDistMult:
      for (std::size_t i = 0; i < d; ++i) q_[i] = static_cast<double>(he[i]) * static_cast<double>(re[i]);
      break;
    case Scorer::kRotatE: {
      const std::size_t half = d / 2;
      for (std::size_t k = 0; k < half; ++k) {
        const double a = he[k], b = he[half + k];
        const double c = std::cos(static_cast<double>(re[k])), s = std::sin(static_cast<double>(re[k]));
        q_[k] = a * c - b * s;
        q_[half + k] = a * s + b * c;
      }
      break;
    }
    case Scorer::kTripleRE:
      w_.resize(d);
      for (std::size_t i = 0; i < d; ++i) {
        q_[i] = static_cast<double>(he[i]) * static_cast<double>(re[i]) + static_cast<double>(re[d + i]);
        w_[i] = re[2 * d + i];
      }
      break;
  }
}

double TailQuery::score(EntityId t) const {
  const auto& k = simd::active_kernels();
  const std::size_t d = model_->dim();
  const float* te = model_->entity_table().data() + static_cast<std::size_t>(t) * d;
  const bool l1 = model_->config().norm == 1;
  switch (model_->scorer()) {
    case Scorer::kTransE:
      return l1 ? -k.l1_diff(q_.data(), te, d) : -std::sqrt(k.l2sq_diff(q_.data(), te, d));
    case Scorer::kDistMult:
      return k.dot(q_.data(), te, d);
    case Scorer::kRotatE: {
      const std::size_t half = d / 2;
      return l1 ? -k.complex_abs_diff(q_.data(), q_.data() + half, te, te + half, half)
                : -std::sqrt(k.l2sq_diff(q_.data(), te, d));
    }
    case Scorer::kTripleRE:
      return l1 ? -k.l1_diff_scaled(q_.data(), te, w_.data(), d)
                : -std::sqrt(k.l2sq_diff_scaled(q_.data(), te, w_.data(), d));
  }
  return 0.0;
}

double score(const EmbeddingModel& model, EntityId h, RelationId r, EntityId t) {
  if (t >= model.num_entities()) throw InvalidArgument("tail id out of range");
  return TailQuery(model, h, r).score(t);
}

void score_tails(const EmbeddingModel& model, EntityId h, RelationId r,
                 std::span<const EntityId> candidates, std::span<double> out) {
  if (candidates.empty()) throw InvalidArgument("score_tails needs at least one candidate");
  if (out.size() != candidates.size()) throw InvalidArgument("score_tails output size mismatch");
  for (EntityId c : candidates)
    if (c >= model.num_entities()) throw InvalidArgument("candidate id out of range");
  TailQuery q(model, h, r);
  for (std::size_t i = 0; i < candidates.size(); ++i) out[i] = q.score(candidates[i]);
}

std::vector<double> score_tails(const EmbeddingModel& model, EntityId h, RelationId r,
                                std::span<const EntityId> candidates) {
  std::vector<double> out(candidates.size());
  score_tails(model, h, r, candidates, out);
  return out;
}

void score_all_tails(const EmbeddingModel& model, EntityId h, RelationId r, std::span<double> out) {
  if (out.size() != model.num_entities()) throw InvalidArgument("score_all_tails output size mismatch");
  TailQuery q(model, h, r);
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = q.score(static_cast<EntityId>(t));
}

namespace {

double sign(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

// Converts a residual vector into d score / d residual for score = -||v||_p,
// in place.
void norm_backward(std::vector<double>& v, int p) {
  if (p == 1) {
    for (auto& x : v) x = -sign(x);
    return;
  }
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double n = std::sqrt(sq);
  for (auto& x : v) x = n > 0 ? -x / n : 0.0;
}

}  // namespace

void score_backward(const EmbeddingModel& model, EntityId h, RelationId r, EntityId t,
                    double upstream, std::span<double> gh, std::span<double> gr, std::span<double> gt) {
  check_ids(model, h, r);
  if (t >= model.num_entities()) throw InvalidArgument("tail id out of range");
  const std::size_t d = model.dim();
  const auto he = model.entity(h);
  const auto te = model.entity(t);
  const auto re = model.relation(r);
  const int p = model.config().norm;
  std::vector<double> g(d);

  switch (model.scorer()) {
    case Scorer::kTransE: {
      for (std::size_t i = 0; i < d; ++i)
        g[i] = static_cast<double>(he[i]) + static_cast<double>(re[i]) - static_cast<double>(te[i]);
      norm_backward(g, p);
      for (std::size_t i = 0; i < d; ++i) {
        gh[i] += upstream * g[i];
        gr[i] += upstream * g[i];
        gt[i] -= upstream * g[i];
      }
      break;
    }
    case Scorer::kDistMult: {
      for (std::size_t i = 0; i < d; ++i) {
        const double hv = he[i], rv = re[i], tv = te[i];
        gh[i] += upstream * rv * tv;
        gr[i] += upstream * hv * tv;
        gt[i] += upstream * rv * hv;
      }
      break;
    }
    case Scorer::kRotatE: {
      const std::size_t half = d / 2;
      std::vector<double> c(half), s(half);
      for (std::size_t k = 0; k < half; ++k) {
        c[k] = std::cos(static_cast<double>(re[k]));
        s[k] = std::sin(static_cast<double>(re[k]));
        const double a = he[k], b = he[half + k];
        g[k] = a * c[k] - b * s[k] - te[k];
        g[half + k] = a * s[k] + b * c[k] - te[half + k];
      }
      if (p == 1) {
        // score = -sum_k |v_k| over complex moduli.
        for (std::size_t k = 0; k < half; ++k) {
          const double m = std::sqrt(g[k] * g[k] + g[half + k] * g[half + k]);
          g[k] = m > 0 ? -g[k] / m : 0.0;
          g[half + k] = m > 0 ? -g[half + k] / m : 0.0;
        }
      } else {
        norm_backward(g, 2);
      }
      for (std::size_t k = 0; k < half; ++k) {
        const double gre = upstream * g[k], gim = upstream * g[half + k];
        const double a = he[k], b = he[half + k];
        gh[k] += gre * c[k] + gim * s[k];
        gh[half + k] += -gre * s[k] + gim * c[k];
        gt[k] -= gre;
        gt[half + k] -= gim;
        gr[k] += gre * (-a * s[k] - b * c[k]) + gim * (a * c[k] - b * s[k]);
      }
      break;
    }
    case Scorer::kTripleRE: {
      for (std::size_t i = 0; i < d; ++i)
        g[i] = static_cast<double>(he[i]) * re[i] + re[d + i] - static_cast<double>(te[i]) * re[2 * d + i];
      norm_backward(g, p);
      for (std::size_t i = 0; i < d; ++i) {
        const double gi = upstream * g[i];
        gh[i] += gi * re[i];
        gr[i] += gi * he[i];
        gr[d + i] += gi;
        gt[i] -= gi * re[2 * d + i];
        gr[2 * d + i] -= gi * te[i];
      }
      break;
    }
  }
}

namespace {

constexpr char kMagic[8] = {'K', 'G', 'T', 'O', 'P', 'O', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& in, const std::string& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw ParseError(path, 0, "truncated checkpoint");
  return v;
}

}  // namespace

void save_checkpoint(const EmbeddingModel& model, const std::filesystem::path& path) {
  nlohmann::ordered_json header;
  header["format"] = "kgtopo-checkpoint";
  header["scorer"] = std::string(to_string(model.scorer()));
  header["dim"] = model.dim();
  header["norm"] = model.config().norm;
  header["init_scale"] = resolved_init_scale(model.config());
  header["seed"] = model.config().seed;
  header["num_entities"] = model.num_entities();
  header["num_relations"] = model.num_relations();
  header["relation_width"] = model.relation_width();
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, 0);
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(model.entity_table().data()),
            static_cast<std::streamsize>(model.entity_table().size() * sizeof(float)));
  out.write(reinterpret_cast<const char*>(model.relation_table().data()),
            static_cast<std::streamsize>(model.relation_table().size() * sizeof(float)));
  if (!out) throw Error("failed writing " + path.string());
}

EmbeddingModel load_checkpoint(const std::filesystem::path& path) {
  const std::string p = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(p, 0, "cannot open checkpoint");
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw ParseError(p, 0, "not a kgtopo checkpoint");
  if (get<std::uint32_t>(in, p) != kCheckpointVersion) throw ParseError(p, 0, "unsupported checkpoint version");
  get<std::uint32_t>(in, p);
  const auto n = get<std::uint64_t>(in, p);
  std::string text(n, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(n))) throw ParseError(p, 0, "truncated checkpoint header");
  const auto header = nlohmann::json::parse(text);

  ModelConfig config;
  config.scorer = parse_scorer(header.at("scorer").get<std::string>());
  config.dim = header.at("dim").get<std::size_t>();
  config.norm = header.at("norm").get<int>();
  config.init_scale = header.at("init_scale").get<double>();
  config.seed = header.at("seed").get<std::uint64_t>();
  validate(config);
  EmbeddingModel model(config, header.at("num_entities").get<std::size_t>(),
                       header.at("num_relations").get<std::size_t>());
  if (model.relation_width() != header.at("relation_width").get<std::size_t>())
    throw ParseError(p, 0, "relation width does not match scorer");
  auto read_table = [&](std::vector<float>& table) {
    if (!in.read(reinterpret_cast<char*>(table.data()),
                 static_cast<std::streamsize>(table.size() * sizeof(float))))
      throw ParseError(p, 0, "truncated checkpoint tables");
  };
  read_table(model.entity_table());
  read_table(model.relation_table());
  return model;
}

}  // namespace kgtopo
