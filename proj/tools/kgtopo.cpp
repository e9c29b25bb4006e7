// kgtopo: command-line front-end for the topology / embedding pipeline.

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kgtopo/pipeline.hpp"

namespace {

/// TOML reader that maps [section] key to the option --section.key instead
/// of to a subcommand.
class DottedToml : public CLI::ConfigTOML {
 public:
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    std::vector<CLI::ConfigItem> out;
    for (auto& item : CLI::ConfigTOML::from_config(input)) {
      if (item.parents.empty()) {
        out.push_back(std::move(item));
        continue;
      }
      if (item.name == "++" || item.name == "--") continue;
      std::string name;
      for (const auto& p : item.parents) name += p + ".";
      item.name = name + item.name;
      item.parents.clear();
      out.push_back(std::move(item));
    }
    return out;
  }
};

struct RawOptions {
  std::vector<std::string> data;
  std::string format = "tsv";
  std::string columns = "hrt";
  bool header = false;
  std::string entity_types;
  bool dedup_reverse = false;

  std::string split_mode = "random";
  double train_ratio = 0.8, valid_ratio = 0.1, test_ratio = 0.1;

  std::string scorer = "distmult";
  std::size_t dim = 64;
  int norm = 1;
  double init_scale = 0.0;  // 0 means margin / dim

  std::string negative_mode = "shared";
  std::string filter = "graph";

  std::vector<std::string> case_data;
  std::string normalizer;
};

int run(int argc, char** argv) {
  CLI::App app{"Topology analysis and embedding evaluation for knowledge graphs"};
  app.set_config("--config", "", "TOML config file; keys use the dotted option names");
  app.config_formatter(std::make_shared<DottedToml>());
  app.require_subcommand(1);

  RawOptions raw;
  kgtopo::ExperimentConfig cfg;
  std::string out;

  app.add_option("--data.paths,--data", raw.data, "Triple file(s); three files with split.mode=provided");
  app.add_option("--data.format,--format", raw.format, "tsv or csv")->check(CLI::IsMember({"tsv", "csv"}));
  app.add_option("--data.columns", raw.columns, "Column order, e.g. hrt or htr");
  app.add_flag("--data.header", raw.header, "Input has a header row");
  app.add_option("--data.entity_types", raw.entity_types, "Entity type TSV (entity, type)");
  app.add_flag("--data.dedup_reverse,--dedup-reverse", raw.dedup_reverse, "Keep one of each (h,r,t)/(t,r,h) pair");

  app.add_option("--split.mode", raw.split_mode, "random or provided")->check(CLI::IsMember({"random", "provided"}));
  app.add_option("--split.train", raw.train_ratio);
  app.add_option("--split.valid", raw.valid_ratio);
  app.add_option("--split.test", raw.test_ratio);

  app.add_option("--topology.scope", cfg.topology_scope, "Compute topology on the full graph or the train split")
      ->check(CLI::IsMember({"graph", "train"}));

  app.add_option("--model.scorer,--scorer", raw.scorer, "transe, distmult, rotate or triplere");
  app.add_option("--model.dim,--dim", raw.dim, "Embedding dimension");
  app.add_option("--model.norm", raw.norm, "p-norm for distance scorers (1 or 2)");
  app.add_option("--model.init_scale", raw.init_scale, "Uniform init half-width; 0 means margin/dim");

  auto& t = cfg.train;
  app.add_option("--train.margin", t.margin);
  app.add_option("--train.batch_size", t.batch_size);
  app.add_option("--train.negatives", t.negatives);
  app.add_option("--train.adversarial_temperature", t.adversarial_temperature);
  app.add_option("--train.learning_rate,--lr", t.learning_rate);
  app.add_option("--train.epochs,--epochs", t.epochs);
  app.add_option("--train.beta1", t.beta1);
  app.add_option("--train.beta2", t.beta2);
  app.add_option("--train.epsilon", t.epsilon);
  app.add_option("--train.negative_mode", raw.negative_mode, "shared or independent");
  app.add_option("--train.patience", t.patience, "Validations without improvement before stopping; 0 disables");
  app.add_option("--train.validate_every", t.validate_every);
  app.add_option("--train.val_queries", cfg.val_queries, "Validation queries per check; 0 means all");

  app.add_option("--eval.filter,--filter", raw.filter, "Filter known triples from the full graph or train only")
      ->check(CLI::IsMember({"graph", "train"}));
  app.add_option("--eval.top_k", cfg.top_k, "Top-k list length for degree bias");

  app.add_option("--analysis.stratify_keys", cfg.stratify_keys);
  app.add_option("--analysis.degree_bins", cfg.degree_bins, "Comma-separated bin edges, last may be inf");
  app.add_option("--analysis.demixing_top_k", cfg.demixing_top_k);
  app.add_option("--analysis.interaction_pairs", cfg.interaction_pairs, "HeadType:TailType pairs");

  app.add_option("--case_study.data", raw.case_data, "Triple file(s) of the second graph");
  app.add_option("--case_study.normalizer", raw.normalizer, "Two-column label mapping TSV");
  app.add_option("--case_study.relation", cfg.case_relation, "Normalized relation label");
  app.add_option("--case_study.test_fraction", cfg.case_test_fraction);

  app.add_option("--out", out, "Output directory")->envname("KGTOPO_OUT")->default_str("kgtopo_out");
  app.add_option("--seed", cfg.seed);
  app.add_option("--threads", cfg.threads, "Worker threads; 0 means all cores");
  app.add_option("--kernel", cfg.kernel, "auto, scalar or avx2")->check(CLI::IsMember({"auto", "scalar", "avx2"}));

  const std::map<std::string, std::string> help = {
      {"stats", "Entity, relation and triple counts and average degree"},
      {"topology", "Per-triple degrees, cardinality and pattern flags"},
      {"split", "Seeded train/valid/test split and counterpart report"},
      {"train", "Train an embedding model on the train split"},
      {"eval", "Filtered tail ranking of the test split"},
      {"stratify", "MRR by topology strata and the plot pack"},
      {"case-study", "Shared-triple comparison of two graphs"},
      {"all", "stats, topology, split, train, eval, stratify (and case-study when configured)"}};
  for (const auto& [name, desc] : help) app.add_subcommand(name, desc)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    for (const auto& p : raw.data) cfg.data.emplace_back(p);
    cfg.load = kgtopo::parse_column_order(raw.columns);
    cfg.load.format = kgtopo::parse_table_format(raw.format);
    cfg.load.has_header = raw.header;
    if (!raw.entity_types.empty()) cfg.entity_types = raw.entity_types;
    cfg.dedup_reverse = raw.dedup_reverse;
    cfg.split_mode = raw.split_mode;
    cfg.ratios = {raw.train_ratio, raw.valid_ratio, raw.test_ratio};
    cfg.model.scorer = kgtopo::parse_scorer(raw.scorer);
    cfg.model.dim = raw.dim;
    cfg.model.norm = raw.norm;
    if (raw.init_scale > 0) cfg.model.init_scale = raw.init_scale;
    cfg.train.negative_mode = kgtopo::parse_negative_mode(raw.negative_mode);
    cfg.filter = kgtopo::parse_filter_source(raw.filter);
    for (const auto& p : raw.case_data) cfg.case_data.emplace_back(p);
    if (!raw.normalizer.empty()) cfg.normalizer = raw.normalizer;
    cfg.out = out.empty() ? "kgtopo_out" : out;
    kgtopo::validate(cfg);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }

  const auto stage = kgtopo::parse_stage(app.get_subcommands().front()->get_name());
  try {
    return kgtopo::run_stage(stage, cfg, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
