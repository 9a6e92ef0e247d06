// Command-line front end: data preparation, noise injection, training,
// detection, evaluation and the per-noise-kind study.

#include "kged/baselines.hpp"
#include "kged/errors.hpp"
#include "kged/evaluation.hpp"
#include "kged/noise.hpp"
#include "kged/study.hpp"
#include "kged/synthetic.hpp"
#include "kged/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace kged;

namespace {

struct GraphPaths {
  std::string triplets, entities, relations;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--triplets", triplets, "triplet file (head, relation, tail)")->required();
    cmd->add_option("--entities", entities, "entity text file (token, name, description)")->required();
    cmd->add_option("--relations", relations, "relation text file (token, name)")->required();
  }
};

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os << j.dump(2) << '\n';
  if (!os) throw DataError("failed writing " + path.string());
}

std::vector<double> parse_ks(const std::string& list) {
  std::vector<double> ks;
  std::stringstream ss(list);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      ks.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("--k expects comma-separated numbers, got '" + item + "'");
    }
  }
  if (ks.empty()) throw UsageError("--k needs at least one value");
  return ks;
}

void cmd_prep(const GraphPaths& g, const std::string& out) {
  LoadReport rep;
  const KnowledgeGraph kg = load_kg(g.triplets, g.entities, g.relations, &rep);
  const GraphStats s = stats(kg);
  nlohmann::ordered_json j;
  j["entities"] = s.entities;
  j["relations"] = s.relations;
  j["triplets"] = s.triplets;
  j["average_degree"] = s.average_degree;
  j["duplicate_triplets"] = rep.duplicate_triplets;
  j["text_only_entities_dropped"] = rep.text_only_entities_dropped;
  j["text_only_relations_dropped"] = rep.text_only_relations_dropped;
  j["entities_without_text"] = rep.entities_without_text;
  j["relations_without_text"] = rep.relations_without_text;
  if (!out.empty()) {
    fs::create_directories(out);
    save_kg(kg, fs::path(out) / "triplets.tsv", fs::path(out) / "entities.tsv", fs::path(out) / "relations.tsv");
    write_json(fs::path(out) / "stats.json", j);
  }
  std::cout << j.dump(2) << '\n';
}

void cmd_synth(const SyntheticConfig& c, const std::string& out) {
  const KnowledgeGraph kg = make_synthetic_kg(c);
  fs::create_directories(out);
  save_kg(kg, fs::path(out) / "triplets.tsv", fs::path(out) / "entities.tsv", fs::path(out) / "relations.tsv");
  std::cout << "wrote " << kg.triplet_count() << " triplets over " << kg.entity_count() << " entities and "
            << kg.relation_count() << " relations to " << out << '\n';
}

struct InjectOptions {
  std::string kind = "random";
  std::vector<std::string> mix{"random", "semantic", "adversarial"};
  double ratio = 0.05;
  std::uint64_t seed = 0;
  Index embed_dim = 256;
  Index transe_dim = 32;
  int transe_epochs = 100;
  std::string out;
};

void cmd_inject(const GraphPaths& g, const InjectOptions& o) {
  const KnowledgeGraph kg = load_kg(g.triplets, g.entities, g.relations);
  const HashedEmbedder embedder(o.embed_dim);
  AdversarialConfig adv;
  adv.transe.dim = o.transe_dim;
  adv.transe.epochs = o.transe_epochs;
  adv.transe.seed = o.seed;
  NoisyDataset d;
  if (o.kind == "random") {
    d = inject_random(kg, o.ratio, o.seed);
  } else if (o.kind == "semantic") {
    d = inject_semantic(kg, o.ratio, embedder, o.seed);
  } else if (o.kind == "adversarial") {
    d = inject_adversarial(kg, o.ratio, adv, o.seed);
  } else if (o.kind == "mixed") {
    std::vector<NoiseKind> kinds;
    for (const auto& k : o.mix) kinds.push_back(noise_from_name(k));
    d = inject_mixed(kg, o.ratio, kinds, embedder, adv, o.seed);
  } else {
    throw UsageError("--kind must be random, semantic, adversarial or mixed");
  }
  fs::create_directories(o.out);
  write_dataset(fs::path(o.out) / "dataset.tsv", d, kg);
  write_manifest(fs::path(o.out) / "manifest.json", d);
  std::cout << "wrote " << d.items.size() << " triplets (" << d.noisy_count() << " noisy) to "
            << (fs::path(o.out) / "dataset.tsv").string() << '\n';
}

void cmd_train(const std::string& config_path, const std::string& output_dir) {
  RunConfig c = load_run_config(config_path);
  if (!output_dir.empty()) c.output_dir = output_dir;
  const LabeledGraph g = load_training_graph(c);
  const TrainingResult r = run_training(c, g.kg);
  for (const auto& m : r.metrics)
    std::cout << "epoch " << m.epoch << "  L_text " << m.text << "  L_struct " << m.structure << "  L_contr "
              << m.contrastive << '\n';
  std::cout << "bundle written to " << c.output_dir << '\n';
}

void cmd_detect(const std::string& bundle_dir, const std::string& data, const std::string& out) {
  RunConfig c = load_run_config(fs::path(bundle_dir) / "config.json");
  if (!data.empty()) c.triplets = data;
  const LabeledGraph g = load_training_graph(c);
  const LoadedBundle b = load_bundle(bundle_dir, g.kg);
  const ConfidenceTable table = score_table(*b.model, c, g.kg);
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  write_ranking(out, table, g.kg);
  std::cout << "ranked " << table.rows.size() << " triplets into " << out << '\n';
}

void cmd_eval(const std::string& ranking, const std::string& labels, const std::string& ks, const std::string& out) {
  EvalReport r = evaluate_files(ranking, labels, parse_ks(ks));
  r.ranking_path = fs::path(ranking).filename().string();
  if (!out.empty()) write_json(out, to_json(r));
  std::cout << format_table(r);
}

void cmd_study(const std::string& config_path, const std::string& out) {
  const StudyConfig c = load_study_config(config_path);
  const StudyResult r = empirical_study(study_graph(c), c, fs::path(out));
  std::cout << format_study(r);
}

void cmd_report(const std::string& run, const std::string& out) {
  const RunReport r = report(run);
  if (!out.empty()) write_json(out, r.json);
  std::cout << r.text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Error detection for knowledge graphs with dual text/structure encoders"};
  app.require_subcommand(1);

  GraphPaths prep_paths;
  std::string prep_out;
  auto* prep = app.add_subcommand("prep", "load and validate a graph, print statistics");
  prep_paths.add_to(prep);
  prep->add_option("--out", prep_out, "directory for a cleaned copy");

  SyntheticConfig synth_cfg;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "generate a clustered synthetic graph");
  synth->add_option("--entities", synth_cfg.entities, "entity count")->capture_default_str();
  synth->add_option("--relations", synth_cfg.relations, "relation count")->capture_default_str();
  synth->add_option("--triplets", synth_cfg.triplets, "triplet count")->capture_default_str();
  synth->add_option("--clusters", synth_cfg.clusters, "latent clusters")->capture_default_str();
  synth->add_option("--facets", synth_cfg.facets, "facets per entity attribute")->capture_default_str();
  synth->add_option("--fidelity", synth_cfg.cluster_fidelity, "share of edges following their cluster pair")
      ->capture_default_str();
  synth->add_option("--seed", synth_cfg.seed, "generator seed")->capture_default_str();
  synth->add_option("--out", synth_out, "output directory")->required();

  GraphPaths inject_paths;
  InjectOptions inject_opts;
  auto* inject = app.add_subcommand("inject", "add labeled noise to a clean graph");
  inject_paths.add_to(inject);
  inject->add_option("--kind", inject_opts.kind, "random | semantic | adversarial | mixed")->capture_default_str();
  inject->add_option("--mix", inject_opts.mix, "kinds combined by --kind mixed")->delimiter(',');
  inject->add_option("--ratio", inject_opts.ratio, "noisy triplets per clean triplet")->capture_default_str();
  inject->add_option("--seed", inject_opts.seed, "noise seed")->capture_default_str();
  inject->add_option("--embed-dim", inject_opts.embed_dim, "hashed text embedding width")->capture_default_str();
  inject->add_option("--transe-dim", inject_opts.transe_dim, "TransE width for adversarial noise")->capture_default_str();
  inject->add_option("--transe-epochs", inject_opts.transe_epochs, "TransE epochs per split")->capture_default_str();
  inject->add_option("--out", inject_opts.out, "output directory")->required();

  std::string train_config, train_out;
  auto* train = app.add_subcommand("train", "train a detector and write its bundle");
  train->add_option("--config", train_config, "run config JSON")->required();
  train->add_option("--output-dir", train_out, "override the config's output_dir");

  std::string detect_bundle, detect_data, detect_out;
  auto* detect = app.add_subcommand("detect", "rank triplets by ascending confidence");
  detect->add_option("--checkpoint", detect_bundle, "bundle directory written by train")->required();
  detect->add_option("--data", detect_data, "rank this dataset instead of the training one");
  detect->add_option("--out", detect_out, "ranking TSV")->required();

  std::string eval_ranking, eval_labels, eval_k = "0.01,0.02,0.03,0.04,0.05", eval_out;
  auto* eval = app.add_subcommand("eval", "precision and recall at top-K");
  eval->add_option("--ranking", eval_ranking, "ranking TSV")->required();
  eval->add_option("--labels", eval_labels, "labeled dataset TSV")->required();
  eval->add_option("--k", eval_k, "comma-separated ratios")->capture_default_str();
  eval->add_option("--out", eval_out, "report JSON");

  std::string study_config, study_out;
  auto* study = app.add_subcommand("study", "compare detectors per noise kind");
  study->add_option("--config", study_config, "study config JSON")->required();
  study->add_option("--out", study_out, "output directory")->required();

  std::string report_run, report_out;
  auto* rep = app.add_subcommand("report", "summarize a run directory");
  rep->add_option("--run", report_run, "run directory")->required();
  rep->add_option("--out", report_out, "summary JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorCode::Usage);
  }

  try {
    if (*prep) cmd_prep(prep_paths, prep_out);
    if (*synth) cmd_synth(synth_cfg, synth_out);
    if (*inject) cmd_inject(inject_paths, inject_opts);
    if (*train) cmd_train(train_config, train_out);
    if (*detect) cmd_detect(detect_bundle, detect_data, detect_out);
    if (*eval) cmd_eval(eval_ranking, eval_labels, eval_k, eval_out);
    if (*study) cmd_study(study_config, study_out);
    if (*rep) cmd_report(report_run, report_out);
  } catch (const Error& e) {
    std::cerr << "kged: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "kged: internal error: " << e.what() << '\n';
    return static_cast<int>(ErrorCode::Numerical);
  }
  return 0;
}
