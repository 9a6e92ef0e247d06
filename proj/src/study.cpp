#include "kged/study.hpp"

#include "kged/errors.hpp"
#include "kged/training.hpp"
#include "strict_reader.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace kged {

namespace {

using detail::Reader;

bool is_baseline(const std::string& model) {
  return model == "transe" || model == "distmult" || model == "complex";
}

void read_baseline(Reader& r, BaselineConfig& b) {
  std::string kind(baseline_name(b.kind));
  r.get("kind", kind);
  b.kind = baseline_from_name(kind);
  r.get("dim", b.dim);
  r.get("epochs", b.epochs);
  r.get("margin", b.margin);
  r.get("negatives", b.negatives);
  r.get("learning_rate", b.learning_rate);
  r.get("weight_decay", b.weight_decay);
  r.get("batch_size", b.batch_size);
  r.get("seed", b.seed);
}

std::vector<NoiseKind> ranked_kinds(const LabeledGraph& g, const std::vector<std::size_t>& order) {
  std::vector<NoiseKind> out;
  out.reserve(order.size());
  for (std::size_t i : order) out.push_back(g.kinds[i]);
  return out;
}

void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

std::string read_text(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

void StudyConfig::validate() const {
  run.validate();
  if (!(ratio > 0.0 && ratio < 1.0)) throw UsageError("study ratio must lie in (0, 1)");
  if (kinds.empty()) throw UsageError("study needs at least one noise kind");
  if (models.empty()) throw UsageError("study needs at least one model");
  for (auto k : kinds)
    if (k == NoiseKind::None) throw UsageError("'none' is not a noise kind");
  for (const auto& m : models)
    if (!is_baseline(m)) {
      RunConfig probe = run;
      probe.variant = m;
      probe.model_variant();
    }
  if (!synthetic && (run.triplets.empty() || run.entities.empty() || run.relations.empty()))
    throw UsageError("study needs either a synthetic section or the run's dataset paths");
}

StudyConfig parse_study_config(const nlohmann::json& j) {
  StudyConfig c;
  Reader r(j, "");
  nlohmann::json run = nlohmann::json::object();
  r.get("run", run);
  c.run = parse_run_config(run);
  if (j.contains("synthetic")) {
    SyntheticConfig s;
    r.object("synthetic", [&](Reader& y) {
      y.get("entities", s.entities);
      y.get("relations", s.relations);
      y.get("triplets", s.triplets);
      y.get("clusters", s.clusters);
      y.get("facets", s.facets);
      y.get("coupled_share", s.coupled_share);
      y.get("cluster_fidelity", s.cluster_fidelity);
      y.get("description_words", s.description_words);
      y.get("seed", s.seed);
    });
    c.synthetic = s;
  }
  std::vector<std::string> kinds;
  r.get("kinds", kinds);
  if (j.contains("kinds")) {
    c.kinds.clear();
    for (const auto& k : kinds) c.kinds.push_back(noise_from_name(k));
  }
  r.get("models", c.models);
  r.get("ratio", c.ratio);
  r.get("noise_seed", c.noise_seed);
  r.object("baseline", [&](Reader& b) { read_baseline(b, c.baseline); });
  r.object("adversarial", [&](Reader& a) {
    a.get("split", c.adversarial.split);
    a.get("max_iterations", c.adversarial.max_iterations);
    a.object("transe", [&](Reader& b) { read_baseline(b, c.adversarial.transe); });
  });
  r.get("embedder_dim", c.embedder_dim);
  r.finish();
  c.validate();
  return c;
}

StudyConfig load_study_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot open study config " + path.string());
  try {
    return parse_study_config(nlohmann::json::parse(is));
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError("study config " + path.string() + " is not valid JSON: " + e.what());
  }
}

const StudyRow& StudyResult::at(NoiseKind kind, const std::string& model) const {
  for (const auto& r : rows)
    if (r.kind == kind && r.model == model) return r;
  throw UsageError("study has no row for " + model + " on " + std::string(noise_name(kind)) + " noise");
}

KnowledgeGraph study_graph(const StudyConfig& config) {
  if (config.synthetic) return make_synthetic_kg(*config.synthetic);
  return load_kg(config.run.triplets, config.run.entities, config.run.relations);
}

StudyResult empirical_study(const KnowledgeGraph& clean, const StudyConfig& config,
                            const std::optional<std::filesystem::path>& out_dir) {
  config.validate();
  const HashedEmbedder embedder(config.embedder_dim);
  StudyResult result;
  for (NoiseKind kind : config.kinds) {
    NoisyDataset data;
    switch (kind) {
      case NoiseKind::Random: data = inject_random(clean, config.ratio, config.noise_seed); break;
      case NoiseKind::Semantic: data = inject_semantic(clean, config.ratio, embedder, config.noise_seed); break;
      case NoiseKind::Adversarial:
        data = inject_adversarial(clean, config.ratio, config.adversarial, config.noise_seed);
        break;
      case NoiseKind::None: break;
    }
    const LabeledGraph g = labeled_graph(clean, data);
    std::filesystem::path kind_dir;
    if (out_dir) {
      kind_dir = *out_dir / std::string(noise_name(kind));
      std::filesystem::create_directories(kind_dir);
      write_dataset(kind_dir / "dataset.tsv", data, clean);
      write_manifest(kind_dir / "manifest.json", data);
    }
    for (const auto& model : config.models) {
      const auto start = std::chrono::steady_clock::now();
      std::vector<std::size_t> order;
      ConfidenceTable table;
      if (is_baseline(model)) {
        BaselineConfig bc = config.baseline;
        bc.kind = baseline_from_name(model);
        const EmbeddingModel m = train_baseline(g.kg, bc);
        order = baseline_ranking(m, g.kg.triplets());
      } else {
        RunConfig rc = config.run;
        rc.variant = model;
        table = run_training(rc, g.kg, false).final_table;
        order = detect(table);
      }
      StudyRow row{kind, model, evaluate(ranked_kinds(g, order), config.run.eval_k)};
      row.report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (out_dir) {
        const auto dir = kind_dir / model;
        std::filesystem::create_directories(dir);
        if (table.rows.empty()) {
          std::ofstream os(dir / "ranking.tsv", std::ios::trunc);
          for (std::size_t i : order) {
            const Triplet t = g.kg.triplets()[i];
            os << clean.entities()[t.head].token << '\t' << clean.relations()[t.relation].token << '\t'
               << clean.entities()[t.tail].token << '\n';
          }
        } else {
          write_ranking(dir / "ranking.tsv", table, g.kg);
        }
        row.report.ranking_path = (std::filesystem::path(noise_name(kind)) / model / "ranking.tsv").string();
        write_json(dir / "eval.json", to_json(row.report));
      }
      result.rows.push_back(std::move(row));
    }
  }
  if (out_dir) {
    write_json(*out_dir / "study.json", to_json(result));
    std::ofstream(*out_dir / "study.txt", std::ios::trunc) << format_study(result);
  }
  return result;
}

nlohmann::ordered_json to_json(const StudyResult& r) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& row : r.rows) {
    nlohmann::ordered_json j;
    j["kind"] = noise_name(row.kind);
    j["model"] = row.model;
    j["report"] = to_json(row.report);
    rows.push_back(j);
  }
  return {{"rows", rows}};
}

std::string format_study(const StudyResult& r) {
  std::vector<NoiseKind> kinds;
  std::vector<std::string> models;
  std::vector<double> ks;
  for (const auto& row : r.rows) {
    if (std::find(kinds.begin(), kinds.end(), row.kind) == kinds.end()) kinds.push_back(row.kind);
    if (std::find(models.begin(), models.end(), row.model) == models.end()) models.push_back(row.model);
    for (const auto& kr : row.report.per_k)
      if (std::find(ks.begin(), ks.end(), kr.k) == ks.end()) ks.push_back(kr.k);
  }
  std::sort(ks.begin(), ks.end());
  std::ostringstream os;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-16s", "model");
  os << buf;
  for (auto kind : kinds)
    for (double k : ks) {
      std::snprintf(buf, sizeof buf, " %9s@%-4g", std::string(noise_name(kind)).c_str(), 100.0 * k);
      os << buf;
    }
  os << '\n';
  for (const auto& m : models) {
    std::snprintf(buf, sizeof buf, "%-16s", m.c_str());
    os << buf;
    for (auto kind : kinds)
      for (double k : ks) {
        std::string cell = "-";
        for (const auto& row : r.rows)
          if (row.kind == kind && row.model == m)
            for (const auto& kr : row.report.per_k)
              if (kr.k == k) {
                if (kr.precision) {
                  std::snprintf(buf, sizeof buf, "%.4f", *kr.precision);
                  cell = buf;
                } else {
                  cell = "n/a";
                }
              }
        std::snprintf(buf, sizeof buf, " %14s", cell.c_str());
        os << buf;
      }
    os << '\n';
  }
  return os.str();
}

RunReport report(const std::filesystem::path& run_dir) {
  std::vector<std::string> missing;
  for (const char* f : {"config.json", "metrics.tsv", "confidences.tsv"})
    if (!std::filesystem::is_regular_file(run_dir / f)) missing.emplace_back(f);
  std::vector<std::filesystem::path> evals;
  if (std::filesystem::is_directory(run_dir))
    for (const auto& entry : std::filesystem::directory_iterator(run_dir)) {
      const std::string name = entry.path().filename().string();
      if (entry.is_regular_file() && name.rfind("eval", 0) == 0 && entry.path().extension() == ".json")
        evals.push_back(entry.path());
    }
  if (evals.empty()) missing.emplace_back("eval.json");
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw DataError("run directory " + run_dir.string() + " is missing: " + list);
  }
  std::sort(evals.begin(), evals.end());

  nlohmann::ordered_json epochs = nlohmann::ordered_json::array();
  const auto lines = read_lines(run_dir / "metrics.tsv");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = split_tabs(lines[i]);
    if (f.size() != 4) throw DataError((run_dir / "metrics.tsv").string() + ":" + std::to_string(i + 1) + ": expected 4 columns");
    epochs.push_back({{"epoch", std::stoi(f[0])},
                      {"L_text", std::stod(f[1])},
                      {"L_struct", std::stod(f[2])},
                      {"L_contr", std::stod(f[3])}});
  }

  RunReport out;
  std::ostringstream text;
  text << "run: " << run_dir.filename().string() << '\n';
  const RunConfig cfg = parse_run_config(nlohmann::json::parse(read_text(run_dir / "config.json")));
  text << "variant: " << cfg.variant << ", epochs: " << epochs.size() << " of " << cfg.epochs << '\n';
  if (!epochs.empty()) {
    const auto& last = epochs.back();
    char buf[128];
    std::snprintf(buf, sizeof buf, "final losses: text %.4f, structure %.4f, contrastive %.4f\n",
                  last["L_text"].get<double>(), last["L_struct"].get<double>(), last["L_contr"].get<double>());
    text << buf;
  }
  nlohmann::ordered_json reports = nlohmann::ordered_json::array();
  for (const auto& p : evals) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_text(p));
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(p.string() + " is not valid JSON: " + e.what());
    }
    const EvalReport r = eval_report_from_json(j);
    nlohmann::ordered_json entry;
    entry["file"] = p.filename().string();
    entry["report"] = to_json(r);
    reports.push_back(entry);
    text << '\n' << p.filename().string() << " (" << r.noisy << " noisy of " << r.total << ")\n" << format_table(r);
  }
  out.json["run"] = run_dir.filename().string();
  out.json["variant"] = cfg.variant;
  out.json["epochs"] = epochs;
  out.json["evaluations"] = reports;
  out.text = text.str();
  return out;
}

}  // namespace kged
