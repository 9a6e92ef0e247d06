#pragma once

// Per-noise-kind comparison of detectors on one clean graph, and the
// summary of a finished run directory.

#include "kged/baselines.hpp"
#include "kged/config.hpp"
#include "kged/evaluation.hpp"
#include "kged/noise.hpp"
#include "kged/synthetic.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace kged {

struct StudyConfig {
  RunConfig run;  // template for every detector run; dataset paths name the clean graph
  std::optional<SyntheticConfig> synthetic;  // generate the clean graph instead of loading it
  std::vector<NoiseKind> kinds{NoiseKind::Random, NoiseKind::Semantic};
  // Model variants ("full", "structure-only", ...) and baseline names ("transe", ...).
  std::vector<std::string> models{"structure-only", "full", "transe"};
  double ratio = 0.05;
  std::uint64_t noise_seed = 0;
  BaselineConfig baseline;
  AdversarialConfig adversarial;
  Index embedder_dim = 256;

  void validate() const;
};

StudyConfig parse_study_config(const nlohmann::json& j);
StudyConfig load_study_config(const std::filesystem::path& path);

struct StudyRow {
  NoiseKind kind = NoiseKind::None;
  std::string model;
  EvalReport report;
};

struct StudyResult {
  std::vector<StudyRow> rows;  // kind-major, models in configured order

  const StudyRow& at(NoiseKind kind, const std::string& model) const;
};

// The clean graph a study config describes.
KnowledgeGraph study_graph(const StudyConfig& config);

// With `out_dir` set, writes <kind>/dataset.tsv, <kind>/manifest.json and,
// per model, <kind>/<model>/ranking.tsv and eval.json, then study.json and
// study.txt at the top.
StudyResult empirical_study(const KnowledgeGraph& clean, const StudyConfig& config,
                            const std::optional<std::filesystem::path>& out_dir = std::nullopt);

nlohmann::ordered_json to_json(const StudyResult& r);
// One row per model, one column per (kind, K) with precision@K.
std::string format_study(const StudyResult& r);

// Summary of a training run directory: per-epoch losses and every eval*.json
// found there. Missing artifacts raise DataError listing each by name.
struct RunReport {
  nlohmann::ordered_json json;
  std::string text;
};
RunReport report(const std::filesystem::path& run_dir);

}  // namespace kged
