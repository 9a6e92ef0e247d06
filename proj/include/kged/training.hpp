#pragma once

#include "kged/config.hpp"
#include "kged/fusion.hpp"
#include "kged/model.hpp"
#include "kged/noise.hpp"

#include <filesystem>
#include <memory>
#include <vector>

namespace kged {

struct EpochMetrics {
  int epoch = 0;
  double text = 0.0;         // Σ c (L_h^T + L_t^T) / n
  double structure = 0.0;    // Σ c (L_h^S + L_t^S) / n
  double contrastive = 0.0;  // Σ c (L_ICL¹ + L_ICL²) / n
};

struct TrainingResult {
  std::unique_ptr<DualModel> model;
  std::vector<EpochMetrics> metrics;
  std::vector<ConfidenceTable> history;  // one table per refresh
  ConfidenceTable final_table;           // confidences in force when training stopped
};

// The training graph: every triplet of the configured file, with labels
// when the file carries them.
LabeledGraph load_training_graph(const RunConfig& config);

// Writes config.json, vocab.tsv, model.ckpt (rewritten every epoch),
// metrics.tsv and confidences.tsv into `config.output_dir` when
// `write_files` is set.
TrainingResult run_training(const RunConfig& config, const KnowledgeGraph& kg, bool write_files = true);
TrainingResult run_training(const RunConfig& config);

// Evaluation-mode scores fused into the detection table.
ConfidenceTable score_table(const DualModel& model, const RunConfig& config, const KnowledgeGraph& kg);

// Ranking rows in detection order: ascending confidence.
std::vector<std::size_t> detect(const ConfidenceTable& table);
void write_ranking(const std::filesystem::path& path, const ConfidenceTable& table, const KnowledgeGraph& kg);

void write_metrics(const std::filesystem::path& path, const std::vector<EpochMetrics>& metrics);

}  // namespace kged
