#pragma once

// Rank fusion of reconstruction and contrastive scores, and the sorted
// Gaussian pseudo labels that turn fused ranks into confidences.

#include "kged/kg.hpp"
#include "kged/objectives.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace kged {

double fuse_reconstruction(double score_text, double score_struct, double lambda);
std::vector<double> fuse_reconstruction(const std::vector<double>& score_text, const std::vector<double>& score_struct,
                                        double lambda);

// 1-based ranks; rank 1 goes to the largest score when `descending`, ties
// broken by position.
std::vector<Index> error_ranks(const std::vector<double>& scores, bool descending);

// 1/ceil(r1/γ) + 1/ceil(r2/γ)^β
double rank_fuse(Index r1, Index r2, Index gamma, double beta);

// n draws of N(μ, ρ) (ρ a standard deviation) sorted ascending.
std::vector<double> sample_pseudo_labels(Index n, double mu, double rho, std::uint64_t seed);
// Min-max rescaling to [0, 1], floored at 0.01; equal values all map to 1.
std::vector<double> normalize_pseudo_labels(std::vector<double> sorted);
std::vector<double> make_pseudo_labels(Index n, double mu, double rho, std::uint64_t seed);

struct Assignment {
  std::vector<Index> rank;         // 1 = most suspicious
  std::vector<double> confidence;  // Z[rank - 1]
};

// Ranks fused scores descending (ties by position) and hands out Z in rank order.
Assignment assign_confidence(const std::vector<double>& fused, const std::vector<double>& z);

// Which parts of the model contribute to scores.
struct ModelVariant {
  bool text = true;
  bool structure = true;
  bool contrastive = true;
  bool adaptive_confidence = true;

  static ModelVariant full() { return {}; }
  static ModelVariant structure_only() { return {false, true, false, true}; }
  static ModelVariant text_only() { return {true, false, false, true}; }
};

struct ConfidenceRow {
  Triplet triplet;
  double score_reconstruct = 0.0;
  double score_contrastive = 0.0;
  Index r1 = 0, r2 = 0;
  double fused = 0.0;
  Index rank = 0;
  double confidence = 1.0;
};

struct ConfidenceTable {
  std::vector<ConfidenceRow> rows;  // dataset order

  std::vector<double> confidences() const;
  // Row indices by ascending confidence, then by fused rank.
  std::vector<std::size_t> detection_order() const;
};

// Table with every confidence at 1 and no scores.
ConfidenceTable uniform_table(const std::vector<Triplet>& triplets);

// Scores per triplet (empty vectors for disabled views) fused into a table.
ConfidenceTable build_confidence_table(const std::vector<Triplet>& triplets, const std::vector<TripletLossBundle>& scores,
                                       const HyperParams& hp, const ModelVariant& variant, std::uint64_t seed);

// head relation tail score_reconstruct score_contrastive fused rank confidence,
// one line per row of `order` (all rows in dataset order when empty).
void write_confidence_table(const std::filesystem::path& path, const ConfidenceTable& table, const KnowledgeGraph& kg,
                            const std::vector<std::size_t>& order = {});

}  // namespace kged
