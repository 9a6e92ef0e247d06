#pragma once

// The dual-view detector: text and structure encoders, their reconstruction
// heads and the projections into the shared contrastive space.

#include "kged/config.hpp"
#include "kged/encoder.hpp"
#include "kged/fusion.hpp"
#include "kged/kg.hpp"
#include "kged/objectives.hpp"
#include "kged/vocab.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

namespace kged {

class DualModel {
 public:
  // Fresh, seeded parameters; the vocabulary is built from the graph.
  DualModel(const KnowledgeGraph& kg, const RunConfig& config);
  // Parameters restored from a bundle directory written by save().
  DualModel(const KnowledgeGraph& kg, const RunConfig& config, Vocabulary vocab);

  const Vocabulary& vocab() const { return vocab_; }
  const ModelVariant& variant() const { return variant_; }
  bool has_text() const { return text_ != nullptr; }
  bool has_structure() const { return structure_ != nullptr; }
  bool has_contrastive() const { return text_projection_.defined(); }
  Encoder& text_encoder() { return *text_; }
  Encoder& structure_encoder() { return *structure_; }
  const Encoder& text_encoder() const { return *text_; }
  const Encoder& structure_encoder() const { return *structure_; }

  std::vector<Tensor> parameters() const;

  struct Forward {
    ReconstructionLosses losses;
    std::optional<BatchViews> views;
    std::optional<IclLosses> icl;
  };

  // One batch through every enabled view. Structure prompts sample their
  // neighbors with `neighbor_seed`; dropout is active only when `dropout` is
  // given; corrupted pairs are drawn from `corruption` (required with the
  // contrastive view when training, otherwise drawn from a fixed stream).
  Forward forward(const KnowledgeGraph& kg, std::span<const Triplet> batch, std::uint64_t neighbor_seed,
                  Rng* dropout, Rng* corruption) const;

  // Evaluation-mode per-triplet scores (confidence weights play no part).
  std::vector<TripletLossBundle> score(const KnowledgeGraph& kg, std::uint64_t neighbor_seed,
                                       Index batch_size = 64) const;

  void save(const std::filesystem::path& dir) const;

 private:
  void init(const KnowledgeGraph& kg, const RunConfig& config);

  RunConfig config_;
  Vocabulary vocab_;
  ModelVariant variant_;
  std::unique_ptr<Encoder> text_, structure_;
  std::unique_ptr<ReconstructionHead> text_head_, structure_head_;
  Tensor text_projection_, structure_projection_;
};

// Reads config.json, vocab.tsv and model.ckpt from a bundle directory.
struct LoadedBundle {
  RunConfig config;
  std::unique_ptr<DualModel> model;
};
LoadedBundle load_bundle(const std::filesystem::path& dir, const KnowledgeGraph& kg);

}  // namespace kged
