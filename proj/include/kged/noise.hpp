#pragma once

// Labeled noisy benchmarks built from a clean graph.

#include "kged/baselines.hpp"
#include "kged/kg.hpp"
#include "kged/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string_view>
#include <vector>

namespace kged {

enum class NoiseKind : std::uint8_t { None, Random, Semantic, Adversarial };

std::string_view noise_name(NoiseKind kind);
NoiseKind noise_from_name(std::string_view name);

enum class Slot : std::uint8_t { Head, Relation, Tail };

struct NoisyTriplet {
  Triplet triplet;
  bool noisy = false;
  NoiseKind kind = NoiseKind::None;
  Triplet provenance;  // the triplet itself for correct entries
  Slot slot = Slot::Tail;
};

struct NoisyDataset {
  std::vector<NoisyTriplet> items;  // shuffled by the generation seed
  double ratio = 0.0;
  std::uint64_t seed = 0;
  std::vector<NoiseKind> mix;
  Index skipped_sources = 0;

  Index noisy_count() const;
  Index count(NoiseKind kind) const;
  std::vector<Triplet> triplets() const;
  std::vector<bool> labels() const;
};

// floor(ratio · correct), computed so that exact products do not round down.
Index noise_target(Index correct, double ratio);

// Deterministic text embedding of an entity, one row per call.
class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  virtual RowVector embed(const Entity& entity) const = 0;
  virtual Index dim() const = 0;
};

// Signed feature hashing (FNV-1a) of the lower-cased words of name and
// description, scaled to unit length.
class HashedEmbedder final : public TextEmbedder {
 public:
  explicit HashedEmbedder(Index dim = 256);
  RowVector embed(const Entity& entity) const override;
  RowVector embed_words(const std::vector<std::string>& words) const;
  Index dim() const override { return dim_; }

 private:
  Index dim_;
};

RowVector describe_embed(const Entity& entity, Index dim);

// Softmax over anchor · candidate dot products.
std::vector<double> semantic_distribution(const RowVector& anchor, const std::vector<RowVector>& candidates);
// Inverse-CDF draw from a discrete distribution.
std::size_t sample_discrete(const std::vector<double>& p, Rng& rng);

NoisyDataset inject_random(const KnowledgeGraph& kg, double ratio, std::uint64_t seed);
NoisyDataset inject_semantic(const KnowledgeGraph& kg, double ratio, const TextEmbedder& embedder, std::uint64_t seed);

struct AdversarialConfig {
  BaselineConfig transe;
  double split = 0.9;  // training share of each reshuffled split
  int max_iterations = 20;
};

// Models trained in each split iteration and the iteration that produced
// each generated noise (in generation order).
struct AdversarialTrace {
  std::vector<EmbeddingModel> models;
  std::vector<int> iteration;
  std::vector<Triplet> noise;
};

NoisyDataset inject_adversarial(const KnowledgeGraph& kg, double ratio, const AdversarialConfig& config,
                                std::uint64_t seed, AdversarialTrace* trace = nullptr);

// Equal shares of each listed kind (the first kinds take the remainder).
NoisyDataset inject_mixed(const KnowledgeGraph& kg, double ratio, const std::vector<NoiseKind>& kinds,
                          const TextEmbedder& embedder, const AdversarialConfig& adversarial, std::uint64_t seed);

// head relation tail label kind
void write_dataset(const std::filesystem::path& path, const NoisyDataset& data, const KnowledgeGraph& kg);
void write_manifest(const std::filesystem::path& path, const NoisyDataset& data);

// A dataset file read back with its text catalogs: the graph holds every
// listed triplet in file order.
struct LabeledGraph {
  KnowledgeGraph kg;
  std::vector<bool> labels;
  std::vector<NoiseKind> kinds;
};

LabeledGraph load_dataset(const std::filesystem::path& dataset, const std::filesystem::path& entity_text,
                          const std::filesystem::path& relation_text);
LabeledGraph labeled_graph(const KnowledgeGraph& clean, const NoisyDataset& data);

}  // namespace kged
