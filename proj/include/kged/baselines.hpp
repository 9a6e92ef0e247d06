#pragma once

// Translational and bilinear embedding baselines.

#include "kged/kg.hpp"
#include "kged/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace kged {

enum class BaselineKind { TransE, DistMult, ComplEx };

std::string_view baseline_name(BaselineKind kind);
BaselineKind baseline_from_name(std::string_view name);

struct BaselineConfig {
  BaselineKind kind = BaselineKind::TransE;
  Index dim = 32;
  int epochs = 100;
  double margin = 1.0;  // TransE
  int negatives = 1;    // per positive
  double learning_rate = 0.01;
  double weight_decay = 1e-4;  // DistMult / ComplEx
  Index batch_size = 128;
  std::uint64_t seed = 0;
};

// ComplEx rows hold [real | imaginary] halves, each `dim` wide.
struct EmbeddingModel {
  BaselineKind kind = BaselineKind::TransE;
  Index dim = 0;
  Matrix entities;
  Matrix relations;
};

EmbeddingModel init_baseline(Index entities, Index relations, const BaselineConfig& config);

// TransE: ‖h + r − t‖. DistMult: Σ h r t. ComplEx: Re(Σ h r conj(t)).
double raw_score(const EmbeddingModel& m, Index h, Index r, Index t);
// Oriented so that larger always means more suspicious.
double baseline_score(const EmbeddingModel& m, Index h, Index r, Index t);

// Per-epoch mean loss is appended to `losses` when given. A non-finite loss
// raises NumericalError naming the epoch.
EmbeddingModel train_baseline(const KnowledgeGraph& kg, const BaselineConfig& config,
                              std::vector<double>* losses = nullptr);
EmbeddingModel train_baseline(const KnowledgeGraph& kg, const std::vector<Triplet>& triplets,
                              const BaselineConfig& config, std::vector<double>* losses = nullptr);

// Every entity as a tail of (h, r), most plausible first, ties by id.
std::vector<Index> rank_all_tails(const EmbeddingModel& m, Index h, Index r);

// Positions of `triplets` ordered by descending suspicion, ties by position.
std::vector<std::size_t> baseline_ranking(const EmbeddingModel& m, const std::vector<Triplet>& triplets);

void save_baseline(const std::filesystem::path& path, const EmbeddingModel& m);
EmbeddingModel load_baseline(const std::filesystem::path& path);

}  // namespace kged
