#pragma once

#include "kged/encoder.hpp"
#include "kged/fusion.hpp"
#include "kged/objectives.hpp"
#include "kged/vocab.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace kged {

struct OptimizerConfig {
  double learning_rate = 1e-3;
  double warmup_fraction = 0.1;  // share of all steps spent warming up
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
};

struct RunConfig {
  std::string triplets;   // labeled dataset (5 columns) or plain triplets (3 columns)
  std::string entities;   // entity text file
  std::string relations;  // relation text file
  std::string output_dir = "run";

  std::string variant = "full";  // full | structure-only | text-only | no-contrastive | no-confidence
  HyperParams hyper;
  EncoderConfig text_encoder = text_encoder_defaults();
  EncoderConfig structure_encoder = structure_encoder_defaults();
  VocabConfig vocab;
  Index projection_dim = 64;
  bool pretrain_entity_tokens = true;

  int epochs = 10;
  Index batch_size = 32;
  int refresh_period = 1;
  OptimizerConfig optimizer;
  std::vector<double> eval_k{0.01, 0.02, 0.03, 0.04, 0.05};
  std::uint64_t seed = 0;

  void validate() const;
  ModelVariant model_variant() const;
};

// Missing keys keep their defaults; unknown keys raise UsageError naming the path.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::ordered_json to_json(const RunConfig& c);

}  // namespace kged
