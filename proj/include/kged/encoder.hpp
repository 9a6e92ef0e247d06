#pragma once

// Pre-norm transformer encoders over packed prompt batches.

#include "kged/kg.hpp"
#include "kged/prompts.hpp"
#include "kged/rng.hpp"
#include "kged/tensor.hpp"
#include "kged/vocab.hpp"

#include <span>
#include <string>
#include <vector>

namespace kged {

struct EncoderConfig {
  int layers = 2;
  int heads = 4;
  Index width = 128;
  Index ff_width = 512;
  Index max_length = 32;
  std::size_t neighbors = 8;  // structure prompts only
  double dropout = 0.1;
  double init_std = 0.02;
  std::uint64_t seed = 0;

  void validate() const;
};

EncoderConfig text_encoder_defaults();
EncoderConfig structure_encoder_defaults();

class Encoder {
 public:
  // Parameter names are prefixed with `name` + ".".
  Encoder(std::string name, Index vocab_size, const EncoderConfig& config);

  // Final-layer hidden vectors at each prompt's mask position, one row per
  // prompt. With `dropout` null the pass runs in evaluation mode.
  Tensor encode(std::span<const PromptSequence> prompts, Rng* dropout = nullptr) const;

  const Tensor& token_table() const { return tokens_; }
  Tensor& token_table() { return tokens_; }
  std::vector<Tensor> parameters() const;
  const EncoderConfig& config() const { return config_; }
  const std::string& name() const { return name_; }

 private:
  struct Layer {
    Tensor ln1_gain, ln1_bias, wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor ln2_gain, ln2_bias, w1, b1, w2, b2;
  };

  std::string name_;
  EncoderConfig config_;
  Tensor tokens_;
  Tensor positions_;
  std::vector<Layer> layers_;
  Tensor final_gain_, final_bias_;
};

// Mask embedding of a single prompt in evaluation mode, as a row vector.
RowVector encode_masked(const PromptSequence& prompt, const Encoder& encoder);

// Two-layer perceptron applied to mask embeddings before scoring them
// against the entity matrix.
class ReconstructionHead {
 public:
  ReconstructionHead(std::string name, Index width, std::uint64_t seed, double init_std = 0.02);
  Tensor operator()(const Tensor& mask_embeddings) const;
  std::vector<Tensor> parameters() const { return {w1_, b1_, w2_, b2_}; }
  Tensor& w1() { return w1_; }
  Tensor& b1() { return b1_; }
  Tensor& w2() { return w2_; }
  Tensor& b2() { return b2_; }

 private:
  Tensor w1_, b1_, w2_, b2_;
};

// Rows of the encoder's token table that belong to entity tokens, in entity order.
Tensor entity_matrix(const Encoder& encoder, const Vocabulary& vocab);

// transform · Eᵀ: one logit per entity for every row of `transformed`.
Tensor entity_logits(const Tensor& transformed, const Tensor& entities);

// Replaces the token row of every entity with a non-empty description by the
// evaluation-mode mask embedding of its description prompt. Rows of entities
// without description are left as initialized.
void pretrain_entity_tokens(const KnowledgeGraph& kg, const Vocabulary& vocab, Encoder& encoder);

}  // namespace kged
