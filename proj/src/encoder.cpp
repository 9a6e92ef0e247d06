#include "kged/encoder.hpp"

#include "kged/errors.hpp"
#include "kged/ops.hpp"

namespace kged {

namespace {

Matrix normal_init(Rng& rng, Index rows, Index cols, double std) {
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, std);
  return m;
}

Tensor dropout(const Tensor& x, double rate, Rng* rng) {
  if (rng == nullptr || rate <= 0.0) return x;
  Matrix mask(x.rows(), x.cols());
  const double keep = 1.0 / (1.0 - rate);
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng->uniform() < rate ? 0.0 : keep;
  return multiply(x, Tensor::constant(std::move(mask)));
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) { return bias_add(matmul(x, w), b); }

}  // namespace

void EncoderConfig::validate() const {
  if (layers < 0 || heads < 1 || width < 1 || ff_width < 1 || max_length < 1)
    throw UsageError("encoder sizes must be positive");
  if (width % heads != 0)
    throw UsageError("encoder width " + std::to_string(width) + " is not divisible by " + std::to_string(heads) +
                     " heads");
  if (dropout < 0.0 || dropout >= 1.0) throw UsageError("dropout rate must lie in [0, 1)");
}

EncoderConfig text_encoder_defaults() {
  EncoderConfig c;
  c.layers = 4;
  c.max_length = 64;
  return c;
}

EncoderConfig structure_encoder_defaults() { return EncoderConfig{}; }

Encoder::Encoder(std::string name, Index vocab_size, const EncoderConfig& config)
    : name_(std::move(name)), config_(config) {
  config_.validate();
  Rng rng(derive_seed(config_.seed, {0x656e63}));
  const Index d = config_.width;
  const double s = config_.init_std;
  auto param = [&](Index r, Index c, const std::string& n) {
    return Tensor::parameter(normal_init(rng, r, c, s), name_ + "." + n);
  };
  auto filled = [&](Index c, double v, const std::string& n) {
    return Tensor::parameter(Matrix::Constant(1, c, v), name_ + "." + n);
  };
  tokens_ = param(vocab_size, d, "tokens");
  positions_ = param(config_.max_length, d, "positions");
  for (int l = 0; l < config_.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    Layer L;
    L.ln1_gain = filled(d, 1.0, p + "ln1_gain");
    L.ln1_bias = filled(d, 0.0, p + "ln1_bias");
    L.wq = param(d, d, p + "wq");
    L.bq = filled(d, 0.0, p + "bq");
    L.wk = param(d, d, p + "wk");
    L.bk = filled(d, 0.0, p + "bk");
    L.wv = param(d, d, p + "wv");
    L.bv = filled(d, 0.0, p + "bv");
    L.wo = param(d, d, p + "wo");
    L.bo = filled(d, 0.0, p + "bo");
    L.ln2_gain = filled(d, 1.0, p + "ln2_gain");
    L.ln2_bias = filled(d, 0.0, p + "ln2_bias");
    L.w1 = param(d, config_.ff_width, p + "w1");
    L.b1 = filled(config_.ff_width, 0.0, p + "b1");
    L.w2 = param(config_.ff_width, d, p + "w2");
    L.b2 = filled(d, 0.0, p + "b2");
    layers_.push_back(std::move(L));
  }
  final_gain_ = filled(d, 1.0, "final_gain");
  final_bias_ = filled(d, 0.0, "final_bias");
}

std::vector<Tensor> Encoder::parameters() const {
  std::vector<Tensor> out{tokens_, positions_};
  for (const auto& L : layers_)
    for (const Tensor& t : {L.ln1_gain, L.ln1_bias, L.wq, L.bq, L.wk, L.bk, L.wv, L.bv, L.wo, L.bo, L.ln2_gain,
                            L.ln2_bias, L.w1, L.b1, L.w2, L.b2})
      out.push_back(t);
  out.push_back(final_gain_);
  out.push_back(final_bias_);
  return out;
}

Tensor Encoder::encode(std::span<const PromptSequence> prompts, Rng* rng) const {
  if (prompts.empty()) throw UsageError(name_ + ": empty prompt batch");
  std::vector<Index> ids, pos, segments, mask_rows;
  Index offset = 0;
  for (const auto& p : prompts) {
    if (p.length() > config_.max_length)
      throw UsageError(name_ + ": prompt of " + std::to_string(p.length()) + " tokens exceeds max length " +
                       std::to_string(config_.max_length));
    if (p.mask_position < 0 || p.mask_position >= p.length() ||
        p.tokens[static_cast<std::size_t>(p.mask_position)] != Vocabulary::kMask)
      throw UsageError(name_ + ": prompt mask position does not hold [MASK]");
    for (Index i = 0; i < p.length(); ++i) {
      const Index tok = p.tokens[static_cast<std::size_t>(i)];
      if (tok < 0 || tok >= tokens_.rows()) throw UsageError(name_ + ": token id outside the vocabulary");
      ids.push_back(tok);
      pos.push_back(i);
    }
    segments.push_back(p.length());
    mask_rows.push_back(offset + p.mask_position);
    offset += p.length();
  }
  const double rate = config_.dropout;
  Tensor x = add(embedding_lookup(tokens_, std::move(ids)), embedding_lookup(positions_, std::move(pos)));
  x = dropout(x, rate, rng);
  for (const auto& L : layers_) {
    const Tensor a = layer_norm(x, L.ln1_gain, L.ln1_bias);
    const Tensor att = attention(linear(a, L.wq, L.bq), linear(a, L.wk, L.bk), linear(a, L.wv, L.bv), segments,
                                 config_.heads);
    x = add(x, dropout(linear(att, L.wo, L.bo), rate, rng));
    const Tensor f = layer_norm(x, L.ln2_gain, L.ln2_bias);
    x = add(x, dropout(linear(gelu(linear(f, L.w1, L.b1)), L.w2, L.b2), rate, rng));
  }
  // Only the mask rows feed the heads, so normalize after gathering them.
  return layer_norm(embedding_lookup(x, std::move(mask_rows)), final_gain_, final_bias_);
}

RowVector encode_masked(const PromptSequence& prompt, const Encoder& encoder) {
  return encoder.encode(std::span(&prompt, 1)).value().row(0);
}

ReconstructionHead::ReconstructionHead(std::string name, Index width, std::uint64_t seed, double init_std) {
  Rng rng(derive_seed(seed, {0x68656164}));
  w1_ = Tensor::parameter(normal_init(rng, width, width, init_std), name + ".w1");
  b1_ = Tensor::parameter(Matrix::Zero(1, width), name + ".b1");
  w2_ = Tensor::parameter(normal_init(rng, width, width, init_std), name + ".w2");
  b2_ = Tensor::parameter(Matrix::Zero(1, width), name + ".b2");
}

Tensor ReconstructionHead::operator()(const Tensor& mask_embeddings) const {
  return linear(gelu(linear(mask_embeddings, w1_, b1_)), w2_, b2_);
}

Tensor entity_matrix(const Encoder& encoder, const Vocabulary& vocab) {
  return embedding_lookup(encoder.token_table(), vocab.entity_tokens());
}

Tensor entity_logits(const Tensor& transformed, const Tensor& entities) {
  if (transformed.cols() != entities.cols())
    throw ShapeError("entity_logits: transform width " + std::to_string(transformed.cols()) +
                     " does not match entity width " + std::to_string(entities.cols()));
  return matmul(transformed, transpose(entities));
}

void pretrain_entity_tokens(const KnowledgeGraph& kg, const Vocabulary& vocab, Encoder& encoder) {
  constexpr std::size_t kBatch = 64;
  std::vector<PromptSequence> batch;
  std::vector<Index> owners;
  // Every prompt is encoded against the initial table; updates land afterwards.
  std::vector<std::pair<Index, RowVector>> rows;
  auto flush = [&] {
    if (batch.empty()) return;
    const Matrix out = encoder.encode(batch).value();
    for (std::size_t i = 0; i < owners.size(); ++i) rows.emplace_back(owners[i], out.row(static_cast<Index>(i)));
    batch.clear();
    owners.clear();
  };
  for (const auto& e : kg.entities()) {
    if (e.description.empty()) continue;
    batch.push_back(build_description_prompt(e.id, kg, vocab, encoder.config().max_length));
    owners.push_back(e.id);
    if (batch.size() == kBatch) flush();
  }
  flush();
  Matrix& table = encoder.token_table().mutable_value();
  for (const auto& [e, row] : rows) table.row(vocab.entity_token(e)) = row;
}

}  // namespace kged
