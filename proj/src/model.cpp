#include "kged/model.hpp"

#include "kged/checkpoint.hpp"
#include "kged/errors.hpp"
#include "kged/ops.hpp"

#include <fstream>

namespace kged {

namespace {

// Gathers rows [from, from + n) of a tensor.
Tensor rows(const Tensor& t, Index from, Index n) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = from + i;
  return embedding_lookup(t, std::move(idx));
}

Matrix normal_init(Rng& rng, Index r, Index c, double std) {
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, std);
  return m;
}

}  // namespace

DualModel::DualModel(const KnowledgeGraph& kg, const RunConfig& config)
    : config_(config), vocab_(Vocabulary::build(kg, config.vocab)) {
  init(kg, config);
  if (text_ && config.pretrain_entity_tokens) pretrain_entity_tokens(kg, vocab_, *text_);
}

DualModel::DualModel(const KnowledgeGraph& kg, const RunConfig& config, Vocabulary vocab)
    : config_(config), vocab_(std::move(vocab)) {
  init(kg, config);
}

void DualModel::init(const KnowledgeGraph& kg, const RunConfig& config) {
  config.validate();
  variant_ = config.model_variant();
  if (vocab_.entity_count() != kg.entity_count() || vocab_.relation_count() != kg.relation_count())
    throw DataError("vocabulary covers " + std::to_string(vocab_.entity_count()) + " entities and " +
                    std::to_string(vocab_.relation_count()) + " relations, the graph has " +
                    std::to_string(kg.entity_count()) + " and " + std::to_string(kg.relation_count()));
  if (variant_.text) {
    EncoderConfig e = config.text_encoder;
    e.seed = derive_seed(config.seed, {0x74657874});
    text_ = std::make_unique<Encoder>("text", vocab_.size(), e);
    text_head_ = std::make_unique<ReconstructionHead>("text_head", e.width, derive_seed(e.seed, {1}), e.init_std);
  }
  if (variant_.structure) {
    EncoderConfig e = config.structure_encoder;
    e.seed = derive_seed(config.seed, {0x73747275});
    structure_ = std::make_unique<Encoder>("structure", vocab_.size(), e);
    structure_head_ =
        std::make_unique<ReconstructionHead>("structure_head", e.width, derive_seed(e.seed, {1}), e.init_std);
  }
  if (variant_.contrastive && text_ && structure_) {
    Rng rng(derive_seed(config.seed, {0x70726f6a}));
    text_projection_ = Tensor::parameter(
        normal_init(rng, config.text_encoder.width, config.projection_dim, config.text_encoder.init_std),
        "text_projection");
    structure_projection_ = Tensor::parameter(
        normal_init(rng, config.structure_encoder.width, config.projection_dim, config.structure_encoder.init_std),
        "structure_projection");
  }
}

std::vector<Tensor> DualModel::parameters() const {
  std::vector<Tensor> out;
  auto add_all = [&](const std::vector<Tensor>& ps) { out.insert(out.end(), ps.begin(), ps.end()); };
  if (text_) {
    add_all(text_->parameters());
    add_all(text_head_->parameters());
  }
  if (structure_) {
    add_all(structure_->parameters());
    add_all(structure_head_->parameters());
  }
  if (text_projection_.defined()) {
    out.push_back(text_projection_);
    out.push_back(structure_projection_);
  }
  return out;
}

DualModel::Forward DualModel::forward(const KnowledgeGraph& kg, std::span<const Triplet> batch,
                                      std::uint64_t neighbor_seed, Rng* dropout, Rng* corruption) const {
  const Index b = static_cast<Index>(batch.size());
  if (b == 0) throw UsageError("empty batch");
  Forward f;
  std::vector<Index> head_targets, tail_targets;
  for (const auto& t : batch) {
    head_targets.push_back(t.head);
    tail_targets.push_back(t.tail);
  }
  std::vector<Index> targets = head_targets;
  targets.insert(targets.end(), tail_targets.begin(), tail_targets.end());

  // Both prompts of a triplet share one encoder call: heads first, then tails.
  Tensor text_mask, structure_mask;
  if (text_) {
    std::vector<PromptSequence> prompts(static_cast<std::size_t>(2 * b));
    for (Index i = 0; i < b; ++i) {
      auto p = build_text_prompts(batch[static_cast<std::size_t>(i)], kg, vocab_, text_->config().max_length);
      prompts[static_cast<std::size_t>(i)] = std::move(p.head);
      prompts[static_cast<std::size_t>(b + i)] = std::move(p.tail);
    }
    text_mask = text_->encode(prompts, dropout);
    const Tensor ce = reconstruction_loss(entity_logits((*text_head_)(text_mask), entity_matrix(*text_, vocab_)), targets);
    f.losses.text_head = rows(ce, 0, b);
    f.losses.text_tail = rows(ce, b, b);
  }
  if (structure_) {
    std::vector<PromptSequence> prompts(static_cast<std::size_t>(2 * b));
    for (Index i = 0; i < b; ++i) {
      const Triplet& t = batch[static_cast<std::size_t>(i)];
      auto p = build_struct_prompts(t, kg, vocab_, structure_->config().neighbors,
                                    derive_seed(neighbor_seed, {static_cast<std::uint64_t>(t.head),
                                                                static_cast<std::uint64_t>(t.relation),
                                                                static_cast<std::uint64_t>(t.tail)}),
                                    structure_->config().max_length);
      prompts[static_cast<std::size_t>(i)] = std::move(p.head);
      prompts[static_cast<std::size_t>(b + i)] = std::move(p.tail);
    }
    structure_mask = structure_->encode(prompts, dropout);
    const Tensor ce = reconstruction_loss(
        entity_logits((*structure_head_)(structure_mask), entity_matrix(*structure_, vocab_)), targets);
    f.losses.struct_head = rows(ce, 0, b);
    f.losses.struct_tail = rows(ce, b, b);
  }
  if (text_projection_.defined()) {
    const Tensor v = matmul(text_mask, text_projection_);
    const Tensor u = matmul(structure_mask, structure_projection_);
    BatchViews views{rows(v, 0, b), rows(v, b, b), rows(u, 0, b), rows(u, b, b), {}};
    Rng fixed(derive_seed(neighbor_seed, {0x636f7272}));
    views.corruptions = draw_corruptions(b, config_.hyper.corrupted_pairs, corruption ? *corruption : fixed);
    f.icl = icl_losses(views);
    f.views = std::move(views);
  }
  return f;
}

std::vector<TripletLossBundle> DualModel::score(const KnowledgeGraph& kg, std::uint64_t neighbor_seed,
                                                Index batch_size) const {
  const auto& ts = kg.triplets();
  std::vector<TripletLossBundle> out;
  out.reserve(ts.size());
  for (std::size_t start = 0; start < ts.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t n = std::min(ts.size() - start, static_cast<std::size_t>(batch_size));
    const Forward f = forward(kg, std::span(ts).subspan(start, n), neighbor_seed, nullptr, nullptr);
    auto part = bundles(f.losses);
    if (f.views) {
      const Matrix& v = f.views->v_head.value();
      const Matrix& u = f.views->u_tail.value();
      for (std::size_t i = 0; i < n; ++i)
        part[i].score_contrastive = contrastive_score(v.row(static_cast<Index>(i)), u.row(static_cast<Index>(i)));
    }
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

void DualModel::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  vocab_.save(dir / "vocab.tsv");
  std::ofstream os(dir / "config.json", std::ios::trunc);
  if (!os) throw DataError("cannot write " + (dir / "config.json").string());
  os << to_json(config_).dump(2) << '\n';
  os.close();
  save_checkpoint(dir / "model.ckpt", parameters());
}

LoadedBundle load_bundle(const std::filesystem::path& dir, const KnowledgeGraph& kg) {
  for (const char* name : {"config.json", "vocab.tsv", "model.ckpt"})
    if (!std::filesystem::exists(dir / name)) throw DataError("bundle " + dir.string() + " lacks " + name);
  LoadedBundle b;
  b.config = load_run_config(dir / "config.json");
  b.model = std::make_unique<DualModel>(kg, b.config, Vocabulary::load(dir / "vocab.tsv"));
  auto params = b.model->parameters();
  restore_checkpoint(dir / "model.ckpt", params);
  return b;
}

}  // namespace kged
