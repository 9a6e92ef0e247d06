#pragma once

// Reconstruction and interactive contrastive objectives.

#include "kged/rng.hpp"
#include "kged/tensor.hpp"

#include <utility>
#include <vector>

namespace kged {

struct HyperParams {
  double alpha = 0.5;       // text vs structure balance in the reconstruction loss
  double lambda = 1.0;      // structure weight in the reconstruction score
  Index gamma = 0;          // rank bucket size; 0 picks ceil(n / 1000)
  double beta = 1.0;        // exponent on the contrastive rank bucket
  int corrupted_pairs = 4;  // X
  double mu = 0.5;          // pseudo-label mean
  double rho = 0.15;        // pseudo-label standard deviation

  void validate() const;
  Index bucket_size(Index n) const;
};

// Per-row cross-entropies, each a B x 1 column.
struct ReconstructionLosses {
  Tensor text_head, text_tail, struct_head, struct_tail;
};

struct TripletLossBundle {
  double text_head = 0.0, text_tail = 0.0, struct_head = 0.0, struct_tail = 0.0;
  double score_contrastive = 0.0;

  double score_text() const { return text_head + text_tail; }
  double score_struct() const { return struct_head + struct_tail; }
};

// Cross-entropy of every row of `logits` against the true entity ids.
Tensor reconstruction_loss(const Tensor& logits, const std::vector<Index>& targets);

std::vector<TripletLossBundle> bundles(const ReconstructionLosses& losses);

// α Σ c (L_h^T + L_t^T) + (1 − α) Σ c (L_h^S + L_t^S).
Tensor weighted_reconstruction_loss(const ReconstructionLosses& losses, const std::vector<double>& confidences,
                                    double alpha);
double weighted_reconstruction_loss(const std::vector<TripletLossBundle>& batch, const std::vector<double>& confidences,
                                    double alpha);

// One corrupted pair: the head-side (or tail-side) vector of the anchor is
// replaced by the same-side vector of in-batch item `partner`.
struct PairCorruption {
  bool head = false;
  Index partner = 0;
};

// v: text-view mask embeddings, u: structure-view mask embeddings, all B x p
// and already projected into the shared space.
struct BatchViews {
  Tensor v_head, v_tail, u_head, u_tail;
  std::vector<std::vector<PairCorruption>> corruptions;  // B lists of X

  Index size() const { return v_head.rows(); }
};

// X corruptions per item; partners are drawn uniformly from the other batch
// items (the item itself when the batch has one element).
std::vector<std::vector<PairCorruption>> draw_corruptions(Index batch, int pairs, Rng& rng);

// Σ_{j≠i} exp(sim(anchor_i, other_j)) + Σ_x exp(sim(corrupted pair x)), B x 1.
// `second` selects the (v^t, u^h) anchor pair.
Tensor negative_similarity(const BatchViews& views, bool second = false);
double negative_similarity(Index i, const BatchViews& views, bool second = false);

struct IclLosses {
  Tensor first, second;  // B x 1 each
};

IclLosses icl_losses(const BatchViews& views);
std::pair<double, double> icl_losses(Index i, const BatchViews& views);

// Σ c (L_ICL¹ + L_ICL²).
Tensor contrastive_loss(const IclLosses& losses, const std::vector<double>& confidences);

// Cosine of the triplet's own anchor pair; zero vectors give 0.
double contrastive_score(const RowVector& v_head, const RowVector& u_tail);

}  // namespace kged
