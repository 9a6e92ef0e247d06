#include "kged/objectives.hpp"

#include "kged/errors.hpp"
#include "kged/ops.hpp"

#include <cmath>

namespace kged {

namespace {

Tensor weights(const std::vector<double>& c, Index rows) {
  if (static_cast<Index>(c.size()) != rows)
    throw UsageError("got " + std::to_string(c.size()) + " confidences for a batch of " + std::to_string(rows));
  Matrix w(rows, 1);
  for (Index i = 0; i < rows; ++i) w(i, 0) = c[static_cast<std::size_t>(i)];
  return Tensor::constant(std::move(w));
}

struct Side {
  const Tensor* anchor_left;   // first element of the anchor pair
  const Tensor* anchor_right;  // second element
  bool left_is_head;
};

Side side(const BatchViews& v, bool second) {
  return second ? Side{&v.v_tail, &v.u_head, false} : Side{&v.v_head, &v.u_tail, true};
}

void check_views(const BatchViews& v) {
  const Index b = v.v_head.rows();
  for (const Tensor* t : {&v.v_tail, &v.u_head, &v.u_tail})
    if (t->rows() != b || t->cols() != v.v_head.cols()) throw ShapeError("batch views disagree in shape");
  if (static_cast<Index>(v.corruptions.size()) != b) throw UsageError("one corruption list per batch item required");
}

}  // namespace

void HyperParams::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError("alpha must lie in [0, 1]");
  if (gamma < 0) throw UsageError("gamma must be a positive integer (0 = automatic)");
  if (!(beta > 0.0)) throw UsageError("beta must be positive");
  if (corrupted_pairs < 1) throw UsageError("corrupted_pairs must be at least 1");
  if (!(rho >= 0.0)) throw UsageError("rho must be non-negative");
}

Index HyperParams::bucket_size(Index n) const {
  if (gamma > 0) return gamma;
  return std::max<Index>(1, (n + 999) / 1000);
}

Tensor reconstruction_loss(const Tensor& logits, const std::vector<Index>& targets) {
  return cross_entropy_with_logits(logits, targets);
}

std::vector<TripletLossBundle> bundles(const ReconstructionLosses& l) {
  const Index b = l.text_head.defined() ? l.text_head.rows() : l.struct_head.rows();
  std::vector<TripletLossBundle> out(static_cast<std::size_t>(b));
  auto read = [&](const Tensor& t, double TripletLossBundle::*field) {
    if (!t.defined()) return;
    for (Index i = 0; i < b; ++i) out[static_cast<std::size_t>(i)].*field = t.value()(i, 0);
  };
  read(l.text_head, &TripletLossBundle::text_head);
  read(l.text_tail, &TripletLossBundle::text_tail);
  read(l.struct_head, &TripletLossBundle::struct_head);
  read(l.struct_tail, &TripletLossBundle::struct_tail);
  return out;
}

Tensor weighted_reconstruction_loss(const ReconstructionLosses& l, const std::vector<double>& confidences,
                                    double alpha) {
  Tensor total;
  auto term = [&](const Tensor& h, const Tensor& t, double coef) {
    if (!h.defined() || coef == 0.0) return;
    const Tensor w = weights(confidences, h.rows());
    Tensor s = scale(sum(multiply(add(h, t), w)), coef);
    total = total.defined() ? add(total, s) : s;
  };
  term(l.text_head, l.text_tail, alpha);
  term(l.struct_head, l.struct_tail, 1.0 - alpha);
  return total.defined() ? total : Tensor::scalar(0.0);
}

double weighted_reconstruction_loss(const std::vector<TripletLossBundle>& batch, const std::vector<double>& confidences,
                                    double alpha) {
  if (batch.size() != confidences.size())
    throw UsageError("got " + std::to_string(confidences.size()) + " confidences for a batch of " +
                     std::to_string(batch.size()));
  double text = 0.0, structure = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    text += confidences[i] * batch[i].score_text();
    structure += confidences[i] * batch[i].score_struct();
  }
  return alpha * text + (1.0 - alpha) * structure;
}

std::vector<std::vector<PairCorruption>> draw_corruptions(Index batch, int pairs, Rng& rng) {
  std::vector<std::vector<PairCorruption>> out(static_cast<std::size_t>(batch));
  for (Index i = 0; i < batch; ++i) {
    auto& list = out[static_cast<std::size_t>(i)];
    for (int x = 0; x < pairs; ++x) {
      PairCorruption c;
      c.head = rng.coin();
      if (batch > 1) {
        c.partner = static_cast<Index>(rng.below(static_cast<std::uint64_t>(batch - 1)));
        if (c.partner >= i) ++c.partner;
      } else {
        c.partner = i;
      }
      list.push_back(c);
    }
  }
  return out;
}

Tensor negative_similarity(const BatchViews& views, bool second) {
  check_views(views);
  const Index b = views.size();
  const Side s = side(views, second);
  const Tensor left = row_normalize(*s.anchor_left);
  const Tensor right = row_normalize(*s.anchor_right);

  Matrix off = Matrix::Ones(b, b);
  off.diagonal().setZero();
  const Tensor in_batch = row_sum(multiply(exp(matmul(left, transpose(right))), Tensor::constant(std::move(off))));

  // Corrupted pairs as gathered rows, grouped back per item.
  std::vector<Index> li, ri;
  std::vector<Index> owner;
  for (Index i = 0; i < b; ++i)
    for (const auto& c : views.corruptions[static_cast<std::size_t>(i)]) {
      const bool swap_left = c.head == s.left_is_head;
      li.push_back(swap_left ? c.partner : i);
      ri.push_back(swap_left ? i : c.partner);
      owner.push_back(i);
    }
  if (li.empty()) return in_batch;
  Matrix group = Matrix::Zero(b, static_cast<Index>(owner.size()));
  for (std::size_t k = 0; k < owner.size(); ++k) group(owner[k], static_cast<Index>(k)) = 1.0;
  const Tensor sims = row_sum(multiply(embedding_lookup(left, std::move(li)), embedding_lookup(right, std::move(ri))));
  return add(in_batch, matmul(Tensor::constant(std::move(group)), exp(sims)));
}

double negative_similarity(Index i, const BatchViews& views, bool second) {
  return negative_similarity(views, second).value()(i, 0);
}

IclLosses icl_losses(const BatchViews& views) {
  auto one = [&](bool second) {
    const Side s = side(views, second);
    const Tensor pos = row_sum(multiply(row_normalize(*s.anchor_left), row_normalize(*s.anchor_right)));
    return add(log(add(exp(pos), negative_similarity(views, second))), scale(pos, -1.0));
  };
  return {one(false), one(true)};
}

std::pair<double, double> icl_losses(Index i, const BatchViews& views) {
  const IclLosses l = icl_losses(views);
  return {l.first.value()(i, 0), l.second.value()(i, 0)};
}

Tensor contrastive_loss(const IclLosses& losses, const std::vector<double>& confidences) {
  return sum(multiply(add(losses.first, losses.second), weights(confidences, losses.first.rows())));
}

double contrastive_score(const RowVector& v, const RowVector& u) {
  const double nv = v.norm(), nu = u.norm();
  if (nv == 0.0 || nu == 0.0) return 0.0;
  return v.dot(u) / (nv * nu);
}

}  // namespace kged
