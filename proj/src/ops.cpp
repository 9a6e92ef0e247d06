#include "kged/ops.hpp"

#include <array>

namespace kged {

namespace {

Tensor unary(Kind kind, const Tensor& a, Attrs attrs = {}) {
  const std::array<Tensor, 1> in{a};
  return kged::apply(kind, in, attrs);
}

Tensor binary(Kind kind, const Tensor& a, const Tensor& b) {
  const std::array<Tensor, 2> in{a, b};
  return kged::apply(kind, in);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) { return binary(Kind::MatMul, a, b); }
Tensor transpose(const Tensor& a) { return unary(Kind::Transpose, a); }
Tensor add(const Tensor& a, const Tensor& b) { return binary(Kind::Add, a, b); }
Tensor multiply(const Tensor& a, const Tensor& b) { return binary(Kind::Multiply, a, b); }

Tensor scale(const Tensor& a, double factor) {
  Attrs attrs;
  attrs.scalar = factor;
  return unary(Kind::Scale, a, attrs);
}

Tensor bias_add(const Tensor& a, const Tensor& bias) { return binary(Kind::BiasAdd, a, bias); }

Tensor concat(std::span<const Tensor> parts, int axis) {
  Attrs attrs;
  attrs.axis = axis;
  return kged::apply(Kind::Concat, parts, attrs);
}

Tensor concat(std::initializer_list<Tensor> parts, int axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor embedding_lookup(const Tensor& table, std::vector<Index> rows) {
  Attrs attrs;
  attrs.index = std::move(rows);
  return unary(Kind::EmbeddingLookup, table, std::move(attrs));
}

Tensor row_softmax(const Tensor& a) { return unary(Kind::RowSoftmax, a); }
Tensor layer_norm(const Tensor& a) { return unary(Kind::LayerNorm, a); }

Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias) {
  const std::array<Tensor, 3> in{a, gain, bias};
  return kged::apply(Kind::LayerNorm, in);
}

Tensor gelu(const Tensor& a) { return unary(Kind::Gelu, a); }
Tensor row_normalize(const Tensor& a) { return unary(Kind::RowNormalize, a); }
Tensor cosine_similarity(const Tensor& a, const Tensor& b) { return binary(Kind::CosineSimilarity, a, b); }

Tensor cross_entropy_with_logits(const Tensor& logits, std::vector<Index> labels) {
  Attrs attrs;
  attrs.index = std::move(labels);
  return unary(Kind::CrossEntropyWithLogits, logits, std::move(attrs));
}

Tensor mean(const Tensor& a) { return unary(Kind::Mean, a); }
Tensor sum(const Tensor& a) { return unary(Kind::Sum, a); }
Tensor row_sum(const Tensor& a) { return unary(Kind::RowSum, a); }
Tensor exp(const Tensor& a) { return unary(Kind::Exp, a); }
Tensor log(const Tensor& a) { return unary(Kind::Log, a); }

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::vector<Index> segments, int heads) {
  Attrs attrs;
  attrs.heads = heads;
  attrs.index = std::move(segments);
  const std::array<Tensor, 3> in{q, k, v};
  return kged::apply(Kind::Attention, in, std::move(attrs));
}

}  // namespace kged
