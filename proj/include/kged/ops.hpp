#pragma once

// Expression-style wrappers over apply().

#include "kged/tensor.hpp"

#include <initializer_list>

namespace kged {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor multiply(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor bias_add(const Tensor& a, const Tensor& bias);
Tensor concat(std::span<const Tensor> parts, int axis = 0);
Tensor concat(std::initializer_list<Tensor> parts, int axis = 0);
Tensor embedding_lookup(const Tensor& table, std::vector<Index> rows);
Tensor row_softmax(const Tensor& a);
Tensor layer_norm(const Tensor& a);
Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias);
Tensor gelu(const Tensor& a);
Tensor row_normalize(const Tensor& a);
Tensor cosine_similarity(const Tensor& a, const Tensor& b);
Tensor cross_entropy_with_logits(const Tensor& logits, std::vector<Index> labels);
Tensor mean(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor row_sum(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
// Multi-head self-attention over packed sequences: rows of q/k/v are split
// into consecutive segments of the given lengths, attention never crosses a
// segment boundary.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::vector<Index> segments, int heads);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return add(a, scale(b, -1.0)); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

}  // namespace kged
