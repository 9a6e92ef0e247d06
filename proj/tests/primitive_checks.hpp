#pragma once

// Finite-difference sweeps over every primitive, shared by the unit tests
// and the acceptance suite.

#include "kged/grad_check.hpp"
#include "kged/ops.hpp"
#include "kged/rng.hpp"

#include <functional>
#include <string>
#include <vector>

namespace kged::testing {

inline Matrix random_matrix(Rng& rng, Index r, Index c, double scale = 1.0) {
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

inline Matrix random_positive(Rng& rng, Index r, Index c) {
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = 0.5 + 2.0 * rng.uniform();
  return m;
}

struct PrimitiveCase {
  std::string name;
  // Draws a random point, contracts the primitive's output with random
  // weights and returns the grad_check error at that point.
  std::function<double(Rng&)> trial;
};

inline std::vector<PrimitiveCase> primitive_cases() {
  std::vector<PrimitiveCase> cases;
  auto unary = [&](std::string name, std::function<Tensor(const Tensor&)> op, bool positive = false) {
    cases.push_back({name, [op, positive](Rng& rng) {
                       const Matrix x = positive ? random_positive(rng, 3, 4) : random_matrix(rng, 3, 4);
                       const Tensor probe = op(Tensor::constant(x));
                       const Matrix w = random_matrix(rng, probe.rows(), probe.cols());
                       return grad_check([&](const Tensor& t) { return sum(multiply(op(t), Tensor::constant(w))); }, x);
                     }});
  };
  unary("transpose", [](const Tensor& t) { return transpose(t); });
  unary("scale", [](const Tensor& t) { return scale(t, -1.7); });
  unary("row-softmax", [](const Tensor& t) { return row_softmax(t); });
  unary("layer-norm", [](const Tensor& t) { return layer_norm(t); });
  unary("gelu", [](const Tensor& t) { return gelu(t); });
  unary("row-normalize", [](const Tensor& t) { return row_normalize(t); });
  unary("mean", [](const Tensor& t) { return mean(t); });
  unary("sum", [](const Tensor& t) { return sum(t); });
  unary("row-sum", [](const Tensor& t) { return row_sum(t); });
  unary("exp", [](const Tensor& t) { return exp(t); });
  unary("log", [](const Tensor& t) { return log(t); }, true);
  unary("embedding-lookup", [](const Tensor& t) { return embedding_lookup(t, {2, 0, 2, 1, 1}); });

  cases.push_back({"cross-entropy-with-logits", [](Rng& rng) {
                     const Matrix x = random_matrix(rng, 4, 5, 2.0);
                     std::vector<Index> labels;
                     for (int i = 0; i < 4; ++i) labels.push_back(static_cast<Index>(rng.below(5)));
                     const Matrix w = random_matrix(rng, 4, 1);
                     return grad_check(
                         [&](const Tensor& t) { return sum(multiply(cross_entropy_with_logits(t, labels), Tensor::constant(w))); },
                         x);
                   }});

  auto binary = [&](std::string name, std::function<Tensor(const Tensor&, const Tensor&)> op, Index br, Index bc,
                    Index ar = 3, Index ac = 4) {
    cases.push_back({name, [=](Rng& rng) {
                       Tensor a = Tensor::parameter(random_matrix(rng, ar, ac), "a");
                       Tensor b = Tensor::parameter(random_matrix(rng, br, bc), "b");
                       Rng proj(rng.next());
                       const Matrix w = [&] {
                         const Tensor y = op(a, b);
                         return random_matrix(proj, y.rows(), y.cols());
                       }();
                       return grad_check([&] { return sum(multiply(op(a, b), Tensor::constant(w))); }, {a, b});
                     }});
  };
  binary("matmul", [](const Tensor& a, const Tensor& b) { return matmul(a, b); }, 4, 2);
  binary("add", [](const Tensor& a, const Tensor& b) { return add(a, b); }, 3, 4);
  binary("multiply", [](const Tensor& a, const Tensor& b) { return multiply(a, b); }, 3, 4);
  binary("bias-add", [](const Tensor& a, const Tensor& b) { return bias_add(a, b); }, 1, 4);
  binary("cosine-similarity", [](const Tensor& a, const Tensor& b) { return cosine_similarity(a, b); }, 3, 4);
  binary("concat-rows", [](const Tensor& a, const Tensor& b) { return concat({a, b}, 0); }, 2, 4);
  binary("concat-cols", [](const Tensor& a, const Tensor& b) { return concat({a, b}, 1); }, 3, 2);

  cases.push_back({"layer-norm-affine", [](Rng& rng) {
                     Tensor x = Tensor::parameter(random_matrix(rng, 3, 5), "x");
                     Tensor g = Tensor::parameter(random_matrix(rng, 1, 5), "g");
                     Tensor b = Tensor::parameter(random_matrix(rng, 1, 5), "b");
                     const Matrix w = random_matrix(rng, 3, 5);
                     return grad_check([&] { return sum(multiply(layer_norm(x, g, b), Tensor::constant(w))); }, {x, g, b});
                   }});

  cases.push_back({"attention", [](Rng& rng) {
                     Tensor q = Tensor::parameter(random_matrix(rng, 7, 4), "q");
                     Tensor k = Tensor::parameter(random_matrix(rng, 7, 4), "k");
                     Tensor v = Tensor::parameter(random_matrix(rng, 7, 4), "v");
                     const Matrix w = random_matrix(rng, 7, 4);
                     return grad_check([&] { return sum(multiply(attention(q, k, v, {3, 1, 3}, 2), Tensor::constant(w))); },
                                       {q, k, v});
                   }});
  return cases;
}

}  // namespace kged::testing
