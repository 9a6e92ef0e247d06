#include "doctest.h"

#include "kged/checkpoint.hpp"
#include "kged/errors.hpp"
#include "kged/grad_check.hpp"
#include "kged/ops.hpp"
#include "kged/optimizer.hpp"
#include "primitive_checks.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace kged;
using kged::testing::random_matrix;

namespace {

Matrix row(std::initializer_list<double> v) {
  Matrix m(1, static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) m(0, i++) = x;
  return m;
}

}  // namespace

TEST_CASE("row-softmax of equal logits is uniform") {
  const Tensor y = row_softmax(Tensor::constant(row({0.0, 0.0})));
  CHECK(y.value()(0, 0) == doctest::Approx(0.5));
  CHECK(y.value()(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("cross-entropy of uniform logits is ln(classes)") {
  const Tensor logits = Tensor::constant(Matrix::Constant(2, 4, 0.3));
  const Tensor ce = cross_entropy_with_logits(logits, {0, 3});
  CHECK(ce.value()(0, 0) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(ce.value()(1, 0) == doctest::Approx(1.386294).epsilon(1e-6));
}

TEST_CASE("cosine similarity of a vector with itself is one; zero vectors give zero") {
  Rng rng(3);
  const Matrix x = random_matrix(rng, 1, 6);
  CHECK(cosine_similarity(Tensor::constant(x), Tensor::constant(x)).item() == doctest::Approx(1.0).epsilon(1e-14));
  const Matrix z = Matrix::Zero(1, 6);
  CHECK(cosine_similarity(Tensor::constant(x), Tensor::constant(z)).item() == 0.0);
}

TEST_CASE("shape mismatches are rejected with the offending shapes") {
  const Tensor a = Tensor::constant(Matrix::Zero(2, 3));
  const Tensor b = Tensor::constant(Matrix::Zero(4, 5));
  try {
    matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[4x5]") != std::string::npos);
  }
  CHECK_THROWS_AS(add(a, b), ShapeError);
  CHECK_THROWS_AS(attention(a, a, a, {1}, 1), ShapeError);
  CHECK_THROWS_AS(kind_from_name("convolution"), UsageError);
  CHECK(kind_from_name("layer-norm") == Kind::LayerNorm);
}

TEST_CASE("backward of x*x at 3 is 6") {
  Tensor x = Tensor::parameter(Matrix::Constant(1, 1, 3.0), "x");
  backward(multiply(x, x));
  CHECK(x.grad()(0, 0) == doctest::Approx(6.0));
}

TEST_CASE("cross-entropy gradient equals softmax minus one-hot") {
  Rng rng(5);
  Tensor z = Tensor::parameter(random_matrix(rng, 1, 5), "z");
  backward(sum(cross_entropy_with_logits(z, {2})));
  Matrix expected = row_softmax(Tensor::constant(z.value())).value();
  expected(0, 2) -= 1.0;
  CHECK((z.grad() - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("backward rejects non-scalar losses and zeroes unreachable parameters") {
  Tensor x = Tensor::parameter(Matrix::Ones(2, 2), "x");
  Tensor unused = Tensor::parameter(Matrix::Ones(3, 1), "unused");
  CHECK_THROWS_AS(backward(scale(x, 2.0)), ShapeError);
  backward(sum(x));
  CHECK(unused.grad().isZero());
  CHECK(x.grad().isOnes());
}

TEST_CASE("gradients accumulate across parameter reuse") {
  Tensor table = Tensor::parameter(Matrix::Ones(3, 2), "table");
  backward(sum(embedding_lookup(table, {1, 1, 2})));
  CHECK(table.grad()(0, 0) == 0.0);
  CHECK(table.grad()(1, 0) == 2.0);
  CHECK(table.grad()(2, 1) == 1.0);
}

TEST_CASE("every primitive passes grad_check at random points") {
  Rng rng(11);
  for (const auto& c : kged::testing::primitive_cases()) {
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) worst = std::max(worst, c.trial(rng));
    INFO(c.name);
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("grad_check reference points") {
  const Matrix x = row({1.0, 2.0, 3.0});
  CHECK(grad_check([](const Tensor& t) { return sum(multiply(t, t)); }, x) <= 1e-8);
  Rng rng(2);
  CHECK(grad_check([](const Tensor& t) { return sum(multiply(layer_norm(t), layer_norm(t))); }, random_matrix(rng, 2, 5)) <=
        1e-4);
  CHECK(grad_check([](const Tensor&) { return Tensor::scalar(4.0); }, x) == 0.0);
  int calls = 0;
  CHECK_THROWS_AS(grad_check([&](const Tensor&) { return Tensor::scalar(static_cast<double>(++calls)); }, x), UsageError);
}

TEST_CASE("softmax rows are nonnegative and sum to one") {
  Rng rng(9);
  for (int t = 0; t < 50; ++t) {
    const Matrix y = row_softmax(Tensor::constant(random_matrix(rng, 4, 7, 20.0))).value();
    CHECK((y.array() >= 0.0).all());
    CHECK((y.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("layer-norm of a constant row stays finite") {
  const Tensor y = layer_norm(Tensor::constant(Matrix::Constant(2, 4, 5.0)));
  CHECK(y.value().allFinite());
  CHECK(y.value().isZero());
}

TEST_CASE("backward is linear in the loss") {
  Rng rng(21);
  for (int t = 0; t < 20; ++t) {
    Tensor x = Tensor::parameter(random_matrix(rng, 3, 4), "x");
    const Tensor w = Tensor::constant(random_matrix(rng, 4, 4));
    auto f = [&] { return sum(gelu(matmul(layer_norm(x), w))); };
    auto g = [&] { return sum(row_softmax(matmul(x, w))); };
    const double a = rng.normal(), b = rng.normal();
    backward(f());
    const Matrix gf = x.grad();
    x.zero_grad();
    backward(g());
    const Matrix gg = x.grad();
    x.zero_grad();
    backward(add(scale(f(), a), scale(g(), b)));
    CHECK((x.grad() - (a * gf + b * gg)).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("random three-layer compositions match finite differences") {
  Rng rng(31);
  for (int t = 0; t < 10; ++t) {
    Tensor x = Tensor::parameter(random_matrix(rng, 3, 4), "x");
    Tensor w1 = Tensor::parameter(random_matrix(rng, 4, 5, 0.5), "w1");
    Tensor w2 = Tensor::parameter(random_matrix(rng, 5, 3, 0.5), "w2");
    const Matrix c = random_matrix(rng, 3, 3);
    auto f = [&] {
      return sum(multiply(row_softmax(matmul(gelu(layer_norm(matmul(x, w1))), w2)), Tensor::constant(c)));
    };
    CHECK(grad_check(f, {x, w1, w2}) <= 1e-4);
  }
}

TEST_CASE("replaying a record reproduces outputs bit for bit") {
  Rng rng(41);
  Tensor x = Tensor::parameter(random_matrix(rng, 5, 4), "x");
  Tensor w = Tensor::parameter(random_matrix(rng, 4, 4), "w");
  const Tensor out = sum(attention(matmul(x, w), x, gelu(x), {2, 3}, 2));
  const ComputationRecord rec = record(out);
  CHECK(rec.nodes.size() >= 6);
  CHECK(rec.applications.back().kind == Kind::Sum);
  for (std::size_t i = 0; i < rec.applications.size(); ++i)
    for (std::size_t input : rec.applications[i].inputs) CHECK(input < rec.applications[i].output);
  const double before = out.item();
  CHECK(replay(rec)(0, 0) == before);
}

TEST_CASE("cosine schedule: warmup origin, warmup end, decay end") {
  const CosineSchedule s{.peak = 0.01, .warmup_steps = 10, .total_steps = 110};
  CHECK(s.learning_rate(0) == 0.0);
  CHECK(s.learning_rate(5) == doctest::Approx(0.005));
  CHECK(s.learning_rate(10) == doctest::Approx(0.01));
  CHECK(s.learning_rate(60) == doctest::Approx(0.005));
  CHECK(s.learning_rate(110) == doctest::Approx(0.0));
}

TEST_CASE("AdamW: zero-rate step is a no-op, later steps descend, NaN refused") {
  Tensor p = Tensor::parameter(Matrix::Constant(1, 3, 2.0), "p");
  AdamW opt({p}, CosineSchedule{.peak = 0.1, .warmup_steps = 1, .total_steps = 50}, {.weight_decay = 0.1});
  backward(sum(multiply(p, p)));
  opt.step();  // learning rate 0 at warmup origin
  CHECK(p.value().isApproxToConstant(2.0));
  for (int i = 0; i < 20; ++i) {
    p.zero_grad();
    backward(sum(multiply(p, p)));
    opt.step();
  }
  CHECK(p.value()(0, 0) < 1.0);
  CHECK(opt.step_count() == 21);

  Tensor q = Tensor::parameter(Matrix::Ones(1, 2), "q");
  AdamW bad({q}, CosineSchedule{.peak = 0.1, .warmup_steps = 0, .total_steps = 5});
  backward(sum(scale(q, std::numeric_limits<double>::quiet_NaN())));
  try {
    bad.step();
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("'q'") != std::string::npos);
  }
  CHECK(q.value().isOnes());
  CHECK(bad.step_count() == 0);
}

TEST_CASE("AdamW refuses steps past the schedule") {
  Tensor p = Tensor::parameter(Matrix::Ones(1, 1), "p");
  AdamW opt({p}, CosineSchedule{.peak = 0.1, .warmup_steps = 0, .total_steps = 1});
  opt.step();
  CHECK_THROWS_AS(opt.step(), UsageError);
}

TEST_CASE("checkpoint layout and round trip") {
  const auto path = std::filesystem::temp_directory_path() / "kged_ckpt_test.bin";
  Matrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  std::vector<Tensor> params{Tensor::parameter(m, "w"), Tensor::parameter(Matrix::Constant(1, 1, -0.5), "bias")};
  save_checkpoint(path, params);

  std::ifstream is(path, std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), {});
  REQUIRE(bytes.size() == 4 + (4 + 1 + 4 + 16 + 48) + (4 + 4 + 4 + 16 + 8));
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "KGS1");
  CHECK(bytes[4] == 1);   // name length, little-endian
  CHECK(bytes[8] == 'w');
  CHECK(bytes[9] == 2);   // rank
  CHECK(bytes[13] == 2);  // rows
  CHECK(bytes[21] == 3);  // cols
  double second;
  std::memcpy(&second, bytes.data() + 29 + 8, 8);
  CHECK(second == 2.0);  // row-major payload

  const auto loaded = load_checkpoint(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].name == "w");
  CHECK(loaded[0].value == m);
  CHECK(loaded[1].value(0, 0) == -0.5);

  std::vector<Tensor> fresh{Tensor::parameter(Matrix::Zero(2, 3), "w"), Tensor::parameter(Matrix::Zero(1, 1), "bias")};
  restore_checkpoint(path, fresh);
  CHECK(fresh[0].value() == m);
  std::vector<Tensor> wrong{Tensor::parameter(Matrix::Zero(3, 2), "w")};
  CHECK_THROWS_AS(restore_checkpoint(path, wrong), DataError);
  std::filesystem::remove(path);
}
