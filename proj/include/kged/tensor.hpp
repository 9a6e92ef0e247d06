#pragma once

// Dense 2-D tensors with reverse-mode differentiation.
//
// Every value is a row-major Eigen matrix of doubles. Vectors are 1 x n rows,
// scalars 1 x 1. A Tensor is a cheap handle to a shared node; primitives
// build new nodes and remember their inputs whenever any input requires a
// gradient, so calling backward() on a scalar walks the recorded graph.

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kged {

using Index = Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using RowVector = RowVectorX<double>;
using Vector = VectorX<double>;

enum class Kind : std::uint8_t {
  Leaf,
  MatMul,
  Transpose,
  Add,
  Multiply,
  Scale,
  BiasAdd,
  Concat,
  EmbeddingLookup,
  RowSoftmax,
  LayerNorm,
  Gelu,
  RowNormalize,
  CosineSimilarity,
  CrossEntropyWithLogits,
  Mean,
  Sum,
  RowSum,
  Exp,
  Log,
  Attention,
};

std::string_view kind_name(Kind kind);
Kind kind_from_name(std::string_view name);

// Non-tensor arguments of a primitive.
struct Attrs {
  double scalar = 0.0;       // Scale factor
  int axis = 0;              // Concat: 0 stacks rows, 1 stacks columns
  int heads = 1;             // Attention
  std::vector<Index> index;  // EmbeddingLookup rows, CrossEntropy labels, Attention segment lengths
};

struct Node {
  Kind kind = Kind::Leaf;
  Matrix value;
  Matrix grad;  // empty until touched
  bool requires_grad = false;
  std::string name;
  std::vector<std::shared_ptr<Node>> inputs;
  Attrs attrs;
  std::vector<Matrix> saved;  // forward intermediates reused by backward
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Matrix value);
  static Tensor parameter(Matrix value, std::string name);
  static Tensor scalar(double v);

  bool defined() const { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  // Mutable access for optimizers and initializers; never use on interior nodes.
  Matrix& mutable_value() { return node_->value; }

  // Gradient of the last backward() pass; zeros when the node was unreachable.
  Matrix grad() const;
  void zero_grad();

  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  std::vector<Index> shape() const { return {rows(), cols()}; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  Kind kind() const { return node_->kind; }
  const std::string& name() const { return node_->name; }

  const std::shared_ptr<Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node> node_;
};

// Applies a primitive. Shape violations throw ShapeError naming the shapes.
Tensor apply(Kind kind, std::span<const Tensor> inputs, const Attrs& attrs = {});

// Reverse pass from a 1 x 1 tensor; gradients accumulate into leaves.
void backward(const Tensor& loss);

// Ordered primitive applications reachable from an output.
struct ComputationRecord {
  struct Application {
    Kind kind;
    std::vector<std::size_t> inputs;  // positions in `nodes`
    std::size_t output;
  };
  std::vector<std::shared_ptr<Node>> nodes;  // topological order, leaves included
  std::vector<Application> applications;
};

ComputationRecord record(const Tensor& output);

// Recomputes every application from the current leaf values and returns the
// final output. Intermediate node values are overwritten.
Matrix replay(const ComputationRecord& rec);

}  // namespace kged
