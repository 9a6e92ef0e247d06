#include "kged/tensor.hpp"

#include "kged/errors.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace kged {

namespace {

constexpr double kVarianceFloor = 1e-12;

struct KindEntry {
  Kind kind;
  std::string_view name;
};

constexpr std::array<KindEntry, 21> kKinds{{
    {Kind::Leaf, "leaf"},
    {Kind::MatMul, "matmul"},
    {Kind::Transpose, "transpose"},
    {Kind::Add, "add"},
    {Kind::Multiply, "multiply"},
    {Kind::Scale, "scale"},
    {Kind::BiasAdd, "bias-add"},
    {Kind::Concat, "concat"},
    {Kind::EmbeddingLookup, "embedding-lookup"},
    {Kind::RowSoftmax, "row-softmax"},
    {Kind::LayerNorm, "layer-norm"},
    {Kind::Gelu, "gelu"},
    {Kind::RowNormalize, "row-normalize"},
    {Kind::CosineSimilarity, "cosine-similarity"},
    {Kind::CrossEntropyWithLogits, "cross-entropy-with-logits"},
    {Kind::Mean, "mean"},
    {Kind::Sum, "sum"},
    {Kind::RowSum, "row-sum"},
    {Kind::Exp, "exp"},
    {Kind::Log, "log"},
    {Kind::Attention, "attention"},
}};

std::string shape_str(const Matrix& m) {
  return "[" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + "]";
}

[[noreturn]] void shape_fail(Kind kind, std::span<const std::shared_ptr<Node>> inputs, const std::string& detail) {
  std::ostringstream os;
  os << kind_name(kind) << ": " << detail << "; got";
  for (const auto& in : inputs) os << ' ' << shape_str(in->value);
  throw ShapeError(os.str());
}

void require_arity(Kind kind, std::span<const std::shared_ptr<Node>> in, std::size_t lo, std::size_t hi) {
  if (in.size() < lo || in.size() > hi)
    shape_fail(kind, in, "expects " + std::to_string(lo) + (lo == hi ? "" : ".." + std::to_string(hi)) + " inputs");
}

void require_same_shape(Kind kind, std::span<const std::shared_ptr<Node>> in) {
  if (in[0]->value.rows() != in[1]->value.rows() || in[0]->value.cols() != in[1]->value.cols())
    shape_fail(kind, in, "operands must have identical shapes");
}

Matrix& grad_of(Node& n) {
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_slope(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

// Validates input shapes and computes n.value (and n.saved) from n.inputs.
void forward(Node& n) {
  const auto& in = n.inputs;
  const Kind kind = n.kind;
  n.saved.clear();
  switch (kind) {
    case Kind::Leaf:
      return;
    case Kind::MatMul: {
      require_arity(kind, in, 2, 2);
      if (in[0]->value.cols() != in[1]->value.rows()) shape_fail(kind, in, "inner dimensions differ");
      n.value.noalias() = in[0]->value * in[1]->value;
      return;
    }
    case Kind::Transpose:
      require_arity(kind, in, 1, 1);
      n.value = in[0]->value.transpose();
      return;
    case Kind::Add:
      require_arity(kind, in, 2, 2);
      require_same_shape(kind, in);
      n.value = in[0]->value + in[1]->value;
      return;
    case Kind::Multiply:
      require_arity(kind, in, 2, 2);
      require_same_shape(kind, in);
      n.value = in[0]->value.cwiseProduct(in[1]->value);
      return;
    case Kind::Scale:
      require_arity(kind, in, 1, 1);
      n.value = in[0]->value * n.attrs.scalar;
      return;
    case Kind::BiasAdd: {
      require_arity(kind, in, 2, 2);
      if (in[1]->value.rows() != 1 || in[1]->value.cols() != in[0]->value.cols())
        shape_fail(kind, in, "bias must be 1 x cols");
      n.value = in[0]->value.rowwise() + in[1]->value.row(0);
      return;
    }
    case Kind::Concat: {
      if (in.empty()) shape_fail(kind, in, "needs at least one input");
      const bool rows = n.attrs.axis == 0;
      if (n.attrs.axis != 0 && n.attrs.axis != 1) shape_fail(kind, in, "axis must be 0 or 1");
      Index total = 0;
      for (const auto& p : in) {
        if (rows ? p->value.cols() != in[0]->value.cols() : p->value.rows() != in[0]->value.rows())
          shape_fail(kind, in, rows ? "column counts differ" : "row counts differ");
        total += rows ? p->value.rows() : p->value.cols();
      }
      n.value.resize(rows ? total : in[0]->value.rows(), rows ? in[0]->value.cols() : total);
      Index offset = 0;
      for (const auto& p : in) {
        if (rows) {
          n.value.middleRows(offset, p->value.rows()) = p->value;
          offset += p->value.rows();
        } else {
          n.value.middleCols(offset, p->value.cols()) = p->value;
          offset += p->value.cols();
        }
      }
      return;
    }
    case Kind::EmbeddingLookup: {
      require_arity(kind, in, 1, 1);
      const Matrix& table = in[0]->value;
      n.value.resize(static_cast<Index>(n.attrs.index.size()), table.cols());
      for (std::size_t i = 0; i < n.attrs.index.size(); ++i) {
        const Index r = n.attrs.index[i];
        if (r < 0 || r >= table.rows())
          shape_fail(kind, in, "row index " + std::to_string(r) + " out of range");
        n.value.row(static_cast<Index>(i)) = table.row(r);
      }
      return;
    }
    case Kind::RowSoftmax: {
      require_arity(kind, in, 1, 1);
      const Matrix& x = in[0]->value;
      n.value.resize(x.rows(), x.cols());
      for (Index r = 0; r < x.rows(); ++r) {
        const double mx = x.row(r).maxCoeff();
        n.value.row(r) = (x.row(r).array() - mx).exp().matrix();
        n.value.row(r) /= n.value.row(r).sum();
      }
      return;
    }
    case Kind::LayerNorm: {
      if (in.size() != 1 && in.size() != 3) shape_fail(kind, in, "expects 1 or 3 inputs");
      const Matrix& x = in[0]->value;
      const Index d = x.cols();
      if (in.size() == 3) {
        for (int k = 1; k < 3; ++k)
          if (in[k]->value.rows() != 1 || in[k]->value.cols() != d) shape_fail(kind, in, "gain/bias must be 1 x cols");
      }
      Matrix xhat(x.rows(), d);
      Matrix stdev(x.rows(), 2);  // column 0: denominator, column 1: 1 when floored
      for (Index r = 0; r < x.rows(); ++r) {
        const double mu = x.row(r).mean();
        const double var = (x.row(r).array() - mu).square().mean();
        const bool floored = var < kVarianceFloor;
        const double s = std::sqrt(floored ? kVarianceFloor : var);
        xhat.row(r) = (x.row(r).array() - mu) / s;
        stdev(r, 0) = s;
        stdev(r, 1) = floored ? 1.0 : 0.0;
      }
      if (in.size() == 3) {
        n.value = (xhat.array().rowwise() * in[1]->value.row(0).array()).matrix();
        n.value.rowwise() += in[2]->value.row(0);
      } else {
        n.value = xhat;
      }
      n.saved = {std::move(xhat), std::move(stdev)};
      return;
    }
    case Kind::Gelu:
      require_arity(kind, in, 1, 1);
      n.value = in[0]->value.unaryExpr(&gelu_value);
      return;
    case Kind::RowNormalize: {
      require_arity(kind, in, 1, 1);
      const Matrix& x = in[0]->value;
      Matrix norms(x.rows(), 1);
      n.value.resize(x.rows(), x.cols());
      for (Index r = 0; r < x.rows(); ++r) {
        norms(r, 0) = x.row(r).norm();
        if (norms(r, 0) > 0.0)
          n.value.row(r) = x.row(r) / norms(r, 0);
        else
          n.value.row(r).setZero();
      }
      n.saved = {std::move(norms)};
      return;
    }
    case Kind::CosineSimilarity: {
      require_arity(kind, in, 2, 2);
      require_same_shape(kind, in);
      const Matrix& a = in[0]->value;
      const Matrix& b = in[1]->value;
      Matrix norms(a.rows(), 2);
      n.value.resize(a.rows(), 1);
      for (Index r = 0; r < a.rows(); ++r) {
        norms(r, 0) = a.row(r).norm();
        norms(r, 1) = b.row(r).norm();
        const double denom = norms(r, 0) * norms(r, 1);
        n.value(r, 0) = denom > 0.0 ? a.row(r).dot(b.row(r)) / denom : 0.0;
      }
      n.saved = {std::move(norms)};
      return;
    }
    case Kind::CrossEntropyWithLogits: {
      require_arity(kind, in, 1, 1);
      const Matrix& z = in[0]->value;
      if (static_cast<Index>(n.attrs.index.size()) != z.rows()) shape_fail(kind, in, "need one label per row");
      Matrix probs(z.rows(), z.cols());
      n.value.resize(z.rows(), 1);
      for (Index r = 0; r < z.rows(); ++r) {
        const Index label = n.attrs.index[static_cast<std::size_t>(r)];
        if (label < 0 || label >= z.cols()) shape_fail(kind, in, "label " + std::to_string(label) + " out of range");
        const double mx = z.row(r).maxCoeff();
        probs.row(r) = (z.row(r).array() - mx).exp().matrix();
        const double total = probs.row(r).sum();
        probs.row(r) /= total;
        n.value(r, 0) = mx + std::log(total) - z(r, label);
      }
      n.saved = {std::move(probs)};
      return;
    }
    case Kind::Mean:
      require_arity(kind, in, 1, 1);
      if (in[0]->value.size() == 0) shape_fail(kind, in, "mean of empty tensor");
      n.value = Matrix::Constant(1, 1, in[0]->value.mean());
      return;
    case Kind::Sum:
      require_arity(kind, in, 1, 1);
      n.value = Matrix::Constant(1, 1, in[0]->value.sum());
      return;
    case Kind::RowSum:
      require_arity(kind, in, 1, 1);
      n.value = in[0]->value.rowwise().sum();
      return;
    case Kind::Exp:
      require_arity(kind, in, 1, 1);
      n.value = in[0]->value.array().exp().matrix();
      return;
    case Kind::Log:
      require_arity(kind, in, 1, 1);
      if ((in[0]->value.array() <= 0.0).any()) throw NumericalError("log: non-positive input");
      n.value = in[0]->value.array().log().matrix();
      return;
    case Kind::Attention: {
      require_arity(kind, in, 3, 3);
      const Matrix& q = in[0]->value;
      const Matrix& k = in[1]->value;
      const Matrix& v = in[2]->value;
      const int heads = n.attrs.heads;
      if (k.rows() != q.rows() || k.cols() != q.cols() || v.rows() != q.rows() || v.cols() != q.cols())
        shape_fail(kind, in, "q, k, v must share one shape");
      if (heads < 1 || q.cols() % heads != 0) shape_fail(kind, in, "columns must divide into heads");
      Index total = 0;
      for (Index len : n.attrs.index) {
        if (len < 1) shape_fail(kind, in, "segment lengths must be positive");
        total += len;
      }
      if (total != q.rows()) shape_fail(kind, in, "segment lengths must sum to the row count");
      const Index dh = q.cols() / heads;
      const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
      n.value.resize(q.rows(), q.cols());
      n.saved.reserve(n.attrs.index.size() * static_cast<std::size_t>(heads));
      Index start = 0;
      for (Index len : n.attrs.index) {
        for (int h = 0; h < heads; ++h) {
          const Index c0 = h * dh;
          Matrix s = (q.block(start, c0, len, dh) * k.block(start, c0, len, dh).transpose()) * inv;
          for (Index r = 0; r < len; ++r) {
            const double mx = s.row(r).maxCoeff();
            s.row(r) = (s.row(r).array() - mx).exp().matrix();
            s.row(r) /= s.row(r).sum();
          }
          n.value.block(start, c0, len, dh).noalias() = s * v.block(start, c0, len, dh);
          n.saved.push_back(std::move(s));
        }
        start += len;
      }
      return;
    }
  }
  throw ShapeError("apply: unknown primitive kind");
}

// Pushes n.grad into the gradients of n's inputs.
void propagate(Node& n) {
  const Matrix& g = n.grad;
  auto& in = n.inputs;
  auto wants = [&](std::size_t i) { return in[i]->requires_grad; };
  switch (n.kind) {
    case Kind::Leaf:
      return;
    case Kind::MatMul:
      if (wants(0)) grad_of(*in[0]).noalias() += g * in[1]->value.transpose();
      if (wants(1)) grad_of(*in[1]).noalias() += in[0]->value.transpose() * g;
      return;
    case Kind::Transpose:
      if (wants(0)) grad_of(*in[0]) += g.transpose();
      return;
    case Kind::Add:
      if (wants(0)) grad_of(*in[0]) += g;
      if (wants(1)) grad_of(*in[1]) += g;
      return;
    case Kind::Multiply:
      if (wants(0)) grad_of(*in[0]) += g.cwiseProduct(in[1]->value);
      if (wants(1)) grad_of(*in[1]) += g.cwiseProduct(in[0]->value);
      return;
    case Kind::Scale:
      if (wants(0)) grad_of(*in[0]) += g * n.attrs.scalar;
      return;
    case Kind::BiasAdd:
      if (wants(0)) grad_of(*in[0]) += g;
      if (wants(1)) grad_of(*in[1]) += g.colwise().sum();
      return;
    case Kind::Concat: {
      Index offset = 0;
      const bool rows = n.attrs.axis == 0;
      for (auto& p : in) {
        const Index span = rows ? p->value.rows() : p->value.cols();
        if (p->requires_grad) {
          if (rows)
            grad_of(*p) += g.middleRows(offset, span);
          else
            grad_of(*p) += g.middleCols(offset, span);
        }
        offset += span;
      }
      return;
    }
    case Kind::EmbeddingLookup:
      if (wants(0)) {
        Matrix& dt = grad_of(*in[0]);
        for (std::size_t i = 0; i < n.attrs.index.size(); ++i) dt.row(n.attrs.index[i]) += g.row(static_cast<Index>(i));
      }
      return;
    case Kind::RowSoftmax:
      if (wants(0)) {
        const Matrix& y = n.value;
        const Vector dots = g.cwiseProduct(y).rowwise().sum();
        grad_of(*in[0]) += (y.array() * (g.colwise() - dots).array()).matrix();
      }
      return;
    case Kind::LayerNorm: {
      const Matrix& xhat = n.saved[0];
      const Matrix& stdev = n.saved[1];
      const bool affine = in.size() == 3;
      Matrix dxhat = affine ? Matrix((g.array().rowwise() * in[1]->value.row(0).array()).matrix()) : g;
      if (affine && wants(1)) grad_of(*in[1]) += g.cwiseProduct(xhat).colwise().sum();
      if (affine && wants(2)) grad_of(*in[2]) += g.colwise().sum();
      if (wants(0)) {
        Matrix& dx = grad_of(*in[0]);
        const double d = static_cast<double>(xhat.cols());
        for (Index r = 0; r < xhat.rows(); ++r) {
          const double m1 = dxhat.row(r).sum() / d;
          const double s = stdev(r, 0);
          if (stdev(r, 1) > 0.5) {
            dx.row(r).array() += (dxhat.row(r).array() - m1) / s;
          } else {
            const double m2 = dxhat.row(r).dot(xhat.row(r)) / d;
            dx.row(r).array() += (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2) / s;
          }
        }
      }
      return;
    }
    case Kind::Gelu:
      if (wants(0)) grad_of(*in[0]) += g.cwiseProduct(in[0]->value.unaryExpr(&gelu_slope));
      return;
    case Kind::RowNormalize:
      if (wants(0)) {
        Matrix& dx = grad_of(*in[0]);
        const Matrix& y = n.value;
        for (Index r = 0; r < y.rows(); ++r) {
          const double norm = n.saved[0](r, 0);
          if (norm <= 0.0) continue;
          dx.row(r) += (g.row(r) - y.row(r) * y.row(r).dot(g.row(r))) / norm;
        }
      }
      return;
    case Kind::CosineSimilarity: {
      const Matrix& a = in[0]->value;
      const Matrix& b = in[1]->value;
      const Matrix& norms = n.saved[0];
      for (Index r = 0; r < a.rows(); ++r) {
        const double na = norms(r, 0);
        const double nb = norms(r, 1);
        if (na <= 0.0 || nb <= 0.0) continue;
        const double c = n.value(r, 0);
        const double gr = g(r, 0);
        if (wants(0)) grad_of(*in[0]).row(r) += gr * (b.row(r) / (na * nb) - c * a.row(r) / (na * na));
        if (wants(1)) grad_of(*in[1]).row(r) += gr * (a.row(r) / (na * nb) - c * b.row(r) / (nb * nb));
      }
      return;
    }
    case Kind::CrossEntropyWithLogits:
      if (wants(0)) {
        Matrix d = n.saved[0];
        for (Index r = 0; r < d.rows(); ++r) {
          d(r, n.attrs.index[static_cast<std::size_t>(r)]) -= 1.0;
          d.row(r) *= g(r, 0);
        }
        grad_of(*in[0]) += d;
      }
      return;
    case Kind::Mean:
      if (wants(0)) grad_of(*in[0]).array() += g(0, 0) / static_cast<double>(in[0]->value.size());
      return;
    case Kind::Sum:
      if (wants(0)) grad_of(*in[0]).array() += g(0, 0);
      return;
    case Kind::RowSum:
      if (wants(0)) grad_of(*in[0]).colwise() += g.col(0);
      return;
    case Kind::Exp:
      if (wants(0)) grad_of(*in[0]) += g.cwiseProduct(n.value);
      return;
    case Kind::Log:
      if (wants(0)) grad_of(*in[0]) += g.cwiseQuotient(in[0]->value);
      return;
    case Kind::Attention: {
      const Matrix& q = in[0]->value;
      const Matrix& k = in[1]->value;
      const Matrix& v = in[2]->value;
      const int heads = n.attrs.heads;
      const Index dh = q.cols() / heads;
      const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
      Matrix* dq = wants(0) ? &grad_of(*in[0]) : nullptr;
      Matrix* dk = wants(1) ? &grad_of(*in[1]) : nullptr;
      Matrix* dv = wants(2) ? &grad_of(*in[2]) : nullptr;
      Index start = 0;
      std::size_t slot = 0;
      for (Index len : n.attrs.index) {
        for (int h = 0; h < heads; ++h, ++slot) {
          const Index c0 = h * dh;
          const Matrix& p = n.saved[slot];
          const auto go = g.block(start, c0, len, dh);
          if (dv) dv->block(start, c0, len, dh).noalias() += p.transpose() * go;
          if (!dq && !dk) continue;
          Matrix dp = go * v.block(start, c0, len, dh).transpose();
          const Vector dots = dp.cwiseProduct(p).rowwise().sum();
          Matrix ds = (p.array() * (dp.colwise() - dots).array()).matrix() * inv;
          if (dq) dq->block(start, c0, len, dh).noalias() += ds * k.block(start, c0, len, dh);
          if (dk) dk->block(start, c0, len, dh).noalias() += ds.transpose() * q.block(start, c0, len, dh);
        }
        start += len;
      }
      return;
    }
  }
}

std::vector<Node*> topological_order(Node* root) {
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace

std::string_view kind_name(Kind kind) {
  for (const auto& e : kKinds)
    if (e.kind == kind) return e.name;
  return "unknown";
}

Kind kind_from_name(std::string_view name) {
  for (const auto& e : kKinds)
    if (e.name == name) return e.kind;
  throw UsageError("unknown primitive kind '" + std::string(name) + "'");
}

Tensor Tensor::constant(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Tensor(std::move(n));
}

Tensor Tensor::parameter(Matrix value, std::string name) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  n->name = std::move(name);
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v) { return constant(Matrix::Constant(1, 1, v)); }

Matrix Tensor::grad() const {
  if (node_->grad.size() == 0) return Matrix::Zero(rows(), cols());
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.resize(0, 0); }

double Tensor::item() const {
  if (rows() != 1 || cols() != 1) throw ShapeError("item: tensor is " + shape_str(value()) + ", not a scalar");
  return node_->value(0, 0);
}

Tensor apply(Kind kind, std::span<const Tensor> inputs, const Attrs& attrs) {
  if (kind == Kind::Leaf) throw ShapeError("apply: leaf is not a primitive");
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->attrs = attrs;
  n->inputs.reserve(inputs.size());
  for (const auto& t : inputs) {
    if (!t.defined()) throw ShapeError(std::string(kind_name(kind)) + ": undefined input tensor");
    n->inputs.push_back(t.node());
    n->requires_grad = n->requires_grad || t.requires_grad();
  }
  forward(*n);
  if (!n->requires_grad) {
    n->inputs.clear();
    n->saved.clear();
  }
  return Tensor(std::move(n));
}

void backward(const Tensor& loss) {
  if (loss.rows() != 1 || loss.cols() != 1)
    throw ShapeError("backward: loss must be a scalar, got " + shape_str(loss.value()));
  if (!loss.requires_grad()) return;
  const auto order = topological_order(loss.node().get());
  for (Node* n : order)
    if (n->kind != Kind::Leaf) n->grad.resize(0, 0);
  grad_of(*loss.node()).setConstant(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->kind == Kind::Leaf || !n->requires_grad || n->grad.size() == 0) continue;
    propagate(*n);
  }
}

ComputationRecord record(const Tensor& output) {
  ComputationRecord rec;
  const auto order = topological_order(output.node().get());
  std::unordered_map<Node*, std::size_t> position;
  for (Node* n : order) {
    position[n] = rec.nodes.size();
    // Recover ownership through the parent links; the root is owned by `output`.
    rec.nodes.push_back(nullptr);
  }
  rec.nodes[position[output.node().get()]] = output.node();
  for (Node* n : order)
    for (const auto& child : n->inputs) rec.nodes[position[child.get()]] = child;
  for (Node* n : order) {
    if (n->kind == Kind::Leaf) continue;
    ComputationRecord::Application app{n->kind, {}, position[n]};
    for (const auto& child : n->inputs) app.inputs.push_back(position[child.get()]);
    rec.applications.push_back(std::move(app));
  }
  return rec;
}

Matrix replay(const ComputationRecord& rec) {
  for (const auto& app : rec.applications) forward(*rec.nodes[app.output]);
  if (rec.nodes.empty()) return {};
  return rec.nodes.back()->value;
}

}  // namespace kged
