#include "kged/grad_check.hpp"

#include "kged/errors.hpp"

#include <algorithm>
#include <cmath>

namespace kged {

double grad_check(const std::function<Tensor()>& f, std::vector<Tensor> params, double epsilon) {
  for (auto& p : params) p.zero_grad();
  const Tensor out = f();
  if (out.item() != f().item()) throw UsageError("grad_check: function is not deterministic");
  backward(out);

  double worst = 0.0;
  for (auto& p : params) {
    const Matrix analytic = p.grad();
    Matrix& x = p.mutable_value();
    for (Index i = 0; i < x.size(); ++i) {
      double& coord = x.data()[i];
      const double saved = coord;
      coord = saved + epsilon;
      const double up = f().item();
      coord = saved - epsilon;
      const double down = f().item();
      coord = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double err = std::abs(analytic.data()[i] - numeric) / std::max(1.0, std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Matrix& point, double epsilon) {
  Tensor x = Tensor::parameter(point, "x");
  return grad_check([&] { return f(x); }, {x}, epsilon);
}

}  // namespace kged
