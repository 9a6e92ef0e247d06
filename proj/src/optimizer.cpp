#include "kged/optimizer.hpp"

#include "kged/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace kged {

double CosineSchedule::learning_rate(long step) const {
  if (step < 0) return 0.0;
  if (step < warmup_steps) return peak * static_cast<double>(step) / static_cast<double>(warmup_steps);
  if (step >= total_steps) return 0.0;
  const long span = total_steps - warmup_steps;
  const double progress = span > 0 ? static_cast<double>(step - warmup_steps) / static_cast<double>(span) : 1.0;
  return peak * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

AdamW::AdamW(std::vector<Tensor> params, CosineSchedule schedule, AdamWConfig config)
    : params_(std::move(params)), schedule_(schedule), config_(config) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.push_back(Matrix::Zero(p.rows(), p.cols()));
    v_.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

void AdamW::step() {
  if (step_ >= schedule_.total_steps)
    throw UsageError("AdamW: step " + std::to_string(step_) + " is past the schedule's total steps");
  std::vector<Matrix> grads;
  grads.reserve(params_.size());
  for (const auto& p : params_) {
    grads.push_back(p.grad());
    if (!grads.back().allFinite()) throw NumericalError("non-finite gradient in parameter '" + p.name() + "'");
  }

  const double lr = schedule_.learning_rate(step_);
  ++step_;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grads[i];
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grads[i].cwiseAbs2();
    if (lr == 0.0) continue;
    Matrix& x = params_[i].mutable_value();
    x *= 1.0 - lr * config_.weight_decay;
    x.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + config_.epsilon);
  }
}

void sgd_step(std::vector<Tensor>& params, double learning_rate) {
  for (auto& p : params) {
    const Matrix g = p.grad();
    if (!g.allFinite()) throw NumericalError("non-finite gradient in parameter '" + p.name() + "'");
    p.mutable_value() -= learning_rate * g;
  }
}

}  // namespace kged
