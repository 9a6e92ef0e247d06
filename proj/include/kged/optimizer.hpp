#pragma once

#include "kged/tensor.hpp"

#include <vector>

namespace kged {

// Linear warmup to `peak`, then cosine decay to zero at `total_steps`.
struct CosineSchedule {
  double peak = 1e-3;
  long warmup_steps = 0;
  long total_steps = 1;

  double learning_rate(long step) const;
};

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

// Adaptive moments with decoupled weight decay. The decay term is scaled by
// the scheduled learning rate, so a zero-rate step leaves parameters intact.
class AdamW {
 public:
  AdamW(std::vector<Tensor> params, CosineSchedule schedule, AdamWConfig config = {});

  // Applies one update from the parameters' current gradients. Throws
  // NumericalError (naming the parameter) before touching anything when a
  // gradient is not finite, and UsageError once the schedule is exhausted.
  void step();

  long step_count() const { return step_; }
  double current_learning_rate() const { return schedule_.learning_rate(step_); }
  const CosineSchedule& schedule() const { return schedule_; }
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }

 private:
  std::vector<Tensor> params_;
  CosineSchedule schedule_;
  AdamWConfig config_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long step_ = 0;
};

// Plain gradient descent, used by the translational baseline.
void sgd_step(std::vector<Tensor>& params, double learning_rate);

}  // namespace kged
