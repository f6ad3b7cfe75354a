#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <torch/torch.h>

namespace liss {

enum class OptimizerKind { radam, adam };

std::string_view optimizer_name(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

struct AdaptiveMomentOptions {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  OptimizerKind kind = OptimizerKind::radam;
};

/// Adam, or its rectified variant (RAdam): while the variance estimate is
/// still unreliable (rho_t <= 5) the rectified variant takes a bias-corrected
/// momentum step; afterwards it scales the adaptive step by the rectification
/// term r_t. Parameters whose gradient is undefined at step() are skipped
/// and their step counters do not advance.
class AdaptiveMoment {
public:
  AdaptiveMoment(std::vector<torch::Tensor> params, AdaptiveMomentOptions opt);

  void step();
  /// Resets gradients to undefined, so untouched parameters stay untouched.
  void zero_grad();

  const AdaptiveMomentOptions &options() const { return opt_; }
  const std::vector<torch::Tensor> &params() const { return params_; }
  std::int64_t step_count(std::size_t i) const { return state_[i].step; }

private:
  struct State {
    std::int64_t step = 0;
    torch::Tensor exp_avg;
    torch::Tensor exp_avg_sq;
  };

  std::vector<torch::Tensor> params_;
  std::vector<State> state_;
  AdaptiveMomentOptions opt_;
};

} // namespace liss
