#include "liss/optim.hpp"

#include <cmath>

#include "liss/errors.hpp"

namespace liss {

std::string_view optimizer_name(OptimizerKind kind) {
  return kind == OptimizerKind::radam ? "radam" : "adam";
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "radam") return OptimizerKind::radam;
  if (name == "adam") return OptimizerKind::adam;
  throw LookupError("unknown optimizer '" + std::string(name) + "' (expected radam or adam)");
}

AdaptiveMoment::AdaptiveMoment(std::vector<torch::Tensor> params, AdaptiveMomentOptions opt)
    : params_(std::move(params)), state_(params_.size()), opt_(opt) {
  if (!(opt.lr > 0.0)) throw ConfigError("learning rate must be > 0");
  if (!(opt.beta1 >= 0.0 && opt.beta1 < 1.0) || !(opt.beta2 >= 0.0 && opt.beta2 < 1.0))
    throw ConfigError("moment coefficients must lie in [0,1)");
}

void AdaptiveMoment::zero_grad() {
  for (auto &p : params_) p.mutable_grad() = torch::Tensor();
}

void AdaptiveMoment::step() {
  torch::NoGradGuard no_grad;
  const double b1 = opt_.beta1, b2 = opt_.beta2;
  const double rho_inf = 2.0 / (1.0 - b2) - 1.0;

  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto &p = params_[i];
    const auto &g = p.grad();
    if (!g.defined()) continue;
    auto &s = state_[i];
    if (!s.exp_avg.defined()) {
      s.exp_avg = torch::zeros_like(p);
      s.exp_avg_sq = torch::zeros_like(p);
    }
    ++s.step;
    const auto t = static_cast<double>(s.step);
    s.exp_avg.mul_(b1).add_(g, 1.0 - b1);
    s.exp_avg_sq.mul_(b2).addcmul_(g, g, 1.0 - b2);
    const double bc1 = 1.0 - std::pow(b1, t);
    const double bc2 = 1.0 - std::pow(b2, t);

    if (opt_.kind == OptimizerKind::adam) {
      auto denom = (s.exp_avg_sq.sqrt() / std::sqrt(bc2)).add_(opt_.eps);
      p.addcdiv_(s.exp_avg, denom, -opt_.lr / bc1);
      continue;
    }

    const double rho_t = rho_inf - 2.0 * t * std::pow(b2, t) / bc2;
    if (rho_t > 5.0) {
      const double rect = std::sqrt((rho_t - 4.0) * (rho_t - 2.0) * rho_inf /
                                    ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));
      auto denom = (s.exp_avg_sq.sqrt() / std::sqrt(bc2)).add_(opt_.eps);
      p.addcdiv_(s.exp_avg, denom, -opt_.lr * rect / bc1);
    } else {
      p.add_(s.exp_avg, -opt_.lr / bc1);
    }
  }
}

} // namespace liss
