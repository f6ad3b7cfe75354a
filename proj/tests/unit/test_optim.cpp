#include <cmath>

#include <gtest/gtest.h>

#include "liss/errors.hpp"
#include "liss/optim.hpp"

using namespace liss;

namespace {

// Scalar re-derivation of the update rules, stepped alongside the tensor
// implementation on f(w) = 0.5 * c * w^2.
struct ScalarOracle {
  double w, m = 0, v = 0, lr, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  bool rectified;
  int t = 0;

  void step(double g) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mhat = m / (1 - std::pow(b1, t));
    const double vhat = v / (1 - std::pow(b2, t));
    if (!rectified) {
      w -= lr * mhat / (std::sqrt(vhat) + eps);
      return;
    }
    const double rho_inf = 2 / (1 - b2) - 1;
    const double rho = rho_inf - 2 * t * std::pow(b2, t) / (1 - std::pow(b2, t));
    if (rho > 5) {
      const double r = std::sqrt((rho - 4) * (rho - 2) * rho_inf / ((rho_inf - 4) * (rho_inf - 2) * rho));
      w -= lr * r * mhat / (std::sqrt(vhat) + eps);
    } else {
      w -= lr * mhat;
    }
  }
};

void run_against_oracle(OptimizerKind kind) {
  const double c = 3.0, lr = 0.01;
  auto w = torch::tensor({1.7}, torch::kDouble).requires_grad_(true);
  AdaptiveMomentOptions opt;
  opt.lr = lr;
  opt.kind = kind;
  AdaptiveMoment am({w}, opt);
  ScalarOracle oracle{1.7};
  oracle.lr = lr;
  oracle.rectified = kind == OptimizerKind::radam;
  for (int i = 0; i < 30; ++i) {
    am.zero_grad();
    auto loss = 0.5 * c * w.pow(2).sum();
    loss.backward();
    oracle.step(c * oracle.w);
    am.step();
    ASSERT_NEAR(w.item<double>(), oracle.w, 1e-12) << "step " << i + 1;
  }
}

} // namespace

TEST(Optim, RadamMatchesScalarDerivation) { run_against_oracle(OptimizerKind::radam); }

TEST(Optim, AdamMatchesScalarDerivation) { run_against_oracle(OptimizerKind::adam); }

TEST(Optim, RadamEarlyStepsAreMomentumSteps) {
  // rho_t <= 5 for the first few steps with beta2 = 0.999, so the first step
  // moves by exactly lr * sign-preserving bias-corrected momentum (= lr * g).
  auto w = torch::tensor({0.0}, torch::kDouble).requires_grad_(true);
  AdaptiveMomentOptions opt;
  opt.lr = 0.1;
  AdaptiveMoment am({w}, opt);
  (w * 2.5).sum().backward();
  am.step();
  EXPECT_NEAR(w.item<double>(), -0.1 * 2.5, 1e-12);
}

TEST(Optim, UndefinedGradientsSkipped) {
  auto a = torch::tensor({1.0}, torch::kDouble).requires_grad_(true);
  auto b = torch::tensor({1.0}, torch::kDouble).requires_grad_(true);
  AdaptiveMoment am({a, b}, {});
  am.zero_grad();
  (a * 3).sum().backward();
  am.step();
  EXPECT_NE(a.item<double>(), 1.0);
  EXPECT_EQ(b.item<double>(), 1.0);
  EXPECT_EQ(am.step_count(0), 1);
  EXPECT_EQ(am.step_count(1), 0);
  am.zero_grad();
  EXPECT_FALSE(a.grad().defined());
}

TEST(Optim, OptionValidation) {
  auto w = torch::zeros({1}).requires_grad_(true);
  AdaptiveMomentOptions bad;
  bad.lr = 0;
  EXPECT_THROW(AdaptiveMoment({w}, bad), ConfigError);
  bad = {};
  bad.beta2 = 1.0;
  EXPECT_THROW(AdaptiveMoment({w}, bad), ConfigError);
  EXPECT_EQ(parse_optimizer("adam"), OptimizerKind::adam);
  EXPECT_EQ(optimizer_name(OptimizerKind::radam), "radam");
  EXPECT_THROW(parse_optimizer("sgd"), LookupError);
}

TEST(Optim, DefaultsMatchStandardMoments) {
  AdaptiveMomentOptions o;
  EXPECT_EQ(o.lr, 5e-4);
  EXPECT_EQ(o.beta1, 0.9);
  EXPECT_EQ(o.beta2, 0.999);
  EXPECT_EQ(o.kind, OptimizerKind::radam);
}
