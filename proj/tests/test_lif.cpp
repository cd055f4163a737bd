#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "efflif/lif.hpp"

using namespace efflif;

namespace {
using dtensor = basic_tensor<double>;

dtensor scalar(double v) { return dtensor({1}, {v}); }
membrane_state<double> mem(double v) { return {scalar(v)}; }
bit_tensor spike(bool v) { return bit_tensor::pack({1}, std::vector<double>{v ? 1.0 : 0.0}); }
}  // namespace

TEST(LifParams, Validation) {
  EXPECT_NO_THROW((lif_params{0.5, 1.0}.validate()));
  EXPECT_NO_THROW((lif_params{1.0, 1.0}.validate()));
  EXPECT_THROW((lif_params{0.0, 1.0}.validate()), config_error);
  EXPECT_THROW((lif_params{1.5, 1.0}.validate()), config_error);
  EXPECT_THROW((lif_params{0.5, 0.0}.validate()), config_error);
  EXPECT_THROW(parse_reset_mode("medium"), config_error);
}

TEST(LifStep, StrictThresholdDoesNotFireAtTheta) {
  const auto r = lif_step(mem(0.6), scalar(0.7), {});
  EXPECT_DOUBLE_EQ(r.u_next.u[0], 1.0);
  EXPECT_FALSE(r.spikes.get(0));
}

TEST(LifStep, SoftResetKeepsResidual) {
  const auto r = lif_step(mem(0.8), scalar(0.9), {});
  EXPECT_TRUE(r.spikes.get(0));
  EXPECT_NEAR(r.u_next.u[0], 0.3, 1e-15);
}

TEST(LifStep, HardResetZeroes) {
  const auto r = lif_step(mem(0.8), scalar(0.9), {0.5, 1.0, reset_mode::hard});
  EXPECT_TRUE(r.spikes.get(0));
  EXPECT_EQ(r.u_next.u[0], 0.0);
}

TEST(LifStep, Errors) {
  EXPECT_THROW(lif_step(mem(0.0), dtensor({2}), {}), dimension_error);
  EXPECT_THROW(lif_step(mem(0.0), scalar(std::numeric_limits<double>::quiet_NaN()), {}), numeric_error);
  EXPECT_THROW(lif_step(mem(0.0), scalar(std::numeric_limits<double>::infinity()), {}), numeric_error);
}

TEST(LifStep, IntegratorLimit) {
  // lambda = 1 and an unreachable threshold: the membrane is a running sum.
  const lif_params p{1.0, 1e300};
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> d(-1, 1);
  membrane_state<double> u{scalar(0)};
  double sum = 0;
  for (int t = 0; t < 50; ++t) {
    const double x = d(rng);
    sum += x;
    u = lif_step(u, scalar(x), p).u_next;
  }
  EXPECT_NEAR(u.u[0], sum, 1e-12);
}

TEST(LifStep, NeverProducesNaNForFiniteInputs) {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> d(-1e6, 1e6);
  for (auto reset : {reset_mode::soft, reset_mode::hard}) {
    membrane_state<double> u{dtensor({8})};
    for (int t = 0; t < 200; ++t) {
      dtensor x({8});
      for (auto& v : x.data()) v = d(rng);
      auto r = lif_step(u, x, {0.5, 1.0, reset});
      for (double v : r.u_next.u.values()) ASSERT_TRUE(std::isfinite(v));
      u = std::move(r.u_next);
    }
  }
}

TEST(SharedStep, ResetThenDecayOfCarry) {
  const auto r = shared_step(mem(1.3), spike(true), scalar(0.4), {});
  EXPECT_NEAR(r.u_next.u[0], 0.55, 1e-15);
  EXPECT_FALSE(r.spikes.get(0));
}

TEST(SharedStep, NoSpikeCarryIsPlainDecay) {
  const auto r = shared_step(mem(0.7), spike(false), scalar(0.2), {});
  EXPECT_DOUBLE_EQ(r.u_next.u[0], 0.5 * 0.7 + 0.2);
}

TEST(SharedStep, Quiescent) {
  const auto r = shared_step(mem(0), spike(false), scalar(0), {});
  EXPECT_EQ(r.u_next.u[0], 0.0);
  EXPECT_FALSE(r.spikes.get(0));
}

TEST(SharedStep, HardResetCarry) {
  const auto r = shared_step(mem(1.3), spike(true), scalar(0.4), {0.5, 1.0, reset_mode::hard});
  EXPECT_DOUBLE_EQ(r.u_next.u[0], 0.4);
}

TEST(SharedStep, SoftResetConservesCharge) {
  // After a spike the next consumer sees exactly u_raw - theta.
  const auto fired = shared_step(mem(0.8), spike(false), scalar(0.9), {});
  ASSERT_TRUE(fired.spikes.get(0));
  const auto next = shared_step(fired.u_next, fired.spikes, scalar(0.0), {});
  EXPECT_DOUBLE_EQ(next.u_next.u[0], 0.5 * (fired.u_next.u[0] - 1.0));
}

TEST(Surrogate, Values) {
  EXPECT_DOUBLE_EQ(arctan_surrogate::derivative(0.0), 1.0);
  EXPECT_NEAR(arctan_surrogate::derivative(1.0 / std::numbers::pi), 0.5, 1e-15);
  EXPECT_LT(arctan_surrogate::derivative(1e8), 1e-15);
  EXPECT_LT(arctan_surrogate::derivative(-1e8), 1e-15);
  EXPECT_DOUBLE_EQ(arctan_surrogate::relax(0.0), 0.5);
  const auto t = surrogate_derivative(dtensor({3}, {0.0, 1.0 / std::numbers::pi, -1.0 / std::numbers::pi}));
  EXPECT_NEAR(t[1], 0.5, 1e-15);
  EXPECT_NEAR(t[2], 0.5, 1e-15);
}

TEST(Surrogate, DerivativeMatchesRelaxSlopeAndIsMonotone) {
  double prev = -1;
  for (double x = -3; x <= 3; x += 0.05) {
    const double h = 1e-5;
    const double fd = (arctan_surrogate::relax(x + h) - arctan_surrogate::relax(x - h)) / (2 * h);
    EXPECT_NEAR(fd, arctan_surrogate::derivative(x), 1e-8);
    const double r = arctan_surrogate::relax(x);
    EXPECT_GT(r, prev);
    EXPECT_GT(r, 0.0);
    EXPECT_LT(r, 1.0);
    prev = r;
  }
}
