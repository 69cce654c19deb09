#include <gtest/gtest.h>

#include <numbers>

#include "blac/envs/car_following.hpp"
#include "blac/envs/unicycle.hpp"
#include "test_util.hpp"

namespace blac {
namespace {

using envs::CarFollowingEnv;
using envs::UnicycleEnv;

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

TEST(Unicycle, StepWithSpeedLoss) {
  UnicycleEnv env;
  const Vector next = env.step(vec({0, 0, 0}), vec({1, 0}));
  EXPECT_NEAR(next[0], 0.09, 1e-15);
  EXPECT_EQ(next[1], 0.0);
  EXPECT_EQ(next[2], 0.0);
}

TEST(Unicycle, ZeroControlFacingNorthKeepsX) {
  UnicycleEnv env;
  const Vector next = env.step(vec({0.4, -0.2, std::numbers::pi / 2}), vec({0, 0}));
  EXPECT_NEAR(next[0], 0.4, 1e-15);
}

TEST(Unicycle, FacingBackwardsWithTurn) {
  // u_d = -0.1 [cos(pi), 0] = (0.1, 0), so the speed channel is 0.1 and
  // x1' = 1 + 0.1 * cos(pi) * 0.1.
  UnicycleEnv env;
  const Vector next = env.step(vec({1, 1, std::numbers::pi}), vec({0, 1}));
  EXPECT_NEAR(next[0], 0.99, 1e-15);
  EXPECT_NEAR(next[1], 1.0, 1e-15);
  EXPECT_NEAR(next[2], std::numbers::pi + 0.1, 1e-15);
}

TEST(Unicycle, Lookahead) {
  const auto p = envs::lookahead_point(vec({1, 2, 0}), 0.5);
  EXPECT_EQ(p.x(), 1.5);
  EXPECT_EQ(p.y(), 2.0);
  const auto q = envs::lookahead_point(vec({0.3, 0.7, 1.1}), 0.0);
  EXPECT_EQ(q.x(), 0.3);
  EXPECT_EQ(q.y(), 0.7);
  const auto r = envs::lookahead_point(vec({0, 0, std::numbers::pi / 2}), 1.0);
  EXPECT_NEAR(r.x(), 0.0, 1e-12);
  EXPECT_NEAR(r.y(), 1.0, 1e-12);
  EXPECT_THROW(envs::lookahead_point(vec({0, 0, 0}), -0.1), std::invalid_argument);
}

TEST(Unicycle, RewardZeroAtPreferredSpeedWithoutProgress) {
  UnicycleEnv env;
  const Vector x = vec({0.5, 0.5, 0.3});
  const auto fb = env.feedback(x, vec({1.0, 0.0}), x);
  EXPECT_EQ(fb.reward, 0.0);
}

TEST(Unicycle, LookaheadOnObstacleIsViolation) {
  UnicycleEnv env;
  // Lookahead point 0.1 ahead of (0.9, 1.0) facing +x lands on (1, 1).
  const Vector on = vec({0.9, 1.0, 0.0});
  const auto fb = env.feedback(on, vec({0, 0}), on);
  EXPECT_NEAR(fb.barrier_values[0], -0.5 * 0.3 * 0.3, 1e-15);
  EXPECT_TRUE(fb.violation);
}

TEST(Unicycle, RejectsControlsOutsideBox) {
  UnicycleEnv env;
  EXPECT_THROW(env.step(vec({0, 0, 0}), vec({2.5, 0})), std::invalid_argument);
  EXPECT_THROW(env.step(vec({0, 0}), vec({1, 0})), std::invalid_argument);
}

TEST(CarFollowing, ControlledCarStep) {
  CarFollowingEnv env;
  Vector x = env.initial_state();
  x[CarFollowingEnv::position_index(4)] = 0.0;
  x[CarFollowingEnv::velocity_index(4)] = 5.0;
  const Vector next = env.step(x, vec({2.0}));
  EXPECT_NEAR(next[CarFollowingEnv::position_index(4)], 0.2, 1e-15);
  EXPECT_EQ(next[CarFollowingEnv::velocity_index(4)], 2.0);
}

TEST(CarFollowing, BrakingLaw) {
  CarFollowingEnv env;
  Vector x = env.initial_state();
  x[CarFollowingEnv::position_index(1)] = 100.0;
  x[CarFollowingEnv::position_index(2)] = 95.0;
  x[CarFollowingEnv::velocity_index(2)] = 3.0;
  x[CarFollowingEnv::position_index(3)] = 50.0;
  x[CarFollowingEnv::position_index(5)] = 30.0;
  x[CarFollowingEnv::velocity_index(5)] = 3.0;
  const auto a = env.accelerations(x);
  EXPECT_EQ(a[1], -100.0);
  EXPECT_EQ(a[4], 0.0);
}

TEST(CarFollowing, FeedbackAtDesiredGap) {
  CarFollowingEnv env;
  Vector next = env.initial_state();
  next[CarFollowingEnv::position_index(4)] = next[CarFollowingEnv::position_index(3)] - 9.5;
  const auto fb = env.feedback(env.initial_state(), vec({3.0}), next);
  EXPECT_EQ(fb.reward, 1.5);
  EXPECT_EQ(fb.cost, 0.0);
}

TEST(CarFollowing, ControlledVelocityEqualsControl) {
  CarFollowingEnv env;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 6.0);
  Vector x = env.initial_state();
  for (int t = 0; t < 200; ++t) {
    const Vector c = vec({u(rng)});
    x = env.step(x, c);
    EXPECT_EQ(x[CarFollowingEnv::velocity_index(4)], c[0]);
  }
}

TEST(CarFollowing, DoNothingRolloutStaysSafeEarly) {
  // With car 4 held at the preferred speed the platoon starts in
  // equilibrium except for the lead car's sinusoid, which needs time to
  // propagate.
  CarFollowingEnv env;
  Vector x = env.initial_state();
  for (int t = 0; t < 10; ++t) {
    const Vector next = env.step(x, vec({3.0}));
    EXPECT_FALSE(env.feedback(x, vec({3.0}), next).violation);
    x = next;
  }
}

// Property checks over random states.

Vector random_unicycle_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(-0.5, 3.0), ang(-4.0, 4.0);
  return vec({pos(rng), pos(rng), ang(rng)});
}

Vector random_car_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(-6.0, 6.0), vel(-1.0, 7.0), time(0.0, 50.0);
  Vector x(CarFollowingEnv::kStateDim);
  for (int car = 1; car <= 5; ++car) {
    x[CarFollowingEnv::position_index(car)] = (5 - car) * 9.5 + jitter(rng);
    x[CarFollowingEnv::velocity_index(car)] = vel(rng);
  }
  x[CarFollowingEnv::kTimeIndex] = time(rng);
  return x;
}

template <typename Env, typename Sampler>
void check_barrier_gradients(const Env& env, Sampler sample) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const Vector x = sample(rng);
    for (const auto& b : env.spec().barriers) {
      const Vector g = b.gradient(x);
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        Vector up = x, down = x;
        up[i] += 1e-6;
        down[i] -= 1e-6;
        const double fd = (b.value(up) - b.value(down)) / 2e-6;
        EXPECT_LE(std::abs(fd - g[i]) / std::max(1e-3, std::abs(g[i])), 1e-5)
            << b.label << " component " << i;
      }
    }
  }
}

TEST(Properties, BarrierGradientsMatchFiniteDifferences) {
  check_barrier_gradients(UnicycleEnv{}, random_unicycle_state);
  check_barrier_gradients(CarFollowingEnv{}, random_car_state);
}

TEST(Properties, FeatureJacobiansMatchFiniteDifferences) {
  UnicycleEnv uni;
  CarFollowingEnv car;
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    for (const envs::Environment* env : {static_cast<const envs::Environment*>(&uni),
                                         static_cast<const envs::Environment*>(&car)}) {
      const Vector x = env == &uni ? random_unicycle_state(rng) : random_car_state(rng);
      Vector f, up_f, down_f;
      Matrix jac;
      env->features(x, f, &jac);
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        Vector up = x, down = x;
        up[i] += 1e-6;
        down[i] -= 1e-6;
        env->features(up, up_f, nullptr);
        env->features(down, down_f, nullptr);
        EXPECT_LT(((up_f - down_f) / 2e-6 - jac.col(i)).cwiseAbs().maxCoeff(), 1e-6);
      }
    }
  }
}

TEST(Properties, UnicycleResidualIsSpeedLoss) {
  UnicycleEnv env;
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> v(-2.0, 2.0), w(-3.0, 3.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const Vector x = random_unicycle_state(rng);
    const Vector u = vec({v(rng), w(rng)});
    const Vector diff = env.step(x, u) - env.nominal_step(x, u);
    const Vector expected = env.input_matrix(x) * vec({-0.1 * std::cos(x[2]), 0.0});
    EXPECT_LT((diff - expected).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Properties, CarResidualIsScaledAcceleration) {
  CarFollowingEnv env;
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(0.0, 6.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const Vector x = random_car_state(rng);
    const Vector c = vec({u(rng)});
    const Vector diff = env.step(x, c) - env.nominal_step(x, c);
    const auto a = env.accelerations(x);
    Vector expected = Vector::Zero(CarFollowingEnv::kStateDim);
    for (int car : {1, 2, 3, 5}) {
      expected[CarFollowingEnv::velocity_index(car)] = 0.1 * a[car - 1] * 0.1;
    }
    EXPECT_LT((diff - expected).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Properties, CostAndViolationFlag) {
  UnicycleEnv uni;
  CarFollowingEnv car;
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 1000; ++trial) {
    const Vector xu = random_unicycle_state(rng);
    const auto fu = uni.feedback(xu, vec({0.5, 0.0}), uni.step(xu, vec({0.5, 0.0})));
    EXPECT_GE(fu.cost, 0.0);
    EXPECT_EQ(fu.violation, fu.barrier_values.minCoeff() < 0.0);
    const Vector xc = random_car_state(rng);
    const auto fc = car.feedback(xc, vec({3.0}), car.step(xc, vec({3.0})));
    EXPECT_GE(fc.cost, 0.0);
    EXPECT_EQ(fc.violation, fc.barrier_values.minCoeff() < 0.0);
  }
}

TEST(Properties, StepIsDeterministic) {
  CarFollowingEnv env;
  std::mt19937_64 rng(24);
  const Vector x = random_car_state(rng);
  const Vector first = env.step(x, vec({2.5}));
  for (int i = 0; i < 5; ++i) EXPECT_EQ(env.step(x, vec({2.5})), first);
}

TEST(Spec, RejectsBadDecayAndBox) {
  envs::UnicycleParams p;
  p.barrier_decay = 1.5;
  EXPECT_THROW(UnicycleEnv{p}, std::invalid_argument);
  envs::CarFollowingParams c;
  c.control_lower = 7.0;
  EXPECT_THROW(CarFollowingEnv{c}, std::invalid_argument);
  envs::UnicycleParams d;
  d.dt = 0.0;
  EXPECT_THROW(UnicycleEnv{d}, std::invalid_argument);
}

}  // namespace
}  // namespace blac
