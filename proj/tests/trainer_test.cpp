#include <gtest/gtest.h>

#include <cmath>

#include "blac/trainer/trainer.hpp"

namespace blac::trainer {
namespace {

using envs::CarFollowingEnv;
using envs::UnicycleEnv;

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

TrainConfig small_config(const std::string& env, int steps) {
  TrainConfig c;
  c.env_id = env;
  c.episodes = 3;
  c.steps_per_episode = steps;
  c.batch_size = 16;
  c.agent.hidden = {16, 16};
  return c;
}

// Lookahead point 0.35 from the first obstacle: inside the trap margin.
Vector near_obstacle() { return vec({1.0 - 0.35 - 0.1, 1.0, 0.0}); }

TEST(Trigger, StuckNextToObstacle) {
  UnicycleEnv env;
  TriggerConfig cfg;
  const std::deque<Vector> window(20, near_obstacle());
  const auto d = backup_trigger(env, cfg, window, near_obstacle());
  EXPECT_TRUE(d.use_backup);
  EXPECT_EQ(d.u_nominal, vec({2.0, 3.0}));
}

TEST(Trigger, NeedsFullWindow) {
  UnicycleEnv env;
  const std::deque<Vector> window(19, near_obstacle());
  EXPECT_FALSE(backup_trigger(env, {}, window, near_obstacle()).use_backup);
}

TEST(Trigger, MovingUnicycleIsNotTrapped) {
  UnicycleEnv env;
  std::deque<Vector> window;
  for (int i = 0; i < 20; ++i) window.push_back(vec({0.2 + 0.01 * i, 1.0, 0.0}));
  EXPECT_FALSE(backup_trigger(env, {}, window, near_obstacle()).use_backup);
}

TEST(Trigger, StationaryInOpenSpaceIsNotTrapped) {
  UnicycleEnv env;
  const Vector x = vec({0.0, 0.0, 0.0});
  EXPECT_FALSE(backup_trigger(env, {}, std::deque<Vector>(20, x), x).use_backup);
}

TEST(Trigger, CarFarBehindNoTrigger) {
  CarFollowingEnv env;
  Vector x = env.initial_state();
  x[CarFollowingEnv::position_index(5)] = x[CarFollowingEnv::position_index(4)] - 20.0;
  const auto d = backup_trigger(env, {}, std::deque<Vector>(20, x), x);
  EXPECT_FALSE(d.use_backup);
  EXPECT_EQ(d.u_nominal, vec({0.0}));
  x[CarFollowingEnv::position_index(5)] = x[CarFollowingEnv::position_index(4)] - 2.0;
  EXPECT_TRUE(backup_trigger(env, {}, std::deque<Vector>(20, x), x).use_backup);
}

TEST(Release, UnicycleDistanceOrTimeout) {
  UnicycleEnv env;
  TriggerConfig cfg;
  const Vector trap = near_obstacle();
  EXPECT_FALSE(backup_release(env, cfg, trap, trap, 10));
  EXPECT_TRUE(backup_release(env, cfg, trap, trap, cfg.max_backup_steps + 1));
  Vector far = trap;
  far[1] += 2.0 * cfg.resume_distance;
  EXPECT_TRUE(backup_release(env, cfg, far, trap, 1));
}

TEST(Release, CarHysteresis) {
  CarFollowingEnv env;
  TriggerConfig cfg;
  Vector x = env.initial_state();
  const double p4 = x[CarFollowingEnv::position_index(4)];
  const double delta = env.params().safe_distance;
  x[CarFollowingEnv::position_index(5)] = p4 - (delta + cfg.proximity_offset);
  EXPECT_FALSE(backup_release(env, cfg, x, x, 5));
  x[CarFollowingEnv::position_index(5)] = p4 - (delta + cfg.proximity_offset + cfg.hysteresis);
  EXPECT_TRUE(backup_release(env, cfg, x, x, 5));
}

TEST(Trainer, WarmupLeavesParametersUntouched) {
  TrainConfig c = small_config("unicycle", 40);
  c.batch_size = 100;
  Trainer t(c, 1);
  const auto before = t.learner().policy().net().parameters();
  std::vector<Matrix> snapshot;
  for (auto* p : before) snapshot.push_back(p->value);
  const EpisodeMetrics m = t.episode_rollout();
  EXPECT_EQ(m.steps, 40);
  EXPECT_EQ(t.learner().updates(), 0);
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(before[i]->value, snapshot[i]);
  EXPECT_EQ(t.replay().size(), 40u - static_cast<std::size_t>(m.backup_steps));
}

TEST(Trainer, BacHasNoLyapunovMultiplier) {
  TrainConfig c = small_config("car_following", 60);
  c.agent.variant = agent::Variant::kBac;
  Trainer t(c, 2);
  t.train(2);
  EXPECT_GT(t.learner().updates(), 0);
  EXPECT_EQ(t.learner().lagrangian().zeta, 0.0);
  EXPECT_EQ(t.learner().lagrangian().rho_zeta, 1.0);
  EXPECT_EQ(t.last_update().clf_mean, 0.0);
  EXPECT_GT(t.learner().lagrangian().rho_lambda[0], 1.0);
}

void expect_same(const std::vector<EpisodeMetrics>& a, const std::vector<EpisodeMetrics>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].reward, b[i].reward);
    EXPECT_EQ(a[i].cost, b[i].cost);
    EXPECT_EQ(a[i].violations, b[i].violations);
    EXPECT_EQ(a[i].backup_steps, b[i].backup_steps);
    EXPECT_EQ(a[i].final_distance, b[i].final_distance);
  }
}

TEST(Trainer, SameSeedIsBitIdentical) {
  for (const char* env : {"unicycle", "car_following"}) {
    const TrainConfig c = small_config(env, 50);
    Trainer a(c, 5), b(c, 5), other(c, 6);
    const auto ma = a.train(3), mb = b.train(3), mo = other.train(3);
    expect_same(ma, mb);
    EXPECT_NE(ma.back().reward, mo.back().reward) << env;
  }
}

TEST(Trainer, ZeroLengthEpisode) {
  TrainConfig c = small_config("unicycle", 0);
  c.unicycle.episode_length = 0;
  Trainer t(c, 3);
  const EpisodeMetrics m = t.episode_rollout();
  EXPECT_EQ(m.steps, 0);
  EXPECT_EQ(m.reward, 0.0);
  EXPECT_EQ(m.cost, 0.0);
  EXPECT_EQ(m.violations, 0);
  EXPECT_EQ(m.backup_steps, 0);
  EXPECT_EQ(m.final_distance, 0.0);
}

TEST(Trainer, MetricsAreSumsOfStepFeedback) {
  for (const char* env : {"unicycle", "car_following"}) {
    const TrainConfig c = small_config(env, 80);
    Trainer stepped(c, 4), rolled(c, 4);
    EpisodeMetrics sum;
    for (int i = 0; i < 80; ++i) {
      const StepRecord r = stepped.train_step();
      sum.reward += r.feedback.reward;
      sum.cost += r.feedback.cost;
      sum.violations += r.feedback.violation ? 1 : 0;
      sum.backup_steps += r.backup ? 1 : 0;
    }
    const EpisodeMetrics m = rolled.episode_rollout();
    EXPECT_EQ(m.reward, sum.reward);
    EXPECT_EQ(m.cost, sum.cost);
    EXPECT_EQ(m.violations, sum.violations);
    EXPECT_EQ(m.backup_steps, sum.backup_steps);
    EXPECT_GE(m.violations, 0);
    EXPECT_LE(m.violations, m.steps);
    EXPECT_NEAR(m.final_distance, distance_to_goal(rolled.env(), rolled.state()), 0.0);
  }
}

TEST(Trainer, BackupAndPolicyPathsAreExclusive) {
  TrainConfig c = small_config("unicycle", 0);
  Trainer t(c, 5);
  for (int i = 0; i < 120; ++i) {
    t.force_backup(i >= 40 && i < 80);
    const std::size_t before = t.replay().size();
    const long updates = t.learner().updates();
    const StepRecord r = t.train_step();
    EXPECT_EQ(r.backup, i >= 40 && i < 80);
    if (r.backup) {
      EXPECT_EQ(t.replay().size(), before);
      EXPECT_EQ(t.learner().updates(), updates);
      EXPECT_FALSE(r.updated);
    } else {
      EXPECT_EQ(t.replay().size(), before + 1);
      EXPECT_EQ(r.updated, t.replay().size() >= c.batch_size);
    }
    EXPECT_TRUE(t.env().spec().bounds.contains(r.control, 0.0));
  }
}

TEST(Trainer, GpFreezesAfterConfiguredEpisodes) {
  TrainConfig c = small_config("unicycle", 30);
  c.gp.freeze_after_episodes = 2;
  c.gp.stride = 3;
  Trainer t(c, 6);
  t.train(1);
  EXPECT_EQ(t.gp().size(), 10u);
  EXPECT_FALSE(t.gp().frozen());
  t.train(1);
  EXPECT_TRUE(t.gp().frozen());
  const auto inputs = t.gp().inputs();
  t.train(2);
  EXPECT_EQ(t.gp().inputs(), inputs);
}

TEST(Trainer, GpLearnsUnicycleResidual) {
  TrainConfig c = small_config("unicycle", 100);
  c.gp.stride = 1;
  Trainer t(c, 7);
  t.train(2);
  const auto model = t.model();
  // The hidden speed loss depends on the state only, so one control suffices.
  const Vector x0 = t.env().initial_state();
  const Vector truth = t.env().step(x0, vec({0.0, 0.0})) - t.env().nominal_step(x0, vec({0.0, 0.0}));
  EXPECT_LT((model.residual_mean(x0) - truth).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Trainer, EvaluationDoesNotLearn) {
  TrainConfig c = small_config("car_following", 40);
  Trainer t(c, 8);
  t.train(1);
  const long updates = t.learner().updates();
  const std::size_t stored = t.replay().size();
  const std::size_t gp_points = t.gp().size();
  const EpisodeMetrics a = t.evaluate_episode(true);
  const EpisodeMetrics b = t.evaluate_episode(true);
  EXPECT_EQ(t.learner().updates(), updates);
  EXPECT_EQ(t.replay().size(), stored);
  EXPECT_EQ(t.gp().size(), gp_points);
  EXPECT_EQ(a.reward, b.reward);
  EXPECT_EQ(t.episodes_done(), 1);
}

TEST(Config, ValidationNamesTheField) {
  TrainConfig c;
  c.batch_size = 0;
  try {
    validate(c);
    FAIL() << "expected an exception";
  } catch (const std::invalid_argument& e) {
    EXPECT_EQ(std::string(e.what()).rfind("train.batch_size", 0), 0u);
  }
  TrainConfig d;
  d.env_id = "pendulum";
  EXPECT_THROW(validate(d), std::invalid_argument);
}

}  // namespace
}  // namespace blac::trainer
