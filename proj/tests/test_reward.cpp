#include "pegcl/reward_shaping.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>

using namespace pegcl::reward;
using Catch::Matchers::WithinAbs;

// High-precision references (30 significant digits).
constexpr double kOneMinusTanh5 = 9.07957374048687890095524654998e-5;
constexpr double kForceAtZero = -6.69285092428485555936198038132e-3;
constexpr double kForceAtOne = -0.999954602131297565605495223767;

TEST_CASE("position/velocity term closed forms") {
  CHECK(reward_position_velocity(0.0, 0.0) == 1.0);
  CHECK_THAT(reward_position_velocity(1.0, 0.0), WithinAbs(kOneMinusTanh5, 1e-15));
  CHECK(reward_position_velocity(0.0, 1.0) == 0.25);
}

TEST_CASE("force term closed forms") {
  CHECK(reward_force(1.0 / 3.0) == -0.5);
  CHECK_THAT(reward_force(0.0), WithinAbs(kForceAtZero, 1e-15));
  CHECK_THAT(reward_force(1.0), WithinAbs(kForceAtOne, 1e-15));
}

TEST_CASE("event term") {
  CHECK(reward_event(StepStatus::Completed) == 500.0);
  CHECK(reward_event(StepStatus::Collision) == -200.0);
  CHECK(reward_event(StepStatus::Otherwise) == -1.0);
}

TEST_CASE("weighted total") {
  CHECK_THAT(reward_total(0, 0, 1.0 / 3.0, StepStatus::Otherwise, {1, 1, 1}), WithinAbs(-0.5, 1e-12));
  CHECK(reward_total(0.3, 0.7, 0.2, StepStatus::Completed, {0, 0, 1}) == 500.0);
  CHECK(reward_total(0, 0, 0.9, StepStatus::Otherwise, {1, 0, 0}) == 1.0);
}

TEST_CASE("dynamic reward") {
  CHECK(reward_dynamic(2.0, 0.5) == 1.0);
  CHECK(reward_dynamic(-3.7, 1.0) == -3.7);
  CHECK(reward_dynamic(123.0, 0.0) == 0.0);
  CHECK_THROWS_AS(reward_dynamic(1.0, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(reward_dynamic(1.0, -0.1), std::invalid_argument);
}

TEST_CASE("inputs outside the unit interval are rejected") {
  CHECK_THROWS_AS(reward_position_velocity(-0.01, 0), std::invalid_argument);
  CHECK_THROWS_AS(reward_position_velocity(0, 1.01), std::invalid_argument);
  CHECK_THROWS_AS(reward_force(1.5), std::invalid_argument);
  CHECK_THROWS_AS(reward_force(std::numeric_limits<double>::quiet_NaN()), std::invalid_argument);
}

TEST_CASE("weights validation") {
  CHECK_NOTHROW(RewardWeights{}.validate());
  CHECK_THROWS(RewardWeights{0, 0, 0}.validate());
  CHECK_THROWS(RewardWeights{-1, 1, 1}.validate());
  CHECK_THROWS(RewardWeights{1, std::numeric_limits<double>::infinity(), 1}.validate());
}

TEST_CASE("monotonicity on a dense grid") {
  const int n = 400;
  for (int iv = 0; iv < 20; ++iv) {
    const double v = iv / 20.0;  // v < 1
    double prev = reward_position_velocity(0.0, v);
    for (int i = 1; i <= n; ++i) {
      const double cur = reward_position_velocity(double(i) / n, v);
      REQUIRE(cur < prev);
      prev = cur;
    }
  }
  double prev = reward_force(0.0);
  for (int i = 1; i <= n; ++i) {
    const double cur = reward_force(double(i) / n);
    REQUIRE(cur < prev);
    prev = cur;
  }
}

TEST_CASE("shapes of the two surfaces") {
  // r_xv peaks at the origin, r_F is an S-curve with its midpoint at 1/3.
  double best = -1;
  double bx = -1, bv = -1;
  for (int i = 0; i <= 50; ++i)
    for (int j = 0; j <= 50; ++j) {
      const double r = reward_position_velocity(i / 50.0, j / 50.0);
      if (r > best) best = r, bx = i / 50.0, bv = j / 50.0;
    }
  CHECK(bx == 0.0);
  CHECK(bv == 0.0);
  // Far from the goal, moving fast pays more than standing still.
  CHECK(reward_position_velocity(1.0, 1.0) > reward_position_velocity(1.0, 0.0));
  // Steepest descent of r_F sits at the midpoint.
  const double h = 1e-4;
  auto slope = [&](double f) { return (reward_force(f + h) - reward_force(f - h)) / (2 * h); };
  CHECK(slope(1.0 / 3.0) < slope(0.1));
  CHECK(slope(1.0 / 3.0) < slope(0.6));
}

TEST_CASE("per-step bounds with default weights") {
  const RewardWeights w;
  for (int i = 0; i <= 20; ++i)
    for (int j = 0; j <= 20; ++j)
      for (int k = 0; k <= 20; ++k)
        for (auto s : {StepStatus::Completed, StepStatus::Collision, StepStatus::Otherwise}) {
          const double r = reward_total(i / 20.0, j / 20.0, k / 20.0, s, w);
          REQUIRE(r >= -1.0 - 200.0);
          REQUIRE(r <= 1.0 + 500.0);
        }
}

TEST_CASE("scaling by a positive level keeps the ordering") {
  const double a = reward_total(0.2, 0.1, 0.3, StepStatus::Otherwise, {});
  const double b = reward_total(0.5, 0.4, 0.1, StepStatus::Otherwise, {});
  for (double level : {0.05, 0.3, 0.77, 1.0}) CHECK((reward_dynamic(a, level) > reward_dynamic(b, level)) == (a > b));
}
