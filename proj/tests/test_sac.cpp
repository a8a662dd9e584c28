#include "pegcl/rl/sac.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace pegcl;
using namespace pegcl::rl;
using Catch::Matchers::WithinAbs;

namespace {

SacHyperParams tiny_hp() {
  SacHyperParams hp;
  hp.hidden = {2, 2};
  hp.batch_size = 3;
  hp.target_entropy = -2.0;
  return hp;
}

Batch<double> random_batch(int obs_dim, int act_dim, int n, Rng& rng) {
  Batch<double> b;
  b.obs.resize(obs_dim, n);
  b.next_obs.resize(obs_dim, n);
  b.actions.resize(act_dim, n);
  b.rewards.resize(n);
  b.dones.resize(n);
  b.weights = Vector<double>::Ones(n);
  for (Eigen::Index i = 0; i < b.obs.size(); ++i) b.obs.data()[i] = uniform(rng, -1, 1);
  for (Eigen::Index i = 0; i < b.next_obs.size(); ++i) b.next_obs.data()[i] = uniform(rng, -1, 1);
  for (Eigen::Index i = 0; i < b.actions.size(); ++i) b.actions.data()[i] = uniform(rng, -0.9, 0.9);
  for (int i = 0; i < n; ++i) {
    b.rewards[i] = uniform(rng, -2, 2);
    b.dones[i] = i == 1 ? 1.0 : 0.0;
  }
  return b;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

template <typename Loss>
void check_fd(Vector<double>& params, const Vector<double>& grad, Loss loss) {
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double lp = loss();
    params[i] = keep - h;
    const double lm = loss();
    params[i] = keep;
    const double fd = (lp - lm) / (2 * h);
    INFO("parameter " << i << " analytic " << grad[i] << " numeric " << fd);
    REQUIRE(rel_err(grad[i], fd) < 1e-4);
  }
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

TEST_CASE("zero-weight policy acts with zero mean") {
  SacAgent<double> agent(4, 3, tiny_hp(), 1);
  agent.actor().params().setZero();
  Rng rng(1);
  const auto s = agent.act(Vector<double>::Constant(4, 0.3), rng, true);
  CHECK(s.action.isZero(0.0));
  CHECK_FALSE(s.log_prob.has_value());
  const auto st = agent.act(Vector<double>::Constant(4, 0.3), rng, false);
  CHECK(st.log_prob.has_value());
}

TEST_CASE("stochastic actions stay strictly inside (-1, 1)") {
  SacHyperParams hp = tiny_hp();
  hp.hidden = {8};
  SacAgent<float> agent(3, 4, hp, 2);
  // Mean bias 12 saturates tanh to exactly 1 in single precision.
  auto& p = agent.actor().params();
  const auto& last = agent.actor().layers().back();
  for (int j = 0; j < 4; ++j) p[last.bias_offset + j] = 12.0f;
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const auto s = agent.act(Vector<float>::Constant(3, 0.5f), rng, false);
    REQUIRE((s.action.array().abs() < 1.0f).all());
    REQUIRE(std::isfinite(*s.log_prob));
  }
}

TEST_CASE("log-density of the squashed Gaussian matches interval probabilities") {
  SacHyperParams hp = tiny_hp();
  hp.hidden = {4};
  SacAgent<double> agent(2, 1, hp, 4);
  Matrix<double> obs(2, 1);
  obs << 0.4, -0.7;
  const auto base = agent.policy_forward(obs, Matrix<double>::Zero(1, 1), false);
  const double mu = base.mean(0, 0);
  const double sigma = base.std(0, 0);
  double integral = 0.0;
  for (double z = -4.0; z <= 4.0; z += 0.25) {
    const double a = std::tanh(mu + sigma * z);
    const double xi = (std::atanh(a) - mu) / sigma;
    const auto pass = agent.policy_forward(obs, Matrix<double>::Constant(1, 1, xi), false);
    REQUIRE_THAT(pass.action(0, 0), WithinAbs(a, 1e-12));
    const double d = 1e-5 * (1.0 - a * a);
    const double prob = normal_cdf((std::atanh(a + d) - mu) / sigma) - normal_cdf((std::atanh(a - d) - mu) / sigma);
    const double numeric = std::log(prob / (2 * d));
    REQUIRE_THAT(pass.log_prob[0], WithinAbs(numeric, 1e-3));
  }
  // Integrate the action density in pre-squash coordinates, da = (1 - a^2) du.
  const int n = 4000;
  const double du = 16.0 * sigma / n;
  for (int i = 0; i < n; ++i) {
    const double u = mu - 8.0 * sigma + (i + 0.5) * du;
    const double a = std::tanh(u);
    const double xi = (u - mu) / sigma;
    const double lp = agent.policy_forward(obs, Matrix<double>::Constant(1, 1, xi), false).log_prob[0];
    integral += std::exp(lp) * (1.0 - a * a) * du;
  }
  CHECK_THAT(integral, WithinAbs(1.0, 1e-3));
}

TEST_CASE("gradients match central finite differences") {
  SacAgent<double> agent(3, 2, tiny_hp(), 5);
  Rng rng(6);
  // Move targets away from the critics so the test exercises distinct nets.
  for (int i = 0; i < 2; ++i)
    for (Eigen::Index k = 0; k < agent.target(i).parameter_count(); ++k)
      agent.target(i).params()[k] += uniform(rng, -0.2, 0.2);
  const Batch<double> batch = random_batch(3, 2, 3, rng);
  const PolicyNoise<double> noise = agent.draw_noise(3, rng);
  const SacGradients<double> g = agent.compute_gradients(batch, noise);

  check_fd(agent.critic(0).params(), g.critic1, [&] { return agent.losses(batch, noise).critic1; });
  check_fd(agent.critic(1).params(), g.critic2, [&] { return agent.losses(batch, noise).critic2; });
  check_fd(agent.actor().params(), g.actor, [&] { return agent.losses(batch, noise).actor; });
  Vector<double> ga = Vector<double>::Constant(1, g.log_alpha);
  check_fd(agent.log_alpha_param(), ga, [&] { return agent.losses(batch, noise).alpha_loss; });
}

TEST_CASE("reported losses agree with the loss oracle") {
  SacAgent<double> agent(3, 2, tiny_hp(), 7);
  Rng rng(8);
  const Batch<double> batch = random_batch(3, 2, 5, rng);
  const PolicyNoise<double> noise = agent.draw_noise(5, rng);
  const auto g = agent.compute_gradients(batch, noise);
  const auto l = agent.losses(batch, noise);
  CHECK_THAT(g.losses.critic1, WithinAbs(l.critic1, 1e-12));
  CHECK_THAT(g.losses.critic2, WithinAbs(l.critic2, 1e-12));
  CHECK_THAT(g.losses.actor, WithinAbs(l.actor, 1e-12));
  CHECK_THAT(g.losses.alpha_loss, WithinAbs(l.alpha_loss, 1e-12));
}

TEST_CASE("critic targets: terminal transitions and the myopic limit") {
  SacHyperParams hp = tiny_hp();
  SacAgent<double> agent(3, 2, hp, 9);
  Rng rng(10);
  Batch<double> batch = random_batch(3, 2, 4, rng);
  batch.dones.setOnes();
  const auto noise = agent.draw_noise(4, rng);
  CHECK(agent.critic_target(batch, noise.next) == batch.rewards);

  hp.gamma = 0.0;
  SacAgent<double> myopic(3, 2, hp, 9);
  batch.dones.setZero();
  CHECK(myopic.critic_target(batch, noise.next) == batch.rewards);
}

TEST_CASE("temperature stays positive and targets trail the critics") {
  SacHyperParams hp = tiny_hp();
  hp.alpha_lr = 0.05;
  SacAgent<double> agent(3, 2, hp, 11);
  Rng rng(12);
  for (int i = 0; i < 300; ++i) {
    agent.update(random_batch(3, 2, 3, rng), rng);
    REQUIRE(agent.alpha() > 0.0);
  }
  // Hold the online critic fixed: repeated averaging shrinks the gap.
  double prev = (agent.target(0).params() - agent.critic(0).params()).norm();
  for (int i = 0; i < 20; ++i) {
    polyak_update(agent.target(0).params(), agent.critic(0).params(), hp.tau);
    const double d = (agent.target(0).params() - agent.critic(0).params()).norm();
    REQUIRE(d < prev);
    prev = d;
  }
}

TEST_CASE("divergence guard") {
  SacAgent<double> agent(3, 2, tiny_hp(), 13);
  Rng rng(14);
  Batch<double> batch = random_batch(3, 2, 3, rng);
  batch.rewards[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(agent.update(batch, rng), std::runtime_error);
  agent.actor().params().setConstant(std::numeric_limits<double>::quiet_NaN());
  CHECK_THROWS_AS(agent.act(Vector<double>::Zero(3), rng, true), std::runtime_error);
}

TEST_CASE("hyperparameter validation") {
  SacHyperParams hp;
  hp.gamma = 1.0;
  CHECK_THROWS(hp.validate());
  hp = {};
  hp.tau = 0.0;
  CHECK_THROWS(hp.validate());
  hp = {};
  hp.batch_size = 0;
  CHECK_THROWS(hp.validate());
}

namespace {

// 1-D reach task: s' = clip(s + 0.2 a), r = -|s'|, 20 steps per episode.
struct Reach {
  double s = 0.0;
  int t = 0;
  void reset(Rng& rng) {
    s = uniform(rng, -1, 1);
    t = 0;
  }
  double step(double a) {
    s = std::clamp(s + 0.2 * a, -1.0, 1.0);
    ++t;
    return -std::abs(s);
  }
  bool done() const { return t >= 20; }
};

double greedy_return(const SacAgent<float>& agent) {
  double total = 0;
  Rng unused(0);
  for (double start : {-0.9, -0.5, -0.2, 0.3, 0.6, 0.95}) {
    Reach env;
    env.s = start;
    while (!env.done()) {
      const auto a = agent.act(Vector<float>::Constant(1, float(env.s)), unused, true);
      total += env.step(a.action[0]);
    }
  }
  return total / 6.0;
}

}  // namespace

TEST_CASE("learning smoke test on a 1-D reach task") {
  SacHyperParams hp;
  hp.hidden = {32, 32};
  hp.batch_size = 64;
  hp.target_entropy = -1.0;
  hp.actor_lr = hp.critic_lr = hp.alpha_lr = 1e-3;
  SacAgent<float> agent(1, 1, hp, 21);
  ReplayBuffer<float> buf(1, 1, {.capacity = 10000});
  Rng rng(22);
  Reach env;
  env.reset(rng);
  std::vector<double> evals{greedy_return(agent)};
  for (int step = 1; step <= 5000; ++step) {
    Vector<float> obs = Vector<float>::Constant(1, float(env.s));
    Vector<float> act = step <= 500 ? Vector<float>::Constant(1, float(uniform(rng, -1, 1)))
                                    : agent.act(obs, rng, false).action;
    const double r = env.step(act[0]);
    buf.push(obs, act, r, Vector<float>::Constant(1, float(env.s)), false);
    if (env.done()) env.reset(rng);
    if (step > 500) agent.update(buf.sample(64, rng), rng);
    if (step % 1000 == 0) evals.push_back(greedy_return(agent));
  }
  // Averages over consecutive checkpoint pairs must improve monotonically.
  std::vector<double> avg;
  for (std::size_t i = 0; i + 1 < evals.size(); i += 2) avg.push_back(0.5 * (evals[i] + evals[i + 1]));
  for (double e : evals) UNSCOPED_INFO("checkpoint return " << e);
  for (std::size_t i = 1; i < avg.size(); ++i) CHECK(avg[i] > avg[i - 1]);
  CHECK(evals.back() > evals.front());
}
