#include "pegcl/rl/checkpoint.hpp"
#include "pegcl/rl/mlp.hpp"
#include "pegcl/rl/observation_window.hpp"
#include "pegcl/rl/replay_buffer.hpp"

#include <catch_amalgamated.hpp>

#include <filesystem>
#include <map>

using namespace pegcl;
using namespace pegcl::rl;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("pegcl_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// Scalar objective sum(c .* f(x)) for gradient checks.
double objective(const Mlp<double>& net, const Matrix<double>& x, const Matrix<double>& c) {
  return (net.forward(x).array() * c.array()).sum();
}

}  // namespace

TEST_CASE("MLP layout and zero network") {
  Mlp<double> net({3, 4, 2});
  CHECK(net.parameter_count() == 3 * 4 + 4 + 4 * 2 + 2);
  const Matrix<double> y = net.forward(Matrix<double>::Random(3, 5));
  CHECK(y.rows() == 2);
  CHECK(y.isZero(0.0));
  CHECK_THROWS_AS(net.forward(Matrix<double>::Zero(2, 1)), std::invalid_argument);
}

TEST_CASE("MLP forward matches a hand computation") {
  Mlp<double> net({2, 2, 1});
  // W0 = [[1, -1], [2, 0.5]] (column-major storage), b0 = [0.1, -3], W1 = [2, -1], b1 = 0.5
  net.params() << 1, 2, -1, 0.5, 0.1, -3, 2, -1, 0.5;
  Matrix<double> x(2, 1);
  x << 0.3, 0.2;
  // h = relu([0.3 - 0.2 + 0.1, 0.6 + 0.1 - 3]) = [0.2, 0]
  CHECK_THAT(net.forward(x)(0, 0), WithinAbs(2 * 0.2 + 0.5, 1e-15));
}

TEST_CASE("MLP backward matches central differences") {
  Rng rng(1);
  Mlp<double> net({3, 5, 4, 2});
  net.initialize(rng);
  Matrix<double> x(3, 6), c(2, 6);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = uniform(rng, -1, 1);
  for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = uniform(rng, -1, 1);

  Mlp<double>::Cache cache;
  net.forward(x, &cache);
  Vector<double> grad = Vector<double>::Zero(net.parameter_count());
  const Matrix<double> gx = net.backward(cache, c, &grad);

  const double h = 1e-6;
  for (Eigen::Index i = 0; i < net.parameter_count(); ++i) {
    Mlp<double> p = net, m = net;
    p.params()[i] += h;
    m.params()[i] -= h;
    const double fd = (objective(p, x, c) - objective(m, x, c)) / (2 * h);
    REQUIRE_THAT(grad[i], WithinAbs(fd, 1e-7));
  }
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Matrix<double> xp = x, xm = x;
    xp.data()[i] += h;
    xm.data()[i] -= h;
    const double fd = (objective(net, xp, c) - objective(net, xm, c)) / (2 * h);
    REQUIRE_THAT(gx.data()[i], WithinAbs(fd, 1e-7));
  }
}

TEST_CASE("Adam first step moves each parameter by lr against the gradient sign") {
  Adam<double> opt(3, 0.01);
  Vector<double> p = Vector<double>::Zero(3);
  Vector<double> g(3);
  g << 2.0, -0.5, 0.0;
  opt.step(p, g);
  CHECK_THAT(p[0], WithinAbs(-0.01, 1e-9));
  CHECK_THAT(p[1], WithinAbs(0.01, 1e-9));
  CHECK(p[2] == 0.0);
  CHECK(opt.steps() == 1);
}

TEST_CASE("Adam minimizes a quadratic") {
  Adam<double> opt(2, 0.05);
  Vector<double> p(2);
  p << 3.0, -2.0;
  for (int i = 0; i < 2000; ++i) opt.step(p, 2.0 * (p - Vector<double>::Constant(2, 1.0)));
  CHECK_THAT(p[0], WithinAbs(1.0, 1e-3));
  CHECK_THAT(p[1], WithinAbs(1.0, 1e-3));
}

TEST_CASE("polyak averaging") {
  Vector<double> t(3), o(3);
  t << 1, 2, 3;
  o << 4, 5, 6;
  polyak_update(t, o, 1.0);
  CHECK(t == o);

  Vector<double> same = o;
  polyak_update(same, o, 0.005);
  CHECK(same == o);

  Vector<double> s0 = Vector<double>::Zero(1), s1 = Vector<double>::Ones(1);
  polyak_update(s0, s1, 0.5);
  CHECK(s0[0] == 0.5);

  Vector<double> a = Vector<double>::Zero(4), b = Vector<double>::Constant(4, 2.0);
  double prev = (a - b).norm();
  for (int i = 0; i < 100; ++i) {
    polyak_update(a, b, 0.05);
    const double d = (a - b).norm();
    REQUIRE(d < prev);
    prev = d;
  }
  CHECK_THROWS(polyak_update(a, b, 0.0));
  CHECK_THROWS(polyak_update(a, b, 1.5));
}

TEST_CASE("sum tree") {
  SumTree t(5);
  for (std::size_t i = 0; i < 5; ++i) t.set(i, double(i + 1));
  CHECK(t.total() == 15.0);
  CHECK(t.find(0.5) == 0);
  CHECK(t.find(1.5) == 1);
  CHECK(t.find(14.9) == 4);
  t.set(2, 0.0);
  CHECK(t.total() == 12.0);
  CHECK(t.find(3.5) == 3);
  CHECK_THROWS(t.set(0, -1.0));
}

TEST_CASE("replay ring buffer evicts the oldest item") {
  ReplayBuffer<double> buf(1, 1, {.capacity = 2});
  Vector<double> o(1), a(1);
  for (int i = 0; i < 3; ++i) {
    o << double(i);
    a << 0.0;
    buf.push(o, a, double(i), o, false);
  }
  CHECK(buf.size() == 2);
  CHECK(buf.reward_at(0) == 2.0);
  CHECK(buf.reward_at(1) == 1.0);
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const auto b = buf.sample(4, rng);
    for (Eigen::Index k = 0; k < 4; ++k) REQUIRE(b.rewards[k] != 0.0);
  }
}

TEST_CASE("replay uniform frequencies") {
  ReplayBuffer<double> buf(1, 1, {.capacity = 10});
  Vector<double> o = Vector<double>::Zero(1);
  for (int i = 0; i < 10; ++i) buf.push(o, o, double(i), o, false);
  Rng rng(2);
  std::map<std::size_t, int> counts;
  const int n = 100000;
  for (auto i : buf.sample_indices(n, rng)) ++counts[i];
  for (std::size_t i = 0; i < 10; ++i) CHECK_THAT(counts[i] / double(n), WithinAbs(0.1, 0.01));
}

TEST_CASE("replay with degenerate priorities") {
  ReplayOptions opts;
  opts.capacity = 4;
  opts.prioritized = true;
  opts.priority_eps = 0.0;
  ReplayBuffer<double> buf(1, 1, opts);
  Vector<double> o = Vector<double>::Zero(1);
  buf.push(o, o, 0.0, o, false);
  buf.push(o, o, 1.0, o, false);
  buf.set_priority(0, 0.0);
  buf.set_priority(1, 1.0);
  Rng rng(3);
  for (auto i : buf.sample_indices(10000, rng)) REQUIRE(i == 1);
}

TEST_CASE("prioritized sampling follows |td| and weights are normalized") {
  ReplayOptions opts;
  opts.capacity = 8;
  opts.prioritized = true;
  opts.priority_alpha = 1.0;
  opts.priority_eps = 0.0;
  ReplayBuffer<double> buf(1, 1, opts);
  Vector<double> o = Vector<double>::Zero(1);
  for (int i = 0; i < 2; ++i) buf.push(o, o, 0.0, o, false);
  Vector<double> td(2);
  td << 1.0, 3.0;
  buf.update_priorities({0, 1}, td);
  Rng rng(4);
  int ones = 0;
  const int n = 40000;
  for (auto i : buf.sample_indices(n, rng)) ones += i == 1;
  CHECK_THAT(ones / double(n), WithinAbs(0.75, 0.01));
  const auto b = buf.sample(64, rng);
  CHECK(b.weights.maxCoeff() == 1.0);
  CHECK(b.weights.minCoeff() > 0.0);
}

TEST_CASE("replay errors and determinism") {
  ReplayBuffer<double> buf(2, 1, {.capacity = 100});
  Rng rng(5);
  CHECK_THROWS_AS(buf.sample(1, rng), std::logic_error);
  Vector<double> o = Vector<double>::Zero(2), a = Vector<double>::Zero(1);
  CHECK_THROWS_AS(buf.push(o, a, std::nan(""), o, false), std::invalid_argument);
  for (int i = 0; i < 50; ++i) buf.push(o, a, i, o, i % 7 == 0);
  Rng r1(9), r2(9);
  CHECK(buf.sample_indices(200, r1) == buf.sample_indices(200, r2));
  CHECK_THROWS(ReplayBuffer<double>(1, 1, {.capacity = 0}));
}

TEST_CASE("observation window pads and shifts oldest-first") {
  ObservationWindow w(3, 2);
  CHECK_THROWS_AS(w.flat(), std::logic_error);
  Eigen::VectorXd f(2);
  f << 1, 2;
  w.reset(f);
  Eigen::VectorXd expected(6);
  expected << 1, 2, 1, 2, 1, 2;
  CHECK(w.flat() == expected);
  f << 3, 4;
  w.push(f);
  f << 5, 6;
  w.push(f);
  f << 7, 8;
  w.push(f);
  expected << 3, 4, 5, 6, 7, 8;
  CHECK(w.flat() == expected);
  CHECK(w.size() == 6);
  CHECK_THROWS_AS(w.push(Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("tensor files round-trip") {
  const auto dir = temp_dir("tensors");
  std::vector<NamedTensor> ts{{"a", {2, 3}, {1, 2, 3, 4, 5, 6}}, {"b", {1}, {-0.125}}, {"empty", {0}, {}}};
  save_tensors(dir / "t.tensors", ts);
  const auto back = load_tensors(dir / "t.tensors");
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].name == ts[i].name);
    CHECK(back[i].shape == ts[i].shape);
    CHECK(back[i].values == ts[i].values);
  }
  CHECK_THROWS(save_tensors(dir / "bad.tensors", {{"x", {2, 2}, {1, 2, 3}}}));
  {
    std::ofstream os(dir / "junk.tensors", std::ios::binary);
    os << "NOTATENSORFILE";
  }
  CHECK_THROWS_AS(load_tensors(dir / "junk.tensors"), std::runtime_error);
  CHECK_THROWS_AS(load_tensors(dir / "missing.tensors"), std::runtime_error);
}

TEST_CASE("network weights are stored row-major as [out, in]") {
  Mlp<double> net({2, 3});
  Rng rng(6);
  net.initialize(rng);
  std::vector<NamedTensor> ts;
  append_network(ts, "net", net);
  REQUIRE(ts.size() == 2);
  CHECK(ts[0].name == "net.0.weight");
  CHECK(ts[0].shape == std::vector<std::uint64_t>{3, 2});
  CHECK(ts[0].values[1] == net.weight(0)(0, 1));
  Mlp<double> other({2, 3});
  restore_network(ts, "net", other);
  CHECK(other.params() == net.params());
  Mlp<double> wrong({3, 3});
  CHECK_THROWS(restore_network(ts, "net", wrong));
}
