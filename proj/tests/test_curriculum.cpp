#include "pegcl/curriculum.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace pegcl;
using namespace pegcl::curriculum;
using Catch::Matchers::WithinAbs;

namespace {
const ParamSpec friction_spec{"friction", 1.0, 5.0};
}

TEST_CASE("range at level: friction examples") {
  auto r = param_range_at_level(friction_spec, 1.0);
  CHECK(r.lo == 1.0);
  CHECK(r.hi == 5.0);
  r = param_range_at_level(friction_spec, 0.0);
  CHECK(r.lo == 1.0);
  CHECK(r.hi == 1.0);
  r = param_range_at_level(friction_spec, 0.5);
  CHECK(r.hi == 3.0);
  CHECK_THROWS_AS(param_range_at_level(friction_spec, 1.2), std::invalid_argument);
}

TEST_CASE("literal range form is available") {
  const auto r = param_range_at_level(friction_spec, 1.0, RangeForm::Literal);
  CHECK(r.lo == 1.0);
  CHECK(r.hi == 6.0);
}

TEST_CASE("descending specs give unordered intervals") {
  const ParamSpec clearance{"clearance", 3.0, 0.5};
  const auto r = param_range_at_level(clearance, 0.4);
  CHECK(r.min() == 2.0);
  CHECK(r.max() == 3.0);
  CHECK(r.contains(2.5));
}

TEST_CASE("discrete prefix unlocking") {
  const ParamSpec shapes{"peg_shape", 0, 0, ParamKind::Discrete, {"a", "b", "c", "d"}};
  CHECK(unlocked_count(shapes, 0.0) == 1);
  CHECK(unlocked_count(shapes, 0.25) == 1);
  CHECK(unlocked_count(shapes, 0.26) == 2);
  CHECK(unlocked_count(shapes, 0.5) == 2);
  CHECK(unlocked_count(shapes, 0.75) == 3);
  CHECK(unlocked_count(shapes, 1.0) == 4);
}

TEST_CASE("range nesting") {
  for (const auto& spec : default_registry()) {
    for (int i = 0; i <= 20; ++i)
      for (int j = i; j <= 20; ++j) {
        const auto a = param_range_at_level(spec, i / 20.0);
        const auto b = param_range_at_level(spec, j / 20.0);
        REQUIRE(a.min() >= b.min());
        REQUIRE(a.max() <= b.max());
      }
  }
}

TEST_CASE("uniform sampling") {
  Rng rng(1);
  CHECK(sample_udr({1.0, 1.0}, rng) == 1.0);
  const int n = 100000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double u = sample_udr({0.0, 1.0}, rng);
    sum += u;
    sq += u * u;
  }
  const double mean = sum / n;
  CHECK_THAT(mean, WithinAbs(0.5, 0.01));
  CHECK_THAT(sq / n - mean * mean, WithinAbs(1.0 / 12.0, 0.005));

  Rng a(77), b(77);
  for (int i = 0; i < 100; ++i) REQUIRE(sample_udr({-2, 3}, a) == sample_udr({-2, 3}, b));
}

TEST_CASE("Gaussian difficulty draws") {
  Rng rng(2);
  const int n = 100000;
  double sum = 0;
  int below = 0;
  for (int i = 0; i < n; ++i) {
    const double u = sample_gdr(0.6, 0.1, rng);
    REQUIRE(u >= 0.0);
    REQUIRE(u <= 1.0);
    sum += u;
    below += u < 0.6;
  }
  CHECK_THAT(sum / n, WithinAbs(0.6, 0.01));
  CHECK_THAT(double(below) / n, WithinAbs(0.5, 0.02));

  double worst = 0;
  for (double level : {0.0, 0.3, 1.0})
    for (int i = 0; i < 1000; ++i) worst = std::max(worst, std::abs(sample_gdr(level, 1e-6, rng) - level));
  CHECK(worst < 1e-4);

  CHECK_THROWS_AS(sample_gdr(0.5, 0.0, rng), std::invalid_argument);
}

TEST_CASE("domain at level zero is the easiest task") {
  Rng rng(3);
  const auto reg = default_registry();
  for (int i = 0; i < 200; ++i) {
    const DomainParams p = sample_domain(reg, 0.0, Strategy::Uniform, rng);
    REQUIRE(p.position_offset_mm == Vec3::Zero());
    REQUIRE(p.orientation_offset_deg == Vec3::Zero());
    REQUIRE(p.shape == ShapeKind::Cylinder);
    REQUIRE(p.clearance_mm == 3.0);
    REQUIRE(p.epsilon_mm == 15.0);
    REQUIRE(p.friction == 1.0);
    REQUIRE(p.stiffness == 5e-4);
    REQUIRE(p.level_at_sample == 0.0);
  }
}

TEST_CASE("domain at level one stays inside the full envelope") {
  const auto reg = default_registry();
  for (auto strategy : {Strategy::Uniform, Strategy::Gaussian}) {
    Rng rng(4);
    for (int i = 0; i < 1000; ++i) {
      const DomainParams p = sample_domain(reg, 1.0, strategy, rng);
      REQUIRE((p.position_offset_mm.cwiseAbs().array() <= 50.0).all());
      REQUIRE(p.position_offset_mm.z() >= 0.0);
      REQUIRE((p.orientation_offset_deg.cwiseAbs().array() <= 30.0).all());
      REQUIRE(p.clearance_mm >= 0.5);
      REQUIRE(p.clearance_mm <= 3.0);
      REQUIRE(p.epsilon_mm >= 1.0);
      REQUIRE(p.epsilon_mm <= 15.0);
      REQUIRE(p.friction >= 1.0);
      REQUIRE(p.friction <= 5.0);
      REQUIRE(p.stiffness >= 1e-6);
      REQUIRE(p.stiffness <= 5e-4);
      REQUIRE(p.shape != ShapeKind::Star);
      REQUIRE(p.shape != ShapeKind::Trapezoid);
    }
  }
}

TEST_CASE("Gaussian sampling at level one favours the hard end") {
  Rng rng(5);
  const auto reg = default_registry();
  double sum = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) sum += sample_domain(reg, 1.0, Strategy::Gaussian, rng).clearance_mm;
  // u concentrates near 1, so clearance concentrates near 0.5 mm.
  CHECK(sum / n < 1.0);
}

TEST_CASE("shared difficulty drives every parameter") {
  Rng rng(6);
  SamplingOptions o;
  o.shared_difficulty = true;
  const auto reg = default_registry();
  for (int i = 0; i < 100; ++i) {
    const DomainParams p = sample_domain(reg, 0.5, Strategy::Gaussian, rng, o);
    const double u_friction = (p.friction - 1.0) / 4.0;
    const double u_eps = (15.0 - p.epsilon_mm) / 14.0;
    REQUIRE_THAT(u_friction, WithinAbs(u_eps, 1e-12));
  }
}

TEST_CASE("sampling is reproducible") {
  const auto reg = default_registry();
  Rng a(8), b(8);
  for (int i = 0; i < 50; ++i) {
    const DomainParams p = sample_domain(reg, 0.7, Strategy::Gaussian, a);
    const DomainParams q = sample_domain(reg, 0.7, Strategy::Gaussian, b);
    REQUIRE(to_json(p).dump() == to_json(q).dump());
  }
}

TEST_CASE("linear level") {
  CHECK(linear_level(50, 100) == 0.5);
  CHECK(linear_level(150, 100) == 1.0);
  CHECK(linear_level(0, 100) == 0.0);
  CHECK_THROWS(linear_level(-1, 100));
  CHECK_THROWS(linear_level(1, 0));
}

TEST_CASE("adaptive update traces") {
  CurriculumState s{0.2, 0, 0.1, 4, -4};
  for (int i = 0; i < 4; ++i) s = adaptive_update(s, true);
  CHECK_THAT(s.level, WithinAbs(0.3, 1e-15));
  CHECK(s.perf == 0);

  s = {0.2, 0, 0.1, 4, -4};
  for (int i = 0; i < 4; ++i) s = adaptive_update(s, false);
  CHECK_THAT(s.level, WithinAbs(0.1, 1e-15));
  CHECK(s.perf == 0);

  s = {0.2, 0, 0.1, 4, -4};
  for (int i = 0; i < 1000; ++i) {
    s = adaptive_update(s, i % 2 == 0);
    REQUIRE(s.level == 0.2);
    REQUIRE(std::abs(s.perf) <= 1);
  }
}

TEST_CASE("adaptive level stays in [0, 1] and perf resets on every change") {
  Rng rng(9);
  CurriculumState s;
  for (int i = 0; i < 200000; ++i) {
    const double before = s.level;
    s = adaptive_update(s, uniform01(rng) < 0.55);
    REQUIRE(s.level >= 0.0);
    REQUIRE(s.level <= 1.0);
    if (s.level != before) REQUIRE(s.perf == 0);
  }
}

TEST_CASE("validation") {
  CHECK_THROWS(ParamSpec{"x", 1.0, 1.0}.validate());
  CHECK_THROWS(ParamSpec{"x", 0, 0, ParamKind::Discrete, {}}.validate());
  CHECK_THROWS(CurriculumState{0.1, 0, 0.0, 4, -4}.validate());
  CHECK_THROWS(CurriculumState{0.1, 0, 0.1, 0, -4}.validate());
  CHECK_THROWS(CurriculumState{1.1, 0, 0.1, 4, -4}.validate());
  CHECK_THROWS(find_spec(default_registry(), "gravity"));
}
