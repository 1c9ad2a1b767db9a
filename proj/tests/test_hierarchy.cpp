#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hypoflow/hierarchy.hpp"
#include "hypoflow/zoo.hpp"
#include "support.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <random>

using namespace hypoflow;
using testing_support::scalar_model;

namespace {
Vec v3(double a, double b, double c) {
  Vec v(3);
  v << a, b, c;
  return v;
}

ModelSpec scaled_a1(const ModelSpec& base, double c) {
  ModelSpec s = base;
  s.a1 = [f = base.a1, c](const Vec& z, Vec& o) {
    f(z, o);
    o *= c;
  };
  s.jac_a1 = [f = base.jac_a1, c](const Vec& z, Mat& o) {
    f(z, o);
    o *= c;
  };
  s.hess_a1 = nullptr;
  s.a1_jet = [f = base.a1_jet, c](const std::vector<Jet>& z, std::vector<Jet>& o) {
    f(z, o);
    for (Jet& j : o) j = j * Jet(c);
  };
  return s;
}
}  // namespace

TEST_CASE("Example 2.3 hierarchy reproduces the three printed vectors") {
  ZooEntry e = make_zoo("example_2_3");
  Hierarchy h = build_hierarchy(e.spec, 3);
  auto v = h.evaluate(Vec::Zero(4));
  REQUIRE(v.size() == 3);
  CHECK(v[0][0] == v3(1, 0, 0));
  CHECK(v[1][1] == v3(0, -1, 0));
  CHECK(v[2][3] == v3(1, 0, 1));
  CHECK(h.levels[1][1].provenance == "d/dy1 > transport");
  CHECK(h.levels[2][3].provenance == "d/dy1 > transport > transport");
  CHECK(h.evaluate_field(3, 3, Vec::Zero(4)) == v3(1, 0, 1));
}

TEST_CASE("hierarchy cardinality grows by n+1 per level") {
  for (const char* name : {"example_2_3", "example_2_4", "example_2_5", "high_order", "langevin"}) {
    ZooEntry e = make_zoo(name);
    Hierarchy h = build_hierarchy(e.spec, 3);
    std::size_t expect = e.spec.n;
    for (const auto& level : h.levels) {
      CHECK_MESSAGE(level.size() == expect, name);
      expect *= e.spec.n + 1;
    }
  }
}

TEST_CASE("Example 2.3 spans R^3 everywhere") {
  ZooEntry e = make_zoo("example_2_3");
  Hierarchy h = build_hierarchy(e.spec, 3);
  Vec far(4);
  far << 5, -2, 7, 1;
  for (const Vec& p : {Vec(Vec::Zero(4)), far}) {
    SpanningReport r = spanning_dimension(h, p);
    CHECK(r.numerical_rank == 3);
    CHECK(r.spans);
  }
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int i = 0; i < 10; ++i) {
    Vec p(4);
    for (int k = 0; k < 4; ++k) p[k] = u(rng);
    CHECK(spanning_dimension(h, p).numerical_rank == 3);
  }
}

TEST_CASE("linear drift: the union of levels spans the Krylov space") {
  ZooEntry e = make_zoo("example_2_3");
  Mat P(3, 3), Q(3, 1);
  P << 0, 1, 0, 1, 0, 0, 0, 1, 1;
  Q << 1, 0, 0;
  Mat K(3, 3);
  K << Q, P * Q, P * P * Q;
  Hierarchy h = build_hierarchy(e.spec, 3);
  SpanningReport r = spanning_dimension(h, Vec::Zero(4));
  // every nonzero field is +- a Krylov column
  int matched = 0;
  for (int c = 0; c < r.matrix.cols(); ++c) {
    Vec f = r.matrix.col(c);
    if (f.isZero(0.0)) continue;
    bool hit = false;
    for (int k = 0; k < 3; ++k) hit = hit || f == K.col(k) || f == -K.col(k);
    CHECK(hit);
    ++matched;
  }
  CHECK(matched == 3);
  Eigen::JacobiSVD<Mat> svd(K);
  CHECK(svd.singularValues()[2] > 1e-8);
}

TEST_CASE("a zero x-drift never spans") {
  ModelSpec s = scalar_model([](double, double) { return 0.0; }, [](double, double) { return 0.0; },
                             [](double, double) { return 1.0; });
  Hierarchy h = build_hierarchy(s, 2);
  SpanningReport r = spanning_dimension(h, Vec::Zero(2));
  CHECK(r.numerical_rank == 0);
  CHECK(!r.spans);
  CHECK(r.modulus == 0.0);
}

TEST_CASE("integrated BM and Langevin span at the first level") {
  ZooEntry ib = make_zoo("integrated_bm");
  SpanningReport r = spanning_dimension(build_hierarchy(ib.spec, 1), Vec::Zero(2));
  CHECK(r.numerical_rank == 1);
  CHECK(r.spans);
  CHECK(r.modulus == doctest::Approx(1.0));
  ZooEntry lg = langevin(1.0, Potential::double_well, 1.0, 2);
  SpanningReport q = spanning_dimension(build_hierarchy(lg.spec, 1), Vec::Constant(4, 0.3));
  CHECK(q.numerical_rank == 2);
  CHECK(q.spans);
}

TEST_CASE("modulus is the squared smallest singular value") {
  for (const char* name : {"example_2_3", "example_2_4", "high_order", "hamiltonian_quartic"}) {
    ZooEntry e = make_zoo(name);
    Hierarchy h = build_hierarchy(e.spec, e.expected.j0);
    Vec p = e.expected.default_x0 + Vec::Constant(e.spec.dim(), 0.37);
    SpanningReport r = spanning_dimension(h, p);
    REQUIRE(r.singular_values.size() == e.spec.m);
    double s = r.singular_values[e.spec.m - 1];
    CHECK_MESSAGE(std::fabs(r.modulus - s * s) <= 1e-12 * std::max(1.0, r.modulus), name);
  }
}

TEST_CASE("rank is invariant under scaling of the x-drift") {
  ZooEntry e = make_zoo("example_2_3");
  Vec p(4);
  p << 0.2, -0.4, 1.0, 0.5;
  SpanningReport base = spanning_dimension(build_hierarchy(e.spec, 3), p);
  for (double c : {1e-3, 0.5, 7.0}) {
    SpanningReport r = spanning_dimension(build_hierarchy(scaled_a1(e.spec, c), 3), p);
    CHECK(r.numerical_rank == base.numerical_rank);
    CHECK(r.spans == base.spans);
  }
}

TEST_CASE("finite-difference hierarchies are depth limited and accurate at depth 2") {
  ZooEntry e = make_zoo("langevin_double_well");
  ModelSpec fd = e.spec;
  fd.jac_a1 = nullptr;
  fd.hess_a1 = nullptr;
  fd.a1_jet = nullptr;
  CHECK_THROWS_AS(build_hierarchy(fd, 3), ArgumentError);
  CHECK_THROWS_AS(build_hierarchy(e.spec, 0), ArgumentError);
  Hierarchy a = build_hierarchy(e.spec, 2), b = build_hierarchy(fd, 2);
  CHECK(b.finite_difference);
  Vec p(2);
  p << 0.8, -0.3;
  auto va = a.evaluate(p), vb = b.evaluate(p);
  for (std::size_t l = 0; l < va.size(); ++l)
    for (std::size_t k = 0; k < va[l].size(); ++k) CHECK((va[l][k] - vb[l][k]).norm() <= 1e-6);
}

TEST_CASE("non-finite fields name their provenance") {
  ModelSpec s = scalar_model([](double, double y) { return std::log(y); },
                             [](double, double) { return 0.0; }, [](double, double) { return 1.0; });
  Hierarchy h = build_hierarchy(s, 1);
  Vec p(2);
  p << 0.0, -1.0;
  try {
    spanning_dimension(h, p);
    FAIL("expected a numerical failure");
  } catch (const NumericalFailure& e) {
    CHECK(std::string(e.what()).find("d/dy1") != std::string::npos);
  }
}

TEST_CASE("local constants on constant-field models") {
  ZooEntry ib = make_zoo("integrated_bm");
  LocalConstants k = local_constants(ib.spec, build_hierarchy(ib.spec, 1), 1.0);
  CHECK(k.c == doctest::Approx(0.5));
  CHECK(k.R3 == doctest::Approx(0.5));
  CHECK(k.C0 == doctest::Approx(2.0));
  CHECK(k.R1 > 0);
  CHECK(k.n_samples == 512);
  ZooEntry lg = make_zoo("langevin");
  LocalConstants q = local_constants(lg.spec, build_hierarchy(lg.spec, 1), 1.0);
  CHECK(q.c == doctest::Approx(0.5));
  CHECK(q.R3 == doctest::Approx(0.5));
}

TEST_CASE("Example 2.5 violates the noise hypothesis with a witness") {
  ZooEntry e = make_zoo("example_2_5");
  CHECK(lambda_min_bbT(e.spec, Vec::Zero(4)) == doctest::Approx(0.0).epsilon(1e-14));
  try {
    local_constants(e.spec, build_hierarchy(e.spec, 1), 1.0);
    FAIL("expected a hypothesis violation");
  } catch (const HypothesisViolation& ex) {
    CHECK(std::string(ex.what()).find("singular") != std::string::npos);
  }
}

TEST_CASE("ball samples are deterministic and inside the ball") {
  Vec c(3);
  c << 1, 2, 3;
  auto a = ball_samples(c, 2.0, 100), b = ball_samples(c, 2.0, 100);
  REQUIRE(a.size() == 100);
  CHECK(a[0] == c);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == b[i]);
    CHECK((a[i] - c).norm() <= 2.0 + 1e-12);
  }
}

TEST_CASE("ellipticity along paths") {
  ZooEntry ib = make_zoo("integrated_bm");
  PathBundle p = integrate_path(ib.spec, Vec::Zero(2), sample_noise(1, 1.0, 100, 1, 0));
  EllipticityTrace t = ellipticity_along_path(ib.spec, p);
  for (double l : t.lambda) CHECK(l == doctest::Approx(1.0));
  CHECK(t.tau_prime_step == 100);

  ModelSpec s = scalar_model([](double, double y) { return y; }, [](double, double) { return 0.0; },
                             [](double, double y) { return 1.0 + y * y; });
  PathBundle q = integrate_path(s, Vec::Zero(2), sample_noise(1, 1.0, 500, 2, 0));
  EllipticityTrace u = ellipticity_along_path(s, q);
  for (int k = 0; k <= 500; ++k) {
    double y = q.states(k, 1);
    CHECK(u.lambda[k] == doctest::Approx((1 + y * y) * (1 + y * y)));
  }
  CHECK(u.bound_checks == 500);
  CHECK(u.bound_violations == 0);
  CHECK(u.tau_prime_step <= 500);

  ZooEntry e5 = make_zoo("example_2_5");
  PathBundle r = integrate_path(e5.spec, Vec::Zero(4), sample_noise(1, 1.0, 50, 1, 0));
  EllipticityTrace v = ellipticity_along_path(e5.spec, r);
  CHECK(v.degenerate);
  CHECK(v.tau_prime_step == 0);
}
