#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hypoflow/gradient.hpp"
#include "hypoflow/zoo.hpp"

#include <cmath>

using namespace hypoflow;

namespace {
McConfig cfg_of(int steps, int paths, std::uint64_t seed = 1) {
  McConfig c;
  c.T = 1.0;
  c.n_steps = steps;
  c.n_paths = paths;
  c.seed = seed;
  c.threads = 1;
  return c;
}

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

bool agree(const GradientEstimate& a, const GradientEstimate& b, double k = 3.0) {
  double se = std::sqrt(a.stderr_ * a.stderr_ + b.stderr_ * b.stderr_);
  return std::fabs(a.value - b.value) <= k * se + 1e-12;
}
}  // namespace

TEST_CASE("test function catalog") {
  auto names = test_function_names();
  CHECK(names.size() == 5);
  TestFunction ind = make_test_function("indicator-halfspace", 2, {{"coord", 1}, {"threshold", 0.5}});
  CHECK(ind.f(v2(0, 0.6)) == 1.0);
  CHECK(ind.f(v2(0, 0.4)) == 0.0);
  CHECK(!ind.grad);
  CHECK(ind.oscillation == 1.0);
  TestFunction s = make_test_function("sin-k", 2, {{"k", 3}});
  Vec g;
  s.grad(v2(0.2, 0), g);
  CHECK(g[0] == doctest::Approx(3 * std::cos(0.6)));
  CHECK(s.oscillation == 2.0);
  TestFunction c = make_test_function("constant", 3, {{"value", 4}});
  CHECK(c.oscillation == 0.0);
  CHECK_THROWS_AS(make_test_function("sin-k", 2, {{"omega", 1}}), ArgumentError);
  CHECK_THROWS_AS(make_test_function("linear", 2, {{"coord", 2}}), ArgumentError);
  CHECK_THROWS_AS(make_test_function("cosine", 2), ArgumentError);
}

TEST_CASE("pathwise gradient of a linear functional is exact on integrated BM") {
  ZooEntry e = make_zoo("integrated_bm");
  TestFunction lin = make_test_function("linear", 2, {{"coord", 0}});
  McConfig c = cfg_of(100, 50);
  c.T = 2.0;
  GradientEstimate gx = pathwise_gradient(e.spec, Vec::Zero(2), lin, v2(1, 0), c);
  GradientEstimate gy = pathwise_gradient(e.spec, Vec::Zero(2), lin, v2(0, 1), c);
  CHECK(gx.value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(gy.value == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(gx.stderr_ == doctest::Approx(0.0));
  CHECK(gx.estimator == "pathwise");
  TestFunction ind = make_test_function("indicator-halfspace", 2);
  CHECK_THROWS_AS(pathwise_gradient(e.spec, Vec::Zero(2), ind, v2(1, 0), c), ArgumentError);
  CHECK_THROWS_AS(pathwise_gradient(e.spec, Vec::Zero(2), lin, Vec::Ones(3), c), ArgumentError);
}

TEST_CASE("indicator gradient matches the Gaussian density") {
  // X_T ~ N(x + yT, T^3/3): d/dx P(X_T > 0) at the origin = phi(0) / sigma
  ZooEntry e = make_zoo("integrated_bm");
  const double sigma = std::sqrt(1.0 / 3.0);
  const double exact = 1.0 / (std::sqrt(2 * M_PI) * sigma);
  TestFunction ind = make_test_function("indicator-halfspace", 2, {{"coord", 0}, {"threshold", 0}});
  McConfig c = cfg_of(400, 10000, 7);
  GradientEstimate mw = malliavin_gradient(e.spec, Vec::Zero(2), ind, v2(1, 0), c);
  GradientEstimate fd = fd_gradient(e.spec, Vec::Zero(2), ind, v2(1, 0), 0.1, c);
  CHECK(mw.estimator == "malliavin_weight");
  CHECK(mw.n_paths == 10000);
  CHECK(std::fabs(mw.value - exact) <= 3 * mw.stderr_);
  CHECK(std::fabs(fd.value - exact) <= 3 * fd.stderr_ + 0.01);
  CHECK(agree(mw, fd));
}

TEST_CASE("the weight has mean zero") {
  for (const char* name : {"integrated_bm", "example_2_3", "langevin"}) {
    ZooEntry e = make_zoo(name);
    TestFunction one = make_test_function("constant", e.spec.dim(), {{"value", 1}});
    Vec xi = Vec::Unit(e.spec.dim(), 0);
    GradientEstimate g = malliavin_gradient(e.spec, e.expected.default_x0, one, xi, cfg_of(200, 4000, 3));
    CHECK_MESSAGE(std::fabs(g.value) <= 3 * g.stderr_, name);
    GradientEstimate p = pathwise_gradient(e.spec, e.expected.default_x0, one, xi, cfg_of(50, 10));
    CHECK(p.value == 0.0);
  }
}

TEST_CASE("weight and pathwise estimators agree on smooth f") {
  for (const char* name : {"langevin_double_well", "example_2_4", "high_order"}) {
    ZooEntry e = make_zoo(name);
    const int N = e.spec.dim();
    TestFunction s = make_test_function("sin-k", N);
    Vec xi = Vec::Unit(N, 0);
    McConfig c = cfg_of(100, 4000, 11);
    GradientEstimate mw = malliavin_gradient(e.spec, e.expected.default_x0, s, xi, c);
    GradientEstimate pw = pathwise_gradient(e.spec, e.expected.default_x0, s, xi, c);
    CHECK_MESSAGE(agree(mw, pw), name << " mw=" << mw.value << "+-" << mw.stderr_ << " pw=" << pw.value);
  }
}

TEST_CASE("accumulated tangents reproduce the bump reruns") {
  ZooEntry e = example_2_3(1.0, -0.5, 0.3, 0.7);
  REQUIRE(!e.spec.linear_additive);
  TestFunction s = make_test_function("sin-k", 4, {{"coord", 1}, {"k", 2}});
  McConfig c = cfg_of(40, 30, 5);
  MalliavinGradientOptions ref;
  ref.bump_reference = true;
  std::vector<Vec> xis = {Vec::Unit(4, 0), Vec::Unit(4, 2)};
  MalliavinGradientReport a = malliavin_gradient(e.spec, e.expected.default_x0, s, xis, c);
  MalliavinGradientReport b = malliavin_gradient(e.spec, e.expected.default_x0, s, xis, c, ref);
  CHECK(a.bump_reruns);
  for (std::size_t i = 0; i < xis.size(); ++i)
    // the bump reference is a difference quotient with step sqrt(eps dt)
    CHECK(a.estimates[i].value == doctest::Approx(b.estimates[i].value).epsilon(1e-4));
}

TEST_CASE("weight guards") {
  ZooEntry lw = make_zoo("langevin_double_well");
  TestFunction s = make_test_function("sin-k", 2);
  CHECK_THROWS_AS(malliavin_gradient(lw.spec, lw.expected.default_x0, s, v2(1, 0), cfg_of(401, 10)),
                  ArgumentError);
  ZooEntry ib = make_zoo("integrated_bm");
  CHECK_NOTHROW(malliavin_gradient(ib.spec, Vec::Zero(2), s, v2(1, 0), cfg_of(1000, 10)));
  ZooEntry e5 = make_zoo("example_2_5");
  TestFunction s4 = make_test_function("sin-k", 4);
  CHECK_THROWS_AS(malliavin_gradient(e5.spec, Vec::Zero(4), s4, Vec::Unit(4, 0), cfg_of(200, 20)),
                  HypothesisViolation);
}

TEST_CASE("bound scan over a spanning model") {
  ZooEntry e = make_zoo("integrated_bm");
  std::vector<TestFunction> fam = {make_test_function("sin-k", 2),
                                   make_test_function("indicator-halfspace", 2)};
  BoundScan b = gradient_bound_scan(e.spec, 1, 1.0, fam, 3, cfg_of(100, 500));
  CHECK(b.rows.size() == 6);
  CHECK(b.flagged_points == 0);
  double mx = 0.0;
  for (const BoundRow& r : b.rows) {
    CHECK(r.spans);
    CHECK(r.gradient.size() == 2);
    mx = std::max(mx, r.norm_over_sup);
  }
  CHECK(b.C_hat == mx);
  CHECK(b.C_hat > 0);
  CHECK_THROWS_AS(gradient_bound_scan(e.spec, 1, 0.0, fam, 3, cfg_of(10, 10)), ArgumentError);
}

TEST_CASE("quintic step and cutoff") {
  CHECK(smoothstep5(0.0) == 0.0);
  CHECK(smoothstep5(1.0) == 1.0);
  CHECK(smoothstep5(0.5) == doctest::Approx(0.5));
  CHECK(smoothstep5(-1.0) == 0.0);
  CHECK(smoothstep5(2.0) == 1.0);
  const double h = 1e-4;
  for (double s : {0.0, 1.0}) {
    double d1 = (smoothstep5(s + h) - smoothstep5(s - h)) / (2 * h);
    double d2 = (smoothstep5(s + h) - 2 * smoothstep5(s) + smoothstep5(s - h)) / (h * h);
    CHECK(std::fabs(d1) <= 1e-6);
    CHECK(std::fabs(d2) <= 1e-3);
  }
  CHECK(cutoff(2.0, v2(1, 1)) == 1.0);
  CHECK(cutoff(2.0, v2(3, 0)) == 0.0);
  double mid = cutoff(2.0, v2(2.5, 0));
  CHECK(mid > 0.0);
  CHECK(mid < 1.0);
}

TEST_CASE("truncated coefficients") {
  ZooEntry e = make_zoo("hamiltonian_quartic");
  ModelSpec t = truncate_model(e.spec, 2.0);
  const int N = e.spec.dim();
  Vec in = Vec::Constant(N, 0.5), out = Vec::Constant(N, 3.0), shell = Vec::Constant(N, 2.3 / std::sqrt(N));
  Vec a, at;
  e.spec.a1(in, a);
  t.a1(in, at);
  CHECK(a == at);
  e.spec.a2(in, a);
  t.a2(in, at);
  CHECK(a == at);
  t.a1(out, at);
  CHECK(at.isZero(0.0));
  Mat B;
  t.b(out, B);
  CHECK(B.isZero(0.0));

  // product-rule Jacobians against central differences in the shell
  Mat A, Jb;
  eval_jacobian_a(t, shell, A);
  eval_jacobian_b(t, shell, Jb);
  ModelSpec fd = t;
  fd.jac_a1 = fd.jac_a2 = fd.jac_b = nullptr;
  fd.hess_a1 = nullptr;
  fd.a1_jet = nullptr;
  Mat Afd, Jbfd;
  eval_jacobian_a(fd, shell, Afd);
  eval_jacobian_b(fd, shell, Jbfd);
  CHECK((A - Afd).norm() <= 1e-6 * std::max(1.0, A.norm()));
  CHECK((Jb - Jbfd).norm() <= 1e-6 * std::max(1.0, Jb.norm()));
  CHECK_THROWS_AS(truncate_model(e.spec, 0.0), ArgumentError);
}

TEST_CASE("truncated quartic system never explodes") {
  ZooEntry e = make_zoo("hamiltonian_quartic");
  ModelSpec t = truncate_model(e.spec, 3.0);
  Vec x0 = Vec::Constant(e.spec.dim(), 2.0);
  for (int i = 0; i < 200; ++i) {
    PathBundle p = integrate_path(t, x0, sample_noise(e.spec.d, 1.0, 50, 9, i));
    CHECK(!p.exploded);
  }
}

TEST_CASE("Feller probe: exact shifts for a linear functional") {
  ZooEntry e = make_zoo("integrated_bm");
  TestFunction lin = make_test_function("linear", 2, {{"coord", 0}});
  FellerProbe fp = feller_probe(e.spec, Vec::Zero(2), lin, {0.4, 0.2, 0.1}, 50.0, cfg_of(100, 200));
  REQUIRE(fp.rows.size() == 6);
  for (const FellerRow& r : fp.rows) CHECK(r.diff == doctest::Approx(r.radius).epsilon(1e-9));
  for (const FellerDirection& d : fp.directions) {
    CHECK(d.decreasing);
    CHECK(std::fabs(d.intercept) <= 1e-9);
  }
  CHECK(fp.model_used == "original");
  CHECK(fp.coincidence_violations == 0);
  CHECK(fp.per_path_violations == 0);
}

TEST_CASE("Feller probe on a bounded function with localization") {
  ZooEntry e = make_zoo("langevin");
  TestFunction s = make_test_function("sin-k", 2);
  FellerProbe fp = feller_probe(e.spec, e.expected.default_x0, s, {0.5, 0.25, 0.1, 0.05}, 1.5,
                                cfg_of(200, 1000, 4));
  CHECK(fp.n_paths == 1000);
  CHECK(fp.coincidence_violations == 0);
  CHECK(fp.per_path_violations == 0);
  CHECK(fp.truncation_inequality);
  CHECK(fp.exit_freq > 0.0);
  CHECK(fp.exit_ci.lo <= fp.exit_freq);
  CHECK(fp.f_bound == 2.0);
  for (const FellerDirection& d : fp.directions) CHECK(d.decreasing);
  TestFunction c = make_test_function("constant", 2, {{"value", 3}});
  FellerProbe zero = feller_probe(e.spec, e.expected.default_x0, c, {0.5, 0.1}, 1.5, cfg_of(50, 20));
  for (const FellerRow& r : zero.rows) CHECK(r.diff == 0.0);
  CHECK_THROWS_AS(feller_probe(e.spec, e.expected.default_x0, s, {0.1, 0.5}, 1.5, cfg_of(10, 2)),
                  ArgumentError);
  CHECK_THROWS_AS(feller_probe(e.spec, e.expected.default_x0, s, {0.1}, 1.5, cfg_of(10, 2)),
                  ArgumentError);
  CHECK_THROWS_AS(feller_probe(e.spec, e.expected.default_x0, s, {0.1, 0.0}, 1.5, cfg_of(10, 2)),
                  ArgumentError);
}

TEST_CASE("Feller probe on the halfspace indicator against the Gaussian shift") {
  // linear Gaussian: X_T^{x0+re} - X_T^{x0} = r e^{A} e exactly, so
  // E diff = Phi((mu + r s)/sigma) - Phi(mu/sigma) with s = (e^A e)_0
  ZooEntry e = langevin(1.0);
  TestFunction ind = make_test_function("indicator-halfspace", 2, {{"coord", 0}, {"threshold", 0}});
  Vec x0 = e.expected.default_x0;
  std::vector<double> radii = {0.5, 0.25, 0.1, 0.05};
  FellerProbe fp = feller_probe(e.spec, x0, ind, radii, 4.0, cfg_of(200, 4000, 8));
  Mat A(2, 2);
  A << 0, 1, -1, -1;
  Mat E = Mat::Identity(2, 2), term = Mat::Identity(2, 2);
  for (int k = 1; k < 30; ++k) {
    term = term * A / k;
    E += term;
  }
  // variance of the first coordinate: int_0^1 (e^{As} e2)_0^2 ds
  double var = 0.0;
  const int P = 2000;
  for (int i = 0; i <= P; ++i) {
    Mat Es = Mat::Identity(2, 2), t = Mat::Identity(2, 2);
    for (int k = 1; k < 30; ++k) {
      t = t * A * (double(i) / P) / k;
      Es += t;
    }
    double w = (i == 0 || i == P) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    var += w * Es(0, 1) * Es(0, 1) / (3.0 * P);
  }
  const double sigma = std::sqrt(var);
  auto Phi = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
  for (const FellerRow& r : fp.rows) {
    double mu = (E * x0)[0];
    double s = E(0, r.direction);
    double exact = Phi((mu + r.radius * s) / sigma) - Phi(mu / sigma);
    CHECK(std::fabs(r.diff - exact) <= 4 * r.stderr_ + 0.02 * std::fabs(exact) + 1e-3);
  }
  for (const FellerDirection& d : fp.directions) {
    CHECK(d.decreasing);
    CHECK(std::fabs(d.intercept) <= 2 * d.intercept_stderr);
  }
  CHECK(fp.truncation_inequality);
  CHECK(fp.per_path_violations == 0);
  CHECK(fp.coincidence_violations == 0);
}
