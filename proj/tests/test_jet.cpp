#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hypoflow/jet.hpp"

#include <cmath>

using namespace hypoflow;

TEST_CASE("graded monomial layout") {
  JetSpace s(2, 3);
  CHECK(s.size() == 10);
  CHECK(s.index_of({0, 0}) == 0);
  CHECK(s.degree(0) == 0);
  CHECK(s.degree(s.index_of({1, 2})) == 3);
  CHECK(s.index_of({2, 2}) == -1);
  for (int i = 1; i < s.size(); ++i) CHECK(s.degree(i) >= s.degree(i - 1));
  JetSpace t(4, 2);
  CHECK(t.size() == 15);
}

TEST_CASE("products of variables") {
  JetSpace s(2, 3);
  Jet x = Jet::variable(&s, 0, 2.0), y = Jet::variable(&s, 1, -1.0);
  Jet p = x * x * y;  // (2+h)^2 (-1+k)
  CHECK(p.value() == doctest::Approx(-4.0));
  CHECK(p.coeff(s.index_of({1, 0})) == doctest::Approx(-4.0));
  CHECK(p.coeff(s.index_of({0, 1})) == doctest::Approx(4.0));
  CHECK(p.coeff(s.index_of({2, 0})) == doctest::Approx(-1.0));
  CHECK(p.coeff(s.index_of({1, 1})) == doctest::Approx(4.0));
  CHECK(p.coeff(s.index_of({2, 1})) == doctest::Approx(1.0));
  CHECK(p.coeff(s.index_of({3, 0})) == doctest::Approx(0.0));
}

TEST_CASE("constants mix with bound jets") {
  JetSpace s(1, 2);
  Jet x = Jet::variable(&s, 0, 3.0);
  Jet a = x * Jet(2.0) + Jet(1.0);
  CHECK(a.value() == doctest::Approx(7.0));
  CHECK(a.coeff(1) == doctest::Approx(2.0));
  Jet c = Jet(2.0) * Jet(3.0);
  CHECK(c.space() == nullptr);
  CHECK(c.value() == 6.0);
  Jet n = -x;
  CHECK(n.value() == -3.0);
  CHECK(n.coeff(1) == -1.0);
}

TEST_CASE("elementary functions carry their Taylor coefficients") {
  JetSpace s(1, 4);
  const double u0 = 0.4;
  Jet x = Jet::variable(&s, 0, u0);
  Jet sn = sin(x), cs = cos(x), ex = exp(x);
  double ds[] = {std::sin(u0), std::cos(u0), -std::sin(u0), -std::cos(u0), std::sin(u0)};
  double dc[] = {std::cos(u0), -std::sin(u0), -std::cos(u0), std::sin(u0), std::cos(u0)};
  double fact = 1.0;
  for (int k = 0; k <= 4; ++k) {
    if (k) fact *= k;
    CHECK(sn.coeff(k) == doctest::Approx(ds[k] / fact));
    CHECK(cs.coeff(k) == doctest::Approx(dc[k] / fact));
    CHECK(ex.coeff(k) == doctest::Approx(std::exp(u0) / fact));
  }
}

TEST_CASE("composition in several variables") {
  JetSpace s(2, 3);
  Jet u = Jet::variable(&s, 0, 0.1) + Jet::variable(&s, 1, 0.2);
  Jet e = exp(u);
  const double v = std::exp(0.3);
  CHECK(e.coeff(s.index_of({1, 1})) == doctest::Approx(v));
  CHECK(e.coeff(s.index_of({2, 1})) == doctest::Approx(v / 2.0));
  CHECK(e.coeff(s.index_of({0, 3})) == doctest::Approx(v / 6.0));
}

TEST_CASE("differentiation drops one degree") {
  JetSpace s(2, 4);
  Jet x = Jet::variable(&s, 0, 1.5), y = Jet::variable(&s, 1, 0.5);
  Jet f = x * x * x * y;
  Jet fx = f.derivative(0);  // 3 x^2 y
  CHECK(fx.value() == doctest::Approx(3 * 1.5 * 1.5 * 0.5));
  Jet fxxx = fx.derivative(0).derivative(0);  // 6 y
  CHECK(fxxx.value() == doctest::Approx(3.0));
  CHECK(fxxx.coeff(s.index_of({0, 1})) == doctest::Approx(6.0));
  Jet fy = f.derivative(1);  // x^3
  CHECK(fy.value() == doctest::Approx(1.5 * 1.5 * 1.5));
  CHECK(fy.coeff(s.index_of({0, 1})) == doctest::Approx(0.0));
}

TEST_CASE("mixed partials of a trigonometric field match finite differences") {
  JetSpace s(2, 2);
  auto field = [](const Jet& a, const Jet& b) { return sin(a * b) + a * cos(b); };
  const double x0 = 0.3, y0 = -0.7;
  Jet f = field(Jet::variable(&s, 0, x0), Jet::variable(&s, 1, y0));
  auto fv = [](double a, double b) { return std::sin(a * b) + a * std::cos(b); };
  const double h = 1e-4;
  double fxy = (fv(x0 + h, y0 + h) - fv(x0 + h, y0 - h) - fv(x0 - h, y0 + h) + fv(x0 - h, y0 - h)) /
               (4 * h * h);
  CHECK(f.coeff(s.index_of({1, 1})) == doctest::Approx(fxy).epsilon(1e-6));
}
