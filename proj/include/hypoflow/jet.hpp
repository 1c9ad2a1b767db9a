#pragma once

#include <memory>
#include <vector>

namespace hypoflow {

// Truncated multivariate Taylor polynomials in `nvars` variables up to total
// degree `order`. Coefficients are Taylor coefficients: f = sum c_a h^a.
class JetSpace {
 public:
  JetSpace(int nvars, int order);

  int nvars() const { return nvars_; }
  int order() const { return order_; }
  int size() const { return static_cast<int>(exps_.size()); }
  const std::vector<int>& exponent(int idx) const { return exps_[idx]; }
  int degree(int idx) const { return degree_[idx]; }
  int index_of(const std::vector<int>& e) const;  // -1 if absent

  struct MulTerm {
    int a, b, c;
  };
  struct DerivTerm {
    int src, dst;
    double factor;
  };
  const std::vector<MulTerm>& mul_table() const { return mul_; }
  const std::vector<DerivTerm>& deriv_table(int var) const { return deriv_[var]; }

 private:
  int nvars_, order_;
  std::vector<std::vector<int>> exps_;
  std::vector<int> degree_;
  std::vector<MulTerm> mul_;
  std::vector<std::vector<DerivTerm>> deriv_;
};

// A jet bound to a space, or a plain constant when space() is null.
class Jet {
 public:
  Jet(double v = 0.0) : c_{v} {}
  Jet(const JetSpace* s, double v);
  static Jet variable(const JetSpace* s, int var, double value);

  const JetSpace* space() const { return s_; }
  double value() const { return c_[0]; }
  double coeff(int idx) const { return s_ ? c_[idx] : (idx == 0 ? c_[0] : 0.0); }
  void set_coeff(int idx, double v);
  // Derivative w.r.t. variable `var`; valid degree drops by one.
  Jet derivative(int var) const;

  Jet& operator+=(const Jet& o);
  Jet& operator-=(const Jet& o);
  Jet& operator*=(const Jet& o);
  Jet operator-() const;

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator*(const Jet& a, const Jet& b);

  // g(u) = sum_r f^(r)(u0)/r! (u-u0)^r, with derivs[r] = f^(r)(u0).
  Jet compose(const std::vector<double>& derivs) const;

 private:
  const JetSpace* s_ = nullptr;
  std::vector<double> c_;
  void bind(const JetSpace* s);
};

Jet sin(const Jet& u);
Jet cos(const Jet& u);
Jet exp(const Jet& u);

}  // namespace hypoflow
