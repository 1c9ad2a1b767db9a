#include "hypoflow/jet.hpp"

#include <cmath>
#include <stdexcept>

namespace hypoflow {

namespace {
void enumerate(int nvars, int order, std::vector<int>& cur, int pos, int remaining,
               std::vector<std::vector<int>>& out) {
  if (pos == nvars) {
    out.push_back(cur);
    return;
  }
  for (int k = 0; k <= remaining; ++k) {
    cur[pos] = k;
    enumerate(nvars, order, cur, pos + 1, remaining - k, out);
  }
  cur[pos] = 0;
}
}  // namespace

JetSpace::JetSpace(int nvars, int order) : nvars_(nvars), order_(order) {
  if (nvars < 1 || order < 0) throw std::invalid_argument("JetSpace: bad dimensions");
  std::vector<std::vector<int>> all;
  std::vector<int> cur(nvars, 0);
  enumerate(nvars, order, cur, 0, order, all);
  // graded order so the constant term sits at index 0
  for (int deg = 0; deg <= order; ++deg)
    for (auto& e : all) {
      int s = 0;
      for (int v : e) s += v;
      if (s == deg) {
        exps_.push_back(e);
        degree_.push_back(deg);
      }
    }
  const int sz = size();
  for (int a = 0; a < sz; ++a)
    for (int b = 0; b < sz; ++b) {
      if (degree_[a] + degree_[b] > order) continue;
      std::vector<int> e(nvars);
      for (int v = 0; v < nvars; ++v) e[v] = exps_[a][v] + exps_[b][v];
      mul_.push_back({a, b, index_of(e)});
    }
  deriv_.resize(nvars);
  for (int v = 0; v < nvars; ++v)
    for (int src = 0; src < sz; ++src) {
      if (exps_[src][v] == 0) continue;
      std::vector<int> e = exps_[src];
      e[v] -= 1;
      deriv_[v].push_back({src, index_of(e), static_cast<double>(exps_[src][v])});
    }
}

int JetSpace::index_of(const std::vector<int>& e) const {
  for (int i = 0; i < size(); ++i)
    if (exps_[i] == e) return i;
  return -1;
}

Jet::Jet(const JetSpace* s, double v) : s_(s), c_(s ? s->size() : 1, 0.0) { c_[0] = v; }

Jet Jet::variable(const JetSpace* s, int var, double value) {
  Jet j(s, value);
  std::vector<int> e(s->nvars(), 0);
  e[var] = 1;
  int idx = s->index_of(e);
  if (idx >= 0) j.c_[idx] = 1.0;
  return j;
}

void Jet::bind(const JetSpace* s) {
  if (s_ || !s) return;
  double v = c_[0];
  s_ = s;
  c_.assign(s->size(), 0.0);
  c_[0] = v;
}

void Jet::set_coeff(int idx, double v) {
  if (!s_ && idx != 0) throw std::logic_error("Jet: constant has no higher coefficients");
  c_[idx] = v;
}

Jet Jet::derivative(int var) const {
  if (!s_) return Jet(0.0);
  Jet r(s_, 0.0);
  for (const auto& t : s_->deriv_table(var)) r.c_[t.dst] += t.factor * c_[t.src];
  return r;
}

Jet& Jet::operator+=(const Jet& o) {
  bind(o.s_);
  if (o.s_ && o.s_ != s_) throw std::logic_error("Jet: mixed spaces");
  if (!o.s_) {
    c_[0] += o.c_[0];
    return *this;
  }
  for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
  return *this;
}

Jet& Jet::operator-=(const Jet& o) {
  bind(o.s_);
  if (o.s_ && o.s_ != s_) throw std::logic_error("Jet: mixed spaces");
  if (!o.s_) {
    c_[0] -= o.c_[0];
    return *this;
  }
  for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
  return *this;
}

Jet Jet::operator-() const {
  Jet r = *this;
  for (double& x : r.c_) x = -x;
  return r;
}

Jet operator*(const Jet& a, const Jet& b) {
  if (!a.s_ && !b.s_) return Jet(a.c_[0] * b.c_[0]);
  if (!a.s_ || !b.s_) {
    const Jet& j = a.s_ ? a : b;
    double k = a.s_ ? b.c_[0] : a.c_[0];
    Jet r = j;
    for (double& x : r.c_) x *= k;
    return r;
  }
  if (a.s_ != b.s_) throw std::logic_error("Jet: mixed spaces");
  Jet r(a.s_, 0.0);
  for (const auto& t : a.s_->mul_table()) r.c_[t.c] += a.c_[t.a] * b.c_[t.b];
  return r;
}

Jet& Jet::operator*=(const Jet& o) { return *this = *this * o; }

Jet Jet::compose(const std::vector<double>& derivs) const {
  if (!s_) {
    return Jet(derivs.empty() ? 0.0 : derivs[0]);
  }
  Jet h = *this;
  h.c_[0] = 0.0;
  Jet result(s_, derivs.empty() ? 0.0 : derivs[0]);
  Jet power(s_, 1.0);
  double fact = 1.0;
  for (int r = 1; r <= s_->order() && r < static_cast<int>(derivs.size()); ++r) {
    power = power * h;
    fact *= r;
    Jet term = power * Jet(derivs[r] / fact);
    result += term;
  }
  return result;
}

namespace {
int jet_order(const Jet& u) { return u.space() ? u.space()->order() : 0; }
}  // namespace

Jet sin(const Jet& u) {
  double v = u.value();
  std::vector<double> d;
  for (int r = 0; r <= jet_order(u); ++r) {
    switch (r % 4) {
      case 0: d.push_back(std::sin(v)); break;
      case 1: d.push_back(std::cos(v)); break;
      case 2: d.push_back(-std::sin(v)); break;
      default: d.push_back(-std::cos(v)); break;
    }
  }
  return u.compose(d);
}

Jet cos(const Jet& u) {
  double v = u.value();
  std::vector<double> d;
  for (int r = 0; r <= jet_order(u); ++r) {
    switch (r % 4) {
      case 0: d.push_back(std::cos(v)); break;
      case 1: d.push_back(-std::sin(v)); break;
      case 2: d.push_back(-std::cos(v)); break;
      default: d.push_back(std::sin(v)); break;
    }
  }
  return u.compose(d);
}

Jet exp(const Jet& u) {
  std::vector<double> d(jet_order(u) + 1, std::exp(u.value()));
  return u.compose(d);
}

}  // namespace hypoflow
