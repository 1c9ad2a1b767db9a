#include "hypoflow/zoo.hpp"

#include "hypoflow/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

namespace hypoflow {

namespace {

std::vector<Jet> seed_jets(const JetSpace* sp, const Vec& z) {
  std::vector<Jet> zj;
  zj.reserve(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) zj.push_back(Jet::variable(sp, int(i), z[i]));
  return zj;
}

// Builds a ModelSpec from scalar-generic drift (N outputs: a1 then a2) and
// diffusion (n*d outputs, column-major) callables. Derivatives come from jets.
template <class Drift, class Diff>
ModelSpec build_model(const std::string& name, int m, int n, int d, Drift drift, Diff diff,
                      bool linear_additive) {
  const int N = m + n;
  ModelSpec s;
  s.name = name;
  s.m = m;
  s.n = n;
  s.d = d;
  s.linear_additive = linear_additive;
  auto sp1 = std::make_shared<JetSpace>(N, 1);
  auto sp2 = std::make_shared<JetSpace>(N, 2);
  std::vector<int> lin(N);
  std::vector<std::vector<int>> quad(N, std::vector<int>(N));
  for (int p = 0; p < N; ++p) {
    std::vector<int> e(N, 0);
    e[p] = 1;
    lin[p] = sp1->index_of(e);
    for (int q = 0; q < N; ++q) {
      std::vector<int> f(N, 0);
      f[p] += 1;
      f[q] += 1;
      quad[p][q] = sp2->index_of(f);
    }
  }

  s.a1 = [=](const Vec& z, Vec& out) {
    std::vector<double> zz(z.data(), z.data() + N), o(N);
    drift(zz, o);
    out.resize(m);
    for (int i = 0; i < m; ++i) out[i] = o[i];
  };
  s.a2 = [=](const Vec& z, Vec& out) {
    std::vector<double> zz(z.data(), z.data() + N), o(N);
    drift(zz, o);
    out.resize(n);
    for (int i = 0; i < n; ++i) out[i] = o[m + i];
  };
  s.b = [=](const Vec& z, Mat& out) {
    std::vector<double> zz(z.data(), z.data() + N), o(n * d);
    diff(zz, o);
    out.resize(n, d);
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < n; ++i) out(i, j) = o[j * n + i];
  };
  auto jac_rows = [=](const Vec& z, int r0, int rows, Mat& out) {
    std::vector<Jet> zj = seed_jets(sp1.get(), z), o(N, Jet(0.0));
    drift(zj, o);
    out.resize(rows, N);
    for (int i = 0; i < rows; ++i)
      for (int p = 0; p < N; ++p) out(i, p) = o[r0 + i].coeff(lin[p]);
  };
  s.jac_a1 = [=](const Vec& z, Mat& out) { jac_rows(z, 0, m, out); };
  s.jac_a2 = [=](const Vec& z, Mat& out) { jac_rows(z, m, n, out); };
  s.jac_b = [=](const Vec& z, Mat& out) {
    std::vector<Jet> zj = seed_jets(sp1.get(), z), o(n * d, Jet(0.0));
    diff(zj, o);
    out.resize(n * d, N);
    for (int r = 0; r < n * d; ++r)
      for (int p = 0; p < N; ++p) out(r, p) = o[r].coeff(lin[p]);
  };
  s.hess_a1 = [=](const Vec& z, Mat& out) {
    std::vector<Jet> zj = seed_jets(sp2.get(), z), o(N, Jet(0.0));
    drift(zj, o);
    out.resize(m * N, N);
    for (int i = 0; i < m; ++i)
      for (int p = 0; p < N; ++p)
        for (int q = 0; q < N; ++q) {
          double c = o[i].coeff(quad[p][q]);
          out(i * N + p, q) = p == q ? 2.0 * c : c;
        }
  };
  s.a1_jet = [=](const std::vector<Jet>& z, std::vector<Jet>& out) {
    std::vector<Jet> o(N, Jet(0.0));
    drift(z, o);
    out.assign(o.begin(), o.begin() + m);
  };
  return s;
}

template <class S>
S scalar(double v) {
  return S(v);
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

ZooEntry integrated_bm() {
  auto drift = [](const auto& z, auto& out) {
    using S = std::decay_t<decltype(z[0])>;
    out[0] = z[1];
    out[1] = scalar<S>(0.0);
  };
  auto diff = [](const auto& z, auto& out) {
    using S = std::decay_t<decltype(z[0])>;
    out[0] = scalar<S>(1.0);
  };
  ZooEntry e;
  e.spec = build_model("integrated_bm", 1, 1, 1, drift, diff, true);
  e.expected.j0 = 1;
  e.expected.tags = {"spanning", "nondegenerate_noise", "bounded_coefficient_derivatives"};
  e.expected.default_x0 = Vec::Zero(2);
  e.citation = "integrated Brownian motion: dx = y dt, dy = dW; x0 = (0,0)";
  return e;
}

ZooEntry example_2_3(double b, double alpha, double beta, double gamma) {
  auto drift = [=](const auto& z, auto& out) {
    using std::sin;
    out[0] = z[1] + z[3];
    out[1] = z[0];
    out[2] = z[1] + z[2];
    out[3] = alpha * z[3] + beta * sin(z[3]) + gamma * sin(z[0]);
  };
  auto diff = [=](const auto& z, auto& out) {
    using S = std::decay_t<decltype(z[0])>;
    out[0] = scalar<S>(b);
  };
  ZooEntry e;
  e.spec = build_model("example_2_3", 3, 1, 1, drift, diff, beta == 0.0 && gamma == 0.0);
  e.expected.j0 = 3;
  e.expected.noise_nondegenerate = b != 0.0;
  e.expected.tags = {"spanning", "nondegenerate_noise", "bracket_condition_not_directly_applicable"};
  e.expected.default_x0 = Vec::Zero(4);
  e.citation = "linear 3+1 system dx1=(x2+y)dt, dx2=x1 dt, dx3=(x2+x3)dt, dy=a2 dt+b dW with a2 = " +
               fmt(alpha) + " y + " + fmt(beta) + " sin y + " + fmt(gamma) + " sin x1, b = " +
               fmt(b) + "; x0 = 0";
  return e;
}

ChainFunctions chain_linear(double f1) {
  ChainFunctions c;
  c.F1 = [f1](const Jet& x1, const Jet&, const Jet&) { return f1 * x1; };
  c.F2 = [](const Jet& x1, const Jet&, const Jet&) { return x1; };
  c.F3 = [](const Jet& x2, const Jet&) { return x2; };
  c.description = "F1 = " + fmt(f1) + " X1, F2 = X1, F3 = X2";
  return c;
}

ChainFunctions chain_zero_f2(double f1) {
  ChainFunctions c = chain_linear(f1);
  c.F2 = [](const Jet&, const Jet&, const Jet&) { return Jet(0.0); };
  c.description = "F1 = " + fmt(f1) + " X1, F2 = 0, F3 = X2";
  return c;
}

ChainFunctions chain_cubic_f2(double f1) {
  ChainFunctions c = chain_linear(f1);
  c.F2 = [](const Jet& x1, const Jet&, const Jet&) { return x1 * x1 * x1; };
  c.description = "F1 = " + fmt(f1) + " X1, F2 = X1^3, F3 = X2";
  return c;
}

namespace {
// Chain drift on either doubles or jets; state order (X2, X3, X1).
struct ChainDrift {
  ChainFunctions f;
  void operator()(const std::vector<double>& z, std::vector<double>& out) const {
    Jet x2(z[0]), x3(z[1]), x1(z[2]);
    out[0] = f.F2(x1, x2, x3).value();
    out[1] = f.F3(x2, x3).value();
    out[2] = f.F1(x1, x2, x3).value();
  }
  void operator()(const std::vector<Jet>& z, std::vector<Jet>& out) const {
    out[0] = f.F2(z[2], z[0], z[1]);
    out[1] = f.F3(z[0], z[1]);
    out[2] = f.F1(z[2], z[0], z[1]);
  }
};
}  // namespace

ZooEntry example_2_4_chain(const ChainFunctions& fns, double sigma) {
  if (!fns.F1 || !fns.F2 || !fns.F3) throw ArgumentError("example_2_4_chain: missing F");
  auto diff = [sigma](const auto& z, auto& out) {
    using S = std::decay_t<decltype(z[0])>;
    out[0] = scalar<S>(sigma);
  };
  ZooEntry e;
  e.spec = build_model("example_2_4", 2, 1, 1, ChainDrift{fns}, diff, false);
  e.expected.j0 = 2;
  e.expected.default_x0 = Vec::Zero(3);
  // spanning at the origin iff dF2/dX1 * dF3/dX2 != 0 there
  {
    auto sp = std::make_shared<JetSpace>(3, 1);
    Jet x1 = Jet::variable(sp.get(), 2, 0.0), x2 = Jet::variable(sp.get(), 0, 0.0),
        x3 = Jet::variable(sp.get(), 1, 0.0);
    double d12 = fns.F2(x1, x2, x3).coeff(sp->index_of({0, 0, 1}));
    double d23 = fns.F3(x2, x3).coeff(sp->index_of({1, 0, 0}));
    e.expected.spans = d12 * d23 != 0.0;
  }
  e.expected.noise_nondegenerate = sigma != 0.0;
  e.expected.tags = {"chain", "spanning_iff_dF2dX1_dF3dX2_nonzero"};
  e.citation = "three-level chain with noise on X1 only: " + fns.description +
               ", sigma = " + fmt(sigma) + "; state order (X2, X3 | X1); x0 = 0";
  e.spec.linear_additive = false;
  return e;
}

ZooEntry example_2_5_singular() {
  auto drift = [](const auto& z, auto& out) {
    out[0] = z[2];
    out[1] = z[3];
    out[2] = z[2] + z[3];
    out[3] = z[3];
  };
  auto diff = [](const auto& z, auto& out) {
    using S = std::decay_t<decltype(z[0])>;
    out[0] = scalar<S>(1.0);
    out[1] = scalar<S>(1.0);
  };
  ZooEntry e;
  e.spec = build_model("example_2_5", 2, 2, 1, drift, diff, true);
  e.expected.j0 = 1;
  e.expected.spans = true;
  e.expected.malliavin_singular = true;
  e.expected.noise_nondegenerate = false;
  e.expected.tags = {"negative_control", "degenerate_noise", "conserved_direction_(1,0,-1,1)"};
  e.expected.default_x0 = Vec::Zero(4);
  e.citation =
      "4-dim linear system dX = Y dt, dY = [[1,1],[0,1]] Y dt + (1,1) dW; X1 - Y1 + Y2 is "
      "conserved, so the full Malliavin matrix is singular; x0 = 0";
  return e;
}

Potential potential_from_name(const std::string& s) {
  if (s == "quadratic") return Potential::quadratic;
  if (s == "double_well") return Potential::double_well;
  if (s == "linear") return Potential::linear;
  throw ArgumentError("unknown potential '" + s + "' (quadratic, double_well, linear)");
}

std::string potential_name(Potential p) {
  switch (p) {
    case Potential::quadratic: return "quadratic";
    case Potential::double_well: return "double_well";
    default: return "linear";
  }
}

double potential_value(Potential p, const Vec& q) {
  double r2 = q.squaredNorm();
  switch (p) {
    case Potential::quadratic: return 0.5 * r2;
    case Potential::double_well: return 0.25 * (r2 - 1.0) * (r2 - 1.0);
    default: return q.sum();
  }
}

namespace {
template <class S>
S grad_potential(Potential p, const std::vector<S>& z, int d, int i) {
  switch (p) {
    case Potential::quadratic: return z[i];
    case Potential::double_well: {
      S r2 = scalar<S>(0.0);
      for (int k = 0; k < d; ++k) r2 += z[k] * z[k];
      return (r2 - scalar<S>(1.0)) * z[i];
    }
    default: return scalar<S>(1.0);
  }
}
}  // namespace

ZooEntry langevin(double gamma, Potential F, double sigma, int d) {
  if (d < 1) throw ArgumentError("langevin: d must be >= 1");
  auto drift = [=](const auto& z, auto& out) {
    for (int i = 0; i < d; ++i) {
      out[i] = z[d + i];
      out[d + i] = -(gamma * z[d + i]) - grad_potential(F, z, d, i);
    }
  };
  auto diff = [=](const auto& z, auto& out) {
    using S = std::decay_t<decltype(z[0])>;
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < d; ++i) out[j * d + i] = scalar<S>(i == j ? sigma : 0.0);
  };
  ZooEntry e;
  std::string nm = F == Potential::quadratic ? "langevin" : "langevin_" + potential_name(F);
  e.spec = build_model(nm, d, d, d, drift, diff, F != Potential::double_well);
  e.expected.j0 = 1;
  e.expected.noise_nondegenerate = sigma != 0.0;
  e.expected.tags = {"spanning", "nondegenerate_noise", "not_globally_lipschitz_when_nonquadratic"};
  Vec x0 = Vec::Zero(2 * d);
  x0[0] = 1.0;
  e.expected.default_x0 = x0;
  e.citation = "Langevin dq = p dt, dp = (-gamma p - grad F(q)) dt + sigma dW with gamma = " +
               fmt(gamma) + ", F " + potential_name(F) + ", sigma = " + fmt(sigma) +
               ", d = " + std::to_string(d) + "; x0 = (1, 0, ...)";
  return e;
}

LangevinFeasibility langevin_hypothesis_check(Potential F, double gamma, int d, double lo,
                                              double hi, int per_axis, double alpha_max) {
  if (per_axis < 2 || d < 1) throw ArgumentError("langevin_hypothesis_check: bad grid");
  LangevinFeasibility r;
  // grid points of [lo,hi]^d
  std::vector<Vec> pts;
  long total = 1;
  for (int i = 0; i < d; ++i) total *= per_axis;
  if (total > 2000000) throw ArgumentError("langevin_hypothesis_check: grid too large");
  for (long idx = 0; idx < total; ++idx) {
    Vec q(d);
    long t = idx;
    for (int i = 0; i < d; ++i) {
      q[i] = lo + (hi - lo) * double(t % per_axis) / (per_axis - 1);
      t /= per_axis;
    }
    pts.push_back(q);
  }
  r.grid_points = static_cast<int>(pts.size());
  for (const Vec& q : pts)
    if (potential_value(F, q) < 0.0) {
      r.F_nonnegative = false;
      r.F_witness = q;
      break;
    }
  double best_needed = std::numeric_limits<double>::infinity();
  for (int bi = 1; bi <= 9; ++bi) {
    double beta = 0.1 * bi;
    double k = gamma * gamma * beta * (2.0 - beta) / (8.0 * (1.0 - beta));
    double needed = -std::numeric_limits<double>::infinity();
    Vec worst;
    for (const Vec& q : pts) {
      std::vector<double> z(2 * d, 0.0);
      for (int i = 0; i < d; ++i) z[i] = q[i];
      double gq = 0.0;
      for (int i = 0; i < d; ++i) gq += grad_potential(F, z, d, i) * q[i];
      double gap = beta * potential_value(F, q) + k * q.squaredNorm() - 0.5 * gq;
      if (gap > needed) {
        needed = gap;
        worst = q;
      }
    }
    needed = std::max(needed, 0.0);
    if (needed < best_needed) {
      best_needed = needed;
      r.beta = beta;
      r.alpha = needed;
      r.worst_point = worst;
    }
  }
  // alpha on the grid {0, alpha_max/100, ...}: smallest grid value covering the need
  double step = alpha_max / 100.0;
  double alpha_grid = std::ceil(best_needed / step - 1e-12) * step;
  r.feasible = r.F_nonnegative && alpha_grid <= alpha_max;
  r.alpha = alpha_grid;
  r.worst_violation = r.feasible ? 0.0 : best_needed - alpha_max;
  return r;
}

namespace {
template <class S>
S dHdx(Hamiltonian H, const std::vector<S>& z, int d, int i) {
  if (H == Hamiltonian::quadratic) return z[i];
  S r2 = scalar<S>(0.0);
  for (int k = 0; k < d; ++k) r2 += z[k] * z[k];
  return r2 * z[i];
}
}  // namespace

ZooEntry hamiltonian(Hamiltonian H, double gamma, int d) {
  if (d < 1) throw ArgumentError("hamiltonian: d must be >= 1");
  // a1 = d_y H = y;  a2 = -d_x H - gamma d_y H
  auto drift = [=](const auto& z, auto& out) {
    for (int i = 0; i < d; ++i) {
      out[i] = z[d + i];
      out[d + i] = -(gamma * z[d + i]) - dHdx(H, z, d, i);
    }
  };
  auto diff = [=](const auto& z, auto& out) {
    using S = std::decay_t<decltype(z[0])>;
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < d; ++i) out[j * d + i] = scalar<S>(i == j ? 1.0 : 0.0);
  };
  ZooEntry e;
  std::string nm = H == Hamiltonian::quadratic ? "hamiltonian" : "hamiltonian_quartic";
  e.spec = build_model(nm, d, d, d, drift, diff, H == Hamiltonian::quadratic);
  e.expected.j0 = 1;
  e.expected.tags = {"spanning", "nondegenerate_noise",
                     H == Hamiltonian::quartic ? "superlinear_drift" : "linear_drift"};
  Vec x0 = Vec::Zero(2 * d);
  x0[0] = 1.0;
  e.expected.default_x0 = x0;
  e.citation = std::string("stochastic Hamiltonian system with H = ") +
               (H == Hamiltonian::quadratic ? "|x|^2/2" : "|x|^4/4") +
               " + |y|^2/2, damping F = " + fmt(gamma) + " I, b = I, d = " + std::to_string(d) +
               "; x0 = (1, 0, ...)";
  return e;
}

double hamiltonian_nu_probe(Hamiltonian H, int d, double lo, double hi, int per_axis) {
  // H(x,y) on order-2 jets; d_yy block from the quadratic coefficients
  const int N = 2 * d;
  JetSpace sp(N, 2);
  double nu = std::numeric_limits<double>::infinity();
  long total = 1;
  for (int i = 0; i < N; ++i) total *= per_axis;
  for (long idx = 0; idx < total; ++idx) {
    Vec z(N);
    long t = idx;
    for (int i = 0; i < N; ++i) {
      z[i] = lo + (hi - lo) * double(t % per_axis) / (per_axis - 1);
      t /= per_axis;
    }
    std::vector<Jet> zj = seed_jets(&sp, z);
    Jet x2(0.0), y2(0.0);
    for (int i = 0; i < d; ++i) {
      x2 += zj[i] * zj[i];
      y2 += zj[d + i] * zj[d + i];
    }
    Jet Hj = H == Hamiltonian::quadratic ? Jet(0.5) * x2 + Jet(0.5) * y2
                                         : Jet(0.25) * x2 * x2 + Jet(0.5) * y2;
    Mat Hyy(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        std::vector<int> e(N, 0);
        e[d + i] += 1;
        e[d + j] += 1;
        double c = Hj.coeff(sp.index_of(e));
        Hyy(i, j) = i == j ? 2.0 * c : c;
      }
    Eigen::SelfAdjointEigenSolver<Mat> es(Hyy, Eigen::EigenvaluesOnly);
    nu = std::min(nu, es.eigenvalues()[0]);
  }
  return nu;
}

ZooEntry high_order(int order, int m, std::vector<double> coeffs, double c, double b_scale) {
  if (order < 2 || m < 1) throw ArgumentError("high_order: need order >= 2 and m >= 1");
  if (static_cast<int>(coeffs.size()) != order)
    throw ArgumentError("high_order: need exactly `order` coefficients");
  const int mx = m * (order - 1);
  auto drift = [=](const auto& z, auto& out) {
    using S = std::decay_t<decltype(z[0])>;
    for (int i = 0; i < mx; ++i) out[i] = z[m + i];
    for (int k = 0; k < m; ++k) {
      S acc = scalar<S>(0.0);
      for (int i = 0; i < order; ++i) acc = acc + coeffs[i] * z[i * m + k];
      out[mx + k] = -acc - scalar<S>(c);
    }
  };
  auto diff = [=](const auto& z, auto& out) {
    using S = std::decay_t<decltype(z[0])>;
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i) out[j * m + i] = scalar<S>(i == j ? b_scale : 0.0);
  };
  ZooEntry e;
  e.spec = build_model("high_order", mx, m, m, drift, diff, true);
  e.expected.j0 = order - 1;
  e.expected.noise_nondegenerate = b_scale != 0.0;
  e.expected.spans = b_scale != 0.0;
  e.expected.tags = {"companion_form", "spanning_iff_det_bbT_nonzero"};
  e.expected.default_x0 = Vec::Zero(m * order);
  std::string cs;
  for (double v : coeffs) cs += (cs.empty() ? "" : ", ") + fmt(v);
  e.citation = "order-" + std::to_string(order) + " equation in R^" + std::to_string(m) +
               " in companion form, f = -(a . y) - c with a = (" + cs + "), c = " + fmt(c) +
               ", b = " + fmt(b_scale) + " I; x0 = 0";
  return e;
}

std::vector<std::string> zoo_names() {
  return {"integrated_bm", "example_2_3",  "example_2_4",         "example_2_5",
          "langevin",      "langevin_double_well", "hamiltonian", "hamiltonian_quartic",
          "high_order"};
}

namespace {
double param(const std::map<std::string, double>& p, const std::string& k, double def,
             std::vector<std::string>& used) {
  used.push_back(k);
  auto it = p.find(k);
  return it == p.end() ? def : it->second;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] != b[j - 1])});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}
}  // namespace

std::vector<std::string> zoo_suggestions(const std::string& name) {
  std::vector<std::pair<std::size_t, std::string>> scored;
  for (const auto& n : zoo_names()) scored.push_back({edit_distance(name, n), n});
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < scored.size() && i < 3; ++i) out.push_back(scored[i].second);
  return out;
}

ZooEntry make_zoo(const std::string& name, const std::map<std::string, double>& p) {
  std::vector<std::string> used;
  ZooEntry e;
  if (name == "integrated_bm") {
    e = integrated_bm();
  } else if (name == "example_2_3") {
    e = example_2_3(param(p, "b", 1.0, used), param(p, "alpha", 0.0, used),
                    param(p, "beta", 0.0, used), param(p, "gamma", 0.0, used));
  } else if (name == "example_2_4") {
    e = example_2_4_chain(chain_linear(param(p, "f1", -1.0, used)), param(p, "sigma", 1.0, used));
  } else if (name == "example_2_5") {
    e = example_2_5_singular();
  } else if (name == "langevin" || name == "langevin_double_well") {
    int d = static_cast<int>(param(p, "d", 1.0, used));
    e = langevin(param(p, "gamma", 1.0, used),
                 name == "langevin" ? Potential::quadratic : Potential::double_well,
                 param(p, "sigma", 1.0, used), d);
  } else if (name == "hamiltonian" || name == "hamiltonian_quartic") {
    int d = static_cast<int>(param(p, "d", 1.0, used));
    e = hamiltonian(name == "hamiltonian" ? Hamiltonian::quadratic : Hamiltonian::quartic,
                    param(p, "gamma", 1.0, used), d);
  } else if (name == "high_order") {
    int order = static_cast<int>(param(p, "order", 3.0, used));
    int m = static_cast<int>(param(p, "m", 1.0, used));
    std::vector<double> a(order);
    for (int i = 0; i < order; ++i) a[i] = param(p, "a" + std::to_string(i), 1.0, used);
    e = high_order(order, m, a, param(p, "c", 0.0, used), param(p, "b", 1.0, used));
  } else {
    std::string s;
    for (const auto& n : zoo_suggestions(name)) s += (s.empty() ? "" : ", ") + n;
    throw ArgumentError("unknown model '" + name + "'; did you mean: " + s);
  }
  for (const auto& kv : p)
    if (std::find(used.begin(), used.end(), kv.first) == used.end())
      throw ArgumentError("model '" + name + "' has no parameter '" + kv.first + "'");
  return e;
}

}  // namespace hypoflow
