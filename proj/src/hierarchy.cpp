#include "hypoflow/hierarchy.hpp"

#include "hypoflow/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace hypoflow {

namespace {

using JetVec = std::vector<Jet>;

std::string point_str(const Vec& z) {
  std::ostringstream os;
  os.precision(6);
  os << "(";
  for (Eigen::Index i = 0; i < z.size(); ++i) os << (i ? ", " : "") << z[i];
  os << ")";
  return os.str();
}

// a1 as jets around z, from the jet callback or from value/Jacobian/Hessian.
JetVec a1_jets(const Hierarchy& h, const Vec& z) {
  const ModelSpec& mod = h.model;
  const JetSpace* sp = h.space.get();
  const int N = mod.dim(), m = mod.m;
  JetVec out(m, Jet(sp, 0.0));
  if (mod.a1_jet) {
    JetVec zj;
    for (int i = 0; i < N; ++i) zj.push_back(Jet::variable(sp, i, z[i]));
    mod.a1_jet(zj, out);
    for (auto& j : out)
      if (!j.space()) j = Jet(sp, j.value());
    return out;
  }
  Vec val(m);
  mod.a1(z, val);
  Mat jac;
  if (sp->order() >= 1) eval_jacobian_a1(mod, z, jac);
  Mat hess;
  if (sp->order() >= 2) eval_hessian_a1(mod, z, hess);
  std::vector<int> e(N, 0);
  for (int i = 0; i < m; ++i) {
    out[i] = Jet(sp, val[i]);
    if (sp->order() >= 1)
      for (int p = 0; p < N; ++p) {
        std::fill(e.begin(), e.end(), 0);
        e[p] = 1;
        out[i].set_coeff(sp->index_of(e), jac(i, p));
      }
    if (sp->order() >= 2)
      for (int p = 0; p < N; ++p)
        for (int q = p; q < N; ++q) {
          std::fill(e.begin(), e.end(), 0);
          e[p] += 1;
          e[q] += 1;
          double v = hess(i * N + p, q);
          out[i].set_coeff(sp->index_of(e), p == q ? 0.5 * v : v);
        }
  }
  return out;
}

}  // namespace

std::size_t Hierarchy::count() const {
  std::size_t c = 0;
  for (const auto& l : levels) c += l.size();
  return c;
}

std::vector<std::vector<Vec>> Hierarchy::evaluate(const Vec& z) const {
  const int m = model.m, n = model.n;
  if (z.size() != model.dim()) throw ArgumentError("hierarchy: point has wrong dimension");
  JetVec a1 = a1_jets(*this, z);
  // grad_x a1: dxa1[c][i] = d a1_i / d x_c
  std::vector<JetVec> dxa1(m);
  for (int c = 0; c < m; ++c)
    for (int i = 0; i < m; ++i) dxa1[c].push_back(a1[i].derivative(c));

  std::vector<std::vector<JetVec>> lv(j0);
  for (int j = 0; j < n; ++j) {
    JetVec k;
    for (int i = 0; i < m; ++i) k.push_back(a1[i].derivative(m + j));
    lv[0].push_back(std::move(k));
  }
  for (int l = 1; l < j0; ++l) {
    for (const JetVec& k : lv[l - 1]) {
      for (int j = 0; j < n; ++j) {
        JetVec dk;
        for (int i = 0; i < m; ++i) dk.push_back(k[i].derivative(m + j));
        lv[l].push_back(std::move(dk));
      }
      JetVec t(m, Jet(space.get(), 0.0));
      for (int i = 0; i < m; ++i)
        for (int c = 0; c < m; ++c) {
          t[i] -= dxa1[c][i] * k[c];
          t[i] += k[i].derivative(c) * a1[c];
        }
      lv[l].push_back(std::move(t));
    }
  }
  std::vector<std::vector<Vec>> out(j0);
  for (int l = 0; l < j0; ++l)
    for (const JetVec& k : lv[l]) {
      Vec v(m);
      for (int i = 0; i < m; ++i) v[i] = k[i].value();
      out[l].push_back(v);
    }
  return out;
}

Vec Hierarchy::evaluate_field(int level, int index, const Vec& z) const {
  if (level < 1 || level > j0) throw std::out_of_range("hierarchy: level out of range");
  auto all = evaluate(z);
  if (index < 0 || index >= static_cast<int>(all[level - 1].size()))
    throw std::out_of_range("hierarchy: field index out of range");
  return all[level - 1][index];
}

Hierarchy build_hierarchy(const ModelSpec& model, int j0) {
  check_model(model);
  if (j0 < 1) throw ArgumentError("build_hierarchy: j0 must be >= 1");
  Hierarchy h;
  h.model = model;
  h.j0 = j0;
  h.jet_order = j0;
  h.finite_difference = !model.a1_jet && !(model.jac_a1 && (j0 < 2 || model.hess_a1));
  if (!model.a1_jet && j0 > 2)
    throw ArgumentError(
        "build_hierarchy: depth " + std::to_string(j0) + " for model '" + model.name +
        "' needs derivatives of a1 beyond second order; finite differences are limited to "
        "depth 2. Supply an analytic a1 jet callback for depth >= 3.");
  h.space = std::make_shared<JetSpace>(model.dim(), h.jet_order);
  const int n = model.n;
  h.levels.resize(j0);
  for (int j = 0; j < n; ++j) h.levels[0].push_back({1, "d/dy" + std::to_string(j + 1)});
  for (int l = 1; l < j0; ++l)
    for (const auto& parent : h.levels[l - 1]) {
      for (int j = 0; j < n; ++j)
        h.levels[l].push_back({l + 1, parent.provenance + " > d/dy" + std::to_string(j + 1)});
      h.levels[l].push_back({l + 1, parent.provenance + " > transport"});
    }
  return h;
}

SpanningReport spanning_dimension(const Hierarchy& h, const Vec& point, const SpanOptions& opt) {
  if (!all_finite(point)) throw ArgumentError("spanning_dimension: point not finite");
  if (!(opt.rel_tol > 0)) throw ArgumentError("spanning_dimension: tol must be positive");
  const int m = h.model.m;
  auto vals = h.evaluate(point);
  SpanningReport r;
  r.point = point;
  r.j0 = h.j0;
  r.finite_difference = h.finite_difference;
  std::vector<Vec> cols;
  for (int l = 0; l < h.j0; ++l) {
    std::vector<Vec> kept;
    for (std::size_t i = 0; i < vals[l].size(); ++i) {
      const Vec& v = vals[l][i];
      if (!all_finite(v))
        throw NumericalFailure("hierarchy field '" + h.levels[l][i].provenance +
                               "' is not finite at " + point_str(point));
      if (opt.dedup &&
          std::any_of(kept.begin(), kept.end(), [&](const Vec& u) { return u == v; }))
        continue;
      kept.push_back(v);
      cols.push_back(v);
      r.provenance.push_back(h.levels[l][i].provenance);
    }
  }
  r.matrix.resize(m, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) r.matrix.col(c) = cols[c];
  Eigen::JacobiSVD<Mat> svd(r.matrix);
  r.singular_values = svd.singularValues();
  double smax = r.singular_values.size() ? r.singular_values[0] : 0.0;
  r.tol = opt.rel_tol * smax;
  r.numerical_rank = 0;
  if (smax > 0)
    for (Eigen::Index i = 0; i < r.singular_values.size(); ++i)
      if (r.singular_values[i] > r.tol) ++r.numerical_rank;
  r.spans = r.numerical_rank == m;
  Mat G = r.matrix * r.matrix.transpose();
  Eigen::SelfAdjointEigenSolver<Mat> es(G, Eigen::EigenvaluesOnly);
  r.modulus = es.eigenvalues()[0];
  return r;
}

std::vector<Vec> ball_samples(const Vec& center, double R, int count) {
  const int N = static_cast<int>(center.size());
  std::vector<Vec> pts;
  if (count <= 0) return pts;
  pts.push_back(center);
  std::size_t idx = 1;
  Vec u(N);
  while (static_cast<int>(pts.size()) < count) {
    for (int i = 0; i < N; ++i) u[i] = 2.0 * halton(idx, nth_prime(i)) - 1.0;
    ++idx;
    if (u.norm() <= 1.0) pts.push_back(center + R * u);
  }
  return pts;
}

double lambda_min_bbT(const ModelSpec& model, const Vec& z) {
  Mat b(model.n, model.d);
  model.b(z, b);
  Mat bb = b * b.transpose();
  Eigen::SelfAdjointEigenSolver<Mat> es(bb, Eigen::EigenvaluesOnly);
  return es.eigenvalues()[0];
}

namespace {
struct InfResult {
  double inf = 0.0, sup = 0.0;
  Vec witness;
};

InfResult modulus_inf(const Hierarchy& h, const Vec& center, double R, const Sampling& s) {
  InfResult r;
  r.inf = std::numeric_limits<double>::infinity();
  for (const Vec& p : ball_samples(center, R, s.n_samples)) {
    double v = spanning_dimension(h, p, s.span).modulus;
    r.sup = std::max(r.sup, v);
    if (v < r.inf) {
      r.inf = v;
      r.witness = p;
    }
  }
  return r;
}
}  // namespace

LocalConstants local_constants(const ModelSpec& model, const Hierarchy& h, double R,
                               const Sampling& s) {
  if (!(R > 0)) throw ArgumentError("local_constants: R must be positive");
  if (s.n_samples < 1) throw ArgumentError("local_constants: sample count must be positive");
  LocalConstants lc;
  lc.R = R;
  lc.center = s.center.size() ? s.center : Vec::Zero(model.dim());
  if (lc.center.size() != model.dim()) throw ArgumentError("local_constants: bad center");
  lc.n_samples = s.n_samples;

  InfResult base = modulus_inf(h, lc.center, R, s);
  if (!(base.inf > s.zero_tol * base.sup) || base.sup == 0.0)
    throw HypothesisViolation("spanning fails in the ball of radius " + std::to_string(R) +
                              ": hierarchy Gram matrix singular at " + point_str(base.witness));
  lc.inf_modulus = base.inf;
  lc.c = 0.5 * base.inf;

  double bb_inf = std::numeric_limits<double>::infinity(), bb_sup = 0.0;
  Vec bb_witness;
  for (const Vec& p : ball_samples(lc.center, R, s.n_samples)) {
    double v = lambda_min_bbT(model, p);
    Mat b(model.n, model.d);
    model.b(p, b);
    bb_sup = std::max(bb_sup, (b * b.transpose()).norm());
    if (v < bb_inf) {
      bb_inf = v;
      bb_witness = p;
    }
  }
  if (!(bb_inf > s.zero_tol * bb_sup) || bb_sup == 0.0)
    throw HypothesisViolation("b b^T is singular at " + point_str(bb_witness) +
                              " (smallest eigenvalue " + std::to_string(bb_inf) + ")");
  lc.inf_lambda_bb = bb_inf;
  lc.R3 = 0.5 * bb_inf;
  lc.C0 = 1.0 / lc.R3;

  auto ok = [&](double r1) { return modulus_inf(h, lc.center, R + r1, s).inf > lc.c; };
  double r1 = R;
  if (ok(r1)) {
    int k = 0;
    while (k < s.max_doublings && ok(2 * r1)) {
      r1 *= 2;
      ++k;
    }
    lc.R1_capped = k == s.max_doublings;
  } else {
    int k = 0;
    do {
      r1 *= 0.5;
      ++k;
    } while (k < s.max_halvings && !ok(r1));
    if (!ok(r1))
      throw HypothesisViolation("no enlargement radius keeps the spanning modulus above c");
  }
  lc.R1 = r1;
  return lc;
}

EllipticityTrace ellipticity_along_path(const ModelSpec& model, const PathBundle& path,
                                        double R3) {
  EllipticityTrace t;
  const int K = path.exploded ? path.explode_step - 1 : path.grid.n_steps;
  Mat b(model.n, model.d), prev_bb;
  for (int k = 0; k <= K; ++k) {
    Vec z = path.state(k);
    model.b(z, b);
    Mat bb = b * b.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> es(bb, Eigen::EigenvaluesOnly);
    t.lambda.push_back(es.eigenvalues()[0]);
    if (k > 0) {
      Mat diff = bb - prev_bb;
      Eigen::SelfAdjointEigenSolver<Mat> ed(diff, Eigen::EigenvaluesOnly);
      double opnorm = ed.eigenvalues().cwiseAbs().maxCoeff();
      double dl = std::fabs(t.lambda[k] - t.lambda[k - 1]);
      ++t.bound_checks;
      double slack = 64 * std::numeric_limits<double>::epsilon() * std::max(1.0, bb.norm());
      if (dl > opnorm + slack) ++t.bound_violations;
    }
    prev_bb = bb;
  }
  double scale = prev_bb.size() ? std::max(1.0, prev_bb.norm()) : 1.0;
  t.degenerate = t.lambda.empty() || t.lambda[0] <= 1e-12 * scale;
  t.R3 = R3 > 0 ? R3 : 0.5 * (t.lambda.empty() ? 0.0 : t.lambda[0]);
  t.tau_prime_step = path.grid.n_steps;
  if (!t.degenerate)
    for (int k = 1; k < static_cast<int>(t.lambda.size()); ++k)
      if (std::fabs(t.lambda[k] - t.lambda[0]) >= t.R3) {
        t.tau_prime_step = k;
        break;
      }
  if (t.degenerate) t.tau_prime_step = 0;
  return t;
}

}  // namespace hypoflow
