#include "hypoflow/gradient.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hypoflow {

// ---------------------------------------------------------------- test functions

std::vector<std::string> test_function_names() {
  return {"indicator-halfspace", "sin-k", "constant", "box-indicator", "linear"};
}

TestFunction make_test_function(const std::string& name, int N,
                                const std::map<std::string, double>& params) {
  auto get = [&](const std::string& k, double def) {
    auto it = params.find(k);
    return it == params.end() ? def : it->second;
  };
  for (const auto& kv : params) {
    static const char* known[] = {"coord", "threshold", "k", "value", "half_width"};
    if (std::none_of(std::begin(known), std::end(known), [&](const char* s) { return kv.first == s; }))
      throw ArgumentError("test function parameter '" + kv.first + "' is not recognised");
  }
  int coord = static_cast<int>(get("coord", 0));
  if (coord < 0 || coord >= N) throw ArgumentError("test function: coord out of range");
  TestFunction t;
  t.name = name;
  if (name == "indicator-halfspace") {
    double c = get("threshold", 0.0);
    t.f = [coord, c](const Vec& z) { return z[coord] > c ? 1.0 : 0.0; };
    t.sup_norm = 1.0;
    t.oscillation = 1.0;
  } else if (name == "sin-k") {
    double k = get("k", 1.0);
    t.f = [coord, k](const Vec& z) { return std::sin(k * z[coord]); };
    t.grad = [coord, k](const Vec& z, Vec& g) {
      g.setZero(z.size());
      g[coord] = k * std::cos(k * z[coord]);
    };
    t.sup_norm = 1.0;
    t.oscillation = 2.0;
  } else if (name == "constant") {
    double v = get("value", 1.0);
    t.f = [v](const Vec&) { return v; };
    t.grad = [](const Vec& z, Vec& g) { g.setZero(z.size()); };
    t.sup_norm = std::fabs(v);
    t.oscillation = 0.0;
  } else if (name == "box-indicator") {
    double w = get("half_width", 1.0);
    t.f = [w](const Vec& z) { return z.cwiseAbs().maxCoeff() <= w ? 1.0 : 0.0; };
    t.sup_norm = 1.0;
    t.oscillation = 1.0;
  } else if (name == "linear") {
    t.f = [coord](const Vec& z) { return z[coord]; };
    t.grad = [coord](const Vec& z, Vec& g) {
      g.setZero(z.size());
      g[coord] = 1.0;
    };
    t.sup_norm = std::numeric_limits<double>::infinity();
    t.oscillation = std::numeric_limits<double>::infinity();
  } else {
    throw ArgumentError("unknown test function '" + name +
                        "' (indicator-halfspace, sin-k, constant, box-indicator, linear)");
  }
  return t;
}

// ---------------------------------------------------------------- estimators

namespace {
void check_xi(const ModelSpec& model, const Vec& xi) {
  if (xi.size() != model.dim()) throw ArgumentError("gradient: direction has the wrong dimension");
}
}  // namespace

GradientEstimate pathwise_gradient(const ModelSpec& model, const Vec& x0, const TestFunction& f,
                                   const Vec& xi, const McConfig& cfg) {
  check_xi(model, xi);
  if (!f.grad) throw ArgumentError("pathwise_gradient: f '" + f.name + "' has no gradient");
  std::vector<double> vals(cfg.n_paths);
  std::vector<char> ok(cfg.n_paths, 0);
  parallel_for(cfg.n_paths, resolve_threads(cfg.threads), [&](int i) {
    NoiseGrid g = sample_noise(model.d, cfg.T, cfg.n_steps, cfg.seed, i);
    PathBundle p = integrate_path(model, x0, g);
    if (p.exploded) return;
    FlowRecord fl = integrate_flow(model, p);
    if (fl.exploded) return;
    Vec gr;
    f.grad(p.state(cfg.n_steps), gr);
    vals[i] = gr.dot(fl.J.back() * xi);
    ok[i] = 1;
  });
  GradientEstimate e;
  e.xi = xi;
  e.estimator = "pathwise";
  std::vector<double> kept;
  for (int i = 0; i < cfg.n_paths; ++i) {
    if (ok[i])
      kept.push_back(vals[i]);
    else
      ++e.excluded;
  }
  MeanStat s = mean_stat(kept);
  e.value = s.value;
  e.stderr_ = s.stderr_;
  e.n_paths = s.n;
  return e;
}

GradientEstimate fd_gradient(const ModelSpec& model, const Vec& x0, const TestFunction& f,
                             const Vec& xi, double h, const McConfig& cfg) {
  check_xi(model, xi);
  if (!(h > 0)) throw ArgumentError("fd_gradient: h must be positive");
  std::vector<double> vals(cfg.n_paths);
  std::vector<char> ok(cfg.n_paths, 0);
  parallel_for(cfg.n_paths, resolve_threads(cfg.threads), [&](int i) {
    NoiseGrid g = sample_noise(model.d, cfg.T, cfg.n_steps, cfg.seed, i);
    PathBundle pp = integrate_path(model, x0 + h * xi, g);
    PathBundle pm = integrate_path(model, x0 - h * xi, g);
    if (pp.exploded || pm.exploded) return;
    vals[i] = (f.f(pp.state(cfg.n_steps)) - f.f(pm.state(cfg.n_steps))) / (2.0 * h);
    ok[i] = 1;
  });
  GradientEstimate e;
  e.xi = xi;
  e.estimator = "finite_difference";
  std::vector<double> kept;
  for (int i = 0; i < cfg.n_paths; ++i) {
    if (ok[i])
      kept.push_back(vals[i]);
    else
      ++e.excluded;
  }
  MeanStat s = mean_stat(kept);
  e.value = s.value;
  e.stderr_ = s.stderr_;
  e.n_paths = s.n;
  return e;
}

namespace {

// Tail sum sum_{i>k} P_i P_i^T dt after replacing increment (k, j) by dw_kj + delta.
Mat bumped_tail(const ModelSpec& model, const PathBundle& path, const FlowRecord& flow, int k,
                int j, double delta, FlowWork& fw, EulerWork& ew) {
  const int N = model.dim(), n = model.n, d = model.d, K = flow.n_steps;
  const double dt = flow.dt;
  std::vector<double> dw(d);
  for (int c = 0; c < d; ++c) dw[c] = path.grid.increments(k, c);
  dw[j] += delta;
  Vec z = path.state(k), zn;
  flow_coefficients(model, z, fw);
  Mat Ji = flow.J_inv[k], Jn, scratch;
  euler_step(model, z, dw.data(), dt, zn, ew);
  flow_inverse_step(fw, Ji, dw.data(), dt, Jn, scratch);
  Mat tail = Mat::Zero(N, N), b(n, d), P;
  for (int i = k + 1; i < K; ++i) {
    z.swap(zn);
    Ji.swap(Jn);
    model.b(z, b);
    P.noalias() = Ji.rightCols(n) * b;
    tail.noalias() += (P * P.transpose()) * dt;
    if (i + 1 < K) {
      for (int c = 0; c < d; ++c) dw[c] = path.grid.increments(i, c);
      flow_coefficients(model, z, fw);
      euler_step(model, z, dw.data(), dt, zn, ew);
      flow_inverse_step(fw, Ji, dw.data(), dt, Jn, scratch);
    }
  }
  return tail;
}

// sum_{k,j} dM~/d dW_kj q_kj by explicit bump and rerun of every increment
Vec correction_bump(const ModelSpec& model, const PathSample& s, const std::vector<Mat>& Q,
                    double h) {
  const int N = model.dim(), d = model.d, K = s.flow.n_steps;
  FlowWork fw;
  fw.resize(model);
  EulerWork ew;
  ew.resize(model);
  Vec acc = Vec::Zero(N);
  for (int k = 0; k + 1 < K; ++k)
    for (int j = 0; j < d; ++j) {
      Mat dM = (bumped_tail(model, s.path, s.flow, k, j, h, fw, ew) -
                bumped_tail(model, s.path, s.flow, k, j, -h, fw, ew)) /
               (2.0 * h);
      acc.noalias() += dM * Q[k].col(j);
    }
  return acc;
}

// I - (A - sum B_j^2) dt - sum B_j dW_j
void inverse_factor(const FlowWork& w, const double* dw, double dt, Mat& G) {
  const Eigen::Index N = w.A.rows();
  G = Mat::Identity(N, N) - w.A * dt;
  for (std::size_t j = 0; j < w.Bj.size(); ++j) G += (w.Bj[j] * w.Bj[j]) * dt - w.Bj[j] * dw[j];
}

// Same sum via N linear tangents of (z, J^{-1}).  Writing q_kj = M~^{-1} P_k e_j, the
// coefficient P_i^T q_kj separates over the rows r of M~^{-1}, so the perturbations of all
// increments collapse into N accumulated tangents carried forward once.  Second derivatives
// of the coefficients enter only as central differences along the tangent.
Vec correction_tangent(const ModelSpec& model, const PathSample& s, const std::vector<Mat>& P,
                       const std::vector<Mat>& Q) {
  const int N = model.dim(), n = model.n, d = model.d, K = s.flow.n_steps;
  const double dt = s.flow.dt;
  const double eps3 = std::cbrt(std::numeric_limits<double>::epsilon());
  Mat Dz = Mat::Zero(N, N);  // column r: state tangent
  std::vector<Mat> DJ(N, Mat::Zero(N, N));
  FlowWork w, wp, wm;
  w.resize(model);
  wp.resize(model);
  wm.resize(model);
  Mat b(n, d), Db(n, d), dP(N, d), G, Gp, Gm, F, tmp;
  std::vector<double> dw(d);
  Vec acc = Vec::Zero(N);
  for (int i = 0; i < K; ++i) {
    const Vec z = s.path.state(i);
    const Mat& Ji = s.flow.J_inv[i];
    model.b(z, b);
    flow_coefficients(model, z, w);
    if (i > 0) {
      for (int r = 0; r < N; ++r) {
        for (int j = 0; j < d; ++j) Db.col(j) = w.Jb.middleRows(j * n, n) * Dz.col(r);
        dP.noalias() = DJ[r].rightCols(n) * b;
        dP.noalias() += Ji.rightCols(n) * Db;
        acc.noalias() += dt * (dP * P[i].row(r).transpose());
        acc.noalias() += dt * (P[i] * dP.row(r).transpose());
      }
    }
    if (i + 1 == K) break;
    for (int j = 0; j < d; ++j) dw[j] = s.path.grid.increments(i, j);
    inverse_factor(w, dw.data(), dt, G);
    F = Mat::Identity(N, N) + w.A * dt;
    for (int j = 0; j < d; ++j) F += w.Bj[j] * dw[j];
    for (int r = 0; r < N; ++r) {
      double nz = Dz.col(r).norm();
      tmp.noalias() = DJ[r] * G;
      if (nz > 0) {
        double h = eps3 * std::max(1.0, z.norm()) / nz;
        flow_coefficients(model, z + h * Dz.col(r), wp);
        flow_coefficients(model, z - h * Dz.col(r), wm);
        inverse_factor(wp, dw.data(), dt, Gp);
        inverse_factor(wm, dw.data(), dt, Gm);
        tmp.noalias() += Ji * ((Gp - Gm) / (2.0 * h));
      }
      DJ[r] = tmp;
      Vec nz_col = F * Dz.col(r);
      Dz.col(r) = nz_col;
      for (int j = 0; j < d; ++j) {
        double c = Q[i](r, j);
        Dz.col(r).tail(n) += c * b.col(j);
        DJ[r].noalias() -= c * (Ji * w.Bj[j]);
      }
    }
  }
  return acc;
}

}  // namespace

MalliavinGradientReport malliavin_gradient(const ModelSpec& model, const Vec& x0,
                                           const TestFunction& f, const std::vector<Vec>& xis,
                                           const McConfig& cfg,
                                           const MalliavinGradientOptions& opt) {
  for (const Vec& xi : xis) check_xi(model, xi);
  const bool bump = !model.linear_additive;
  if (bump && cfg.n_steps > opt.max_bump_steps)
    throw ArgumentError("malliavin_gradient: bump-rerun budget exceeded (" +
                        std::to_string(cfg.n_steps) + " steps > " +
                        std::to_string(opt.max_bump_steps) + "); use fewer steps");
  const int N = model.dim(), n = model.n, d = model.d, K = cfg.n_steps;
  const double dt = cfg.T / K;
  const double h = std::sqrt(std::numeric_limits<double>::epsilon()) * std::sqrt(dt);

  enum Status : char { kOk = 0, kExploded = 1, kFloor = 2 };
  std::vector<char> status(cfg.n_paths, kExploded);
  std::vector<double> fval(cfg.n_paths, 0.0);
  std::vector<Vec> weight(cfg.n_paths);

  parallel_for(cfg.n_paths, resolve_threads(cfg.threads), [&](int i) {
    PathSample s = simulate_sample(model, x0, cfg, i);
    if (!s.valid) return;
    const MalliavinRecord& rec = s.rec;
    double tr = rec.M.trace();
    if (!(rec.lambda_min() > opt.floor_rel * tr)) {
      status[i] = kFloor;
      return;
    }
    Eigen::LDLT<Mat> Mt(rec.M_tilde);
    Mat b(n, d);
    std::vector<Mat> P(K);
    Vec acc = Vec::Zero(N);
    for (int k = 0; k < K; ++k) {
      if (k == 0 || !model.linear_additive) model.b(s.path.state(k), b);
      P[k] = s.flow.J_inv[k].rightCols(n) * b;
      acc.noalias() += P[k] * s.path.grid.increments.row(k).transpose();
    }
    if (bump) {
      std::vector<Mat> Q(K);
      for (int k = 0; k < K; ++k) Q[k] = Mt.solve(P[k]);
      acc.noalias() += dt * (opt.bump_reference ? correction_bump(model, s, Q, h)
                                                : correction_tangent(model, s, P, Q));
    }
    weight[i] = Mt.solve(acc);
    fval[i] = f.f(s.path.state(K));
    status[i] = kOk;
  });

  MalliavinGradientReport r;
  r.bump_reruns = bump;
  long ok = 0;
  for (char st : status) {
    if (st == kOk) ++ok;
    if (st == kExploded) ++r.exploded;
    if (st == kFloor) ++r.below_floor;
  }
  long valid = ok + r.below_floor;
  if (valid == 0) throw NumericalFailure("malliavin_gradient: zero valid paths");
  if (double(r.below_floor) > opt.abort_fraction * double(valid))
    throw HypothesisViolation(
        "malliavin_gradient: smallest eigenvalue of M_T below the floor on " +
        std::to_string(r.below_floor) + " of " + std::to_string(valid) +
        " paths; the model does not look hypoelliptic at this start point");
  for (const Vec& xi : xis) {
    std::vector<double> vals;
    for (int i = 0; i < cfg.n_paths; ++i)
      if (status[i] == kOk) vals.push_back(fval[i] * weight[i].dot(xi));
    MeanStat st = mean_stat(vals);
    GradientEstimate e;
    e.xi = xi;
    e.estimator = "malliavin_weight";
    e.value = st.value;
    e.stderr_ = st.stderr_;
    e.n_paths = st.n;
    e.excluded = cfg.n_paths - st.n;
    r.estimates.push_back(e);
  }
  return r;
}

GradientEstimate malliavin_gradient(const ModelSpec& model, const Vec& x0, const TestFunction& f,
                                    const Vec& xi, const McConfig& cfg,
                                    const MalliavinGradientOptions& opt) {
  return malliavin_gradient(model, x0, f, std::vector<Vec>{xi}, cfg, opt).estimates.front();
}

BoundScan gradient_bound_scan(const ModelSpec& model, int j0, double R,
                              const std::vector<TestFunction>& family, int n_points,
                              const McConfig& cfg, const MalliavinGradientOptions& opt) {
  if (!(R > 0) || n_points < 1) throw ArgumentError("gradient_bound_scan: bad grid");
  Hierarchy h = build_hierarchy(model, j0);
  const int N = model.dim();
  std::vector<Vec> basis;
  for (int i = 0; i < N; ++i) basis.push_back(Vec::Unit(N, i));
  BoundScan scan;
  for (const Vec& p : ball_samples(Vec::Zero(N), R, n_points)) {
    bool spans = spanning_dimension(h, p).spans;
    if (!spans) ++scan.flagged_points;
    for (const TestFunction& f : family) {
      BoundRow row;
      row.point = p;
      row.f_name = f.name;
      row.spans = spans;
      if (!spans) {
        row.skipped = true;
        scan.rows.push_back(row);
        continue;
      }
      auto rep = malliavin_gradient(model, p, f, basis, cfg, opt);
      row.gradient.resize(N);
      row.stderrs.resize(N);
      for (int i = 0; i < N; ++i) {
        row.gradient[i] = rep.estimates[i].value;
        row.stderrs[i] = rep.estimates[i].stderr_;
      }
      row.norm_over_sup = f.sup_norm > 0 ? row.gradient.norm() / f.sup_norm : 0.0;
      scan.C_hat = std::max(scan.C_hat, row.norm_over_sup);
      scan.rows.push_back(row);
    }
  }
  return scan;
}

// ---------------------------------------------------------------- truncation

double smoothstep5(double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  return s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
}

namespace {
double smoothstep5_d1(double s) { return 30.0 * s * s * (1.0 - s) * (1.0 - s); }

// g(s) = 1 - smoothstep5(s) and its derivatives at s
std::vector<double> cutoff_profile(double s) {
  return {1.0 - smoothstep5(s),
          -smoothstep5_d1(s),
          -(60.0 * s - 180.0 * s * s + 120.0 * s * s * s),
          -(60.0 - 360.0 * s + 360.0 * s * s),
          -(-360.0 + 720.0 * s),
          -720.0};
}

Jet jet_sqrt(const Jet& u) {
  int K = u.space() ? u.space()->order() : 0;
  double u0 = u.value();
  std::vector<double> d(K + 1);
  double c = 1.0;
  for (int k = 0; k <= K; ++k) {
    d[k] = c * std::pow(u0, 0.5 - k);
    c *= 0.5 - k;
  }
  return u.compose(d);
}

Jet cutoff_jet(double l, const std::vector<Jet>& z) {
  double r0 = 0.0;
  for (const Jet& c : z) r0 += c.value() * c.value();
  r0 = std::sqrt(r0);
  if (r0 <= l) return Jet(1.0);
  if (r0 >= l + 1.0) return Jet(0.0);
  Jet u(0.0);
  for (const Jet& c : z) u += c * c;
  Jet s = jet_sqrt(u) - Jet(l);
  return s.compose(cutoff_profile(r0 - l));
}

// value and gradient of the cutoff; region: 0 inside, 1 shell, 2 outside
int cutoff_eval(double l, const Vec& z, double& h, Vec& grad) {
  double r = z.norm();
  grad.setZero(z.size());
  if (r <= l) {
    h = 1.0;
    return 0;
  }
  if (r >= l + 1.0) {
    h = 0.0;
    return 2;
  }
  double s = r - l;
  h = 1.0 - smoothstep5(s);
  grad = (-smoothstep5_d1(s) / r) * z;
  return 1;
}
}  // namespace

double cutoff(double l, const Vec& z) {
  double h;
  Vec g;
  cutoff_eval(l, z, h, g);
  return h;
}

ModelSpec truncate_model(const ModelSpec& model, double l) {
  if (!(l > 0)) throw ArgumentError("truncate_model: l must be positive");
  check_model(model);
  ModelSpec t = model;
  t.name = model.name + "_truncated";
  t.linear_additive = false;
  const int m = model.m, n = model.n, d = model.d, N = model.dim();

  auto scale_vec = [l](const VecField& f, int rows) {
    return VecField([f, l, rows](const Vec& z, Vec& out) {
      double h;
      Vec g;
      int region = cutoff_eval(l, z, h, g);
      if (region == 2) {
        out.setZero(rows);
        return;
      }
      f(z, out);
      if (region == 1) out *= h;
    });
  };
  t.a1 = scale_vec(model.a1, m);
  t.a2 = scale_vec(model.a2, n);
  t.b = [f = model.b, l, n, d](const Vec& z, Mat& out) {
    double h;
    Vec g;
    int region = cutoff_eval(l, z, h, g);
    if (region == 2) {
      out.setZero(n, d);
      return;
    }
    f(z, out);
    if (region == 1) out *= h;
  };
  // product rule: d(h a) = h da + a (grad h)^T
  auto jac = [l, N, &model](VecField f, int rows, bool which_a1) {
    return MatField([f, l, N, rows, which_a1, model](const Vec& z, Mat& out) {
      double h;
      Vec g;
      int region = cutoff_eval(l, z, h, g);
      if (region == 2) {
        out.setZero(rows, N);
        return;
      }
      Mat J;
      if (which_a1) {
        eval_jacobian_a1(model, z, J);
      } else {
        Mat A;
        eval_jacobian_a(model, z, A);
        J = A.bottomRows(model.n);
      }
      if (region == 0) {
        out = J;
        return;
      }
      Vec v(rows);
      f(z, v);
      out = h * J + v * g.transpose();
    });
  };
  t.jac_a1 = jac(model.a1, m, true);
  t.jac_a2 = jac(model.a2, n, false);
  t.jac_b = [model, l, n, d, N](const Vec& z, Mat& out) {
    double h;
    Vec g;
    int region = cutoff_eval(l, z, h, g);
    if (region == 2) {
      out.setZero(n * d, N);
      return;
    }
    Mat Jb;
    eval_jacobian_b(model, z, Jb);
    if (region == 0) {
      out = Jb;
      return;
    }
    Mat bm(n, d);
    model.b(z, bm);
    out = h * Jb;
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < n; ++i) out.row(j * n + i) += bm(i, j) * g.transpose();
  };
  t.hess_a1 = nullptr;
  if (model.a1_jet) {
    t.a1_jet = [f = model.a1_jet, l](const std::vector<Jet>& z, std::vector<Jet>& out) {
      Jet h = cutoff_jet(l, z);
      f(z, out);
      if (!h.space() && h.value() == 1.0) return;
      for (Jet& o : out) o = o * h;
    };
  } else {
    t.a1_jet = nullptr;
  }
  return t;
}

// ---------------------------------------------------------------- Feller probe

FellerProbe feller_probe(const ModelSpec& model, const Vec& x0, const TestFunction& f,
                         const std::vector<double>& radii, double l, const McConfig& cfg,
                         const std::vector<Vec>& directions) {
  const int N = model.dim(), K = cfg.n_steps;
  if (x0.size() != N) throw ArgumentError("feller_probe: x0 has the wrong dimension");
  if (radii.size() < 2) throw ArgumentError("feller_probe: need at least two radii");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0)) throw ArgumentError("feller_probe: radii must be positive");
    if (i && !(radii[i] < radii[i - 1]))
      throw ArgumentError("feller_probe: radii must be strictly descending");
  }
  std::vector<Vec> dirs = directions;
  if (dirs.empty())
    for (int i = 0; i < N; ++i) dirs.push_back(Vec::Unit(N, i));
  ModelSpec trunc = truncate_model(model, l);
  const int R = static_cast<int>(radii.size()), D = static_cast<int>(dirs.size());

  struct PathOut {
    bool orig_ok = false;
    bool exit = false;  // S_l < T on the original model
    double f0 = 0.0, f0t = 0.0;
    bool coincide = true;
    std::vector<double> dorig, dtrunc;  // [dir * R + r]
    bool dir_ok = true;
  };
  std::vector<PathOut> out(cfg.n_paths);
  parallel_for(cfg.n_paths, resolve_threads(cfg.threads), [&](int i) {
    PathOut& o = out[i];
    NoiseGrid g = sample_noise(model.d, cfg.T, K, cfg.seed, i);
    PathBundle p = integrate_path(model, x0, g);
    PathBundle pt = integrate_path(trunc, x0, g);
    int exit_step = K + 1;
    for (int k = 0; k <= K; ++k) {
      const Vec z = p.state(k);
      if (!all_finite(z) || z.norm() >= l) {
        exit_step = k;
        break;
      }
    }
    o.exit = exit_step <= K;
    o.orig_ok = !p.exploded;
    // coincide bitwise up to and including the last step inside the ball
    for (int k = 0; k <= std::min(exit_step, K); ++k)
      if (!(p.states.row(k) == pt.states.row(k))) {
        o.coincide = false;
        break;
      }
    o.f0t = f.f(pt.state(K));
    if (o.orig_ok) o.f0 = f.f(p.state(K));
    o.dorig.assign(D * R, 0.0);
    o.dtrunc.assign(D * R, 0.0);
    for (int e = 0; e < D; ++e)
      for (int r = 0; r < R; ++r) {
        Vec xs = x0 + radii[r] * dirs[e];
        PathBundle q = integrate_path(model, xs, g);
        PathBundle qt = integrate_path(trunc, xs, g);
        if (q.exploded || !o.orig_ok) o.dir_ok = false;
        else o.dorig[e * R + r] = f.f(q.state(K)) - o.f0;
        o.dtrunc[e * R + r] = f.f(qt.state(K)) - o.f0t;
      }
  });

  FellerProbe fp;
  fp.x0 = x0;
  fp.radii = radii;
  fp.f_name = f.name;
  fp.l = l;
  fp.f_bound = f.oscillation;
  long exploded = 0, exits = 0;
  for (const PathOut& o : out) {
    exploded += !o.orig_ok;
    exits += o.exit;
    fp.coincidence_violations += !o.coincide;
  }
  fp.explosion_rate = double(exploded) / cfg.n_paths;
  fp.flagged = fp.explosion_rate > 0.10;
  fp.model_used = fp.flagged ? "truncated" : "original";
  fp.exit_freq = double(exits) / cfg.n_paths;
  fp.exit_ci = wilson(exits, cfg.n_paths);

  // Extrapolation to r = 0: least-squares polynomial in r (quadratic from three radii on),
  // applied per path so the intercept's standard error is exact.
  const int deg = R >= 3 ? 2 : 1;
  Mat X(R, deg + 1);
  for (int r = 0; r < R; ++r)
    for (int p = 0; p <= deg; ++p) X(r, p) = std::pow(radii[r], p);
  const Vec icpt_w = X.completeOrthogonalDecomposition().pseudoInverse().row(0).transpose();
  auto build = [&](bool use_trunc, std::vector<FellerRow>& rows, std::vector<FellerDirection>* fd) {
    for (int e = 0; e < D; ++e) {
      std::vector<double> icpt;
      std::vector<std::vector<double>> per(R);
      for (const PathOut& o : out) {
        if (!use_trunc && !o.dir_ok) continue;
        const auto& dv = use_trunc ? o.dtrunc : o.dorig;
        double a = 0.0;
        for (int r = 0; r < R; ++r) {
          per[r].push_back(dv[e * R + r]);
          a += icpt_w[r] * dv[e * R + r];
        }
        icpt.push_back(a);
      }
      std::vector<double> absd;
      for (int r = 0; r < R; ++r) {
        MeanStat s = mean_stat(per[r]);
        FellerRow row;
        row.direction = e;
        row.radius = radii[r];
        row.diff = s.value;
        row.abs_diff = std::fabs(s.value);
        row.stderr_ = s.stderr_;
        rows.push_back(row);
        absd.push_back(row.abs_diff);
      }
      if (fd) {
        FellerDirection dir;
        dir.e = dirs[e];
        dir.decreasing = true;
        for (int r = 1; r < R; ++r)
          if (!(absd[r] < absd[r - 1])) dir.decreasing = false;
        MeanStat s = mean_stat(icpt);
        dir.intercept = s.value;
        dir.intercept_stderr = s.stderr_;
        fd->push_back(dir);
      }
    }
  };
  build(fp.flagged, fp.rows, &fp.directions);
  build(true, fp.rows_truncated, nullptr);

  // localization decomposition at x0
  std::vector<double> po, pt, pd;
  for (const PathOut& o : out) {
    pt.push_back(o.f0t);
    if (!o.orig_ok) {
      ++fp.excluded;
      continue;
    }
    po.push_back(o.f0);
    double diff = o.f0 - o.f0t;
    pd.push_back(diff);
    if (std::fabs(diff) > fp.f_bound * (o.exit ? 1.0 : 0.0)) ++fp.per_path_violations;
  }
  fp.n_paths = static_cast<long>(po.size());
  fp.p_original = mean_stat(po);
  fp.p_truncated = mean_stat(pt);
  fp.p_difference = mean_stat(pd);
  fp.truncation_inequality =
      std::fabs(fp.p_difference.value) <= fp.f_bound * fp.exit_freq + 3.0 * fp.p_difference.stderr_;
  return fp;
}

}  // namespace hypoflow
