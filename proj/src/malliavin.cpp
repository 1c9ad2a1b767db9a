#include "hypoflow/malliavin.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hypoflow {

double LogDet::value() const { return sign * std::exp(log_abs); }

LogDet log_det_ldlt(const Mat& M) {
  LogDet r;
  Eigen::LDLT<Mat> ldlt(M);
  Vec D = ldlt.vectorD();
  for (Eigen::Index i = 0; i < D.size(); ++i) {
    double p = D[i];
    if (!(p > 0.0)) {
      ++r.nonpositive_pivots;
      if (p < 0.0) r.sign = -r.sign;
      if (p == 0.0) r.sign = 0;
    }
    r.log_abs += std::log(std::fabs(p));
  }
  return r;
}

LogDet log_det_gram(const Mat& G) {
  LogDet r;
  const Eigen::Index N = G.rows();
  if (G.cols() < N) {
    r.sign = 0;
    r.nonpositive_pivots = static_cast<int>(N - G.cols());
    r.log_abs = -std::numeric_limits<double>::infinity();
    return r;
  }
  Eigen::HouseholderQR<Mat> qr(G.transpose());
  const Mat& R = qr.matrixQR();
  for (Eigen::Index i = 0; i < N; ++i) {
    double p = std::fabs(R(i, i));
    if (!(p > 0.0)) {
      ++r.nonpositive_pivots;
      r.sign = 0;
    }
    r.log_abs += 2.0 * std::log(p);
  }
  return r;
}

MalliavinRecord malliavin_matrix(const ModelSpec& model, const PathBundle& path,
                                 const FlowRecord& flow) {
  if (path.exploded || flow.exploded)
    throw ArgumentError("malliavin_matrix: path or flow exploded");
  if (flow.n_steps != path.grid.n_steps || static_cast<int>(flow.J_inv.size()) != flow.n_steps + 1 ||
      flow.dt != path.grid.dt())
    throw ArgumentError("malliavin_matrix: path and flow are on different grids");
  if (path.states.cols() != model.dim() || flow.m != model.m || flow.n != model.n)
    throw ArgumentError("malliavin_matrix: dimensions do not match the model");
  const int N = model.dim(), n = model.n, K = flow.n_steps;
  const double dt = flow.dt;
  MalliavinRecord r;
  r.M = Mat::Zero(N, N);
  r.M_tilde = Mat::Zero(N, N);
  const Mat& JT = flow.J.back();
  const int d = model.d;
  Mat b(n, d), P, Q;
  // Gram factors: M = G G^T, M~ = Gt Gt^T, columns sqrt(dt) Q_k and sqrt(dt) P_k
  Mat G(N, static_cast<Eigen::Index>(K) * d), Gt(N, static_cast<Eigen::Index>(K) * d);
  const double sdt = std::sqrt(dt);
  for (int k = 0; k < K; ++k) {
    if (k == 0 || !model.linear_additive) model.b(path.state(k), b);
    P.noalias() = flow.J_inv[k].rightCols(n) * b;
    r.M_tilde.noalias() += (P * P.transpose()) * dt;
    Q.noalias() = JT * P;
    r.M.noalias() += (Q * Q.transpose()) * dt;
    G.middleCols(static_cast<Eigen::Index>(k) * d, d) = Q * sdt;
    Gt.middleCols(static_cast<Eigen::Index>(k) * d, d) = P * sdt;
  }
  double nM = r.M.norm();
  Mat recon = JT * r.M_tilde * JT.transpose();
  r.factorization_residual = nM > 0 ? (r.M - recon).norm() / nM : (r.M - recon).norm();
  r.symmetry_error = nM > 0 ? (r.M - r.M.transpose()).norm() / nM : 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(r.M, Eigen::EigenvaluesOnly);
  r.eigenvalues = es.eigenvalues();
  Eigen::SelfAdjointEigenSolver<Mat> est(r.M_tilde, Eigen::EigenvaluesOnly);
  r.eigenvalues_tilde = est.eigenvalues();
  r.ldlt_nonpositive_pivots = log_det_ldlt(r.M).nonpositive_pivots;
  r.logdet_M = log_det_gram(G);
  r.det_M = r.logdet_M.value();
  r.logdet_M_tilde = log_det_gram(Gt);
  r.det_M_tilde = r.logdet_M_tilde.value();
  return r;
}

PathSample simulate_sample(const ModelSpec& model, const Vec& x0, const McConfig& cfg,
                           long path_index) {
  PathSample s;
  NoiseGrid g = sample_noise(model.d, cfg.T, cfg.n_steps, cfg.seed, path_index);
  s.path = integrate_path(model, x0, g);
  if (s.path.exploded) return s;
  s.flow = integrate_flow(model, s.path);
  if (s.flow.exploded) return s;
  s.rec = malliavin_matrix(model, s.path, s.flow);
  s.valid = true;
  return s;
}

std::vector<Vec> sample_directions(int N, int count) {
  std::vector<Vec> dirs;
  if (N < 1 || count < 1) return dirs;
  if (N == 1) {
    dirs.push_back(Vec::Ones(1));
    return dirs;
  }
  if (N == 2) {
    for (int i = 0; i < count; ++i) {
      double th = M_PI * i / count;
      Vec v(2);
      v << std::cos(th), std::sin(th);
      dirs.push_back(v);
    }
    return dirs;
  }
  if (N == 3) {
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
      double y = 1.0 - 2.0 * (i + 0.5) / count;
      double r = std::sqrt(std::max(0.0, 1.0 - y * y));
      double ph = golden * i;
      Vec v(3);
      v << r * std::cos(ph), y, r * std::sin(ph);
      dirs.push_back(v);
    }
    return dirs;
  }
  boost::math::normal_distribution<double> nd;
  for (int i = 0; i < count; ++i) {
    Vec v(N);
    for (int k = 0; k < N; ++k) v[k] = boost::math::quantile(nd, halton(i + 1, nth_prime(k)));
    dirs.push_back(v.normalized());
  }
  return dirs;
}

TailReport tail_probe(const ModelSpec& model, const Vec& x0, const std::vector<double>& eps_grid,
                      int n_directions, const McConfig& cfg) {
  if (eps_grid.empty()) throw ArgumentError("tail_probe: empty eps grid");
  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    if (!(eps_grid[i] > 0)) throw ArgumentError("tail_probe: eps values must be positive");
    if (i && !(eps_grid[i] < eps_grid[i - 1]))
      throw ArgumentError("tail_probe: eps grid must be strictly descending");
  }
  if (n_directions < 32) throw ArgumentError("tail_probe: need at least 32 directions");
  const int N = model.dim();
  auto dirs = sample_directions(N, n_directions);
  std::vector<double> lmin(cfg.n_paths), smin(cfg.n_paths);
  std::vector<char> ok(cfg.n_paths, 0);
  parallel_for(cfg.n_paths, resolve_threads(cfg.threads), [&](int i) {
    PathSample s = simulate_sample(model, x0, cfg, i);
    if (!s.valid) return;
    ok[i] = 1;
    lmin[i] = s.rec.eigenvalues_tilde[0];
    double best = std::numeric_limits<double>::infinity();
    for (const Vec& v : dirs) best = std::min(best, v.dot(s.rec.M_tilde * v));
    smin[i] = best;
  });
  TailReport r;
  r.eps_grid = eps_grid;
  r.directions_sampled = static_cast<int>(dirs.size());
  std::vector<double> valid_l;
  for (int i = 0; i < cfg.n_paths; ++i) {
    if (ok[i])
      valid_l.push_back(lmin[i]);
    else
      ++r.excluded;
  }
  r.n_paths = static_cast<long>(valid_l.size());
  if (r.n_paths == 0) throw NumericalFailure("tail_probe: zero valid paths");
  for (double e : eps_grid) {
    long c = 0, cs = 0;
    for (int i = 0; i < cfg.n_paths; ++i) {
      if (!ok[i]) continue;
      if (lmin[i] <= e) ++c;
      if (smin[i] <= e) ++cs;
    }
    r.counts.push_back(c);
    r.raw.push_back(double(c) / r.n_paths);
    r.sampled.push_back(double(cs) / r.n_paths);
    r.wilson.push_back(wilson(c, r.n_paths));
  }
  r.isotonic = isotonic_nonincreasing(r.raw);
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < eps_grid.size(); ++i)
    if (r.raw[i] > 0) {
      lx.push_back(std::log(eps_grid[i]));
      ly.push_back(std::log(r.raw[i]));
    }
  r.slope_points = static_cast<int>(lx.size());
  r.slope = lx.size() >= 2 ? least_squares_line(lx, ly).slope
                           : std::numeric_limits<double>::quiet_NaN();
  std::sort(valid_l.begin(), valid_l.end());
  r.lambda_min_min = valid_l.front();
  r.lambda_min_max = valid_l.back();
  r.lambda_min_median = valid_l[valid_l.size() / 2];
  r.note =
      "exact smallest-eigenvalue estimator is authoritative; the slope is fitted over positive "
      "estimates only and any slope floor is an acceptance proxy, not a predicted rate";
  return r;
}

MomentReport inverse_moment_probe(const ModelSpec& model, const Vec& x0,
                                  const std::vector<double>& p_values,
                                  const std::vector<int>& schedule, const McConfig& cfg) {
  if (p_values.empty() || schedule.empty()) throw ArgumentError("inverse_moment_probe: empty input");
  for (double p : p_values)
    if (!(p > 0)) throw ArgumentError("inverse_moment_probe: p must be positive");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (schedule[i] < 1) throw ArgumentError("inverse_moment_probe: schedule entries must be >= 1");
    if (i && schedule[i] <= schedule[i - 1])
      throw ArgumentError("inverse_moment_probe: schedule must be increasing");
  }
  const int total = schedule.back();
  std::vector<LogDet> ld(total);
  std::vector<char> ok(total, 0), singular(total, 0);
  parallel_for(total, resolve_threads(cfg.threads), [&](int i) {
    PathSample s = simulate_sample(model, x0, cfg, i);
    if (!s.valid) return;
    ok[i] = 1;
    ld[i] = s.rec.logdet_M;
    const Vec& ev = s.rec.eigenvalues;
    singular[i] = ev[0] <= 1e-12 * std::fabs(ev[ev.size() - 1]);
  });
  MomentReport r;
  r.p_values = p_values;
  r.schedule = schedule;
  r.estimates.assign(p_values.size(), {});
  r.min_log_det = std::numeric_limits<double>::infinity();
  for (int i = 0; i < total; ++i)
    if (ok[i] && ld[i].nonpositive_pivots == 0) r.min_log_det = std::min(r.min_log_det, ld[i].log_abs);
  for (int s : schedule) {
    long nonpos = 0, expl = 0, sing = 0;
    for (int i = 0; i < s; ++i) {
      if (!ok[i])
        ++expl;
      else if (ld[i].nonpositive_pivots > 0)
        ++nonpos;
      if (ok[i] && singular[i]) ++sing;
    }
    r.excluded_nonpositive.push_back(nonpos);
    r.numerically_singular.push_back(sing);
    r.excluded_exploded.push_back(expl);
    for (std::size_t pi = 0; pi < p_values.size(); ++pi) {
      std::vector<double> vals;
      for (int i = 0; i < s; ++i)
        if (ok[i] && ld[i].nonpositive_pivots == 0)
          vals.push_back(std::exp(-p_values[pi] * ld[i].log_abs));
      r.estimates[pi].push_back(mean_stat(vals));
    }
  }
  for (std::size_t pi = 0; pi < p_values.size(); ++pi)
    r.stability_ratio.push_back(r.estimates[pi].back().value / r.estimates[pi].front().value);
  return r;
}

namespace {
NorrisReport::Freq make_freq(long c, long n) {
  NorrisReport::Freq f;
  f.count = c;
  f.freq = n ? double(c) / n : 0.0;
  f.ci = wilson(c, n);
  return f;
}

bool below(double value, double log_thr) {
  if (value <= 0.0) return true;
  return std::log(value) <= log_thr;
}
}  // namespace

NorrisReport norris_event_probe(const ModelSpec& model, const Vec& x0, const NorrisOptions& opt,
                                const McConfig& cfg) {
  if (!(opt.q > 8.0)) throw ArgumentError("norris_event_probe: q must exceed 8");
  if (!(opt.eps > 0.0 && opt.eps < 1.0)) throw ArgumentError("norris_event_probe: eps must be in (0,1)");
  if (opt.j0 < 1) throw ArgumentError("norris_event_probe: j0 must be >= 1");
  if (!(opt.constants.R1 > 0.0))
    throw ArgumentError(
        "norris_event_probe: local constants missing (R1 <= 0); compute them with "
        "local_constants(model, hierarchy, R) first");
  {
    Mat b(model.n, model.d);
    model.b(x0, b);
    if (b.norm() == 0.0 || lambda_min_bbT(model, x0) <= 0.0)
      throw HypothesisViolation("norris_event_probe: b b^T is degenerate at the start point");
  }
  if (opt.v.size() && opt.v.size() != model.dim())
    throw ArgumentError("norris_event_probe: v has the wrong dimension");
  Hierarchy h = build_hierarchy(model, opt.j0);
  const int m = model.m, N = model.dim(), j0 = opt.j0;
  const double logeps = std::log(opt.eps);

  NorrisReport r;
  r.log_threshold_F = std::pow(opt.q, 3.0 * j0 + 6.0) * logeps;
  for (int j = 1; j <= j0; ++j) r.log_threshold_E.push_back(std::pow(opt.q, 3.0 * j0 + 3.0 - 3.0 * j) * logeps);

  struct PathOut {
    bool ok = false;
    bool F = false;
    std::vector<char> E;
    int tau = 0, S = 0, tau_prime = 0;
  };
  std::vector<PathOut> out(cfg.n_paths);
  parallel_for(cfg.n_paths, resolve_threads(cfg.threads), [&](int i) {
    PathSample s = simulate_sample(model, x0, cfg, i);
    if (!s.valid) return;
    PathOut& o = out[i];
    o.ok = true;
    const int K = s.flow.n_steps;
    Vec v = opt.v;
    if (v.size() == 0) {
      Eigen::SelfAdjointEigenSolver<Mat> es(s.rec.M_tilde);
      v = es.eigenvectors().col(0);
    }
    v.normalize();
    double fval = v.dot(s.rec.M_tilde * v);
    o.F = below(fval, r.log_threshold_F);
    int S = K;
    const Mat I = Mat::Identity(N, N);
    for (int k = 0; k <= K; ++k) {
      if ((s.path.state(k) - x0).norm() >= opt.constants.R1 || (s.flow.J_inv[k] - I).norm() >= opt.R2) {
        S = k;
        break;
      }
    }
    EllipticityTrace et =
        ellipticity_along_path(model, s.path, opt.use_constants_R3 ? opt.constants.R3 : -1.0);
    o.S = S;
    o.tau_prime = et.tau_prime_step;
    o.tau = std::min({o.tau_prime, S, K});
    std::vector<double> ej(j0, 0.0);
    for (int k = 0; k < o.tau; ++k) {
      Vec z = s.path.state(k);
      auto fields = h.evaluate(z);
      Vec row = (v.transpose() * s.flow.J_inv[k]).transpose().head(m);
      for (int j = 0; j < j0; ++j)
        for (const Vec& f : fields[j]) {
          double t = row.dot(f);
          ej[j] += t * t * s.flow.dt;
        }
    }
    o.E.resize(j0);
    for (int j = 0; j < j0; ++j) o.E[j] = below(ej[j], r.log_threshold_E[j]);
  });

  long n = 0, cF = 0, cE = 0, cFE1c = 0, tb = 0, sb = 0, tpb = 0;
  std::vector<long> cEj(j0, 0), cFEjEj1c(std::max(0, j0 - 1), 0);
  std::vector<double> taus;
  const int K = cfg.n_steps;
  for (const PathOut& o : out) {
    if (!o.ok) {
      ++r.excluded;
      continue;
    }
    ++n;
    bool allE = o.F;
    for (int j = 0; j < j0; ++j) {
      if (o.E[j]) ++cEj[j];
      allE = allE && o.E[j];
    }
    cF += o.F;
    cE += allE;
    bool fe1c = o.F && !o.E[0];
    cFE1c += fe1c;
    bool cover = fe1c || allE;
    for (int j = 0; j + 1 < j0; ++j) {
      bool t = o.F && o.E[j] && !o.E[j + 1];
      cFEjEj1c[j] += t;
      cover = cover || t;
    }
    if (o.F && !cover) ++r.counting_identity_violations;
    if (o.tau > o.tau_prime || o.tau > o.S || o.tau > K) ++r.tau_order_violations;
    taus.push_back(o.tau * cfg.T / K);
    tb += o.tau < K;
    sb += o.S < K;
    tpb += o.tau_prime < K;
  }
  r.n_paths = n;
  if (n == 0) throw NumericalFailure("norris_event_probe: zero valid paths");
  r.F = make_freq(cF, n);
  r.E = make_freq(cE, n);
  for (long c : cEj) r.E_j.push_back(make_freq(c, n));
  r.F_and_not_E1 = make_freq(cFE1c, n);
  for (long c : cFEjEj1c) r.F_and_Ej_not_Ej1.push_back(make_freq(c, n));
  r.mean_tau = mean_stat(taus).value;
  r.tau_before_T = make_freq(tb, n);
  r.S_before_T = make_freq(sb, n);
  r.tau_prime_before_T = make_freq(tpb, n);
  return r;
}

DensityReport density_histogram(const ModelSpec& model, const Vec& x0, int bins,
                                const McConfig& cfg, bool regularity_asserted) {
  if (bins < 1) throw ArgumentError("density_histogram: bins must be >= 1");
  const int N = model.dim();
  double total_bins = std::pow(double(bins), N);
  if (total_bins > 5e7) throw ArgumentError("density_histogram: too many bins");
  std::vector<Vec> xs(cfg.n_paths);
  std::vector<char> ok(cfg.n_paths, 0);
  parallel_for(cfg.n_paths, resolve_threads(cfg.threads), [&](int i) {
    NoiseGrid g = sample_noise(model.d, cfg.T, cfg.n_steps, cfg.seed, i);
    PathBundle p = integrate_path(model, x0, g);
    if (p.exploded) return;
    xs[i] = p.state(cfg.n_steps);
    ok[i] = 1;
  });
  DensityReport r;
  r.bins = bins;
  r.dims = N;
  if (!regularity_asserted)
    r.warnings.push_back("coefficient regularity not asserted; boundedness probe is indicative only");
  r.lo.assign(N, std::numeric_limits<double>::infinity());
  r.hi.assign(N, -std::numeric_limits<double>::infinity());
  for (int i = 0; i < cfg.n_paths; ++i) {
    if (!ok[i]) {
      ++r.excluded;
      continue;
    }
    ++r.n_paths;
    for (int k = 0; k < N; ++k) {
      r.lo[k] = std::min(r.lo[k], xs[i][k]);
      r.hi[k] = std::max(r.hi[k], xs[i][k]);
    }
  }
  if (r.n_paths == 0) throw NumericalFailure("density_histogram: zero valid paths");
  double vol = 1.0;
  for (int k = 0; k < N; ++k) {
    if (!(r.hi[k] > r.lo[k])) {
      r.lo[k] -= 0.5;
      r.hi[k] += 0.5;
    }
    r.width.push_back((r.hi[k] - r.lo[k]) / bins);
    vol *= r.width[k];
  }
  const long nb = static_cast<long>(total_bins);
  std::vector<long> counts(nb, 0);
  for (int i = 0; i < cfg.n_paths; ++i) {
    if (!ok[i]) continue;
    long idx = 0, stride = 1;
    for (int k = 0; k < N; ++k) {
      long b = static_cast<long>(std::floor((xs[i][k] - r.lo[k]) / r.width[k]));
      b = std::clamp(b, 0L, long(bins - 1));
      idx += b * stride;
      stride *= bins;
    }
    ++counts[idx];
  }
  r.density.resize(nb);
  std::vector<double> mass(nb);
  for (long i = 0; i < nb; ++i) {
    r.density[i] = double(counts[i]) / (double(r.n_paths) * vol);
    mass[i] = double(counts[i]) / double(r.n_paths);
    r.max_density = std::max(r.max_density, r.density[i]);
  }
  r.total_mass = pairwise_sum(mass);
  double jump = 0.0;
  long stride = 1;
  for (int k = 0; k < N; ++k) {
    for (long i = 0; i < nb; ++i) {
      long coord = (i / stride) % bins;
      if (coord + 1 < bins) jump = std::max(jump, std::fabs(r.density[i] - r.density[i + stride]));
    }
    stride *= bins;
  }
  r.smoothness = r.max_density > 0 ? jump / r.max_density : 0.0;
  r.expected_per_bin = double(r.n_paths) / total_bins;
  r.sparse = r.expected_per_bin < 5.0;
  if (r.sparse)
    r.warnings.push_back("bins too fine for the sample size: expected count per bin below 5");
  return r;
}

}  // namespace hypoflow
