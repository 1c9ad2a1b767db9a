// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include "hypoflow/flow.hpp"
#include "hypoflow/gradient.hpp"
#include "hypoflow/hierarchy.hpp"
#include "hypoflow/malliavin.hpp"
#include "hypoflow/report.hpp"
#include "hypoflow/zoo.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace hypoflow;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [fail: " << what << "]";
    }
  }
};

McConfig mc(int steps, int paths, std::uint64_t seed = 1, double T = 1.0) {
  McConfig c;
  c.T = T;
  c.n_steps = steps;
  c.n_paths = paths;
  c.seed = seed;
  c.threads = 0;
  return c;
}

bool within(const GradientEstimate& a, const GradientEstimate& b, double k) {
  double se = std::sqrt(a.stderr_ * a.stderr_ + b.stderr_ * b.stderr_);
  return std::fabs(a.value - b.value) <= k * se;
}

// ---------------------------------------------------------------- AC1
void ac1(Outcome& o) {
  const int paths = 5;
  for (const auto& name : zoo_names()) {
    ZooEntry e = make_zoo(name);
    double dev = 0.0, fine = 0.0, worst = 0.0;
    for (int i = 0; i < paths; ++i) {
      NoiseGrid half = sample_noise(e.spec.d, 1.0, 2000, 1, i);
      NoiseGrid g = coarsen(half);
      auto run = [&](const NoiseGrid& n) {
        PathBundle p = integrate_path(e.spec, e.expected.default_x0, n);
        return flow_deviation_report(integrate_flow(e.spec, p)).back();
      };
      double a = run(g), b = run(half);
      worst = std::max(worst, a);
      dev += a;
      fine += b;
    }
    o.require(worst <= 1e-2, name + " deviation");
    if (dev == 0.0 && fine == 0.0) {
      // nilpotent linear flow: (I + A dt)(I - A dt) = I, nothing to halve
      o.detail << " " << name << ":0 (exact, ratio vacuous)";
      continue;
    }
    double ratio = dev / fine;
    o.detail << " " << name << ":" << worst << "/x" << ratio;
    o.require(ratio >= 1.5 && ratio <= 3.0, name + " halving ratio");
  }
}

// ---------------------------------------------------------------- AC2
void ac2(Outcome& o) {
  ZooEntry e = make_zoo("integrated_bm");
  PathSample s = simulate_sample(e.spec, Vec::Zero(2), mc(1000, 1), 0);
  Mat M(2, 2);
  M << 1.0 / 3, 0.5, 0.5, 1.0;
  double worst = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) worst = std::max(worst, std::fabs(s.rec.M(i, j) / M(i, j) - 1.0));
  double det_err = std::fabs(s.rec.det_M * 12.0 - 1.0);
  o.detail << " max rel entry err " << worst << ", det " << s.rec.det_M << " (rel err " << det_err << ")";
  o.require(worst <= 0.01, "entries");
  o.require(det_err <= 0.02, "determinant");
}

// ---------------------------------------------------------------- AC3
void ac3(Outcome& o) {
  ZooEntry e = make_zoo("example_2_3");
  Hierarchy h = build_hierarchy(e.spec, 3);
  SpanOptions so;
  so.rel_tol = 1e-8;
  std::mt19937_64 g(2023);
  std::uniform_real_distribution<double> u(-5, 5);
  int ok = 0;
  for (int i = 0; i < 10; ++i) {
    Vec p(4);
    for (int k = 0; k < 4; ++k) p[k] = u(g);
    ok += spanning_dimension(h, p, so).numerical_rank == 3;
  }
  auto v = h.evaluate(Vec::Zero(4));
  Vec a(3), b(3), c(3);
  a << 1, 0, 0;
  b << 0, -1, 0;
  c << 1, 0, 1;
  bool exact = v[0][0] == a && v[1][1] == b && v[2][3] == c;
  o.detail << " rank 3 at " << ok << "/10 points, printed vectors " << (exact ? "exact" : "differ");
  o.require(ok == 10, "rank");
  o.require(exact, "vectors");
}

// ---------------------------------------------------------------- AC4
void ac4(Outcome& o) {
  ZooEntry e = make_zoo("example_2_5");
  const int P = 100;
  std::vector<double> lmin(P), ymin(P);
  std::vector<char> ok(P, 0);
  McConfig c = mc(10000, P);
  parallel_for(P, resolve_threads(0), [&](int i) {
    PathSample s = simulate_sample(e.spec, e.expected.default_x0, c, i);
    if (!s.valid) return;
    ok[i] = 1;
    lmin[i] = s.rec.lambda_min();
    Eigen::SelfAdjointEigenSolver<Mat> es(s.rec.M.bottomRightCorner(e.spec.n, e.spec.n));
    ymin[i] = es.eigenvalues()[0];
  });
  int small = 0, ymarg = 0;
  double lmax = 0.0, ylow = 1e300;
  for (int i = 0; i < P; ++i) {
    if (!ok[i]) continue;
    small += lmin[i] <= 1e-6;
    ymarg += ymin[i] >= 1e-2;
    lmax = std::max(lmax, lmin[i]);
    ylow = std::min(ylow, ymin[i]);
  }
  Json cfg = {{"probe", "check"}, {"model", "example_2_5"}, {"threads", 1}};
  ReportEnvelope env = run(parse_config(cfg));
  bool singular = env.payload["bbT_singular"].get<bool>();
  o.detail << " lambda_min<=1e-6 on " << small << "/" << P << " (max " << lmax << "), Y-marginal >=1e-2 on "
           << ymarg << "/" << P << " (min " << ylow << "), bbT singular " << (singular ? "yes" : "no");
  o.require(small == P, "lambda_min");
  o.require(ymarg == P, "Y marginal");
  o.require(singular, "bbT");
}

// ---------------------------------------------------------------- AC5
void ac5(Outcome& o) {
  ZooEntry e3 = make_zoo("example_2_3");
  McConfig c = mc(1000, 10000);
  MomentReport m = inverse_moment_probe(e3.spec, e3.expected.default_x0, {1.0, 2.0}, {1000, 10000}, c);
  for (std::size_t i = 0; i < m.p_values.size(); ++i) {
    o.detail << " 2.3 p=" << m.p_values[i] << " ratio " << m.stability_ratio[i];
    o.require(m.stability_ratio[i] >= 0.5 && m.stability_ratio[i] <= 2.0, "2.3 moment ratio");
  }
  TailReport t = tail_probe(e3.spec, e3.expected.default_x0, {1e-2, 1e-3, 1e-4}, 64, mc(1000, 10000));
  bool strict = t.raw[0] > t.raw[1] && t.raw[1] > t.raw[2];
  o.detail << "; tail (" << t.raw[0] << "," << t.raw[1] << "," << t.raw[2] << ") slope " << t.slope
           << " lambda_min range [" << t.lambda_min_min << "," << t.lambda_min_max << "]";
  o.require(strict, "2.3 tail strictly decreasing");
  o.require(t.slope_points >= 2 && t.slope >= 1.0, "2.3 tail slope");
  ZooEntry e5 = make_zoo("example_2_5");
  MomentReport m5 = inverse_moment_probe(e5.spec, e5.expected.default_x0, {1.0}, {1000, 10000}, c);
  o.detail << "; 2.5 p=1 ratio " << m5.stability_ratio[0] << " (min log det " << m5.min_log_det
           << ", numerically singular " << m5.numerically_singular.back() << "/10000, nonpositive "
           << m5.excluded_nonpositive.back() << ")";
  o.require(m5.stability_ratio[0] > 10.0, "2.5 divergence");
}

// ---------------------------------------------------------------- AC6
void ac6(Outcome& o) {
  ZooEntry ib = make_zoo("integrated_bm");
  Vec xi(2);
  xi << 1, 0;
  TestFunction ind = make_test_function("indicator-halfspace", 2, {{"coord", 0}, {"threshold", 0}});
  McConfig c = mc(400, 10000);
  GradientEstimate mw = malliavin_gradient(ib.spec, Vec::Zero(2), ind, xi, c);
  GradientEstimate fd = fd_gradient(ib.spec, Vec::Zero(2), ind, xi, 0.1, c);
  o.detail << " indicator: weight " << mw.value << "+-" << mw.stderr_ << " fd " << fd.value << "+-" << fd.stderr_;
  o.require(within(mw, fd, 3.0), "indicator vs fd");
  for (const auto& name : zoo_names()) {
    ZooEntry e = make_zoo(name);
    if (!e.expected.noise_nondegenerate) {
      o.detail << "; " << name << " skipped (b b^T singular)";
      continue;
    }
    const int N = e.spec.dim();
    Vec x = Vec::Unit(N, 0);
    McConfig cs = mc(100, 10000);
    TestFunction s = make_test_function("sin-k", N);
    GradientEstimate a = malliavin_gradient(e.spec, e.expected.default_x0, s, x, cs);
    GradientEstimate b = pathwise_gradient(e.spec, e.expected.default_x0, s, x, cs);
    double zab = (a.value - b.value) / std::sqrt(a.stderr_ * a.stderr_ + b.stderr_ * b.stderr_);
    TestFunction one = make_test_function("constant", N, {{"value", 1}});
    GradientEstimate d = malliavin_gradient(e.spec, e.expected.default_x0, one, x, mc(100, 4000));
    double zd = d.value / d.stderr_;
    o.detail << "; " << name << " z=" << zab << " delta z=" << zd;
    o.require(std::fabs(zab) <= 3.0, name + " weight vs pathwise");
    o.require(std::fabs(zd) <= 3.0, name + " mean weight");
  }
}

// ---------------------------------------------------------------- AC7
void ac7(Outcome& o) {
  ZooEntry e = make_zoo("langevin");
  TestFunction ind = make_test_function("indicator-halfspace", 2, {{"coord", 0}, {"threshold", 0}});
  FellerProbe fp = feller_probe(e.spec, e.expected.default_x0, ind, {0.5, 0.25, 0.1, 0.05}, 2.5,
                                mc(1000, 10000));
  for (std::size_t k = 0; k < fp.directions.size(); ++k) {
    const FellerDirection& d = fp.directions[k];
    o.detail << " e" << k + 1 << ": |diff|";
    for (const FellerRow& r : fp.rows)
      if (r.direction == static_cast<int>(k)) o.detail << " " << r.abs_diff;
    o.detail << " limit " << d.intercept << "+-" << d.intercept_stderr << ";";
    o.require(d.decreasing, "monotone");
    o.require(std::fabs(d.intercept) <= 2.0 * d.intercept_stderr, "limit");
  }
  o.detail << " |P-P_l|=" << std::fabs(fp.p_difference.value) << " exit " << fp.exit_freq
           << " per-path violations " << fp.per_path_violations;
  o.require(fp.truncation_inequality, "truncation inequality");
  o.require(fp.per_path_violations == 0, "per-path counting");
  o.require(fp.coincidence_violations == 0, "coincidence");
}

// ---------------------------------------------------------------- AC8
void ac8(Outcome& o) {
  struct Case {
    const char* probe;
    const char* model;
    Json params;
  };
  std::vector<Case> cases = {
      {"simulate", "hamiltonian_quartic", Json::object()},
      {"malliavin", "langevin_double_well", Json::object()},
      {"tail", "example_2_4", Json::object()},
      {"moments", "high_order", {{"schedule", {20, 200}}}},
      {"gradient", "langevin_double_well", {{"f", "sin-k"}}},
      {"feller", "langevin", {{"f", "indicator-halfspace"}, {"radii", {0.5, 0.1}}, {"l", 3.0}}},
  };
  int same = 0;
  for (const Case& c : cases) {
    Json j = {{"probe", c.probe}, {"model", c.model}, {"dt", 0.01}, {"n_paths", 200}, {"seed", 9},
              {"params", c.params}};
    std::string ref;
    bool eq = true;
    for (int th : {1, 2, 4, 7}) {
      j["threads"] = th;
      std::string s = run(parse_config(j)).payload.dump();
      if (ref.empty())
        ref = s;
      else
        eq = eq && s == ref;
    }
    // a second identical run
    j["threads"] = 1;
    eq = eq && run(parse_config(j)).payload.dump() == ref;
    same += eq;
    o.require(eq, std::string(c.probe) + " payload");
  }
  o.detail << " " << same << "/" << cases.size() << " probes byte-identical over threads {1,2,4,7} and a rerun";
}

}  // namespace

int main() {
  struct Crit {
    const char* id;
    void (*fn)(Outcome&);
  };
  const Crit crits[] = {{"AC1", ac1}, {"AC2", ac2}, {"AC3", ac3}, {"AC4", ac4},
                        {"AC5", ac5}, {"AC6", ac6}, {"AC7", ac7}, {"AC8", ac8}};
  int failed = 0;
  for (const Crit& c : crits) {
    Outcome o;
    auto t0 = std::chrono::steady_clock::now();
    try {
      c.fn(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::printf("%s %s (%.1f s)%s\n", c.id, o.pass ? "PASS" : "FAIL", sec, o.detail.str().c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
