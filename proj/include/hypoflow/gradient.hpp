#pragma once

#include "hypoflow/hierarchy.hpp"
#include "hypoflow/malliavin.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace hypoflow {

struct TestFunction {
  std::string name;
  std::function<double(const Vec&)> f;
  std::function<void(const Vec&, Vec&)> grad;  // empty for non-smooth f
  double sup_norm = 1.0;
  double oscillation = 1.0;  // sup f - inf f
};

// Catalog: "indicator-halfspace" (coord, threshold), "sin-k" (coord, k), "constant" (value),
// "box-indicator" (half_width, centered at the origin), "linear" (coord; unbounded, smooth).
TestFunction make_test_function(const std::string& name, int N,
                                const std::map<std::string, double>& params = {});
std::vector<std::string> test_function_names();

struct GradientEstimate {
  Vec xi;
  double value = 0.0;
  double stderr_ = 0.0;
  long n_paths = 0;   // retained
  long excluded = 0;  // exploded or below the eigenvalue floor
  std::string estimator;  // malliavin_weight | pathwise | finite_difference
};

// mean of grad f(X_T) . J_T xi
GradientEstimate pathwise_gradient(const ModelSpec& model, const Vec& x0, const TestFunction& f,
                                   const Vec& xi, const McConfig& cfg);

// Coupled-noise central difference (f(X^{x0+h xi}) - f(X^{x0-h xi})) / 2h.
GradientEstimate fd_gradient(const ModelSpec& model, const Vec& x0, const TestFunction& f,
                             const Vec& xi, double h, const McConfig& cfg);

struct MalliavinGradientOptions {
  double floor_rel = 1e-10;     // retain paths with lambda_min(M_T) > floor_rel * trace(M_T)
  double abort_fraction = 0.5;  // abort when more than this share falls below the floor
  int max_bump_steps = 400;     // cap on steps when bump reruns are needed
  // Rerun the tail once per perturbed increment (O(n_steps^2) per path) instead of the
  // accumulated tangents; kept as a cross-check.
  bool bump_reference = false;
};

struct MalliavinGradientReport {
  std::vector<GradientEstimate> estimates;  // one per xi
  long below_floor = 0;
  long exploded = 0;
  bool bump_reruns = false;  // false when the model's Jacobians are state independent
};

// Integration-by-parts weight on the Euler chain:
// u_k = P_k^T M~^{-1} xi,  P_k = J_k^{-1} (0; b_k),
// delta(u) = sum_k u_k . dW_k - dt sum_{k,j} d u_{kj} / d dW_{kj}.
MalliavinGradientReport malliavin_gradient(const ModelSpec& model, const Vec& x0,
                                           const TestFunction& f, const std::vector<Vec>& xis,
                                           const McConfig& cfg,
                                           const MalliavinGradientOptions& opt = {});
GradientEstimate malliavin_gradient(const ModelSpec& model, const Vec& x0, const TestFunction& f,
                                    const Vec& xi, const McConfig& cfg,
                                    const MalliavinGradientOptions& opt = {});

struct BoundRow {
  Vec point;
  std::string f_name;
  Vec gradient;  // components along the canonical basis
  Vec stderrs;
  double norm_over_sup = 0.0;
  bool spans = true;
  bool skipped = false;
};

struct BoundScan {
  std::vector<BoundRow> rows;
  double C_hat = 0.0;  // max over spanning points
  int flagged_points = 0;
};

BoundScan gradient_bound_scan(const ModelSpec& model, int j0, double R,
                              const std::vector<TestFunction>& family, int n_points,
                              const McConfig& cfg, const MalliavinGradientOptions& opt = {});

// Quintic step s -> 10s^3 - 15s^4 + 6s^5, C^2 at both ends.
double smoothstep5(double s);
// 1 on |z| <= l, 0 on |z| >= l+1.
double cutoff(double l, const Vec& z);

// g_l = h_l a, q_l = h_l b; identical to the original inside the ball of radius l.
ModelSpec truncate_model(const ModelSpec& model, double l);

struct FellerRow {
  int direction = 0;
  double radius = 0.0;
  double diff = 0.0;  // mean of f(X^{x0+r e}) - f(X^{x0})
  double abs_diff = 0.0;
  double stderr_ = 0.0;
};

struct FellerDirection {
  Vec e;
  bool decreasing = false;  // |diff| strictly decreasing as r shrinks
  double intercept = 0.0;   // polynomial extrapolation to r = 0 (quadratic from 3 radii)
  double intercept_stderr = 0.0;
};

struct FellerProbe {
  Vec x0;
  std::vector<double> radii;
  std::string f_name;
  double l = 0.0;
  std::string model_used;  // "original" or "truncated"
  bool flagged = false;    // explosion rate above 10% on the original model
  double explosion_rate = 0.0;
  std::vector<FellerRow> rows;
  std::vector<FellerDirection> directions;
  std::vector<FellerRow> rows_truncated;
  // Localization decomposition at x0
  MeanStat p_original, p_truncated, p_difference;
  double exit_freq = 0.0;  // P{S_l < T} on the original model
  Interval exit_ci;
  double f_bound = 0.0;  // oscillation of f
  bool truncation_inequality = false;
  long per_path_violations = 0;   // |f(X)-f(X^l)| > bound * 1{S_l < T}
  long coincidence_violations = 0;  // paths differing before the exit step
  long n_paths = 0;
  long excluded = 0;
};

FellerProbe feller_probe(const ModelSpec& model, const Vec& x0, const TestFunction& f,
                         const std::vector<double>& radii, double l, const McConfig& cfg,
                         const std::vector<Vec>& directions = {});

}  // namespace hypoflow
