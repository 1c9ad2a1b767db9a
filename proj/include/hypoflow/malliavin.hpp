#pragma once

#include "hypoflow/flow.hpp"
#include "hypoflow/hierarchy.hpp"
#include "hypoflow/stats.hpp"

#include <string>
#include <vector>

namespace hypoflow {

struct LogDet {
  double log_abs = 0.0;
  int sign = 1;
  int nonpositive_pivots = 0;
  double value() const;
};

// LDL^T with pivoting; pivots are reported, never clamped.
LogDet log_det_ldlt(const Mat& M);
// log det(G G^T) from a Householder QR of G^T (N x K, K >= N). Nonnegative by
// construction; exact zeros of R are reported as nonpositive pivots.
LogDet log_det_gram(const Mat& G);

struct MalliavinRecord {
  Mat M;
  Mat M_tilde;
  Vec eigenvalues;        // of M, ascending
  Vec eigenvalues_tilde;  // of M_tilde, ascending
  double det_M = 0.0;
  double det_M_tilde = 0.0;
  LogDet logdet_M;        // from the Gram factor of M
  LogDet logdet_M_tilde;
  int ldlt_nonpositive_pivots = 0;  // diagnostic: LDL^T of the assembled M
  double factorization_residual = 0.0;  // ||M - J M~ J^T||_F / ||M||_F
  double symmetry_error = 0.0;          // ||M - M^T||_F / ||M||_F
  double lambda_min() const { return eigenvalues.size() ? eigenvalues[0] : 0.0; }
};

// M~ = sum_k J_k^{-1} (0;b_k)(0;b_k)^T J_k^{-T} dt (left endpoints).
// M is accumulated separately as sum_k (J_T P_k)(J_T P_k)^T dt.
MalliavinRecord malliavin_matrix(const ModelSpec& model, const PathBundle& path,
                                 const FlowRecord& flow);

// Integrates path, flow and Malliavin matrices for one path index.
struct PathSample {
  PathBundle path;
  FlowRecord flow;
  MalliavinRecord rec;
  bool valid = false;  // false when the path or flow exploded
};
PathSample simulate_sample(const ModelSpec& model, const Vec& x0, const McConfig& cfg,
                           long path_index);

// Unit directions for the sampled Rayleigh minimum: angles on the half circle
// for N=2, Fibonacci sphere for N=3, normalized Halton/inverse-normal points above.
std::vector<Vec> sample_directions(int N, int count);

struct TailReport {
  std::vector<double> eps_grid;
  std::vector<double> raw;        // exact lambda_min estimator
  std::vector<double> isotonic;   // nonincreasing cleanup of raw
  std::vector<long> counts;
  std::vector<Interval> wilson;
  std::vector<double> sampled;    // direction-sampled estimator
  int directions_sampled = 0;
  long n_paths = 0;               // valid paths
  long excluded = 0;              // exploded paths
  double slope = 0.0;             // log-log fit of raw over positive entries
  int slope_points = 0;
  double lambda_min_min = 0.0, lambda_min_median = 0.0, lambda_min_max = 0.0;
  std::string note;
};

TailReport tail_probe(const ModelSpec& model, const Vec& x0, const std::vector<double>& eps_grid,
                      int n_directions, const McConfig& cfg);

struct MomentReport {
  std::vector<double> p_values;
  std::vector<int> schedule;
  std::vector<std::vector<MeanStat>> estimates;  // [p][schedule point]
  std::vector<double> stability_ratio;           // last / first per p
  std::vector<long> excluded_nonpositive;        // per schedule point
  std::vector<long> excluded_exploded;           // per schedule point
  // retained paths with lambda_min(M) <= 1e-12 lambda_max(M): the estimate there measures
  // rounding, not the law of det M
  std::vector<long> numerically_singular;
  double min_log_det = 0.0;
};

MomentReport inverse_moment_probe(const ModelSpec& model, const Vec& x0,
                                  const std::vector<double>& p_values,
                                  const std::vector<int>& schedule, const McConfig& cfg);

struct NorrisOptions {
  double q = 9.0;
  double eps = 1e-2;
  int j0 = 1;
  LocalConstants constants;  // R1 and R3 are used
  Vec v;                      // empty: per-path eigenvector of lambda_min(M~_T)
  double R2 = 0.01;
  bool use_constants_R3 = false;  // false: R3 = lambda(0)/2 along each path
};

struct NorrisReport {
  long n_paths = 0;
  long excluded = 0;
  double log_threshold_F = 0.0;
  std::vector<double> log_threshold_E;  // per level j
  struct Freq {
    long count = 0;
    double freq = 0.0;
    Interval ci;
  };
  Freq F, E;
  std::vector<Freq> E_j;                 // j = 1..j0
  Freq F_and_not_E1;
  std::vector<Freq> F_and_Ej_not_Ej1;    // j = 1..j0-1
  long counting_identity_violations = 0;
  long tau_order_violations = 0;
  double mean_tau = 0.0;
  Freq tau_before_T, S_before_T, tau_prime_before_T;
};

NorrisReport norris_event_probe(const ModelSpec& model, const Vec& x0, const NorrisOptions& opt,
                                const McConfig& cfg);

struct DensityReport {
  int bins = 0;
  int dims = 0;
  std::vector<double> lo, hi, width;
  std::vector<double> density;  // flattened, first coordinate fastest
  double total_mass = 0.0;
  double max_density = 0.0;
  double smoothness = 0.0;  // max |p_i - p_j| over face neighbours, divided by max density
  double expected_per_bin = 0.0;
  bool sparse = false;
  long n_paths = 0;
  long excluded = 0;
  std::vector<std::string> warnings;
};

DensityReport density_histogram(const ModelSpec& model, const Vec& x0, int bins,
                                const McConfig& cfg, bool regularity_asserted = true);

}  // namespace hypoflow
