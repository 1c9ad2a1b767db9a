#pragma once

#include "hypoflow/jet.hpp"
#include "hypoflow/sde.hpp"

#include <memory>
#include <string>
#include <vector>

namespace hypoflow {

struct HierarchyField {
  int level = 1;
  std::string provenance;  // e.g. "d/dy1 > transport > d/dy1"
};

// Level 1: d a1 / d y_j.  Level l, for each k of level l-1: the n fields
// d k / d y_j, then the transport -grad_x a1 . k + grad_x k . a1.
struct Hierarchy {
  ModelSpec model;
  int j0 = 1;
  int jet_order = 1;
  bool finite_difference = false;  // a1 derivatives not analytic
  std::vector<std::vector<HierarchyField>> levels;
  std::shared_ptr<const JetSpace> space;

  std::size_t count() const;
  // All fields at z, grouped by level (values in R^m).
  std::vector<std::vector<Vec>> evaluate(const Vec& z) const;
  Vec evaluate_field(int level, int index, const Vec& z) const;  // level is 1-based
};

// Throws ArgumentError for j0 < 1, or j0 > 2 without an a1 jet callback.
Hierarchy build_hierarchy(const ModelSpec& model, int j0);

struct SpanOptions {
  double rel_tol = 1e-8;  // relative to the largest singular value
  bool dedup = false;     // drop identical evaluations within a level
};

struct SpanningReport {
  Vec point;
  Mat matrix;  // m x (number of fields), columns in level order
  Vec singular_values;  // descending
  int numerical_rank = 0;
  bool spans = false;
  double modulus = 0.0;  // smallest eigenvalue of sum V V^T
  double tol = 0.0;      // absolute singular value cutoff used
  int j0 = 0;
  std::vector<std::string> provenance;
  bool finite_difference = false;
};

SpanningReport spanning_dimension(const Hierarchy& h, const Vec& point,
                                  const SpanOptions& opt = {});

struct Sampling {
  int n_samples = 512;
  Vec center;  // empty means the origin
  int max_doublings = 4;
  int max_halvings = 30;
  double zero_tol = 1e-12;  // relative floor for "infimum is zero"
  SpanOptions span;
};

struct LocalConstants {
  double R = 0.0;
  double c = 0.0;
  double R1 = 0.0;
  double R3 = 0.0;
  double C0 = 0.0;
  int n_samples = 0;
  bool R1_capped = false;  // doubling search stopped at its cap
  double inf_modulus = 0.0;
  double inf_lambda_bb = 0.0;
  Vec center;
  std::string note = "sampled infimum over a Halton point set; a surrogate, not a certified bound";
};

// Deterministic Halton points in the closed ball, center first.
std::vector<Vec> ball_samples(const Vec& center, double R, int count);

double lambda_min_bbT(const ModelSpec& model, const Vec& z);

// Throws HypothesisViolation with a witness point when an infimum vanishes.
LocalConstants local_constants(const ModelSpec& model, const Hierarchy& h, double R,
                               const Sampling& s = {});

struct EllipticityTrace {
  std::vector<double> lambda;  // smallest eigenvalue of b b^T per step
  int tau_prime_step = 0;      // first k with |lambda_k - lambda_0| >= R3, else n_steps
  double R3 = 0.0;
  int bound_checks = 0;
  int bound_violations = 0;  // steps where |dlambda| > ||d(bb^T)||_2
  bool degenerate = false;   // lambda(0) numerically zero
};

// R3 <= 0 selects lambda(0)/2.
EllipticityTrace ellipticity_along_path(const ModelSpec& model, const PathBundle& path,
                                        double R3 = -1.0);

}  // namespace hypoflow
