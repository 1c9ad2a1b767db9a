#pragma once

#include "hypoflow/common.hpp"
#include "hypoflow/jet.hpp"

#include <functional>
#include <string>
#include <vector>

namespace hypoflow {

// Callbacks write into a caller-sized output. z = (x, y) stacked, length m+n.
using VecField = std::function<void(const Vec& z, Vec& out)>;
using MatField = std::function<void(const Vec& z, Mat& out)>;
using JetField = std::function<void(const std::vector<Jet>& z, std::vector<Jet>& out)>;

// dx = a1(x,y) dt,  dy = a2(x,y) dt + b(x,y) dW.
struct ModelSpec {
  std::string name;
  int m = 1;  // dim x
  int n = 1;  // dim y
  int d = 1;  // Brownian dim
  VecField a1;  // -> R^m
  VecField a2;  // -> R^n
  MatField b;   // -> R^{n x d}

  // Optional analytic derivatives. N = m+n.
  MatField jac_a1;   // m x N
  MatField jac_a2;   // n x N
  MatField jac_b;    // (n*d) x N, row j*n+i holds d b_ij / dz
  MatField hess_a1;  // (m*N) x N, row i*N+p holds d^2 a1_i / dz_p dz
  JetField a1_jet;   // a1 on Taylor jets, any order

  // Affine drift and constant diffusion: Jacobians do not depend on the state.
  bool linear_additive = false;

  int dim() const { return m + n; }
  bool has_analytic_first_derivatives() const { return jac_a1 && jac_a2 && jac_b; }
};

// Throws ArgumentError on missing callbacks or bad dimensions.
void check_model(const ModelSpec& model);

// Derivative evaluation, analytic when present, central differences otherwise.
// Steps h = eps^(1/3) * max(1, |z_i|).
void eval_jacobian_a(const ModelSpec& model, const Vec& z, Mat& A);     // N x N, rows (a1; a2)
void eval_jacobian_a1(const ModelSpec& model, const Vec& z, Mat& out);  // m x N
void eval_jacobian_b(const ModelSpec& model, const Vec& z, Mat& out);   // (n*d) x N
void eval_hessian_a1(const ModelSpec& model, const Vec& z, Mat& out);   // (m*N) x N

struct NoiseGrid {
  double t0 = 0.0;
  double T = 1.0;
  int n_steps = 1;
  int d = 1;
  std::uint64_t seed = 0;
  long path_index = 0;
  Mat increments;  // n_steps x d

  double dt() const { return T / n_steps; }
};

// iid N(0, dt) increments, a pure function of (seed, path_index).
NoiseGrid sample_noise(int d, double T, int n_steps, std::uint64_t seed, long path_index);

// Grid with the same Brownian path on half as many steps (pairs of increments summed).
NoiseGrid coarsen(const NoiseGrid& fine);

struct PathBundle {
  NoiseGrid grid;
  Vec initial;
  Mat states;  // (n_steps+1) x (m+n)
  bool exploded = false;
  int explode_step = -1;  // first step index with a non-finite state

  Vec state(int k) const { return states.row(k).transpose(); }
};

// Euler-Maruyama. The x-block receives no noise.
PathBundle integrate_path(const ModelSpec& model, const Vec& initial, const NoiseGrid& grid);

// One Euler step in place (used by integrate_path and bump reruns).
struct EulerWork {
  Vec a1, a2, noise;
  Mat b;
  void resize(const ModelSpec& model);
};
void euler_step(const ModelSpec& model, const Vec& z, const double* dw, double dt, Vec& z_next,
                EulerWork& w);

bool all_finite(const Vec& v);

}  // namespace hypoflow
