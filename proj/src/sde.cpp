#include "hypoflow/sde.hpp"

#include <cmath>
#include <limits>

namespace hypoflow {

bool all_finite(const Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i])) return false;
  return true;
}

void check_model(const ModelSpec& model) {
  if (model.m < 1 || model.n < 1 || model.d < 1)
    throw ArgumentError("model '" + model.name + "': dimensions must be positive");
  if (!model.a1 || !model.a2 || !model.b)
    throw ArgumentError("model '" + model.name + "': a1, a2 and b are required");
}

namespace {
double fd_step(double zi) {
  static const double c = std::cbrt(std::numeric_limits<double>::epsilon());
  return c * std::max(1.0, std::fabs(zi));
}

// Central-difference Jacobian of a vector field with `rows` outputs.
void fd_jacobian(const VecField& f, int rows, const Vec& z, Mat& out) {
  const int N = static_cast<int>(z.size());
  out.resize(rows, N);
  Vec zp = z, fp(rows), fm(rows);
  for (int p = 0; p < N; ++p) {
    double h = fd_step(z[p]);
    zp[p] = z[p] + h;
    double hp = zp[p] - z[p];
    f(zp, fp);
    zp[p] = z[p] - h;
    double hm = z[p] - zp[p];
    f(zp, fm);
    zp[p] = z[p];
    out.col(p) = (fp - fm) / (hp + hm);
  }
}
}  // namespace

void eval_jacobian_a1(const ModelSpec& model, const Vec& z, Mat& out) {
  if (model.jac_a1) {
    out.resize(model.m, model.dim());
    model.jac_a1(z, out);
  } else {
    fd_jacobian(model.a1, model.m, z, out);
  }
}

void eval_jacobian_a(const ModelSpec& model, const Vec& z, Mat& A) {
  const int N = model.dim();
  A.resize(N, N);
  Mat tmp;
  eval_jacobian_a1(model, z, tmp);
  A.topRows(model.m) = tmp;
  if (model.jac_a2) {
    tmp.resize(model.n, N);
    model.jac_a2(z, tmp);
  } else {
    fd_jacobian(model.a2, model.n, z, tmp);
  }
  A.bottomRows(model.n) = tmp;
}

void eval_jacobian_b(const ModelSpec& model, const Vec& z, Mat& out) {
  const int n = model.n, d = model.d;
  if (model.jac_b) {
    out.resize(n * d, model.dim());
    model.jac_b(z, out);
    return;
  }
  VecField flat = [&model, n, d](const Vec& zz, Vec& o) {
    Mat bm(n, d);
    model.b(zz, bm);
    o.resize(n * d);
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < n; ++i) o[j * n + i] = bm(i, j);
  };
  fd_jacobian(flat, n * d, z, out);
}

void eval_hessian_a1(const ModelSpec& model, const Vec& z, Mat& out) {
  const int m = model.m, N = model.dim();
  if (model.hess_a1) {
    out.resize(m * N, N);
    model.hess_a1(z, out);
    return;
  }
  // Differentiate the (analytic or differenced) Jacobian once more.
  VecField flat_jac = [&model, m, N](const Vec& zz, Vec& o) {
    Mat j;
    eval_jacobian_a1(model, zz, j);
    o.resize(m * N);
    for (int i = 0; i < m; ++i)
      for (int p = 0; p < N; ++p) o[i * N + p] = j(i, p);
  };
  Mat flat;
  fd_jacobian(flat_jac, m * N, z, flat);  // row i*N+p, col q
  out.resize(m * N, N);
  for (int i = 0; i < m; ++i) {
    Mat blk = flat.block(i * N, 0, N, N);
    out.block(i * N, 0, N, N) = 0.5 * (blk + blk.transpose());
  }
}

void EulerWork::resize(const ModelSpec& model) {
  a1.resize(model.m);
  a2.resize(model.n);
  b.resize(model.n, model.d);
  noise.resize(model.n);
}

void euler_step(const ModelSpec& model, const Vec& z, const double* dw, double dt, Vec& z_next,
                EulerWork& w) {
  const int m = model.m, n = model.n, d = model.d;
  model.a1(z, w.a1);
  model.a2(z, w.a2);
  model.b(z, w.b);
  z_next.resize(m + n);
  for (int i = 0; i < m; ++i) z_next[i] = z[i] + w.a1[i] * dt;
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) s += w.b(i, j) * dw[j];
    z_next[m + i] = z[m + i] + w.a2[i] * dt + s;
  }
}

PathBundle integrate_path(const ModelSpec& model, const Vec& initial, const NoiseGrid& grid) {
  check_model(model);
  if (initial.size() != model.dim())
    throw ArgumentError("integrate_path: initial point has dimension " +
                        std::to_string(initial.size()) + ", model expects " +
                        std::to_string(model.dim()));
  if (grid.d != model.d || grid.increments.rows() != grid.n_steps ||
      grid.increments.cols() != model.d)
    throw ArgumentError("integrate_path: noise grid does not match model Brownian dimension");

  PathBundle p;
  p.grid = grid;
  p.initial = initial;
  p.states.resize(grid.n_steps + 1, model.dim());
  p.states.row(0) = initial.transpose();
  EulerWork w;
  w.resize(model);
  const double dt = grid.dt();
  Vec z = initial, zn(model.dim());
  std::vector<double> dw(model.d);
  if (!all_finite(z)) {
    p.exploded = true;
    p.explode_step = 0;
  }
  for (int k = 0; k < grid.n_steps && !p.exploded; ++k) {
    for (int j = 0; j < model.d; ++j) dw[j] = grid.increments(k, j);
    euler_step(model, z, dw.data(), dt, zn, w);
    p.states.row(k + 1) = zn.transpose();
    if (!all_finite(zn)) {
      p.exploded = true;
      p.explode_step = k + 1;
      // remaining rows stay NaN to make misuse visible
      for (int r = k + 2; r <= grid.n_steps; ++r)
        p.states.row(r).setConstant(std::numeric_limits<double>::quiet_NaN());
      break;
    }
    z.swap(zn);
  }
  return p;
}

}  // namespace hypoflow
