#include "hypoflow/flow.hpp"

#include <algorithm>
#include <cmath>

namespace hypoflow {

void FlowWork::resize(const ModelSpec& model) {
  const int N = model.dim();
  A.resize(N, N);
  step.resize(N, N);
  tmp.resize(N, N);
  Bj.assign(model.d, Mat::Zero(N, N));
}

void flow_coefficients(const ModelSpec& model, const Vec& z, FlowWork& w) {
  const int n = model.n, N = model.dim();
  eval_jacobian_a(model, z, w.A);
  eval_jacobian_b(model, z, w.Jb);
  for (int j = 0; j < model.d; ++j) {
    w.Bj[j].setZero(N, N);
    w.Bj[j].bottomRows(n) = w.Jb.middleRows(j * n, n);
  }
}

void flow_forward_step(const FlowWork& w, const Mat& J, const double* dw, double dt, Mat& out,
                       Mat& scratch) {
  const Eigen::Index N = J.rows();
  scratch = Mat::Identity(N, N) + w.A * dt;
  for (std::size_t j = 0; j < w.Bj.size(); ++j) scratch += w.Bj[j] * dw[j];
  out.noalias() = scratch * J;
}

void flow_inverse_step(const FlowWork& w, const Mat& Jinv, const double* dw, double dt, Mat& out,
                       Mat& scratch) {
  const Eigen::Index N = Jinv.rows();
  Mat corr = w.A;
  for (std::size_t j = 0; j < w.Bj.size(); ++j) corr -= w.Bj[j] * w.Bj[j];
  scratch = Mat::Identity(N, N) - corr * dt;
  for (std::size_t j = 0; j < w.Bj.size(); ++j) scratch -= w.Bj[j] * dw[j];
  out.noalias() = Jinv * scratch;
}

namespace {
bool finite_mat(const Mat& M) { return M.allFinite(); }
}  // namespace

FlowRecord integrate_flow(const ModelSpec& model, const PathBundle& path) {
  if (path.exploded) throw ArgumentError("integrate_flow: path exploded at step " +
                                         std::to_string(path.explode_step));
  if (path.states.cols() != model.dim())
    throw ArgumentError("integrate_flow: path dimension does not match model");
  const int N = model.dim();
  const int K = path.grid.n_steps;
  const double dt = path.grid.dt();
  FlowRecord f;
  f.m = model.m;
  f.n = model.n;
  f.n_steps = K;
  f.dt = dt;
  f.fd_jacobians = !(model.jac_a1 && model.jac_a2 && model.jac_b);
  f.J.reserve(K + 1);
  f.J_inv.reserve(K + 1);
  f.J.push_back(Mat::Identity(N, N));
  f.J_inv.push_back(Mat::Identity(N, N));
  FlowWork w;
  w.resize(model);
  Mat next, scratch;
  std::vector<double> dw(model.d);
  for (int k = 0; k < K; ++k) {
    Vec z = path.state(k);
    // affine drift and constant noise: coefficients are state independent
    if (k == 0 || !model.linear_additive) flow_coefficients(model, z, w);
    if (!finite_mat(w.A) || !finite_mat(w.Jb)) {
      f.exploded = true;
      f.explode_step = k;
      break;
    }
    for (int j = 0; j < model.d; ++j) dw[j] = path.grid.increments(k, j);
    flow_forward_step(w, f.J.back(), dw.data(), dt, next, scratch);
    f.J.push_back(next);
    flow_inverse_step(w, f.J_inv.back(), dw.data(), dt, next, scratch);
    f.J_inv.push_back(next);
    if (!finite_mat(f.J.back()) || !finite_mat(f.J_inv.back())) {
      f.exploded = true;
      f.explode_step = k + 1;
      break;
    }
  }
  return f;
}

Blocks blocks_at(const FlowRecord& flow, int k) {
  if (k < 0 || k >= static_cast<int>(flow.J_inv.size()))
    throw std::out_of_range("blocks_at: step " + std::to_string(k) + " outside [0, " +
                            std::to_string(flow.J_inv.size() - 1) + "]");
  const Mat& Ji = flow.J_inv[k];
  const int m = flow.m, n = flow.n;
  return {Ji.topLeftCorner(m, m), Ji.topRightCorner(m, n), Ji.bottomLeftCorner(n, m),
          Ji.bottomRightCorner(n, n)};
}

std::vector<double> flow_deviation_report(const FlowRecord& flow) {
  std::vector<double> out;
  out.reserve(flow.J.size());
  double run = 0.0;
  for (std::size_t k = 0; k < flow.J.size() && k < flow.J_inv.size(); ++k) {
    const Mat& J = flow.J[k];
    double dev = (J * flow.J_inv[k] - Mat::Identity(J.rows(), J.cols())).norm();
    run = std::max(run, dev);
    out.push_back(run);
  }
  return out;
}

}  // namespace hypoflow
