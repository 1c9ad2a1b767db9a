#pragma once

#include "hypoflow/sde.hpp"

#include <vector>

namespace hypoflow {

struct FlowRecord {
  int m = 0, n = 0;
  int n_steps = 0;
  double dt = 0.0;
  std::vector<Mat> J;      // n_steps+1 entries
  std::vector<Mat> J_inv;  // integrated by its own equation, not by inversion
  bool exploded = false;
  int explode_step = -1;
  bool fd_jacobians = false;  // true if any derivative came from finite differences
};

struct Blocks {
  Mat A;  // m x m
  Mat B;  // m x n
  Mat C;  // n x m
  Mat D;  // n x n
};

// Scratch space for one flow step.
struct FlowWork {
  Mat A, Jb, step, tmp;
  std::vector<Mat> Bj;  // per noise column, N x N with zero top m rows
  void resize(const ModelSpec& model);
};

// Fills w.A and w.Bj at state z.
void flow_coefficients(const ModelSpec& model, const Vec& z, FlowWork& w);

// J_{k+1} = (I + A dt + sum_j B_j dW_j) J_k
void flow_forward_step(const FlowWork& w, const Mat& J, const double* dw, double dt, Mat& out,
                       Mat& scratch);
// J^{-1}_{k+1} = J^{-1}_k (I - (A - sum_j B_j^2) dt - sum_j B_j dW_j)
void flow_inverse_step(const FlowWork& w, const Mat& Jinv, const double* dw, double dt, Mat& out,
                       Mat& scratch);

FlowRecord integrate_flow(const ModelSpec& model, const PathBundle& path);

Blocks blocks_at(const FlowRecord& flow, int k);

// Running maximum over steps of ||J[k] J_inv[k] - I||_F.
std::vector<double> flow_deviation_report(const FlowRecord& flow);

}  // namespace hypoflow
