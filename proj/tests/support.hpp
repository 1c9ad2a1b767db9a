#pragma once
// Small hand-built models and helpers shared by the unit tests.
#include "hypoflow/sde.hpp"

#include <cmath>
#include <functional>

namespace testing_support {

using hypoflow::Mat;
using hypoflow::ModelSpec;
using hypoflow::Vec;

// m = n = d = 1 model from scalar callbacks of (x, y); no analytic derivatives.
inline ModelSpec scalar_model(std::function<double(double, double)> a1,
                              std::function<double(double, double)> a2,
                              std::function<double(double, double)> b,
                              const char* name = "scalar") {
  ModelSpec s;
  s.name = name;
  s.m = s.n = s.d = 1;
  s.a1 = [a1](const Vec& z, Vec& o) {
    o.resize(1);
    o[0] = a1(z[0], z[1]);
  };
  s.a2 = [a2](const Vec& z, Vec& o) {
    o.resize(1);
    o[0] = a2(z[0], z[1]);
  };
  s.b = [b](const Vec& z, Mat& o) {
    o.resize(1, 1);
    o(0, 0) = b(z[0], z[1]);
  };
  return s;
}

inline Mat expm(const Mat& A) {
  // scaling and squaring with a long Taylor series; fine for small well-scaled matrices
  int s = 0;
  double nrm = A.cwiseAbs().rowwise().sum().maxCoeff();
  while (nrm > 0.5) {
    nrm /= 2;
    ++s;
  }
  Mat B = A / std::pow(2.0, s);
  Mat term = Mat::Identity(A.rows(), A.cols()), sum = term;
  for (int k = 1; k < 30; ++k) {
    term = term * B / k;
    sum += term;
  }
  for (int i = 0; i < s; ++i) sum = sum * sum;
  return sum;
}

}  // namespace testing_support
