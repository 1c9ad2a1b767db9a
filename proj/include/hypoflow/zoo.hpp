#pragma once

#include "hypoflow/jet.hpp"
#include "hypoflow/sde.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace hypoflow {

struct ExpectedFacts {
  int j0 = 1;
  bool spans = true;              // at default_x0
  bool malliavin_singular = false;
  bool noise_nondegenerate = true;  // det(b b^T) != 0
  std::vector<std::string> tags;
  Vec default_x0;
};

struct ZooEntry {
  ModelSpec spec;
  ExpectedFacts expected;
  std::string citation;  // model description with all defaults spelled out
};

ZooEntry integrated_bm();

// dx1 = (x2 + y) dt, dx2 = x1 dt, dx3 = (x2 + x3) dt,
// dy = (alpha y + beta sin y + gamma sin x1) dt + b dW.
ZooEntry example_2_3(double b = 1.0, double alpha = 0.0, double beta = 0.0, double gamma = 0.0);

// Chain: dX1 = F1 dt + sigma dW, dX2 = F2(X1,X2,X3) dt, dX3 = F3(X2,X3) dt.
// State order is (X2, X3 | X1). Functions act on jets so derivatives are exact.
using ChainFn3 = std::function<Jet(const Jet&, const Jet&, const Jet&)>;
using ChainFn2 = std::function<Jet(const Jet&, const Jet&)>;
struct ChainFunctions {
  ChainFn3 F1, F2;
  ChainFn2 F3;
  std::string description;
};
ChainFunctions chain_linear(double f1_coeff = -1.0);  // F1 = f1 X1, F2 = X1, F3 = X2
ChainFunctions chain_zero_f2(double f1_coeff = -1.0);
ChainFunctions chain_cubic_f2(double f1_coeff = -1.0);  // F2 = X1^3
ZooEntry example_2_4_chain(const ChainFunctions& fns, double sigma = 1.0);

ZooEntry example_2_5_singular();

enum class Potential { quadratic, double_well, linear };
Potential potential_from_name(const std::string& s);
std::string potential_name(Potential p);
double potential_value(Potential p, const Vec& q);

ZooEntry langevin(double gamma = 1.0, Potential F = Potential::quadratic, double sigma = 1.0,
                  int d = 1);

struct LangevinFeasibility {
  bool F_nonnegative = true;
  Vec F_witness;  // point with F < 0 when F_nonnegative is false
  bool feasible = false;
  double beta = 0.0;
  double alpha = 0.0;
  double worst_violation = 0.0;  // for the best beta when infeasible
  Vec worst_point;
  int grid_points = 0;
};

// Grid search over beta in {0.1..0.9}, alpha in [0, alpha_max] on [lo,hi]^d.
LangevinFeasibility langevin_hypothesis_check(Potential F, double gamma, int d = 1,
                                              double lo = -10.0, double hi = 10.0,
                                              int per_axis = 201, double alpha_max = 50.0);

enum class Hamiltonian { quadratic, quartic };
ZooEntry hamiltonian(Hamiltonian H = Hamiltonian::quadratic, double gamma = 1.0, int d = 1);
// Smallest eigenvalue of d_yy H over a grid of [lo,hi]^(2d).
double hamiltonian_nu_probe(Hamiltonian H, int d = 1, double lo = -3.0, double hi = 3.0,
                            int per_axis = 7);

// Order-n equation in R^m in companion form, f = -(a_0 y1 + ... + a_{n-1} yn) - c,
// noise b_scale * I_m. x-block (y1..y_{n-1}), y-block yn.
ZooEntry high_order(int order = 3, int m = 1, std::vector<double> coeffs = {1.0, 1.0, 1.0},
                    double c = 0.0, double b_scale = 1.0);

// Registry of named defaults used by sweeps and the CLI.
std::vector<std::string> zoo_names();
// params: optional overrides, e.g. {"gamma": 2.0}. Unknown names throw ArgumentError.
ZooEntry make_zoo(const std::string& name, const std::map<std::string, double>& params = {});
// Closest registered names for an unknown one.
std::vector<std::string> zoo_suggestions(const std::string& name);

}  // namespace hypoflow
