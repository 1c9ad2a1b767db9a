// hypoflow command-line front end.
#include "hypoflow/gradient.hpp"
#include "hypoflow/report.hpp"
#include "hypoflow/zoo.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

using namespace hypoflow;

namespace {

std::vector<double> parse_list(const std::string& s, const char* what) {
  std::vector<double> v;
  std::string tok;
  std::string norm = s;
  for (char& ch : norm)
    if (ch == ',' || ch == ';' || ch == '(' || ch == ')' || ch == '[' || ch == ']') ch = ' ';
  std::istringstream in(norm);
  while (in >> tok) {
    std::size_t used = 0;
    double x;
    try {
      x = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) throw ArgumentError(std::string("bad number '") + tok + "' in " + what);
    v.push_back(x);
  }
  return v;
}

Json parse_kv(const std::vector<std::string>& items, const char* what) {
  Json o = Json::object();
  for (const std::string& it : items) {
    auto eq = it.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ArgumentError(std::string(what) + " expects key=value, got '" + it + "'");
    auto v = parse_list(it.substr(eq + 1), what);
    if (v.size() != 1) throw ArgumentError(std::string(what) + " value must be one number: " + it);
    o[it.substr(0, eq)] = v[0];
  }
  return o;
}

struct Common {
  std::string model, x0, out;
  double T = 1.0, dt = 1e-3, tol = 0.0;
  long paths = 1000;
  std::uint64_t seed = 1;
  int threads = 0;
  std::vector<std::string> model_params;
};

void add_common(CLI::App* sub, Common& c, bool with_tol) {
  sub->add_option("--model", c.model, "zoo model name (see `zoo list`)")->required();
  sub->add_option("--x0", c.x0, "start point, comma separated; default: model default");
  sub->add_option("--T", c.T, "final time")->capture_default_str();
  sub->add_option("--dt", c.dt, "step size")->capture_default_str();
  sub->add_option("--paths", c.paths, "number of Monte Carlo paths")->capture_default_str();
  sub->add_option("--seed", c.seed, "64-bit seed")->capture_default_str();
  sub->add_option("--threads", c.threads, "worker threads (overrides HYPOFLOW_THREADS)");
  sub->add_option("--out", c.out, "JSON envelope path; CSV sidecars are written beside it");
  sub->add_option("--model-param", c.model_params, "model parameter key=value (repeatable)");
  if (with_tol) sub->add_option("--tol", c.tol, "relative SVD tolerance");
}

Json base_config(const std::string& probe, const Common& c) {
  Json j;
  j["probe"] = probe;
  j["model"] = c.model;
  j["model_params"] = parse_kv(c.model_params, "--model-param");
  j["x0"] = c.x0.empty() ? Json::array() : Json(parse_list(c.x0, "--x0"));
  j["T"] = c.T;
  j["dt"] = c.dt;
  j["n_paths"] = c.paths;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["params"] = Json::object();
  if (!c.out.empty()) j["out"] = c.out;
  if (c.tol > 0) j["params"]["tol"] = c.tol;
  return j;
}

int execute(const Json& j) {
  auto diag = validate_config(j);
  if (!diag.empty()) {
    std::cerr << "invalid configuration:\n";
    for (const auto& d : diag) std::cerr << "  " << d << "\n";
    return 1;
  }
  return run_and_report(parse_config(j), std::cout, std::cerr);
}

std::string facts(const ZooEntry& e) {
  std::ostringstream s;
  s << "j0=" << e.expected.j0 << " spans=" << (e.expected.spans ? "yes" : "no")
    << " malliavin_singular=" << (e.expected.malliavin_singular ? "yes" : "no")
    << " bbT_nondegenerate=" << (e.expected.noise_nondegenerate ? "yes" : "no") << " x0=(";
  for (Eigen::Index i = 0; i < e.expected.default_x0.size(); ++i)
    s << (i ? "," : "") << e.expected.default_x0[i];
  s << ") tags=";
  for (std::size_t i = 0; i < e.expected.tags.size(); ++i) s << (i ? "," : "") << e.expected.tags[i];
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hypoflow: degenerate SDE flows, Malliavin matrices and spanning checks"};
  app.require_subcommand(1);

  Common c;
  // check
  std::string point;
  int j0 = 0;
  auto* check = app.add_subcommand("check", "evaluate the drift hierarchy and its rank at a point");
  add_common(check, c, true);
  check->add_option("--point", point, "evaluation point; default x0");
  check->add_option("--j0", j0, "hierarchy depth; default: the model's");

  double R = 1.0;
  int samples = 0;
  auto* constants = app.add_subcommand("constants", "sampled local constants c, R1, R3, C0 on a ball");
  add_common(constants, c, true);
  constants->add_option("--R", R, "ball radius")->capture_default_str();
  constants->add_option("--j0", j0, "hierarchy depth");
  constants->add_option("--samples", samples, "number of Halton sample points");

  int trajectories = 1;
  auto* simulate = app.add_subcommand("simulate", "Euler-Maruyama paths and final-state means");
  add_common(simulate, c, false);
  simulate->add_option("--trajectories", trajectories, "paths written to the CSV sidecar")
      ->capture_default_str();

  auto* malliavin = app.add_subcommand("malliavin", "per-path Malliavin matrices");
  add_common(malliavin, c, false);

  std::string eps;
  int directions = 0;
  auto* tail = app.add_subcommand("tail", "small-eigenvalue tail of the reduced Malliavin matrix");
  add_common(tail, c, false);
  tail->add_option("--eps", eps, "descending thresholds, e.g. 1e-2,1e-3,1e-4");
  tail->add_option("--directions", directions, "sampled directions (>= 32)");

  std::string pvals, schedule;
  auto* moments = app.add_subcommand("moments", "inverse moments E det(M)^-p");
  add_common(moments, c, false);
  moments->add_option("--p", pvals, "exponents, e.g. 1,2");
  moments->add_option("--schedule", schedule, "increasing sample sizes, e.g. 1000,10000");

  std::string fname, xi, estimator, radii;
  std::vector<std::string> fparams;
  double h = 0.0, l = 0.0;
  auto* gradient = app.add_subcommand("gradient", "gradient of P_T f along a direction");
  add_common(gradient, c, false);
  gradient->add_option("--f", fname, "test function: " + [] {
    std::string s;
    for (const auto& n : test_function_names()) s += (s.empty() ? "" : ", ") + n;
    return s;
  }());
  gradient->add_option("--f-param", fparams, "test function parameter key=value (repeatable)");
  gradient->add_option("--xi", xi, "direction, comma separated; default e1");
  gradient->add_option("--estimator", estimator, "malliavin | pathwise | fd");
  gradient->add_option("--fd-step", h, "finite-difference step (fd only)");

  auto* feller = app.add_subcommand("feller", "coupled-noise continuity probe with localization");
  add_common(feller, c, false);
  feller->add_option("--f", fname, "bounded test function");
  feller->add_option("--f-param", fparams, "test function parameter key=value (repeatable)");
  feller->add_option("--radii", radii, "descending radii, e.g. 0.5,0.25,0.1,0.05");
  feller->add_option("--l", l, "truncation radius");

  std::string zoo_action = "list";
  auto* zoo = app.add_subcommand("zoo", "list built-in models");
  zoo->add_option("action", zoo_action, "list")->capture_default_str();

  std::string file;
  auto* validate = app.add_subcommand("validate", "schema-check a config file without running it");
  validate->add_option("config", file, "JSON config file")->required();

  int run_threads = -1;
  std::string run_out;
  auto* run_cmd = app.add_subcommand("run", "run a JSON config file");
  run_cmd->add_option("config", file, "JSON config file")->required();
  run_cmd->add_option("--threads", run_threads, "worker threads (overrides the file)");
  run_cmd->add_option("--out", run_out, "envelope path (overrides the file)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 1;
  }

  try {
    if (zoo->parsed()) {
      if (zoo_action != "list") {
        std::cerr << "usage: hypoflow zoo list\n";
        return 1;
      }
      for (const auto& name : zoo_names()) {
        ZooEntry e = make_zoo(name);
        std::cout << name << "\n  " << e.citation << "\n  " << facts(e) << "\n";
      }
      return 0;
    }
    if (validate->parsed() || run_cmd->parsed()) {
      std::ifstream in(file);
      if (!in) {
        std::cerr << "cannot read " << file << "\n";
        return 1;
      }
      Json j;
      try {
        j = Json::parse(in);
      } catch (const Json::exception& e) {
        std::cerr << "not valid JSON: " << e.what() << "\n";
        return 1;
      }
      if (validate->parsed()) {
        auto diag = validate_config(j);
        for (const auto& d : diag) std::cout << d << "\n";
        if (diag.empty()) std::cout << "ok\n";
        return diag.empty() ? 0 : 1;
      }
      if (j.is_object()) {
        if (run_threads >= 0) j["threads"] = run_threads;
        if (!run_out.empty()) j["out"] = run_out;
      }
      return execute(j);
    }

    Json j;
    if (check->parsed()) {
      j = base_config("check", c);
      if (!point.empty()) j["params"]["point"] = parse_list(point, "--point");
      if (j0 > 0) j["params"]["j0"] = j0;
    } else if (constants->parsed()) {
      j = base_config("constants", c);
      j["params"]["R"] = R;
      if (j0 > 0) j["params"]["j0"] = j0;
      if (samples > 0) j["params"]["n_samples"] = samples;
    } else if (simulate->parsed()) {
      j = base_config("simulate", c);
      j["params"]["trajectories"] = trajectories;
    } else if (malliavin->parsed()) {
      j = base_config("malliavin", c);
    } else if (tail->parsed()) {
      j = base_config("tail", c);
      if (!eps.empty()) j["params"]["eps"] = parse_list(eps, "--eps");
      if (directions > 0) j["params"]["directions"] = directions;
    } else if (moments->parsed()) {
      j = base_config("moments", c);
      if (!pvals.empty()) j["params"]["p"] = parse_list(pvals, "--p");
      if (!schedule.empty()) {
        Json s = Json::array();
        for (double v : parse_list(schedule, "--schedule")) s.push_back(static_cast<long>(v));
        j["params"]["schedule"] = s;
      }
    } else if (gradient->parsed() || feller->parsed()) {
      bool grad = gradient->parsed();
      j = base_config(grad ? "gradient" : "feller", c);
      if (!fname.empty()) j["params"]["f"] = fname;
      if (!fparams.empty()) j["params"]["f_params"] = parse_kv(fparams, "--f-param");
      if (grad) {
        if (!xi.empty()) j["params"]["xi"] = parse_list(xi, "--xi");
        if (!estimator.empty()) j["params"]["estimator"] = estimator;
        if (h > 0) j["params"]["h"] = h;
      } else {
        if (!radii.empty()) j["params"]["radii"] = parse_list(radii, "--radii");
        if (l > 0) j["params"]["l"] = l;
      }
    }
    return execute(j);
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n" << app.help();
    return 1;
  }
}
