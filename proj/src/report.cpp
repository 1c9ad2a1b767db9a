#include "hypoflow/report.hpp"

#include "hypoflow/flow.hpp"
#include "hypoflow/gradient.hpp"
#include "hypoflow/hierarchy.hpp"
#include "hypoflow/malliavin.hpp"
#include "hypoflow/stats.hpp"
#include "hypoflow/zoo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

namespace hypoflow {

namespace {

const std::vector<std::string> kTopKeys = {"probe", "model",   "model_params", "x0",     "T",
                                           "dt",    "n_paths", "seed",         "threads", "params",
                                           "out"};

const std::map<std::string, std::vector<std::string>>& param_table() {
  static const std::map<std::string, std::vector<std::string>> t = {
      {"check", {"point", "j0", "tol"}},
      {"constants", {"R", "j0", "n_samples", "tol"}},
      {"simulate", {"trajectories"}},
      {"malliavin", {}},
      {"tail", {"eps", "directions"}},
      {"moments", {"p", "schedule"}},
      {"gradient", {"f", "f_params", "xi", "estimator", "h", "floor_rel"}},
      {"feller", {"f", "f_params", "radii", "l"}},
  };
  return t;
}

std::string join(const std::vector<std::string>& v, const char* sep = ", ") {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
  return s;
}

bool is_int(const Json& v) { return v.is_number_integer() || v.is_number_unsigned(); }

bool number_array(const Json& v) {
  if (!v.is_array()) return false;
  return std::all_of(v.begin(), v.end(), [](const Json& e) { return e.is_number(); });
}

Json est(const MeanStat& s) { return {{"value", s.value}, {"stderr", s.stderr_}, {"n", s.n}}; }

Json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Json mat_json(const Mat& M) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    Vec r = M.row(i).transpose();
    rows.push_back(vec_json(r));
  }
  return rows;
}

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), v.size()); }

double pget(const Json& p, const char* key, double def) {
  return p.contains(key) ? p.at(key).get<double>() : def;
}
int iget(const Json& p, const char* key, int def) {
  return p.contains(key) ? p.at(key).get<int>() : def;
}

void check_params(const std::string& probe, const Json& p, std::vector<std::string>& diag) {
  auto pos_num = [&](const char* k) {
    if (p.contains(k) && !(p[k].is_number() && p[k].get<double>() > 0))
      diag.push_back(std::string("params.") + k + " must be a positive number");
  };
  auto pos_int = [&](const char* k, long lo) {
    if (p.contains(k) && !(is_int(p[k]) && p[k].get<long>() >= lo))
      diag.push_back(std::string("params.") + k + " must be an integer >= " + std::to_string(lo));
  };
  auto descending = [&](const char* k) {
    if (!p.contains(k)) return;
    const Json& a = p[k];
    bool ok = number_array(a) && !a.empty();
    for (std::size_t i = 0; ok && i < a.size(); ++i) {
      if (!(a[i].get<double>() > 0)) ok = false;
      if (i && !(a[i].get<double>() < a[i - 1].get<double>())) ok = false;
    }
    if (!ok) diag.push_back(std::string("params.") + k + " must be positive and strictly descending");
  };
  if (probe == "check" || probe == "constants") {
    pos_int("j0", 1);
    pos_num("tol");
    pos_num("R");
    pos_int("n_samples", 1);
    if (p.contains("point") && !number_array(p["point"]))
      diag.push_back("params.point must be an array of numbers");
  } else if (probe == "simulate") {
    pos_int("trajectories", 0);
  } else if (probe == "tail") {
    descending("eps");
    pos_int("directions", 32);
  } else if (probe == "moments") {
    if (p.contains("p")) {
      bool ok = number_array(p["p"]) && !p["p"].empty();
      if (ok)
        for (const Json& e : p["p"]) ok = ok && e.get<double>() > 0;
      if (!ok) diag.push_back("params.p must be a nonempty array of positive numbers");
    }
    if (p.contains("schedule")) {
      const Json& s = p["schedule"];
      bool ok = s.is_array() && !s.empty();
      for (std::size_t i = 0; ok && i < s.size(); ++i) {
        if (!is_int(s[i]) || s[i].get<long>() < 1) ok = false;
        if (ok && i && s[i].get<long>() <= s[i - 1].get<long>()) ok = false;
      }
      if (!ok) diag.push_back("params.schedule must be increasing positive integers");
    }
  } else if (probe == "gradient" || probe == "feller") {
    if (p.contains("f")) {
      auto names = test_function_names();
      if (!p["f"].is_string() ||
          std::find(names.begin(), names.end(), p["f"].get<std::string>()) == names.end())
        diag.push_back("params.f must be one of: " + join(names));
    }
    if (p.contains("f_params")) {
      bool ok = p["f_params"].is_object();
      if (ok)
        for (const auto& kv : p["f_params"].items()) ok = ok && kv.value().is_number();
      if (!ok) diag.push_back("params.f_params must be an object of numbers");
    }
    if (probe == "gradient") {
      if (p.contains("xi") && !number_array(p["xi"]))
        diag.push_back("params.xi must be an array of numbers");
      if (p.contains("estimator")) {
        static const std::vector<std::string> est_names = {"malliavin", "pathwise", "fd"};
        if (!p["estimator"].is_string() ||
            std::find(est_names.begin(), est_names.end(), p["estimator"].get<std::string>()) ==
                est_names.end())
          diag.push_back("params.estimator must be one of: malliavin, pathwise, fd");
      }
      pos_num("h");
      pos_num("floor_rel");
    } else {
      descending("radii");
      pos_num("l");
    }
  }
}

}  // namespace

int ExperimentConfig::n_steps() const { return static_cast<int>(std::llround(T / dt)); }

Json ExperimentConfig::to_json() const {
  Json j;
  j["probe"] = probe;
  j["model"] = model;
  j["model_params"] = model_params;
  j["x0"] = x0;
  j["T"] = T;
  j["dt"] = dt;
  j["n_paths"] = n_paths;
  j["seed"] = seed;
  j["threads"] = threads;
  j["params"] = params;
  if (!out.empty()) j["out"] = out;
  return j;
}

std::vector<std::string> probe_names() {
  std::vector<std::string> v;
  for (const auto& kv : param_table()) v.push_back(kv.first);
  return v;
}

std::vector<std::string> probe_param_keys(const std::string& probe) {
  auto it = param_table().find(probe);
  if (it == param_table().end()) throw ArgumentError("unknown probe '" + probe + "'");
  return it->second;
}

std::vector<std::string> validate_config(const Json& j) {
  std::vector<std::string> diag;
  if (!j.is_object()) return {"config must be a JSON object"};
  for (const auto& kv : j.items())
    if (std::find(kTopKeys.begin(), kTopKeys.end(), kv.key()) == kTopKeys.end())
      diag.push_back("unknown key '" + kv.key() + "'");
  for (const char* k : {"probe", "model"})
    if (!j.contains(k)) diag.push_back(std::string("missing key '") + k + "'");

  std::string probe;
  if (j.contains("probe")) {
    if (!j["probe"].is_string()) {
      diag.push_back("probe must be a string");
    } else {
      probe = j["probe"].get<std::string>();
      if (!param_table().count(probe)) {
        diag.push_back("unknown probe '" + probe + "'; available: " + join(probe_names()));
        probe.clear();
      }
    }
  }
  int dim = -1;
  if (j.contains("model")) {
    if (!j["model"].is_string()) {
      diag.push_back("model must be a string");
    } else {
      std::string name = j["model"].get<std::string>();
      auto names = zoo_names();
      if (std::find(names.begin(), names.end(), name) == names.end()) {
        diag.push_back("unknown model '" + name + "'; did you mean: " + join(zoo_suggestions(name)));
      } else {
        std::map<std::string, double> mp;
        bool ok = true;
        if (j.contains("model_params")) {
          if (!j["model_params"].is_object()) {
            diag.push_back("model_params must be an object of numbers");
            ok = false;
          } else {
            for (const auto& kv : j["model_params"].items()) {
              if (!kv.value().is_number()) {
                diag.push_back("model_params." + kv.key() + " must be a number");
                ok = false;
              } else {
                mp[kv.key()] = kv.value().get<double>();
              }
            }
          }
        }
        if (ok) {
          try {
            dim = make_zoo(name, mp).spec.dim();
          } catch (const std::exception& e) {
            diag.push_back(std::string("model_params: ") + e.what());
          }
        }
      }
    }
  }
  if (j.contains("x0")) {
    if (!number_array(j["x0"]))
      diag.push_back("x0 must be an array of numbers");
    else if (dim > 0 && !j["x0"].empty() && static_cast<int>(j["x0"].size()) != dim)
      diag.push_back("x0 has length " + std::to_string(j["x0"].size()) + ", model dimension is " +
                     std::to_string(dim));
  }
  double T = 1.0, dt = 1e-3;
  bool time_ok = true;
  if (j.contains("T")) {
    if (!j["T"].is_number() || !(j["T"].get<double>() > 0)) {
      diag.push_back("T must be a positive number");
      time_ok = false;
    } else {
      T = j["T"].get<double>();
    }
  }
  if (j.contains("dt")) {
    if (!j["dt"].is_number() || !(j["dt"].get<double>() > 0)) {
      diag.push_back("dt must be a positive number");
      time_ok = false;
    } else {
      dt = j["dt"].get<double>();
    }
  }
  if (time_ok) {
    double k = T / dt;
    if (dt > T || std::fabs(k - std::round(k)) > 1e-9 * std::max(1.0, k))
      diag.push_back("T/dt must be a positive integer number of steps");
    else if (k > 1e8)
      diag.push_back("T/dt exceeds 1e8 steps");
  }
  if (j.contains("n_paths") && !(is_int(j["n_paths"]) && j["n_paths"].get<long>() >= 1 &&
                                 j["n_paths"].get<long>() <= 100000000))
    diag.push_back("n_paths must be an integer in [1, 1e8]");
  if (j.contains("seed") && !(j["seed"].is_number_unsigned() ||
                              (j["seed"].is_number_integer() && j["seed"].get<long long>() >= 0)))
    diag.push_back("seed must be a nonnegative integer");
  if (j.contains("threads") && !(is_int(j["threads"]) && j["threads"].get<long>() >= 0 &&
                                 j["threads"].get<long>() <= 1024))
    diag.push_back("threads must be an integer in [0, 1024]");
  if (j.contains("out") && !j["out"].is_string()) diag.push_back("out must be a string");
  if (j.contains("params")) {
    if (!j["params"].is_object()) {
      diag.push_back("params must be an object");
    } else if (!probe.empty()) {
      auto keys = probe_param_keys(probe);
      for (const auto& kv : j["params"].items())
        if (std::find(keys.begin(), keys.end(), kv.key()) == keys.end())
          diag.push_back("unknown params key '" + kv.key() + "' for probe " + probe +
                         (keys.empty() ? std::string(" (takes none)") : "; allowed: " + join(keys)));
      check_params(probe, j["params"], diag);
      if (dim > 0)
        for (const char* k : {"point", "xi"})
          if (j["params"].contains(k) && number_array(j["params"][k]) &&
              static_cast<int>(j["params"][k].size()) != dim)
            diag.push_back(std::string("params.") + k + " has the wrong length for the model");
    }
  }
  return diag;
}

ExperimentConfig parse_config(const Json& j) {
  auto diag = validate_config(j);
  if (!diag.empty()) throw ArgumentError("invalid config:\n  " + join(diag, "\n  "));
  ExperimentConfig c;
  c.probe = j.at("probe").get<std::string>();
  c.model = j.at("model").get<std::string>();
  if (j.contains("model_params")) c.model_params = j["model_params"].get<std::map<std::string, double>>();
  if (j.contains("x0")) c.x0 = j["x0"].get<std::vector<double>>();
  if (j.contains("T")) c.T = j["T"].get<double>();
  if (j.contains("dt")) c.dt = j["dt"].get<double>();
  if (j.contains("n_paths")) c.n_paths = j["n_paths"].get<long>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("threads")) c.threads = j["threads"].get<int>();
  if (j.contains("params")) c.params = j["params"];
  if (j.contains("out")) c.out = j["out"].get<std::string>();
  return c;
}

std::string format_number(double v) { return Json(v).dump(); }

std::string CsvTable::render() const {
  std::string s = join(header, ",") + "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) s += ",";
      s += row[i].is_string() ? row[i].get<std::string>() : row[i].dump();
    }
    s += "\n";
  }
  return s;
}

Json ReportEnvelope::to_json() const {
  Json j;
  j["artifact"] = "hypoflow";
  j["version"] = kVersion;
  j["config"] = config;
  j["payload"] = payload;
  j["counts"] = counts;
  j["csv"] = csv_paths;
  j["wall_time_s"] = wall_time;
  return j;
}

namespace {

struct Ctx {
  ZooEntry entry;
  Vec x0;
  McConfig mc;
  const Json& p;
};

Json counts(long requested, long exploded, long excluded) {
  return {{"paths_requested", requested}, {"exploded", exploded}, {"excluded", excluded}};
}

void probe_check(const Ctx& c, ReportEnvelope& env) {
  const ModelSpec& spec = c.entry.spec;
  int j0 = iget(c.p, "j0", c.entry.expected.j0);
  Vec point = c.p.contains("point") ? to_vec(c.p["point"].get<std::vector<double>>()) : c.x0;
  SpanOptions so;
  so.rel_tol = pget(c.p, "tol", so.rel_tol);
  Hierarchy h = build_hierarchy(spec, j0);
  SpanningReport r = spanning_dimension(h, point, so);
  Mat bbT;
  {
    Mat b(spec.n, spec.d);
    spec.b(point, b);
    bbT = b * b.transpose();
  }
  double lam = lambda_min_bbT(spec, point);
  double scale = std::max(1.0, bbT.trace());
  Json& o = env.payload;
  o["point"] = vec_json(point);
  o["j0"] = r.j0;
  o["spans"] = r.spans;
  o["numerical_rank"] = r.numerical_rank;
  o["m"] = spec.m;
  o["matrix"] = mat_json(r.matrix);
  o["singular_values"] = vec_json(r.singular_values);
  o["modulus"] = r.modulus;
  o["tol"] = r.tol;
  o["rel_tol"] = so.rel_tol;
  o["provenance"] = r.provenance;
  o["finite_difference"] = r.finite_difference;
  o["bbT_lambda_min"] = lam;
  o["bbT_singular"] = lam <= 1e-12 * scale;
  o["expected"] = {{"j0", c.entry.expected.j0}, {"spans", c.entry.expected.spans}};
  CsvTable t{"fields", {"index", "level", "provenance"}, {}};
  for (int i = 0; i < spec.m; ++i) t.header.push_back("v" + std::to_string(i + 1));
  int idx = 0;
  for (std::size_t l = 0; l < h.levels.size(); ++l)
    for (std::size_t k = 0; k < h.levels[l].size(); ++k, ++idx) {
      std::vector<Json> row = {idx, h.levels[l][k].level, "\"" + h.levels[l][k].provenance + "\""};
      for (int i = 0; i < spec.m; ++i) row.push_back(r.matrix(i, idx));
      t.rows.push_back(row);
    }
  env.tables.push_back(t);
  env.counts = counts(0, 0, 0);
}

void probe_constants(const Ctx& c, ReportEnvelope& env) {
  int j0 = iget(c.p, "j0", c.entry.expected.j0);
  double R = pget(c.p, "R", 1.0);
  Sampling s;
  s.n_samples = iget(c.p, "n_samples", s.n_samples);
  s.span.rel_tol = pget(c.p, "tol", s.span.rel_tol);
  s.center = c.x0;
  Hierarchy h = build_hierarchy(c.entry.spec, j0);
  LocalConstants k = local_constants(c.entry.spec, h, R, s);
  Json& o = env.payload;
  o["R"] = k.R;
  o["c"] = k.c;
  o["R1"] = k.R1;
  o["R3"] = k.R3;
  o["C0"] = k.C0;
  o["n_samples"] = k.n_samples;
  o["R1_capped"] = k.R1_capped;
  o["inf_modulus"] = k.inf_modulus;
  o["inf_lambda_bb"] = k.inf_lambda_bb;
  o["center"] = vec_json(k.center);
  o["j0"] = j0;
  o["note"] = k.note;
  env.tables.push_back(CsvTable{"constants",
                                {"R", "c", "R1", "R3", "C0", "n_samples"},
                                {{k.R, k.c, k.R1, k.R3, k.C0, k.n_samples}}});
  env.counts = counts(0, 0, 0);
}

void probe_simulate(const Ctx& c, ReportEnvelope& env) {
  const ModelSpec& spec = c.entry.spec;
  const int N = spec.dim(), K = c.mc.n_steps, P = c.mc.n_paths;
  int traj = std::min(iget(c.p, "trajectories", 1), P);
  std::vector<Vec> finals(P);
  std::vector<char> ok(P, 0);
  std::vector<PathBundle> kept(traj);
  parallel_for(P, resolve_threads(c.mc.threads), [&](int i) {
    NoiseGrid g = sample_noise(spec.d, c.mc.T, K, c.mc.seed, i);
    PathBundle b = integrate_path(spec, c.x0, g);
    if (!b.exploded) {
      finals[i] = b.state(K);
      ok[i] = 1;
    }
    if (i < traj) kept[i] = std::move(b);
  });
  long exploded = std::count(ok.begin(), ok.end(), 0);
  Json means = Json::array();
  CsvTable fin{"final", {"coordinate", "value", "stderr", "n"}, {}};
  for (int a = 0; a < N; ++a) {
    std::vector<double> v;
    for (int i = 0; i < P; ++i)
      if (ok[i]) v.push_back(finals[i][a]);
    MeanStat s = mean_stat(v);
    means.push_back(est(s));
    fin.rows.push_back({a, s.value, s.stderr_, s.n});
  }
  Json& o = env.payload;
  o["x0"] = vec_json(c.x0);
  o["n_steps"] = K;
  o["final_mean"] = means;
  o["explosion_rate"] = double(exploded) / P;
  CsvTable tr{"paths", {"path", "step", "t"}, {}};
  for (int a = 0; a < N; ++a) tr.header.push_back("z" + std::to_string(a + 1));
  const double dt = c.mc.T / K;
  for (int i = 0; i < traj; ++i)
    for (int k = 0; k <= K; ++k) {
      std::vector<Json> row = {i, k, k * dt};
      for (int a = 0; a < N; ++a) row.push_back(kept[i].states(k, a));
      tr.rows.push_back(row);
    }
  env.tables.push_back(fin);
  env.tables.push_back(tr);
  env.counts = counts(P, exploded, exploded);
}

void probe_malliavin(const Ctx& c, ReportEnvelope& env) {
  const ModelSpec& spec = c.entry.spec;
  const int N = spec.dim(), P = c.mc.n_paths;
  struct Row {
    bool ok = false;
    double det, logdet, lmin, lmin_t, resid, sym;
    int pivots;
    Mat M;
  };
  std::vector<Row> rows(P);
  parallel_for(P, resolve_threads(c.mc.threads), [&](int i) {
    PathSample s = simulate_sample(spec, c.x0, c.mc, i);
    if (!s.valid) return;
    Row& r = rows[i];
    r.ok = true;
    r.det = s.rec.det_M;
    r.logdet = s.rec.logdet_M.log_abs;
    r.lmin = s.rec.lambda_min();
    r.lmin_t = s.rec.eigenvalues_tilde[0];
    r.resid = s.rec.factorization_residual;
    r.sym = s.rec.symmetry_error;
    r.pivots = s.rec.ldlt_nonpositive_pivots;
    r.M = s.rec.M;
  });
  std::vector<double> det, logdet, lmin, lmin_t;
  double max_resid = 0.0, max_sym = 0.0;
  long pivot_paths = 0, exploded = 0;
  CsvTable t{"paths",
             {"path", "det_M", "logdet_M", "lambda_min_M", "lambda_min_M_tilde",
              "factorization_residual"},
             {}};
  for (int i = 0; i < P; ++i) {
    const Row& r = rows[i];
    if (!r.ok) {
      ++exploded;
      continue;
    }
    det.push_back(r.det);
    logdet.push_back(r.logdet);
    lmin.push_back(r.lmin);
    lmin_t.push_back(r.lmin_t);
    max_resid = std::max(max_resid, r.resid);
    max_sym = std::max(max_sym, r.sym);
    pivot_paths += r.pivots > 0;
    t.rows.push_back({i, r.det, r.logdet, r.lmin, r.lmin_t, r.resid});
  }
  Json Mmean = Json::array();
  for (int a = 0; a < N; ++a) {
    Json row = Json::array();
    for (int b = 0; b < N; ++b) {
      std::vector<double> v;
      for (const Row& r : rows)
        if (r.ok) v.push_back(r.M(a, b));
      row.push_back(est(mean_stat(v)));
    }
    Mmean.push_back(row);
  }
  Json& o = env.payload;
  o["x0"] = vec_json(c.x0);
  o["n_steps"] = c.mc.n_steps;
  o["det_M"] = est(mean_stat(det));
  o["logdet_M"] = est(mean_stat(logdet));
  o["lambda_min_M"] = est(mean_stat(lmin));
  o["lambda_min_M_tilde"] = est(mean_stat(lmin_t));
  o["lambda_min_M_min"] = lmin.empty() ? 0.0 : *std::min_element(lmin.begin(), lmin.end());
  o["M_mean"] = Mmean;
  o["max_factorization_residual"] = max_resid;
  o["max_symmetry_error"] = max_sym;
  o["ldlt_nonpositive_pivot_paths"] = pivot_paths;
  env.tables.push_back(CsvTable{"summary",
                                {"quantity", "value", "stderr", "n"},
                                {}});
  for (const char* q : {"det_M", "logdet_M", "lambda_min_M", "lambda_min_M_tilde"})
    env.tables.back().rows.push_back({q, o[q]["value"], o[q]["stderr"], o[q]["n"]});
  env.tables.push_back(t);
  env.counts = counts(P, exploded, exploded);
}

void probe_tail(const Ctx& c, ReportEnvelope& env) {
  std::vector<double> eps = c.p.contains("eps") ? c.p["eps"].get<std::vector<double>>()
                                                : std::vector<double>{1e-2, 1e-3, 1e-4};
  int dirs = iget(c.p, "directions", 64);
  TailReport r = tail_probe(c.entry.spec, c.x0, eps, dirs, c.mc);
  Json rows = Json::array();
  CsvTable t{"tail",
             {"eps", "value", "stderr", "n", "isotonic", "wilson_lo", "wilson_hi", "sampled"},
             {}};
  for (std::size_t i = 0; i < eps.size(); ++i) {
    double p = r.raw[i];
    double se = r.n_paths ? std::sqrt(p * (1 - p) / r.n_paths) : 0.0;
    rows.push_back({{"eps", eps[i]},
                    {"value", p},
                    {"stderr", se},
                    {"n", r.n_paths},
                    {"count", r.counts[i]},
                    {"isotonic", r.isotonic[i]},
                    {"wilson", {r.wilson[i].lo, r.wilson[i].hi}},
                    {"sampled", r.sampled[i]}});
    t.rows.push_back({eps[i], p, se, r.n_paths, r.isotonic[i], r.wilson[i].lo, r.wilson[i].hi,
                      r.sampled[i]});
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < eps.size(); ++i) decreasing = decreasing && r.raw[i] < r.raw[i - 1];
  Json& o = env.payload;
  o["x0"] = vec_json(c.x0);
  o["rows"] = rows;
  o["strictly_decreasing"] = decreasing;
  o["slope"] = r.slope;
  o["slope_points"] = r.slope_points;
  o["directions_sampled"] = r.directions_sampled;
  o["lambda_min_M_tilde"] = {{"min", r.lambda_min_min},
                             {"median", r.lambda_min_median},
                             {"max", r.lambda_min_max}};
  o["note"] = r.note;
  env.tables.push_back(t);
  env.counts = counts(c.mc.n_paths, r.excluded, r.excluded);
}

void probe_moments(const Ctx& c, ReportEnvelope& env) {
  std::vector<double> ps =
      c.p.contains("p") ? c.p["p"].get<std::vector<double>>() : std::vector<double>{1.0, 2.0};
  std::vector<int> sched;
  if (c.p.contains("schedule"))
    sched = c.p["schedule"].get<std::vector<int>>();
  else if (c.mc.n_paths >= 10)
    sched = {c.mc.n_paths / 10, c.mc.n_paths};
  else
    sched = {c.mc.n_paths};
  MomentReport r = inverse_moment_probe(c.entry.spec, c.x0, ps, sched, c.mc);
  Json rows = Json::array();
  CsvTable t{"moments",
             {"p", "n_samples", "value", "stderr", "n", "excluded_nonpositive",
              "excluded_exploded", "numerically_singular"},
             {}};
  for (std::size_t a = 0; a < ps.size(); ++a)
    for (std::size_t s = 0; s < sched.size(); ++s) {
      const MeanStat& e = r.estimates[a][s];
      rows.push_back({{"p", ps[a]},
                      {"n_samples", sched[s]},
                      {"estimate", est(e)},
                      {"excluded_nonpositive", r.excluded_nonpositive[s]},
                      {"excluded_exploded", r.excluded_exploded[s]},
                      {"numerically_singular", r.numerically_singular[s]}});
      t.rows.push_back({ps[a], sched[s], e.value, e.stderr_, e.n, r.excluded_nonpositive[s],
                        r.excluded_exploded[s], r.numerically_singular[s]});
    }
  Json& o = env.payload;
  o["x0"] = vec_json(c.x0);
  o["rows"] = rows;
  o["stability_ratio"] = r.stability_ratio;
  o["min_log_det"] = r.min_log_det;
  env.tables.push_back(t);
  long expl = r.excluded_exploded.back();
  env.counts = counts(sched.back(), expl, expl + r.excluded_nonpositive.back());
}

TestFunction test_function_from(const Json& p, int N, const char* def) {
  std::string name = p.contains("f") ? p["f"].get<std::string>() : std::string(def);
  std::map<std::string, double> fp;
  if (p.contains("f_params")) fp = p["f_params"].get<std::map<std::string, double>>();
  return make_test_function(name, N, fp);
}

Json f_json(const TestFunction& f, const Json& p) {
  return {{"name", f.name},
          {"params", p.contains("f_params") ? p["f_params"] : Json::object()},
          {"sup_norm", f.sup_norm}};
}

void probe_gradient(const Ctx& c, ReportEnvelope& env) {
  const ModelSpec& spec = c.entry.spec;
  const int N = spec.dim();
  TestFunction f = test_function_from(c.p, N, "indicator-halfspace");
  Vec xi = c.p.contains("xi") ? to_vec(c.p["xi"].get<std::vector<double>>()) : Vec::Unit(N, 0);
  std::string estimator = c.p.contains("estimator") ? c.p["estimator"].get<std::string>() : "malliavin";
  GradientEstimate g;
  Json& o = env.payload;
  if (estimator == "malliavin") {
    MalliavinGradientOptions opt;
    opt.floor_rel = pget(c.p, "floor_rel", opt.floor_rel);
    MalliavinGradientReport r = malliavin_gradient(spec, c.x0, f, std::vector<Vec>{xi}, c.mc, opt);
    g = r.estimates.front();
    o["below_floor"] = r.below_floor;
    o["bump_reruns"] = r.bump_reruns;
    o["floor_rel"] = opt.floor_rel;
    env.counts = counts(c.mc.n_paths, r.exploded, g.excluded);
  } else if (estimator == "pathwise") {
    g = pathwise_gradient(spec, c.x0, f, xi, c.mc);
    env.counts = counts(c.mc.n_paths, g.excluded, g.excluded);
  } else {
    double h = pget(c.p, "h", 1e-2);
    g = fd_gradient(spec, c.x0, f, xi, h, c.mc);
    o["h"] = h;
    env.counts = counts(c.mc.n_paths, g.excluded, g.excluded);
  }
  o["x0"] = vec_json(c.x0);
  o["f"] = f_json(f, c.p);
  o["xi"] = vec_json(xi);
  o["estimator"] = g.estimator;
  o["estimate"] = {{"value", g.value}, {"stderr", g.stderr_}, {"n", g.n_paths}};
  CsvTable t{"gradient", {"estimator"}, {}};
  for (int a = 0; a < N; ++a) t.header.push_back("xi" + std::to_string(a + 1));
  for (const char* h : {"value", "stderr", "n"}) t.header.push_back(h);
  std::vector<Json> row = {g.estimator};
  for (int a = 0; a < N; ++a) row.push_back(xi[a]);
  row.push_back(g.value);
  row.push_back(g.stderr_);
  row.push_back(g.n_paths);
  t.rows.push_back(row);
  env.tables.push_back(t);
}

void probe_feller(const Ctx& c, ReportEnvelope& env) {
  const ModelSpec& spec = c.entry.spec;
  const int N = spec.dim();
  TestFunction f = test_function_from(c.p, N, "indicator-halfspace");
  std::vector<double> radii = c.p.contains("radii") ? c.p["radii"].get<std::vector<double>>()
                                                    : std::vector<double>{0.5, 0.25, 0.1, 0.05};
  double l = pget(c.p, "l", 10.0);
  FellerProbe r = feller_probe(spec, c.x0, f, radii, l, c.mc);
  CsvTable t{"feller", {"model", "direction", "radius", "diff", "stderr", "n"}, {}};
  auto rows_json = [&](const std::vector<FellerRow>& rows, const std::string& tag, long n) {
    Json a = Json::array();
    for (const FellerRow& w : rows) {
      a.push_back({{"direction", w.direction},
                   {"radius", w.radius},
                   {"diff", {{"value", w.diff}, {"stderr", w.stderr_}, {"n", n}}},
                   {"abs_diff", w.abs_diff}});
      t.rows.push_back({tag, w.direction, w.radius, w.diff, w.stderr_, n});
    }
    return a;
  };
  Json& o = env.payload;
  long n_main = r.flagged ? c.mc.n_paths : r.n_paths;
  o["x0"] = vec_json(c.x0);
  o["f"] = f_json(f, c.p);
  o["radii"] = radii;
  o["l"] = l;
  o["model_used"] = r.model_used;
  o["flagged"] = r.flagged;
  o["explosion_rate"] = r.explosion_rate;
  o["rows"] = rows_json(r.rows, r.model_used, n_main);
  o["rows_truncated"] = rows_json(r.rows_truncated, "truncated", c.mc.n_paths);
  Json dirs = Json::array();
  for (const FellerDirection& d : r.directions)
    dirs.push_back({{"e", vec_json(d.e)},
                    {"decreasing", d.decreasing},
                    {"limit", {{"value", d.intercept}, {"stderr", d.intercept_stderr}, {"n", n_main}}}});
  o["directions"] = dirs;
  o["localization"] = {{"p_original", est(r.p_original)},
                       {"p_truncated", est(r.p_truncated)},
                       {"p_difference", est(r.p_difference)},
                       {"exit_frequency", {{"value", r.exit_freq}, {"wilson", {r.exit_ci.lo, r.exit_ci.hi}}, {"n", c.mc.n_paths}}},
                       {"f_oscillation", r.f_bound},
                       {"inequality_holds", r.truncation_inequality},
                       {"per_path_violations", r.per_path_violations},
                       {"coincidence_violations", r.coincidence_violations}};
  env.tables.push_back(t);
  long expl = std::lround(r.explosion_rate * c.mc.n_paths);
  env.counts = counts(c.mc.n_paths, expl, r.excluded);
}

}  // namespace

ReportEnvelope run(const ExperimentConfig& cfg) {
  ReportEnvelope env;
  env.config = parse_config(cfg.to_json()).to_json();  // revalidates the in-memory config
  auto t0 = std::chrono::steady_clock::now();
  ZooEntry entry = make_zoo(cfg.model, cfg.model_params);
  Vec x0 = cfg.x0.empty() ? entry.expected.default_x0 : to_vec(cfg.x0);
  McConfig mc;
  mc.T = cfg.T;
  mc.n_steps = cfg.n_steps();
  mc.n_paths = static_cast<int>(cfg.n_paths);
  mc.seed = cfg.seed;
  mc.threads = resolve_threads(cfg.threads);
  Ctx c{entry, x0, mc, cfg.params};
  env.payload["probe"] = cfg.probe;
  env.payload["model"] = entry.spec.name;
  env.payload["citation"] = entry.citation;
  if (cfg.probe == "check") probe_check(c, env);
  else if (cfg.probe == "constants") probe_constants(c, env);
  else if (cfg.probe == "simulate") probe_simulate(c, env);
  else if (cfg.probe == "malliavin") probe_malliavin(c, env);
  else if (cfg.probe == "tail") probe_tail(c, env);
  else if (cfg.probe == "moments") probe_moments(c, env);
  else if (cfg.probe == "gradient") probe_gradient(c, env);
  else if (cfg.probe == "feller") probe_feller(c, env);
  else throw ArgumentError("unknown probe '" + cfg.probe + "'");
  env.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return env;
}

void write_outputs(ReportEnvelope& env, const std::string& out) {
  namespace fs = std::filesystem;
  fs::path p(out);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  env.csv_paths.clear();
  for (const CsvTable& t : env.tables) {
    fs::path cp = p.parent_path() / (p.stem().string() + "_" + t.name + ".csv");
    std::ofstream f(cp);
    if (!f) throw ArgumentError("cannot write " + cp.string());
    f << t.render();
    env.csv_paths.push_back(cp.string());
  }
  std::ofstream f(p);
  if (!f) throw ArgumentError("cannot write " + out);
  f << env.to_json().dump(2) << "\n";
}

int run_and_report(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    ReportEnvelope env = run(cfg);
    if (cfg.out.empty()) {
      out << env.to_json().dump(2) << "\n";
    } else {
      write_outputs(env, cfg.out);
      out << cfg.out << "\n";
    }
    return 0;
  } catch (const HypothesisViolation& e) {
    err << "hypothesis violation: " << e.what() << "\n";
    return 2;
  } catch (const NumericalFailure& e) {
    err << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const Json::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace hypoflow
