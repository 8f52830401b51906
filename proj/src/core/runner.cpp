#include "core/runner.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <thread>

#include "core/equilibria.hpp"

namespace viraldyn {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ParseError("config: " + path + ": " + what);
}

void require_keys(const json& obj, const std::string& path,
                  const std::vector<std::string>& allowed) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const auto& k : allowed) ok = ok || k == key;
    if (!ok) fail(path.empty() ? key : path + "." + key, "unknown key");
  }
}

double get_number(const json& obj, const std::string& path,
                  const std::string& key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_number())
    fail(path + "." + key, "expected a number");
  return obj.at(key).get<double>();
}

std::string join_path(const std::string& base, const std::string& leaf) {
  if (leaf.empty() || base.empty() || fs::path(leaf).is_absolute())
    return leaf;
  return (fs::path(base) / leaf).string();
}

void parse_params(const json& obj, ModelParams& p) {
  require_keys(obj, "params",
               {"lambda", "mu", "beta0", "beta1", "delta", "omega", "c", "b",
                "a", "sigma", "eta"});
  p.lambda = get_number(obj, "params", "lambda", p.lambda);
  p.mu = get_number(obj, "params", "mu", p.mu);
  p.beta0 = get_number(obj, "params", "beta0", p.beta0);
  p.beta1 = get_number(obj, "params", "beta1", p.beta1);
  p.delta = get_number(obj, "params", "delta", p.delta);
  p.omega = get_number(obj, "params", "omega", p.omega);
  p.c = get_number(obj, "params", "c", p.c);
  p.b = get_number(obj, "params", "b", p.b);
  p.a = get_number(obj, "params", "a", p.a);
  p.sigma = get_number(obj, "params", "sigma", p.sigma);
  if (obj.contains("eta")) {
    if (!obj.at("eta").is_number()) fail("params.eta", "expected a number");
    p.eta = obj.at("eta").get<double>();
  }
}

void parse_integration(const json& obj, IntegrationOptions& opts) {
  require_keys(obj, "integration",
               {"t_start", "t_end", "rel_tol", "abs_tol", "max_step",
                "dense_output_dt", "extinction"});
  opts.t_start = get_number(obj, "integration", "t_start", opts.t_start);
  opts.t_end = get_number(obj, "integration", "t_end", opts.t_end);
  opts.rel_tol = get_number(obj, "integration", "rel_tol", opts.rel_tol);
  opts.abs_tol = get_number(obj, "integration", "abs_tol", opts.abs_tol);
  opts.max_step = get_number(obj, "integration", "max_step", opts.max_step);
  opts.dense_output_dt =
      get_number(obj, "integration", "dense_output_dt", opts.dense_output_dt);
  if (obj.contains("extinction")) {
    const json& ext = obj.at("extinction");
    if (!ext.is_object())
      fail("integration.extinction", "expected an object");
    require_keys(ext, "integration.extinction", {"enabled", "threshold"});
    if (ext.contains("enabled")) {
      if (!ext.at("enabled").is_boolean())
        fail("integration.extinction.enabled", "expected a boolean");
      opts.extinction_enabled = ext.at("enabled").get<bool>();
    }
    opts.extinction_threshold =
        get_number(ext, "integration.extinction", "threshold",
                   opts.extinction_threshold);
  }
}

void parse_sweep(const json& obj, SweepConfig& sweep) {
  require_keys(obj, "sweep", {"axis", "values"});
  if (obj.contains("axis")) {
    if (!obj.at("axis").is_string()) fail("sweep.axis", "expected a string");
    sweep.axis = obj.at("axis").get<std::string>();
  }
  if (obj.contains("values")) {
    if (!obj.at("values").is_array())
      fail("sweep.values", "expected an array of numbers");
    for (const auto& v : obj.at("values")) {
      if (!v.is_number()) fail("sweep.values", "expected an array of numbers");
      sweep.values.push_back(v.get<double>());
    }
  }
}

void parse_fit(const json& obj, const std::string& base_dir, FitConfig& fit) {
  require_keys(obj, "fit",
               {"data", "free", "bounds", "weight_a", "n_starts", "max_evals",
                "detection_floor"});
  if (obj.contains("data")) {
    if (!obj.at("data").is_string()) fail("fit.data", "expected a string");
    fit.data_path = join_path(base_dir, obj.at("data").get<std::string>());
  }
  if (obj.contains("free")) {
    if (!obj.at("free").is_array())
      fail("fit.free", "expected an array of strings");
    for (const auto& v : obj.at("free")) {
      if (!v.is_string()) fail("fit.free", "expected an array of strings");
      fit.free.push_back(v.get<std::string>());
    }
  }
  if (obj.contains("bounds")) {
    if (!obj.at("bounds").is_object()) fail("fit.bounds", "expected an object");
    for (const auto& [key, value] : obj.at("bounds").items()) {
      if (!value.is_array() || value.size() != 2 || !value[0].is_number() ||
          !value[1].is_number())
        fail("fit.bounds." + key, "expected [lo, hi] numbers");
      fit.bounds[key] = {value[0].get<double>(), value[1].get<double>()};
    }
  }
  fit.a_weight = get_number(obj, "fit", "weight_a", fit.a_weight);
  fit.detection_floor =
      get_number(obj, "fit", "detection_floor", fit.detection_floor);
  if (obj.contains("n_starts")) {
    if (!obj.at("n_starts").is_number_integer())
      fail("fit.n_starts", "expected an integer");
    fit.n_starts = obj.at("n_starts").get<int>();
  }
  if (obj.contains("max_evals")) {
    if (!obj.at("max_evals").is_number_integer())
      fail("fit.max_evals", "expected an integer");
    fit.max_evals = obj.at("max_evals").get<int>();
  }
}

json state_to_json(const State& s, bool with_l) {
  json out = {{"t", s.t}, {"T", s.T}, {"I", s.I}, {"V", s.V}, {"A", s.A}};
  if (with_l) out["L"] = s.L.value_or(0.0);
  return out;
}

json summary_to_json(const Trajectory& traj, bool with_l) {
  const SummaryMetrics& m = traj.summary;
  json events = json::array();
  for (const auto& e : traj.events)
    events.push_back({{"t", e.t}, {"kind", "Extinction"}});
  return {{"peak_v", m.peak_v},
          {"t_peak_v", m.t_peak_v},
          {"min_t", m.min_t},
          {"t_min_t", m.t_min_t},
          {"target_loss_fraction", m.target_loss_fraction},
          {"peak_a", m.peak_a},
          {"final_state", state_to_json(m.final_state, with_l)},
          {"events", events}};
}

json thresholds_to_json(const DerivedThresholds& d) {
  return {{"r0", d.r0},
          {"v_t", d.v_t},
          {"v_is", d.v_is},
          {"w", d.w},
          {"zeta", d.zeta},
          {"r0_above_one", d.r0_above_one},
          {"assumption1", d.assumption1},
          {"assumption2", d.assumption2}};
}

json stability_to_json(const StabilityReport& r) {
  json jac = json::array();
  for (int i = 0; i < 4; ++i) {
    json row = json::array();
    for (int j = 0; j < 4; ++j) row.push_back(r.jacobian(i, j));
    jac.push_back(row);
  }
  json eig = json::array();
  for (const auto& ev : r.eigenvalues)
    eig.push_back({{"re", ev.real()}, {"im", ev.imag()}});
  return {{"jacobian", jac},
          {"charpoly",
           {{"g4", r.charpoly.g4},
            {"g3", r.charpoly.g3},
            {"g2", r.charpoly.g2},
            {"g1", r.charpoly.g1},
            {"g0", r.charpoly.g0}}},
          {"rh_pass", r.rh_pass},
          {"rh_margins",
           {{"g4", r.rh_margins.coeff[0]},
            {"g3", r.rh_margins.coeff[1]},
            {"g2", r.rh_margins.coeff[2]},
            {"g1", r.rh_margins.coeff[3]},
            {"g0", r.rh_margins.coeff[4]},
            {"hurwitz", r.rh_margins.hurwitz}}},
          {"eigenvalues", eig},
          {"classification", classification_name(r.classification)}};
}

json params_to_json(const ModelParams& p) {
  json out = {{"lambda", p.lambda}, {"mu", p.mu},       {"beta0", p.beta0},
              {"beta1", p.beta1},   {"delta", p.delta}, {"omega", p.omega},
              {"c", p.c},           {"b", p.b},         {"a", p.a},
              {"sigma", p.sigma}};
  if (p.eta) out["eta"] = *p.eta;
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path);
}

void write_json(const std::string& path, const json& doc) {
  write_text(path, doc.dump(2) + "\n");
}

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17e", v);
  return buf;
}

/// Equilibrium points that exist for the given parameters, with the reason
/// when one does not apply.
struct EquilibriumSlot {
  std::string name;
  bool applicable = false;
  std::string reason;
  EquilibriumPoint point{};
};

std::vector<EquilibriumSlot> all_equilibria(const ModelParams& p) {
  std::vector<EquilibriumSlot> slots;
  const auto attempt = [&](const std::string& name, auto&& op) {
    EquilibriumSlot slot;
    slot.name = name;
    try {
      slot.point = op();
      slot.applicable = true;
    } catch (const DomainError& e) {
      slot.reason = e.what();
    }
    slots.push_back(std::move(slot));
  };
  attempt("trivial", [&] { return trivial_equilibrium(p); });
  attempt("immunosuppression",
          [&] { return immunosuppression_equilibrium(p); });
  attempt("no_ade", [&] { return no_ade_equilibrium(p); });
  attempt("ade", [&] { return ade_equilibrium(p); });
  return slots;
}

int worker_count(std::size_t jobs) {
  int cap = 0;
  if (const char* env = std::getenv("VIRALDYN_WORKERS")) {
    cap = std::atoi(env);
    if (cap < 1) cap = 1;
  } else {
    cap = static_cast<int>(std::thread::hardware_concurrency());
    if (cap < 1) cap = 1;
  }
  return static_cast<int>(std::min<std::size_t>(jobs, cap));
}

void run_simulate(const RunConfig& cfg, const std::string& out_dir) {
  const Trajectory traj =
      integrate(cfg.params, cfg.variant, cfg.init, cfg.integration);
  write_trajectory_csv(traj, cfg.variant,
                       (fs::path(out_dir) / "trajectory.csv").string());
  write_json((fs::path(out_dir) / "summary.json").string(),
             summary_to_json(traj, cfg.variant == ModelVariant::Latent));
}

void run_equilibria(const RunConfig& cfg, const std::string& out_dir) {
  json eq;
  for (const auto& slot : all_equilibria(cfg.params)) {
    if (slot.applicable)
      eq[slot.name] = {{"state", state_to_json(slot.point.state, false)},
                       {"residual", slot.point.residual}};
    else
      eq[slot.name] = {{"status", "not applicable"}, {"reason", slot.reason}};
  }
  const json doc = {{"thresholds",
                     thresholds_to_json(derived_thresholds(cfg.params))},
                    {"equilibria", eq}};
  write_json((fs::path(out_dir) / "equilibria.json").string(), doc);
}

void run_stability(const RunConfig& cfg, const std::string& out_dir) {
  json reports;
  for (const auto& slot : all_equilibria(cfg.params)) {
    if (!slot.applicable) {
      reports[slot.name] = {{"status", "not applicable"},
                            {"reason", slot.reason}};
      continue;
    }
    const StabilityReport r = classify_equilibrium(cfg.params, slot.point);
    json entry = stability_to_json(r);
    entry["state"] = state_to_json(slot.point.state, false);
    entry["residual"] = slot.point.residual;
    reports[slot.name] = entry;
  }
  write_json((fs::path(out_dir) / "stability.json").string(),
             {{"thresholds", thresholds_to_json(derived_thresholds(cfg.params))},
              {"equilibria", reports}});
}

void run_fit(const RunConfig& cfg, const std::string& out_dir,
             std::uint64_t seed) {
  if (cfg.fit.data_path.empty())
    throw ParseError("config: fit.data: required for the fit command");
  ObservationSet obs = read_observations_csv(cfg.fit.data_path);
  obs.detection_floor = cfg.fit.detection_floor;

  FitSpec spec;
  spec.free = cfg.fit.free;
  for (const auto& [name, natural] : cfg.fit.bounds) {
    if (!(natural[0] > 0.0) || !(natural[1] > 0.0))
      throw ParseError("config: fit.bounds." + name +
                       ": bounds must be positive (log-space search)");
    spec.bounds[name] = {std::log10(natural[0]), std::log10(natural[1])};
  }
  spec.base = cfg.params;
  spec.init = cfg.init;
  spec.a_weight = cfg.fit.a_weight;
  spec.n_starts = cfg.fit.n_starts;
  spec.max_evals = cfg.fit.max_evals;
  spec.integration = cfg.integration;

  const FitResult result = fit(obs, spec, seed);

  json doc = {{"params", params_to_json(result.params)},
              {"init", state_to_json(result.init, false)},
              {"loss", result.loss},
              {"n_evals", result.n_evals},
              {"converged", result.converged},
              {"trace", result.trace}};
  write_json((fs::path(out_dir) / "fit.json").string(), doc);

  double max_t = cfg.integration.t_start;
  for (const auto& o : obs.v_obs) max_t = std::max(max_t, o.t);
  for (const auto& o : obs.a_obs) max_t = std::max(max_t, o.t);
  IntegrationOptions opts = cfg.integration;
  if (max_t > opts.t_start) opts.t_end = max_t;
  const Trajectory traj =
      integrate(result.params, ModelVariant::Basic, result.init, opts);
  write_trajectory_csv(traj, ModelVariant::Basic,
                       (fs::path(out_dir) / "fit_trajectory.csv").string());
}

void run_sweep(const RunConfig& cfg, const std::string& out_dir) {
  SweepConfig sweep = cfg.sweep;
  if (sweep.values.empty()) {
    if (sweep.axis == "b")
      sweep.values = {0.13, 0.26, 0.52, 1.04};
    else if (sweep.axis == "beta1")
      sweep.values = {0.0, 1e-8, 1e-7, 1e-6};
    else
      throw ParseError("config: sweep.values: required for axis " +
                       sweep.axis);
  }
  for (double value : sweep.values) {
    ModelParams p = cfg.params;
    set_param_by_name(p, sweep.axis, value);
    const ValidationReport report = validate_params(p, cfg.variant);
    for (const auto& issue : report.issues)
      if (issue.fatal)
        throw ParseError("config: sweep.values: value " +
                         std::to_string(value) + " is not admissible for " +
                         sweep.axis + " (" + issue.message + ")");
  }

  struct Row {
    double value = 0.0;
    SummaryMetrics summary{};
    std::string classification;
  };
  std::vector<Row> rows(sweep.values.size());
  std::vector<std::exception_ptr> errors(sweep.values.size());
  std::atomic<std::size_t> next{0};

  const auto work = [&]() {
    while (true) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= sweep.values.size()) return;
      try {
        const double value = sweep.values[idx];
        ModelParams p = cfg.params;
        set_param_by_name(p, sweep.axis, value);

        const Trajectory traj =
            integrate(p, cfg.variant, cfg.init, cfg.integration);
        char name[96];
        std::snprintf(name, sizeof(name), "sweep_%s_%.3e.csv",
                      sweep.axis.c_str(), value);
        write_trajectory_csv(traj, cfg.variant,
                             (fs::path(out_dir) / name).string());

        Row row;
        row.value = value;
        row.summary = traj.summary;
        try {
          const EquilibriumPoint eq =
              p.beta1 > 0.0 ? ade_equilibrium(p) : no_ade_equilibrium(p);
          row.classification =
              classification_name(classify_equilibrium(p, eq).classification);
        } catch (const DomainError&) {
          row.classification = "n/a";
        }
        rows[idx] = std::move(row);
      } catch (...) {
        errors[idx] = std::current_exception();
      }
    }
  };

  const int n_workers = worker_count(sweep.values.size());
  std::vector<std::thread> pool;
  for (int i = 1; i < n_workers; ++i) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  for (const auto& err : errors)
    if (err) std::rethrow_exception(err);

  std::string table = "value,peak_v,t_peak_v,min_t,target_loss_fraction,"
                      "peak_a,classification\n";
  for (const auto& row : rows) {
    table += format_value(row.value) + "," + format_value(row.summary.peak_v) +
             "," + format_value(row.summary.t_peak_v) + "," +
             format_value(row.summary.min_t) + "," +
             format_value(row.summary.target_loss_fraction) + "," +
             format_value(row.summary.peak_a) + "," + row.classification +
             "\n";
  }
  write_text((fs::path(out_dir) / "sweep_summary.csv").string(), table);
}

}  // namespace

RunConfig parse_config(const std::string& json_text,
                       const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("config: top level must be an object");
  require_keys(doc, "",
               {"params", "variant", "init", "integration", "sweep", "fit",
                "out_dir"});

  RunConfig cfg;
  if (doc.contains("params")) {
    if (!doc.at("params").is_object()) fail("params", "expected an object");
    parse_params(doc.at("params"), cfg.params);
  }

  if (doc.contains("variant")) {
    if (!doc.at("variant").is_string()) fail("variant", "expected a string");
    const std::string v = doc.at("variant").get<std::string>();
    if (v == "basic")
      cfg.variant = ModelVariant::Basic;
    else if (v == "latent")
      cfg.variant = ModelVariant::Latent;
    else
      fail("variant", "must be \"basic\" or \"latent\"");
  }

  // Baseline initial state: virus-free target-cell level plus the
  // calibrated inoculum.
  cfg.init.t = 0.0;
  cfg.init.T = cfg.params.lambda / cfg.params.mu;
  cfg.init.I = 372.11;
  cfg.init.V = 994.84;
  cfg.init.A = 1.17;
  if (doc.contains("init")) {
    if (!doc.at("init").is_object()) fail("init", "expected an object");
    const json& init = doc.at("init");
    require_keys(init, "init", {"T", "I", "V", "A", "L"});
    cfg.init.T = get_number(init, "init", "T", cfg.init.T);
    cfg.init.I = get_number(init, "init", "I", cfg.init.I);
    cfg.init.V = get_number(init, "init", "V", cfg.init.V);
    cfg.init.A = get_number(init, "init", "A", cfg.init.A);
    if (init.contains("L")) {
      if (!init.at("L").is_number()) fail("init.L", "expected a number");
      cfg.init.L = init.at("L").get<double>();
    }
  }
  if (cfg.variant == ModelVariant::Latent && !cfg.init.L) cfg.init.L = 0.0;
  if (cfg.variant == ModelVariant::Basic && cfg.init.L)
    fail("init.L", "only valid for the latent variant");

  if (doc.contains("integration")) {
    if (!doc.at("integration").is_object())
      fail("integration", "expected an object");
    parse_integration(doc.at("integration"), cfg.integration);
  }
  if (doc.contains("sweep")) {
    if (!doc.at("sweep").is_object()) fail("sweep", "expected an object");
    parse_sweep(doc.at("sweep"), cfg.sweep);
  }
  if (doc.contains("fit")) {
    if (!doc.at("fit").is_object()) fail("fit", "expected an object");
    parse_fit(doc.at("fit"), base_dir, cfg.fit);
  }
  if (doc.contains("out_dir")) {
    if (!doc.at("out_dir").is_string()) fail("out_dir", "expected a string");
    cfg.out_dir = join_path(base_dir, doc.at("out_dir").get<std::string>());
  }

  // Cross-field validation with config-path error messages.
  const ValidationReport report = validate_params(cfg.params, cfg.variant);
  for (const auto& issue : report.issues)
    if (issue.fatal) fail("params." + issue.field, issue.message);
  try {
    validate_options(cfg.integration);
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  try {
    make_state(cfg.init.t, cfg.init.T, cfg.init.I, cfg.init.V, cfg.init.A,
               cfg.init.L);
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("config: init: ") + e.what());
  }
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_config(text, fs::path(path).parent_path().string());
}

void execute(const std::string& command, const RunConfig& cfg,
             const std::string& out_dir, std::uint64_t seed) {
  const std::string dir = out_dir.empty() ? cfg.out_dir : out_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir);

  if (command == "simulate")
    run_simulate(cfg, dir);
  else if (command == "equilibria")
    run_equilibria(cfg, dir);
  else if (command == "stability")
    run_stability(cfg, dir);
  else if (command == "fit")
    run_fit(cfg, dir, seed);
  else if (command == "sweep")
    run_sweep(cfg, dir);
  else
    throw std::invalid_argument("unknown command: " + command);
}

void write_trajectory_csv(const Trajectory& traj, ModelVariant variant,
                          const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const bool with_l = variant == ModelVariant::Latent;
  out << (with_l ? "t,T,I,V,A,L\n" : "t,T,I,V,A\n");
  for (const auto& s : traj.points) {
    out << format_value(s.t) << ',' << format_value(s.T) << ','
        << format_value(s.I) << ',' << format_value(s.V) << ','
        << format_value(s.A);
    if (with_l) out << ',' << format_value(s.L.value_or(0.0));
    out << '\n';
  }
  for (const auto& e : traj.events)
    out << "#event,Extinction," << format_value(e.t) << '\n';
  if (!out) throw IoError("failed writing " + path);
}

std::string classification_name(Classification c) {
  switch (c) {
    case Classification::Stable:
      return "Stable";
    case Classification::Unstable:
      return "Unstable";
    case Classification::Marginal:
      return "Marginal";
  }
  return "Marginal";
}

}  // namespace viraldyn
