#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "viraldyn.h"

namespace fs = std::filesystem;

namespace {

std::string scratch(const std::string& name) {
  const std::string dir = "capi_test_" + name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

vd_params* counterexample_params() {
  vd_params* p = vd_params_create();
  REQUIRE(p != nullptr);
  vd_params_set(p, "a", 1.0);
  vd_params_set(p, "sigma", 1.0);
  vd_params_set(p, "c", 1.0);
  vd_params_set(p, "b", 1.0);
  vd_params_set(p, "omega", 1.0);
  vd_params_set(p, "mu", 1e-3);
  vd_params_set(p, "delta", 2.0);
  vd_params_set(p, "lambda", 4.0);
  vd_params_set(p, "beta0", 0.0011);
  vd_params_set(p, "beta1", 0.01188);
  return p;
}

vd_state baseline_init() {
  vd_state s{};
  s.t = 0.0;
  s.T = 1e6;
  s.I = 372.11;
  s.V = 994.84;
  s.A = 1.17;
  s.has_L = 0;
  return s;
}

}  // namespace

TEST_CASE("parameter handles support set, get, clone and validation") {
  vd_params* p = vd_params_create();
  REQUIRE(p != nullptr);

  double v = 0.0;
  CHECK(vd_params_get(p, "beta0", &v) == VD_OK);
  CHECK(v == 1.28e-6);

  CHECK(vd_params_set(p, "delta", 20.0) == VD_OK);
  CHECK(vd_params_get(p, "delta", &v) == VD_OK);
  CHECK(v == 20.0);

  CHECK(vd_params_set(p, "warp", 1.0) == VD_EINVAL);
  CHECK(std::strlen(vd_last_error()) > 0);
  CHECK(vd_params_get(p, "eta", &v) == VD_EINVAL);

  vd_params* q = vd_params_clone(p);
  REQUIRE(q != nullptr);
  CHECK(vd_params_get(q, "delta", &v) == VD_OK);
  CHECK(v == 20.0);

  int ok = 0, a1 = 0;
  CHECK(vd_params_validate(p, 0, &ok, &a1) == VD_OK);
  CHECK(ok == 1);
  CHECK(a1 == 1);
  CHECK(vd_params_validate(p, 1, &ok, &a1) == VD_OK);
  CHECK(ok == 0);  // latent requires eta

  CHECK(vd_params_set(p, "eta", 123.0) == VD_OK);
  CHECK(vd_params_validate(p, 1, &ok, &a1) == VD_OK);
  CHECK(ok == 1);
  CHECK(vd_params_clear_eta(p) == VD_OK);
  CHECK(vd_params_get(p, "eta", &v) == VD_EINVAL);

  vd_params_free(q);
  vd_params_free(p);
}

TEST_CASE("model evaluation through the C surface") {
  vd_params* p = vd_params_create();
  double beta = 0.0;
  CHECK(vd_beta_effective(p, 5.0, &beta) == VD_OK);
  CHECK(beta == 1.28e-6);
  CHECK(vd_beta_effective(p, -1.0, &beta) == VD_EDOMAIN);

  const vd_state s = baseline_init();
  double d[4] = {0, 0, 0, 0};
  CHECK(vd_rhs_basic(p, &s, d) == VD_OK);
  CHECK(d[0] == doctest::Approx(-1.2733952e3).epsilon(1e-9));
  CHECK(d[3] == doctest::Approx(-2.2334974038e-2).epsilon(1e-9));

  vd_thresholds th{};
  CHECK(vd_thresholds_compute(p, &th) == VD_OK);
  CHECK(th.r0 == doctest::Approx(3.2512946979038224).epsilon(1e-12));
  CHECK(th.v_t == doctest::Approx(21857.92349726776).epsilon(1e-12));
  CHECK(th.assumption2 == 1);

  vd_params_free(p);
}

TEST_CASE("equilibria and classification through the C surface") {
  vd_params* p = vd_params_create();
  vd_state eq{};
  double residual = 1.0;
  CHECK(vd_equilibrium(p, VD_EQ_TRIVIAL, &eq, &residual) == VD_OK);
  CHECK(eq.T == doctest::Approx(1e6).epsilon(1e-9));
  CHECK(residual < 1e-9);
  CHECK(vd_equilibrium(p, VD_EQ_NO_ADE, &eq, &residual) == VD_OK);
  CHECK(eq.V == doctest::Approx(21857.92349726776).epsilon(1e-12));
  CHECK(vd_equilibrium(p, VD_EQ_ADE, &eq, nullptr) == VD_EDOMAIN);
  CHECK(vd_equilibrium(p, 17, &eq, nullptr) == VD_EINVAL);

  vd_stability rep{};
  CHECK(vd_classify(p, VD_EQ_NO_ADE, &rep) == VD_OK);
  CHECK(rep.classification == VD_STABLE);
  CHECK(rep.rh_pass == 1);
  CHECK(rep.g[0] == 1.0);

  vd_params* ce = counterexample_params();
  CHECK(vd_classify(ce, VD_EQ_ADE, &rep) == VD_OK);
  CHECK(rep.classification == VD_UNSTABLE);
  const double expected_re[4] = {-3.45, -0.90, 0.01, 0.50};
  for (int i = 0; i < 4; ++i) {
    CHECK(std::abs(rep.eig_re[i] - expected_re[i]) < 0.01);
    CHECK(rep.eig_im[i] == 0.0);
  }

  vd_params_free(ce);
  vd_params_free(p);
}

TEST_CASE("integration and trajectory access through the C surface") {
  vd_params* p = vd_params_create();
  vd_integration_opts opts{};
  vd_integration_defaults(&opts);
  CHECK(opts.t_end == 30.0);
  CHECK(opts.rel_tol == 1e-8);

  const vd_state init = baseline_init();
  vd_trajectory* traj = nullptr;
  REQUIRE(vd_integrate(p, 0, &init, &opts, &traj) == VD_OK);
  REQUIRE(traj != nullptr);
  CHECK(vd_trajectory_size(traj) == 601);

  vd_state s{};
  CHECK(vd_trajectory_point(traj, 0, &s) == VD_OK);
  CHECK(s.V == 994.84);
  CHECK(vd_trajectory_point(traj, 601, &s) == VD_EINVAL);
  CHECK(vd_trajectory_event_count(traj) == 0);

  vd_summary summary{};
  CHECK(vd_trajectory_summary(traj, &summary) == VD_OK);
  CHECK(summary.peak_v == doctest::Approx(1.80903e6).epsilon(1e-3));

  const auto dir = scratch("traj");
  const auto csv_path = dir + "/out.csv";
  CHECK(vd_trajectory_write_csv(traj, 0, csv_path.c_str()) == VD_OK);
  std::ifstream in(csv_path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,T,I,V,A");

  // extinction shows up in the event accessors
  opts.extinction_enabled = 1;
  opts.extinction_threshold = 1e3;
  vd_trajectory* cleared = nullptr;
  REQUIRE(vd_integrate(p, 0, &init, &opts, &cleared) == VD_OK);
  REQUIRE(vd_trajectory_event_count(cleared) == 1);
  double t_event = 0.0;
  int kind = -1;
  CHECK(vd_trajectory_event(cleared, 0, &t_event, &kind) == VD_OK);
  CHECK(t_event > 6.0);
  CHECK(t_event < 10.0);
  CHECK(kind == 0);

  // invalid options surface as VD_EINVAL
  opts.rel_tol = 1.0;
  vd_trajectory* bad = nullptr;
  CHECK(vd_integrate(p, 0, &init, &opts, &bad) == VD_EINVAL);

  vd_trajectory_free(cleared);
  vd_trajectory_free(traj);
  vd_params_free(p);
}

TEST_CASE("observations, loss and fitting through the C surface") {
  vd_params* p = vd_params_create();
  const vd_state init = baseline_init();

  double times[12];
  for (int d = 0; d <= 11; ++d) times[d] = d;
  vd_observations* obs = nullptr;
  REQUIRE(vd_synthesize(p, &init, times, 12, 0.0, 9u, &obs) == VD_OK);
  CHECK(vd_observations_count_v(obs) == 12);
  CHECK(vd_observations_count_a(obs) == 0);

  double value = -1.0;
  CHECK(vd_loss(p, &init, obs, 1.0, &value) == VD_OK);
  CHECK(value < 1e-10);

  const double lo[1] = {1.7};
  const double hi[1] = {170.0};
  vd_fit_result* result = nullptr;
  REQUIRE(vd_fit(obs, "delta", lo, hi, p, &init, 1.0, 4, 600, 4u, &result) ==
          VD_OK);
  double loss_value = 0.0;
  long n_evals = 0;
  int converged = 0;
  CHECK(vd_fit_result_stats(result, &loss_value, &n_evals, &converged) ==
        VD_OK);
  CHECK(loss_value < 1e-6);
  CHECK(converged == 1);
  CHECK(n_evals > 0);

  vd_params* fitted = nullptr;
  REQUIRE(vd_fit_result_params(result, &fitted) == VD_OK);
  double delta = 0.0;
  CHECK(vd_params_get(fitted, "delta", &delta) == VD_OK);
  CHECK(delta == doctest::Approx(16.22).epsilon(0.05));
  vd_state fit_init{};
  CHECK(vd_fit_result_init(result, &fit_init) == VD_OK);
  CHECK(fit_init.V == 994.84);

  // manual observation building and CSV ingestion
  vd_observations* manual = vd_observations_create(1.0);
  REQUIRE(manual != nullptr);
  CHECK(vd_observations_add_v(manual, 1.0, 1e4) == VD_OK);
  CHECK(vd_observations_add_v(manual, 0.5, 2e3) == VD_OK);
  CHECK(vd_observations_add_a(manual, 2.0, 3.5) == VD_OK);
  CHECK(vd_observations_count_v(manual) == 2);
  CHECK(vd_observations_count_a(manual) == 1);
  CHECK(vd_observations_add_v(manual, 1.0, -5.0) == VD_EINVAL);

  const auto dir = scratch("obs");
  const auto csv_path = dir + "/obs.csv";
  {
    std::ofstream out(csv_path);
    out << "t,V\n0,994.84\n1,1e5\n";
  }
  vd_observations* from_csv = nullptr;
  CHECK(vd_observations_read_csv(csv_path.c_str(), &from_csv) == VD_OK);
  CHECK(vd_observations_count_v(from_csv) == 2);
  vd_observations* missing = nullptr;
  CHECK(vd_observations_read_csv("nope.csv", &missing) == VD_EIO);
  {
    std::ofstream out(csv_path);
    out << "wrong,header\n";
  }
  CHECK(vd_observations_read_csv(csv_path.c_str(), &missing) == VD_EPARSE);

  vd_observations_free(from_csv);
  vd_observations_free(manual);
  vd_fit_result_free(result);
  vd_params_free(fitted);
  vd_observations_free(obs);
  vd_params_free(p);
}

TEST_CASE("vd_run drives whole commands from a config file") {
  const auto dir = scratch("run");
  const auto cfg_path = dir + "/simulate_short.json";
  {
    std::ofstream out(cfg_path);
    out << R"({"integration": {"t_end": 2.0}})";
  }
  const auto out_dir = dir + "/artifacts";
  CHECK(vd_run("simulate", cfg_path.c_str(), out_dir.c_str(), 0) == VD_OK);
  CHECK(fs::exists(fs::path(out_dir) / "trajectory.csv"));
  CHECK(fs::exists(fs::path(out_dir) / "summary.json"));

  CHECK(vd_run("dance", cfg_path.c_str(), out_dir.c_str(), 0) == VD_EINVAL);
  CHECK(vd_run("simulate", "no_config.json", out_dir.c_str(), 0) == VD_EIO);
  {
    std::ofstream out(cfg_path);
    out << R"({"params": {"mu": -1}})";
  }
  CHECK(vd_run("simulate", cfg_path.c_str(), out_dir.c_str(), 0) == VD_EPARSE);
  CHECK(std::strlen(vd_last_error()) > 0);

  CHECK(vd_run(nullptr, cfg_path.c_str(), nullptr, 0) == VD_EINVAL);
}
