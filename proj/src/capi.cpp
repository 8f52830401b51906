/// C interface of the viraldyn shared library. Each entry point wraps the
/// C++ core, converts between the plain C structs and the internal types,
/// and maps exceptions onto vd_status codes with a thread-local message.

#include "viraldyn.h"

#include <cstring>
#include <exception>
#include <new>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "core/equilibria.hpp"
#include "core/errors.hpp"
#include "core/fit.hpp"
#include "core/integrate.hpp"
#include "core/model.hpp"
#include "core/runner.hpp"
#include "core/stability.hpp"

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& message) { g_last_error = message; }

/// Translates an in-flight exception into a status code.
vd_status status_from_exception() {
  try {
    throw;
  } catch (const viraldyn::ParseError& e) {
    set_error(e.what());
    return VD_EPARSE;
  } catch (const viraldyn::IoError& e) {
    set_error(e.what());
    return VD_EIO;
  } catch (const viraldyn::NumericError& e) {
    set_error(e.what());
    return VD_ENUMERIC;
  } catch (const viraldyn::DomainError& e) {
    set_error(e.what());
    return VD_EDOMAIN;
  } catch (const std::invalid_argument& e) {
    set_error(e.what());
    return VD_EINVAL;
  } catch (const std::bad_alloc&) {
    set_error("out of memory");
    return VD_ENUMERIC;
  } catch (const std::exception& e) {
    set_error(e.what());
    return VD_EINVAL;
  } catch (...) {
    set_error("unknown error");
    return VD_EINVAL;
  }
}

template <typename Fn>
vd_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (...) {
    return status_from_exception();
  }
}

vd_status einval(const char* message) {
  set_error(message);
  return VD_EINVAL;
}

vd_state to_c_state(const viraldyn::State& s) {
  vd_state out{};
  out.t = s.t;
  out.T = s.T;
  out.I = s.I;
  out.V = s.V;
  out.A = s.A;
  out.L = s.L ? *s.L : 0.0;
  out.has_L = s.L ? 1 : 0;
  return out;
}

viraldyn::State from_c_state(const vd_state& s) {
  return viraldyn::make_state(
      s.t, s.T, s.I, s.V, s.A,
      s.has_L ? std::optional<double>(s.L) : std::nullopt);
}

viraldyn::IntegrationOptions from_c_opts(const vd_integration_opts& o) {
  viraldyn::IntegrationOptions opts;
  opts.t_start = o.t_start;
  opts.t_end = o.t_end;
  opts.rel_tol = o.rel_tol;
  opts.abs_tol = o.abs_tol;
  opts.max_step =
      o.max_step > 0.0 ? o.max_step : std::numeric_limits<double>::infinity();
  opts.dense_output_dt = o.dense_output_dt;
  opts.extinction_enabled = o.extinction_enabled != 0;
  opts.extinction_threshold = o.extinction_threshold;
  return opts;
}

viraldyn::EquilibriumPoint compute_equilibrium(const viraldyn::ModelParams& p,
                                               int kind) {
  switch (kind) {
    case VD_EQ_TRIVIAL:
      return viraldyn::trivial_equilibrium(p);
    case VD_EQ_IMMUNOSUPPRESSION:
      return viraldyn::immunosuppression_equilibrium(p);
    case VD_EQ_NO_ADE:
      return viraldyn::no_ade_equilibrium(p);
    case VD_EQ_ADE:
      return viraldyn::ade_equilibrium(p);
    default:
      throw std::invalid_argument("unknown equilibrium kind");
  }
}

std::vector<std::string> split_names(const char* list) {
  std::vector<std::string> out;
  std::string token;
  std::istringstream stream(list);
  while (std::getline(stream, token, ',')) {
    const auto begin = token.find_first_not_of(" \t");
    if (begin == std::string::npos) {
      throw std::invalid_argument("free_names: empty entry");
    }
    const auto end = token.find_last_not_of(" \t");
    out.push_back(token.substr(begin, end - begin + 1));
  }
  if (out.empty()) throw std::invalid_argument("free_names: empty list");
  return out;
}

}  // namespace

struct vd_params {
  viraldyn::ModelParams p;
};

struct vd_trajectory {
  viraldyn::Trajectory traj;
  viraldyn::ModelVariant variant;
};

struct vd_observations {
  viraldyn::ObservationSet obs;
};

struct vd_fit_result {
  viraldyn::FitResult result;
};

extern "C" {

const char* vd_last_error(void) { return g_last_error.c_str(); }

vd_params* vd_params_create(void) {
  return new (std::nothrow) vd_params{viraldyn::ModelParams{}};
}

void vd_params_free(vd_params* p) { delete p; }

vd_params* vd_params_clone(const vd_params* p) {
  if (!p) return nullptr;
  return new (std::nothrow) vd_params{p->p};
}

vd_status vd_params_set(vd_params* p, const char* name, double value) {
  if (!p || !name) return einval("null argument");
  return guarded([&] {
    viraldyn::set_param_by_name(p->p, name, value);
    return VD_OK;
  });
}

vd_status vd_params_get(const vd_params* p, const char* name, double* out) {
  if (!p || !name || !out) return einval("null argument");
  return guarded([&] {
    *out = viraldyn::get_param_by_name(p->p, name);
    return VD_OK;
  });
}

vd_status vd_params_clear_eta(vd_params* p) {
  if (!p) return einval("null argument");
  p->p.eta.reset();
  return VD_OK;
}

vd_status vd_params_validate(const vd_params* p, int latent, int* ok,
                             int* assumption1) {
  if (!p || !ok || !assumption1) return einval("null argument");
  return guarded([&] {
    const auto report = viraldyn::validate_params(
        p->p, latent ? viraldyn::ModelVariant::Latent
                     : viraldyn::ModelVariant::Basic);
    *ok = report.ok() ? 1 : 0;
    *assumption1 = report.assumption1 ? 1 : 0;
    return VD_OK;
  });
}

vd_status vd_beta_effective(const vd_params* p, double A, double* out) {
  if (!p || !out) return einval("null argument");
  return guarded([&] {
    *out = viraldyn::beta_effective(p->p, A);
    return VD_OK;
  });
}

vd_status vd_rhs_basic(const vd_params* p, const vd_state* s, double out[4]) {
  if (!p || !s || !out) return einval("null argument");
  return guarded([&] {
    const auto d = viraldyn::rhs_basic(p->p, from_c_state(*s));
    std::memcpy(out, d.data(), 4 * sizeof(double));
    return VD_OK;
  });
}

vd_status vd_rhs_latent(const vd_params* p, const vd_state* s, double out[5]) {
  if (!p || !s || !out) return einval("null argument");
  return guarded([&] {
    const auto d = viraldyn::rhs_latent(p->p, from_c_state(*s));
    std::memcpy(out, d.data(), 5 * sizeof(double));
    return VD_OK;
  });
}

vd_status vd_thresholds_compute(const vd_params* p, vd_thresholds* out) {
  if (!p || !out) return einval("null argument");
  return guarded([&] {
    const auto th = viraldyn::derived_thresholds(p->p);
    out->r0 = th.r0;
    out->v_t = th.v_t;
    out->v_is = th.v_is;
    out->w = th.w;
    out->zeta = th.zeta;
    out->r0_above_one = th.r0_above_one ? 1 : 0;
    out->assumption1 = th.assumption1 ? 1 : 0;
    out->assumption2 = th.assumption2 ? 1 : 0;
    return VD_OK;
  });
}

vd_status vd_equilibrium(const vd_params* p, int kind, vd_state* out,
                         double* residual) {
  if (!p || !out) return einval("null argument");
  return guarded([&] {
    const auto eq = compute_equilibrium(p->p, kind);
    *out = to_c_state(eq.state);
    if (residual) *residual = eq.residual;
    return VD_OK;
  });
}

vd_status vd_classify(const vd_params* p, int kind, vd_stability* out) {
  if (!p || !out) return einval("null argument");
  return guarded([&] {
    const auto eq = compute_equilibrium(p->p, kind);
    const auto report = viraldyn::classify_equilibrium(p->p, eq);
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) {
        out->jacobian[4 * r + c] = report.jacobian(r, c);
      }
    }
    out->g[0] = report.charpoly.g4;
    out->g[1] = report.charpoly.g3;
    out->g[2] = report.charpoly.g2;
    out->g[3] = report.charpoly.g1;
    out->g[4] = report.charpoly.g0;
    for (int i = 0; i < 5; ++i) out->rh_margins[i] = report.rh_margins.coeff[i];
    out->rh_margins[5] = report.rh_margins.hurwitz;
    out->rh_pass = report.rh_pass ? 1 : 0;
    for (int i = 0; i < 4; ++i) {
      out->eig_re[i] = report.eigenvalues[i].real();
      out->eig_im[i] = report.eigenvalues[i].imag();
    }
    switch (report.classification) {
      case viraldyn::Classification::Stable:
        out->classification = VD_STABLE;
        break;
      case viraldyn::Classification::Unstable:
        out->classification = VD_UNSTABLE;
        break;
      default:
        out->classification = VD_MARGINAL;
        break;
    }
    return VD_OK;
  });
}

void vd_integration_defaults(vd_integration_opts* opts) {
  if (!opts) return;
  const viraldyn::IntegrationOptions d;
  opts->t_start = d.t_start;
  opts->t_end = d.t_end;
  opts->rel_tol = d.rel_tol;
  opts->abs_tol = d.abs_tol;
  opts->max_step = 0.0;
  opts->dense_output_dt = d.dense_output_dt;
  opts->extinction_enabled = d.extinction_enabled ? 1 : 0;
  opts->extinction_threshold = d.extinction_threshold;
}

vd_status vd_integrate(const vd_params* p, int latent, const vd_state* init,
                       const vd_integration_opts* opts, vd_trajectory** out) {
  if (!p || !init || !opts || !out) return einval("null argument");
  return guarded([&] {
    const auto variant = latent ? viraldyn::ModelVariant::Latent
                                : viraldyn::ModelVariant::Basic;
    auto traj = viraldyn::integrate(p->p, variant, from_c_state(*init),
                                    from_c_opts(*opts));
    *out = new vd_trajectory{std::move(traj), variant};
    return VD_OK;
  });
}

void vd_trajectory_free(vd_trajectory* traj) { delete traj; }

size_t vd_trajectory_size(const vd_trajectory* traj) {
  return traj ? traj->traj.points.size() : 0;
}

vd_status vd_trajectory_point(const vd_trajectory* traj, size_t index,
                              vd_state* out) {
  if (!traj || !out) return einval("null argument");
  if (index >= traj->traj.points.size()) return einval("index out of range");
  *out = to_c_state(traj->traj.points[index]);
  return VD_OK;
}

size_t vd_trajectory_event_count(const vd_trajectory* traj) {
  return traj ? traj->traj.events.size() : 0;
}

vd_status vd_trajectory_event(const vd_trajectory* traj, size_t index,
                              double* t, int* kind) {
  if (!traj) return einval("null argument");
  if (index >= traj->traj.events.size()) return einval("index out of range");
  if (t) *t = traj->traj.events[index].t;
  if (kind) *kind = 0;
  return VD_OK;
}

vd_status vd_trajectory_summary(const vd_trajectory* traj, vd_summary* out) {
  if (!traj || !out) return einval("null argument");
  const auto& s = traj->traj.summary;
  out->peak_v = s.peak_v;
  out->t_peak_v = s.t_peak_v;
  out->min_t = s.min_t;
  out->t_min_t = s.t_min_t;
  out->target_loss_fraction = s.target_loss_fraction;
  out->peak_a = s.peak_a;
  out->final_state = to_c_state(s.final_state);
  return VD_OK;
}

vd_status vd_trajectory_write_csv(const vd_trajectory* traj, int latent,
                                  const char* path) {
  if (!traj || !path) return einval("null argument");
  return guarded([&] {
    viraldyn::write_trajectory_csv(traj->traj,
                                   latent ? viraldyn::ModelVariant::Latent
                                          : viraldyn::ModelVariant::Basic,
                                   path);
    return VD_OK;
  });
}

vd_observations* vd_observations_create(double detection_floor) {
  auto* obs = new (std::nothrow) vd_observations{};
  if (obs) obs->obs.detection_floor = detection_floor;
  return obs;
}

void vd_observations_free(vd_observations* obs) { delete obs; }

vd_status vd_observations_add_v(vd_observations* obs, double t, double v) {
  if (!obs) return einval("null argument");
  return guarded([&] {
    auto v_obs = obs->obs.v_obs;
    v_obs.push_back({t, v});
    obs->obs = viraldyn::make_observation_set(v_obs, obs->obs.a_obs,
                                              obs->obs.detection_floor);
    return VD_OK;
  });
}

vd_status vd_observations_add_a(vd_observations* obs, double t, double a) {
  if (!obs) return einval("null argument");
  return guarded([&] {
    auto a_obs = obs->obs.a_obs;
    a_obs.push_back({t, a});
    obs->obs = viraldyn::make_observation_set(obs->obs.v_obs, a_obs,
                                              obs->obs.detection_floor);
    return VD_OK;
  });
}

vd_status vd_observations_read_csv(const char* path, vd_observations** out) {
  if (!path || !out) return einval("null argument");
  return guarded([&] {
    auto obs = viraldyn::read_observations_csv(path);
    *out = new vd_observations{std::move(obs)};
    return VD_OK;
  });
}

size_t vd_observations_count_v(const vd_observations* obs) {
  return obs ? obs->obs.v_obs.size() : 0;
}

size_t vd_observations_count_a(const vd_observations* obs) {
  return obs ? obs->obs.a_obs.size() : 0;
}

vd_status vd_loss(const vd_params* p, const vd_state* init,
                  const vd_observations* obs, double a_weight, double* out) {
  if (!p || !init || !obs || !out) return einval("null argument");
  return guarded([&] {
    *out = viraldyn::loss(p->p, from_c_state(*init), obs->obs, a_weight,
                          viraldyn::IntegrationOptions{});
    return VD_OK;
  });
}

vd_status vd_synthesize(const vd_params* p, const vd_state* init,
                        const double* times, size_t n_times,
                        double noise_sd_log10, uint64_t seed,
                        vd_observations** out) {
  if (!p || !init || !times || !out) return einval("null argument");
  return guarded([&] {
    const std::vector<double> ts(times, times + n_times);
    auto obs = viraldyn::synthesize_observations(p->p, from_c_state(*init), ts,
                                                 noise_sd_log10, seed);
    *out = new vd_observations{std::move(obs)};
    return VD_OK;
  });
}

vd_status vd_fit(const vd_observations* obs, const char* free_names,
                 const double* lo, const double* hi, const vd_params* base,
                 const vd_state* init, double a_weight, int n_starts,
                 int max_evals, uint64_t seed, vd_fit_result** out) {
  if (!obs || !free_names || !lo || !hi || !base || !init || !out) {
    return einval("null argument");
  }
  return guarded([&] {
    viraldyn::FitSpec spec;
    spec.free = split_names(free_names);
    for (size_t i = 0; i < spec.free.size(); ++i) {
      if (!(lo[i] > 0.0) || !(hi[i] > 0.0)) {
        throw std::invalid_argument("fit bounds must be positive");
      }
      spec.bounds[spec.free[i]] = {std::log10(lo[i]), std::log10(hi[i])};
    }
    spec.base = base->p;
    spec.init = from_c_state(*init);
    spec.a_weight = a_weight;
    spec.n_starts = n_starts;
    spec.max_evals = max_evals;
    auto result = viraldyn::fit(obs->obs, spec, seed);
    *out = new vd_fit_result{std::move(result)};
    return VD_OK;
  });
}

void vd_fit_result_free(vd_fit_result* result) { delete result; }

vd_status vd_fit_result_params(const vd_fit_result* result, vd_params** out) {
  if (!result || !out) return einval("null argument");
  *out = new (std::nothrow) vd_params{result->result.params};
  return *out ? VD_OK : einval("allocation failed");
}

vd_status vd_fit_result_init(const vd_fit_result* result, vd_state* out) {
  if (!result || !out) return einval("null argument");
  *out = to_c_state(result->result.init);
  return VD_OK;
}

vd_status vd_fit_result_stats(const vd_fit_result* result, double* loss,
                              long* n_evals, int* converged) {
  if (!result) return einval("null argument");
  if (loss) *loss = result->result.loss;
  if (n_evals) *n_evals = result->result.n_evals;
  if (converged) *converged = result->result.converged ? 1 : 0;
  return VD_OK;
}

vd_status vd_run(const char* command, const char* config_path,
                 const char* out_dir, uint64_t seed) {
  if (!command || !config_path) return einval("null argument");
  return guarded([&] {
    const auto cfg = viraldyn::parse_config_file(config_path);
    viraldyn::execute(command, cfg, out_dir ? out_dir : "", seed);
    return VD_OK;
  });
}

}  // extern "C"
