#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core/integrate.hpp"
#include "core/model.hpp"

namespace viraldyn {

/// One measured value at a point in time.
struct Observation {
  double t;      ///< days
  double value;  ///< copies/ml for V, arbitrary units for A
};

/// Viral-load observations with an optional antibody series. Series are
/// kept sorted by (t, value) so objective sums do not depend on input
/// order.
struct ObservationSet {
  std::vector<Observation> v_obs;
  std::vector<Observation> a_obs;
  double detection_floor = 1.0;  ///< copies/ml; values below it are floored
};

/// Normalizing constructor: sorts both series and validates finiteness,
/// non-negative values and a positive floor.
ObservationSet make_observation_set(std::vector<Observation> v_obs,
                                    std::vector<Observation> a_obs = {},
                                    double detection_floor = 1.0);

/// Reads observations from CSV with header `t,V` or `t,V,A`.
ObservationSet read_observations_csv(const std::string& path);

/// Per-parameter optimization bounds in log10 space.
struct ParamBounds {
  double lo;
  double hi;
};

/// What to optimize and how.
struct FitSpec {
  /// Names among {lambda, mu, beta0, beta1, delta, omega, c, b, a, sigma,
  /// eta, I0, V0, A0}.
  std::vector<std::string> free;
  std::map<std::string, ParamBounds> bounds;  ///< log10 space, one per free

  ModelParams base;  ///< values of the non-free parameters
  State init;        ///< baseline initial state; T(0) is always lambda/mu
  double a_weight = 1.0;

  int n_starts = 8;
  int max_evals = 2000;  ///< objective evaluations per start
  double spread_tol = 1e-10;

  IntegrationOptions integration;  ///< tolerances for objective evaluations
};

struct FitResult {
  ModelParams params;
  State init;
  double loss = 0.0;
  long n_evals = 0;  ///< total objective evaluations over all starts
  bool converged = false;
  std::vector<double> trace;  ///< best loss per iteration of the best start
};

/// Sum of squared log10 residuals of V (plus the weighted analogous A term)
/// against the model trajectory from init over [t_start, max observed t].
/// Both sides are floored at obs.detection_floor before taking logs.
/// Integration failures yield +infinity.
double loss(const ModelParams& p, const State& init, const ObservationSet& obs,
            double a_weight, const IntegrationOptions& integration);

/// Multi-start Nelder-Mead search in log10-parameter space. Start points
/// come from a seeded Latin hypercube over the bounds; the best start by
/// (loss, start index) wins. Deterministic given (obs, spec, seed).
FitResult fit(const ObservationSet& obs, const FitSpec& spec,
              std::uint64_t seed);

/// Model values at the given times with multiplicative log-normal noise of
/// the given sigma in log10 space. Deterministic given seed.
ObservationSet synthesize_observations(
    const ModelParams& p, const State& init, const std::vector<double>& times,
    double noise_sd_log10, std::uint64_t seed, bool include_antibody = false,
    const IntegrationOptions& integration = IntegrationOptions{});

}  // namespace viraldyn
