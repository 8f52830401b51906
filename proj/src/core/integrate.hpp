#pragma once

#include <limits>
#include <vector>

#include "core/model.hpp"

namespace viraldyn {

/// Controls for one integration run.
struct IntegrationOptions {
  double t_start = 0.0;  ///< days
  double t_end = 30.0;   ///< days
  double rel_tol = 1e-8;
  double abs_tol = 1e-8;  ///< per component, model units
  double max_step = std::numeric_limits<double>::infinity();  ///< days
  double dense_output_dt = 0.05;  ///< sampling interval (days)

  /// Viral-extinction event: when enabled and V crosses the threshold from
  /// above, the crossing time is recorded and V, I (and L) are set to zero,
  /// after which integration continues.
  bool extinction_enabled = false;
  double extinction_threshold = 1.0;  ///< copies/ml
};

enum class EventKind { Extinction };

struct Event {
  double t;
  EventKind kind;
};

/// Extrema of a trajectory, refined by a parabola through the three samples
/// around each extremum.
struct SummaryMetrics {
  double peak_v = 0.0;
  double t_peak_v = 0.0;
  double min_t = 0.0;
  double t_min_t = 0.0;
  double target_loss_fraction = 0.0;  ///< 1 - min_t / T(0)
  double peak_a = 0.0;
  State final_state;
};

/// Result of integrate: states sampled at dense_output_dt, the event log
/// and summary metrics.
struct Trajectory {
  std::vector<State> points;
  std::vector<Event> events;
  SummaryMetrics summary;
};

/// Throws std::invalid_argument when options violate their invariants
/// (rel_tol within [1e-12, 1e-2], abs_tol > 0, t_end > t_start,
/// dense_output_dt > 0, max_step > 0, threshold > 0 when enabled).
void validate_options(const IntegrationOptions& opts);

/// Integrates the chosen variant with an embedded Dormand-Prince 5(4) pair
/// and proportional step control. Negative components smaller than abs_tol
/// in magnitude are clamped to zero; larger negative excursions reject the
/// step. Throws NumericError on step-size underflow or persistent
/// non-finite states.
Trajectory integrate(const ModelParams& p, ModelVariant variant,
                     const State& init, const IntegrationOptions& opts);

/// Recomputes summary metrics from a trajectory's sampled points.
SummaryMetrics summary_metrics(const Trajectory& traj);

/// States at the given times (each within [t_start, t_end]), evaluated from
/// the integrator's dense output. Returned in ascending time order.
std::vector<State> sample_at_times(const ModelParams& p, ModelVariant variant,
                                   const State& init,
                                   const IntegrationOptions& opts,
                                   std::vector<double> times);

}  // namespace viraldyn
