#include "core/integrate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

namespace viraldyn {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double kC2 = 1.0 / 5.0, kC3 = 3.0 / 10.0, kC4 = 4.0 / 5.0,
                 kC5 = 8.0 / 9.0;
constexpr double kA21 = 1.0 / 5.0;
constexpr double kA31 = 3.0 / 40.0, kA32 = 9.0 / 40.0;
constexpr double kA41 = 44.0 / 45.0, kA42 = -56.0 / 15.0, kA43 = 32.0 / 9.0;
constexpr double kA51 = 19372.0 / 6561.0, kA52 = -25360.0 / 2187.0,
                 kA53 = 64448.0 / 6561.0, kA54 = -212.0 / 729.0;
constexpr double kA61 = 9017.0 / 3168.0, kA62 = -355.0 / 33.0,
                 kA63 = 46732.0 / 5247.0, kA64 = 49.0 / 176.0,
                 kA65 = -5103.0 / 18656.0;
constexpr double kB1 = 35.0 / 384.0, kB3 = 500.0 / 1113.0,
                 kB4 = 125.0 / 192.0, kB5 = -2187.0 / 6784.0,
                 kB6 = 11.0 / 84.0;
// Difference between the 5th- and 4th-order weights.
constexpr double kE1 = 71.0 / 57600.0, kE3 = -71.0 / 16695.0,
                 kE4 = 71.0 / 1920.0, kE5 = -17253.0 / 339200.0,
                 kE6 = 22.0 / 525.0, kE7 = -1.0 / 40.0;
// Dense-output weights.
constexpr double kD1 = -12715105075.0 / 11282082432.0;
constexpr double kD3 = 87487479700.0 / 32700410799.0;
constexpr double kD4 = -10690763975.0 / 1880347072.0;
constexpr double kD5 = 701980252875.0 / 199316789632.0;
constexpr double kD6 = -1453857185.0 / 822651844.0;
constexpr double kD7 = 69997945.0 / 29380423.0;

constexpr double kFacMin = 0.2;
constexpr double kFacMax = 5.0;
constexpr double kSafety = 0.9;
constexpr int kVIndex = 2;  // position of V in the integration vector

template <int N>
using Vec = std::array<double, N>;

/// Quartic interpolant over one accepted step.
template <int N>
struct Dense {
  double t0 = 0.0, h = 0.0;
  Vec<N> r1{}, r2{}, r3{}, r4{}, r5{};

  Vec<N> eval(double theta) const {
    const double th1 = 1.0 - theta;
    Vec<N> y;
    for (int i = 0; i < N; ++i)
      y[i] = r1[i] +
             theta * (r2[i] + th1 * (r3[i] + theta * (r4[i] + th1 * r5[i])));
    return y;
  }
};

template <int N>
double rms_norm(const Vec<N>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s / N);
}

template <int N>
bool all_finite(const Vec<N>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

template <int N, typename Rhs>
double initial_step(const Rhs& rhs, double t0, const Vec<N>& y0,
                    const Vec<N>& f0, double span, double rel_tol,
                    double abs_tol) {
  Vec<N> sc, v;
  for (int i = 0; i < N; ++i) sc[i] = abs_tol + rel_tol * std::abs(y0[i]);
  for (int i = 0; i < N; ++i) v[i] = y0[i] / sc[i];
  const double d0 = rms_norm<N>(v);
  for (int i = 0; i < N; ++i) v[i] = f0[i] / sc[i];
  const double d1 = rms_norm<N>(v);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, span);

  Vec<N> y1, f1;
  for (int i = 0; i < N; ++i) y1[i] = y0[i] + h0 * f0[i];
  rhs(t0 + h0, y1, f1);
  if (!all_finite<N>(f1)) return std::min(1e-6 * span, h0);
  for (int i = 0; i < N; ++i) v[i] = (f1[i] - f0[i]) / sc[i];
  const double d2 = rms_norm<N>(v) / h0;

  double h1;
  if (std::max(d1, d2) <= 1e-15)
    h1 = std::max(1e-6, h0 * 1e-3);
  else
    h1 = std::pow(0.01 / std::max(d1, d2), 0.2);
  return std::min({100.0 * h0, h1, span});
}

struct RawSample {
  double t;
  int index;  // index into the requested time list
};

/// Core adaptive driver. Emits values at the requested sorted times through
/// `emit(index, t, y)` and returns the event log.
template <int N, typename Rhs, typename EmitFn>
std::vector<Event> drive(const Rhs& rhs, Vec<N> y, double t_start,
                         double t_end, const IntegrationOptions& opts,
                         const std::vector<double>& times,
                         const EmitFn& emit) {
  const double teps = 1e-9 * std::max(1.0, std::abs(t_end));
  std::vector<Event> events;

  double t = t_start;
  std::size_t cursor = 0;
  while (cursor < times.size() && times[cursor] <= t + teps) {
    emit(cursor, std::min(times[cursor], t_end), y);
    ++cursor;
  }

  Vec<N> k1, k2, k3, k4, k5, k6, k7;
  rhs(t, y, k1);
  if (!all_finite<N>(k1))
    throw NumericError("integrate: non-finite derivative at initial state");

  double h = initial_step<N>(rhs, t, y, k1, t_end - t_start, opts.rel_tol,
                             opts.abs_tol);
  h = std::min(h, opts.max_step);
  bool last_rejected = false;
  bool extinction_fired = false;

  while (t < t_end - teps) {
    const double h_min = 1e-13 * std::max(1.0, std::abs(t));
    if (h < h_min)
      throw NumericError("integrate: step size underflow at t = " +
                         std::to_string(t));
    h = std::min({h, opts.max_step, t_end - t});

    Vec<N> ys, y1, err_vec;
    for (int i = 0; i < N; ++i) ys[i] = y[i] + h * kA21 * k1[i];
    rhs(t + kC2 * h, ys, k2);
    for (int i = 0; i < N; ++i)
      ys[i] = y[i] + h * (kA31 * k1[i] + kA32 * k2[i]);
    rhs(t + kC3 * h, ys, k3);
    for (int i = 0; i < N; ++i)
      ys[i] = y[i] + h * (kA41 * k1[i] + kA42 * k2[i] + kA43 * k3[i]);
    rhs(t + kC4 * h, ys, k4);
    for (int i = 0; i < N; ++i)
      ys[i] = y[i] + h * (kA51 * k1[i] + kA52 * k2[i] + kA53 * k3[i] +
                          kA54 * k4[i]);
    rhs(t + kC5 * h, ys, k5);
    for (int i = 0; i < N; ++i)
      ys[i] = y[i] + h * (kA61 * k1[i] + kA62 * k2[i] + kA63 * k3[i] +
                          kA64 * k4[i] + kA65 * k5[i]);
    rhs(t + h, ys, k6);
    for (int i = 0; i < N; ++i)
      y1[i] = y[i] + h * (kB1 * k1[i] + kB3 * k3[i] + kB4 * k4[i] +
                          kB5 * k5[i] + kB6 * k6[i]);
    rhs(t + h, y1, k7);

    if (!all_finite<N>(y1) || !all_finite<N>(k7)) {
      h *= 0.5;
      last_rejected = true;
      continue;
    }

    double err_sq = 0.0;
    for (int i = 0; i < N; ++i) {
      const double e = h * (kE1 * k1[i] + kE3 * k3[i] + kE4 * k4[i] +
                            kE5 * k5[i] + kE6 * k6[i] + kE7 * k7[i]);
      const double sc = opts.abs_tol +
                        opts.rel_tol * std::max(std::abs(y[i]),
                                                std::abs(y1[i]));
      err_sq += (e / sc) * (e / sc);
    }
    const double err = std::sqrt(err_sq / N);
    if (!std::isfinite(err) || err > 1.0) {
      const double fac = std::isfinite(err)
                             ? std::max(kFacMin, kSafety * std::pow(err, -0.2))
                             : 0.5;
      h *= fac;
      last_rejected = true;
      continue;
    }

    // Accuracy accepted; handle negative excursions.
    double worst_neg = 0.0;
    for (int i = 0; i < N; ++i) worst_neg = std::min(worst_neg, y1[i]);
    if (worst_neg < -opts.abs_tol) {
      h *= 0.5;
      last_rejected = true;
      continue;
    }

    Dense<N> dense;
    dense.t0 = t;
    dense.h = h;
    for (int i = 0; i < N; ++i) {
      const double dy = y1[i] - y[i];
      dense.r1[i] = y[i];
      dense.r2[i] = dy;
      dense.r3[i] = h * k1[i] - dy;
      dense.r4[i] = dy - h * k7[i] - dense.r3[i];
      dense.r5[i] = h * (kD1 * k1[i] + kD3 * k3[i] + kD4 * k4[i] +
                         kD5 * k5[i] + kD6 * k6[i] + kD7 * k7[i]);
    }

    bool clamped = false;
    for (int i = 0; i < N; ++i)
      if (y1[i] < 0.0) {
        y1[i] = 0.0;
        clamped = true;
      }

    if (opts.extinction_enabled && !extinction_fired &&
        y[kVIndex] >= opts.extinction_threshold &&
        y1[kVIndex] < opts.extinction_threshold) {
      // Locate the downward crossing on the dense output.
      double lo = 0.0, hi = 1.0;
      for (int iter = 0; iter < 60; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (dense.eval(mid)[kVIndex] >= opts.extinction_threshold)
          lo = mid;
        else
          hi = mid;
      }
      const double theta_e = 0.5 * (lo + hi);
      const double t_event = t + theta_e * h;

      while (cursor < times.size() && times[cursor] < t_event - teps) {
        const double theta = std::clamp((times[cursor] - t) / h, 0.0, 1.0);
        emit(cursor, times[cursor], dense.eval(theta));
        ++cursor;
      }
      events.push_back({t_event, EventKind::Extinction});
      extinction_fired = true;

      y = dense.eval(theta_e);
      for (int i = 0; i < N; ++i) y[i] = std::max(y[i], 0.0);
      y[1] = 0.0;        // infected cells
      y[kVIndex] = 0.0;  // free virus
      if (N == 5) y[4] = 0.0;  // latent cells
      t = t_event;
      rhs(t, y, k1);
      last_rejected = false;
      continue;
    }

    const double t_new = t + h;
    while (cursor < times.size() && times[cursor] <= t_new + teps) {
      const double theta = std::clamp((times[cursor] - t) / h, 0.0, 1.0);
      emit(cursor, std::min(times[cursor], t_end), dense.eval(theta));
      ++cursor;
    }

    t = t_new;
    y = y1;
    if (clamped)
      rhs(t, y, k1);
    else
      k1 = k7;  // first-same-as-last

    double fac;
    if (err == 0.0)
      fac = kFacMax;
    else
      fac = std::max(kFacMin, kSafety * std::pow(err, -0.2));
    fac = std::min(fac, last_rejected ? 1.0 : kFacMax);
    h *= fac;
    last_rejected = false;
  }

  while (cursor < times.size()) {
    emit(cursor, std::min(times[cursor], t_end), y);
    ++cursor;
  }
  return events;
}

/// Requested sample times for the dense grid: multiples of dt from t_start,
/// with the final point forced onto t_end.
std::vector<double> grid_times(const IntegrationOptions& opts) {
  const double span = opts.t_end - opts.t_start;
  const double dt = opts.dense_output_dt;
  std::vector<double> times;
  const double teps = 1e-9 * std::max(1.0, std::abs(opts.t_end));
  long n = static_cast<long>(std::floor(span / dt + 1e-9));
  for (long k = 0; k <= n; ++k) {
    double tk = opts.t_start + static_cast<double>(k) * dt;
    if (tk > opts.t_end) tk = opts.t_end;
    times.push_back(tk);
  }
  if (opts.t_end - times.back() > teps) times.push_back(opts.t_end);
  else times.back() = opts.t_end;
  return times;
}

struct Collected {
  std::vector<State> points;
  std::vector<Event> events;
};

Collected run_collect(const ModelParams& p, ModelVariant variant,
                      const State& init, const IntegrationOptions& opts,
                      const std::vector<double>& times) {
  Collected out;
  out.points.resize(times.size());

  if (variant == ModelVariant::Basic) {
    auto rhs = [&p](double /*t*/, const Vec<4>& y, Vec<4>& dy) {
      State s;
      s.T = y[0];
      s.I = y[1];
      s.V = y[2];
      s.A = y[3];
      const auto f = rhs_basic(p, s);
      for (int i = 0; i < 4; ++i) dy[i] = f[i];
    };
    auto emit = [&out](std::size_t idx, double t, const Vec<4>& y) {
      State s;
      s.t = t;
      s.T = std::max(y[0], 0.0);
      s.I = std::max(y[1], 0.0);
      s.V = std::max(y[2], 0.0);
      s.A = std::max(y[3], 0.0);
      out.points[idx] = s;
    };
    Vec<4> y0 = {init.T, init.I, init.V, init.A};
    out.events = drive<4>(rhs, y0, opts.t_start, opts.t_end, opts, times,
                          emit);
  } else {
    auto rhs = [&p](double /*t*/, const Vec<5>& y, Vec<5>& dy) {
      State s;
      s.T = y[0];
      s.I = y[1];
      s.V = y[2];
      s.A = y[3];
      s.L = y[4];
      const auto f = rhs_latent(p, s);  // (dT, dL, dI, dV, dA)
      dy[0] = f[0];
      dy[1] = f[2];
      dy[2] = f[3];
      dy[3] = f[4];
      dy[4] = f[1];
    };
    auto emit = [&out](std::size_t idx, double t, const Vec<5>& y) {
      State s;
      s.t = t;
      s.T = std::max(y[0], 0.0);
      s.I = std::max(y[1], 0.0);
      s.V = std::max(y[2], 0.0);
      s.A = std::max(y[3], 0.0);
      s.L = std::max(y[4], 0.0);
      out.points[idx] = s;
    };
    Vec<5> y0 = {init.T, init.I, init.V, init.A, init.L.value_or(0.0)};
    out.events = drive<5>(rhs, y0, opts.t_start, opts.t_end, opts, times,
                          emit);
  }
  return out;
}

/// Vertex of the quadratic through three samples, via divided differences.
/// Falls back to the middle sample when the data is not curved the right
/// way. Returns (t, value).
std::pair<double, double> refine_extremum(double x0, double y0, double x1,
                                          double y1, double x2, double y2,
                                          bool want_max) {
  const double f01 = (y1 - y0) / (x1 - x0);
  const double f12 = (y2 - y1) / (x2 - x1);
  const double f012 = (f12 - f01) / (x2 - x0);
  if ((want_max && f012 >= 0.0) || (!want_max && f012 <= 0.0) || f012 == 0.0)
    return {x1, y1};
  double xs = 0.5 * (x0 + x1) - 0.5 * f01 / f012;
  xs = std::clamp(xs, x0, x2);
  const double ys = y0 + f01 * (xs - x0) + f012 * (xs - x0) * (xs - x1);
  if (want_max && ys < y1) return {x1, y1};
  if (!want_max && ys > y1) return {x1, y1};
  return {xs, ys};
}

template <typename Getter>
std::pair<double, double> scan_extremum(const std::vector<State>& pts,
                                        const Getter& get, bool want_max) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (want_max ? get(pts[i]) > get(pts[best])
                 : get(pts[i]) < get(pts[best]))
      best = i;
  }
  if (best == 0 || best + 1 >= pts.size())
    return {pts[best].t, get(pts[best])};
  return refine_extremum(pts[best - 1].t, get(pts[best - 1]), pts[best].t,
                         get(pts[best]), pts[best + 1].t, get(pts[best + 1]),
                         want_max);
}

}  // namespace

void validate_options(const IntegrationOptions& opts) {
  if (!std::isfinite(opts.t_start) || !std::isfinite(opts.t_end) ||
      !(opts.t_end > opts.t_start))
    throw std::invalid_argument("integration: requires t_end > t_start");
  if (!(opts.rel_tol >= 1e-12 && opts.rel_tol <= 1e-2))
    throw std::invalid_argument(
        "integration: rel_tol must lie within [1e-12, 1e-2]");
  if (!(opts.abs_tol > 0.0) || !std::isfinite(opts.abs_tol))
    throw std::invalid_argument("integration: abs_tol must be positive");
  if (!(opts.max_step > 0.0))
    throw std::invalid_argument("integration: max_step must be positive");
  if (!(opts.dense_output_dt > 0.0) || !std::isfinite(opts.dense_output_dt))
    throw std::invalid_argument(
        "integration: dense_output_dt must be positive");
  if (opts.extinction_enabled &&
      (!(opts.extinction_threshold > 0.0) ||
       !std::isfinite(opts.extinction_threshold)))
    throw std::invalid_argument(
        "integration: extinction_threshold must be positive");
}

Trajectory integrate(const ModelParams& p, ModelVariant variant,
                     const State& init, const IntegrationOptions& opts) {
  validate_options(opts);
  const auto report = validate_params(p, variant);
  if (!report.ok())
    throw std::invalid_argument("integrate: invalid parameters: " +
                                report.issues.front().field);
  make_state(init.t, init.T, init.I, init.V, init.A, init.L);
  if (variant == ModelVariant::Latent && !init.L)
    throw std::invalid_argument("integrate: latent variant requires init.L");

  Trajectory traj;
  auto collected = run_collect(p, variant, init, opts, grid_times(opts));
  traj.points = std::move(collected.points);
  traj.events = std::move(collected.events);
  traj.summary = summary_metrics(traj);
  return traj;
}

SummaryMetrics summary_metrics(const Trajectory& traj) {
  if (traj.points.empty())
    throw std::invalid_argument("summary_metrics: empty trajectory");
  const auto& pts = traj.points;

  SummaryMetrics m;
  auto [tv, pv] = scan_extremum(pts, [](const State& s) { return s.V; }, true);
  m.peak_v = pv;
  m.t_peak_v = tv;
  auto [tt, mt] = scan_extremum(pts, [](const State& s) { return s.T; },
                                false);
  m.min_t = std::max(mt, 0.0);
  m.t_min_t = tt;
  auto [ta, pa] = scan_extremum(pts, [](const State& s) { return s.A; }, true);
  (void)ta;
  m.peak_a = pa;

  const double t0_cells = pts.front().T;
  m.target_loss_fraction =
      t0_cells > 0.0 ? std::clamp(1.0 - m.min_t / t0_cells, 0.0, 1.0) : 0.0;
  m.final_state = pts.back();
  return m;
}

std::vector<State> sample_at_times(const ModelParams& p, ModelVariant variant,
                                   const State& init,
                                   const IntegrationOptions& opts,
                                   std::vector<double> times) {
  validate_options(opts);
  make_state(init.t, init.T, init.I, init.V, init.A, init.L);
  const double teps = 1e-9 * std::max(1.0, std::abs(opts.t_end));
  std::sort(times.begin(), times.end());
  for (double tk : times) {
    if (!std::isfinite(tk) || tk < opts.t_start - teps ||
        tk > opts.t_end + teps)
      throw std::invalid_argument(
          "sample_at_times: time outside integration span");
  }
  auto collected = run_collect(p, variant, init, opts, times);
  return std::move(collected.points);
}

}  // namespace viraldyn
