#include "core/fit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace viraldyn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Deterministic uniform/normal source. The raw engine is the standardized
/// mt19937_64; the real-valued mappings are fixed here because the standard
/// library distribution objects are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double normal() {  // Box-Muller, standard normal
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * M_PI * u2;
    cached_ = r * std::sin(th);
    have_cached_ = true;
    return r * std::cos(th);
  }

  std::uint64_t integer(std::uint64_t bound) {  // [0, bound)
    return gen_() % bound;
  }

 private:
  std::mt19937_64 gen_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

const std::vector<std::string>& known_free_names() {
  static const std::vector<std::string> names = {
      "lambda", "mu", "beta0", "beta1", "delta", "omega", "c",
      "b",      "a",  "sigma", "eta",   "I0",    "V0",    "A0"};
  return names;
}

void apply_free_value(ModelParams& p, State& init, const std::string& name,
                      double value) {
  if (name == "I0") init.I = value;
  else if (name == "V0") init.V = value;
  else if (name == "A0") init.A = value;
  else set_param_by_name(p, name, value);
}

double floored_log10(double v, double floor) {
  return std::log10(std::max(v, floor));
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& token, const std::string& context) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(token, &used);
  } catch (const std::exception&) {
    throw ParseError("observations: " + context + ": not a number: " + token);
  }
  if (used != token.size())
    throw ParseError("observations: " + context + ": not a number: " + token);
  return v;
}

}  // namespace

ObservationSet make_observation_set(std::vector<Observation> v_obs,
                                    std::vector<Observation> a_obs,
                                    double detection_floor) {
  if (!(detection_floor > 0.0) || !std::isfinite(detection_floor))
    throw std::invalid_argument(
        "observations: detection_floor must be positive");
  const auto check = [](const std::vector<Observation>& series,
                        const char* label) {
    for (const auto& o : series) {
      if (!std::isfinite(o.t))
        throw std::invalid_argument(std::string("observations: ") + label +
                                    " time is not finite");
      if (!std::isfinite(o.value) || o.value < 0.0)
        throw std::invalid_argument(std::string("observations: ") + label +
                                    " values must be finite and >= 0");
    }
  };
  check(v_obs, "V");
  check(a_obs, "A");
  const auto by_time_then_value = [](const Observation& x,
                                     const Observation& y) {
    if (x.t != y.t) return x.t < y.t;
    return x.value < y.value;
  };
  std::sort(v_obs.begin(), v_obs.end(), by_time_then_value);
  std::sort(a_obs.begin(), a_obs.end(), by_time_then_value);
  ObservationSet obs;
  obs.v_obs = std::move(v_obs);
  obs.a_obs = std::move(a_obs);
  obs.detection_floor = detection_floor;
  return obs;
}

ObservationSet read_observations_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("observations: cannot open " + path);

  std::string line;
  if (!std::getline(in, line))
    throw ParseError("observations: " + path + ": empty file");
  const std::string header = trim(line);
  bool has_a = false;
  if (header == "t,V")
    has_a = false;
  else if (header == "t,V,A")
    has_a = true;
  else
    throw ParseError("observations: " + path +
                     ": header must be `t,V` or `t,V,A`, got `" + header +
                     "`");

  std::vector<Observation> v_obs, a_obs;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string row = trim(line);
    if (row.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(row);
    std::string tok;
    while (std::getline(ss, tok, ',')) fields.push_back(trim(tok));
    const std::size_t expected = has_a ? 3 : 2;
    if (fields.size() != expected)
      throw ParseError("observations: " + path + ": line " +
                       std::to_string(line_no) + ": expected " +
                       std::to_string(expected) + " fields");
    const std::string ctx = path + ": line " + std::to_string(line_no);
    const double t = parse_number(fields[0], ctx);
    const double v = parse_number(fields[1], ctx);
    v_obs.push_back({t, v});
    if (has_a) a_obs.push_back({t, parse_number(fields[2], ctx)});
  }
  return make_observation_set(std::move(v_obs), std::move(a_obs));
}

double loss(const ModelParams& p, const State& init, const ObservationSet& obs,
            double a_weight, const IntegrationOptions& integration) {
  if (obs.v_obs.empty() && obs.a_obs.empty())
    throw std::invalid_argument("loss: observation set is empty");

  // One integration serves both series.
  const std::size_t n_v = obs.v_obs.size();
  std::vector<std::pair<double, std::size_t>> tagged;
  tagged.reserve(n_v + obs.a_obs.size());
  for (std::size_t i = 0; i < n_v; ++i)
    tagged.emplace_back(obs.v_obs[i].t, i);
  for (std::size_t j = 0; j < obs.a_obs.size(); ++j)
    tagged.emplace_back(obs.a_obs[j].t, n_v + j);
  std::stable_sort(tagged.begin(), tagged.end(),
                   [](const auto& x, const auto& y) {
                     return x.first < y.first;
                   });

  double max_t = integration.t_start;
  for (const auto& [t, slot] : tagged) max_t = std::max(max_t, t);

  std::vector<double> model(n_v + obs.a_obs.size(), 0.0);
  if (max_t > integration.t_start) {
    IntegrationOptions opts = integration;
    opts.t_end = max_t;
    std::vector<double> times;
    times.reserve(tagged.size());
    for (const auto& [t, slot] : tagged) times.push_back(t);
    std::vector<State> states;
    try {
      states = sample_at_times(p, ModelVariant::Basic, init, opts, times);
    } catch (const NumericError&) {
      return kInf;
    }
    for (std::size_t k = 0; k < tagged.size(); ++k) {
      const std::size_t slot = tagged[k].second;
      model[slot] = slot < n_v ? states[k].V : states[k].A;
    }
  } else {
    for (const auto& [t, slot] : tagged)
      model[slot] = slot < n_v ? init.V : init.A;
  }

  const double floor = obs.detection_floor;
  double sum = 0.0;
  for (std::size_t i = 0; i < n_v; ++i) {
    const double d = floored_log10(model[i], floor) -
                     floored_log10(obs.v_obs[i].value, floor);
    sum += d * d;
  }
  double a_sum = 0.0;
  for (std::size_t j = 0; j < obs.a_obs.size(); ++j) {
    const double d = floored_log10(model[n_v + j], floor) -
                     floored_log10(obs.a_obs[j].value, floor);
    a_sum += d * d;
  }
  return sum + a_weight * a_sum;
}

FitResult fit(const ObservationSet& obs, const FitSpec& spec,
              std::uint64_t seed) {
  const std::size_t dim = spec.free.size();
  if (dim == 0) throw std::invalid_argument("fit: no free parameters");
  for (const auto& name : spec.free) {
    const auto& known = known_free_names();
    if (std::find(known.begin(), known.end(), name) == known.end())
      throw std::invalid_argument("fit: unknown free parameter " + name);
    if (std::count(spec.free.begin(), spec.free.end(), name) != 1)
      throw std::invalid_argument("fit: duplicate free parameter " + name);
    const auto it = spec.bounds.find(name);
    if (it == spec.bounds.end())
      throw std::invalid_argument("fit: missing bounds for " + name);
    if (!std::isfinite(it->second.lo) || !std::isfinite(it->second.hi) ||
        !(it->second.lo < it->second.hi))
      throw std::invalid_argument("fit: bounds for " + name +
                                  " must satisfy lo < hi");
  }
  if (!(spec.a_weight >= 0.0))
    throw std::invalid_argument("fit: a_weight must be >= 0");
  if (spec.n_starts < 1 || spec.max_evals < dim + 2)
    throw std::invalid_argument("fit: n_starts or max_evals out of range");

  std::vector<double> lo(dim), hi(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    lo[j] = spec.bounds.at(spec.free[j]).lo;
    hi[j] = spec.bounds.at(spec.free[j]).hi;
  }

  long total_evals = 0;
  const auto objective = [&](const std::vector<double>& x) {
    ModelParams p = spec.base;
    State init = spec.init;
    for (std::size_t j = 0; j < dim; ++j) {
      const double clamped = std::clamp(x[j], lo[j], hi[j]);
      apply_free_value(p, init, spec.free[j], std::pow(10.0, clamped));
    }
    init.T = p.lambda / p.mu;
    ++total_evals;
    try {
      return loss(p, init, obs, spec.a_weight, spec.integration);
    } catch (const std::invalid_argument&) {
      return kInf;
    }
  };

  // Latin-hypercube start points over the bounds.
  Rng rng(seed);
  const std::size_t n = static_cast<std::size_t>(spec.n_starts);
  std::vector<std::vector<std::size_t>> strata(dim,
                                               std::vector<std::size_t>(n));
  for (std::size_t j = 0; j < dim; ++j) {
    std::iota(strata[j].begin(), strata[j].end(), 0);
    for (std::size_t k = n; k > 1; --k)
      std::swap(strata[j][k - 1], strata[j][rng.integer(k)]);
  }
  std::vector<std::vector<double>> starts(n, std::vector<double>(dim));
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t j = 0; j < dim; ++j)
      starts[s][j] =
          lo[j] + (hi[j] - lo[j]) *
                      (static_cast<double>(strata[j][s]) + rng.uniform()) /
                      static_cast<double>(n);

  struct StartResult {
    std::vector<double> x;
    double loss = kInf;
    bool converged = false;
    std::vector<double> trace;
  };

  const auto run_start = [&](const std::vector<double>& x0) {
    StartResult result;
    std::vector<std::vector<double>> pts;
    std::vector<double> vals;
    pts.push_back(x0);
    for (std::size_t j = 0; j < dim; ++j) {
      auto q = x0;
      double step = 0.125 * (hi[j] - lo[j]);
      if (q[j] + step > hi[j]) step = -step;
      q[j] += step;
      pts.push_back(q);
    }
    long evals = 0;
    for (const auto& q : pts) {
      vals.push_back(objective(q));
      ++evals;
    }

    const auto order_simplex = [&] {
      std::vector<std::size_t> idx(pts.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::stable_sort(idx.begin(), idx.end(), [&](std::size_t u,
                                                   std::size_t v) {
        return vals[u] < vals[v];
      });
      std::vector<std::vector<double>> p2;
      std::vector<double> v2;
      for (auto i : idx) {
        p2.push_back(pts[i]);
        v2.push_back(vals[i]);
      }
      pts = std::move(p2);
      vals = std::move(v2);
    };

    while (true) {
      order_simplex();
      result.trace.push_back(vals.front());
      if (vals.back() - vals.front() < spec.spread_tol) {
        result.converged = true;
        break;
      }
      if (evals >= spec.max_evals) break;

      std::vector<double> centroid(dim, 0.0);
      for (std::size_t i = 0; i + 1 < pts.size(); ++i)
        for (std::size_t j = 0; j < dim; ++j) centroid[j] += pts[i][j];
      for (std::size_t j = 0; j < dim; ++j)
        centroid[j] /= static_cast<double>(pts.size() - 1);

      const auto blend = [&](double coef) {
        std::vector<double> q(dim);
        for (std::size_t j = 0; j < dim; ++j)
          q[j] = centroid[j] + coef * (centroid[j] - pts.back()[j]);
        return q;
      };

      const auto xr = blend(1.0);
      const double fr = objective(xr);
      ++evals;
      if (fr < vals.front()) {
        const auto xe = blend(2.0);
        const double fe = objective(xe);
        ++evals;
        if (fe < fr) {
          pts.back() = xe;
          vals.back() = fe;
        } else {
          pts.back() = xr;
          vals.back() = fr;
        }
      } else if (fr < vals[vals.size() - 2]) {
        pts.back() = xr;
        vals.back() = fr;
      } else {
        const auto xc = blend(-0.5);
        const double fc = objective(xc);
        ++evals;
        if (fc < vals.back()) {
          pts.back() = xc;
          vals.back() = fc;
        } else {
          for (std::size_t i = 1; i < pts.size(); ++i) {
            for (std::size_t j = 0; j < dim; ++j)
              pts[i][j] = pts[0][j] + 0.5 * (pts[i][j] - pts[0][j]);
            vals[i] = objective(pts[i]);
            ++evals;
          }
        }
      }
    }
    order_simplex();
    result.x = pts.front();
    result.loss = vals.front();
    return result;
  };

  StartResult best;
  bool have_best = false;
  for (std::size_t s = 0; s < n; ++s) {
    StartResult r = run_start(starts[s]);
    if (!have_best || r.loss < best.loss) {
      best = std::move(r);
      have_best = true;
    }
  }
  if (!std::isfinite(best.loss))
    throw NumericError("fit: no start produced a finite loss");

  FitResult out;
  out.params = spec.base;
  out.init = spec.init;
  for (std::size_t j = 0; j < dim; ++j) {
    const double clamped = std::clamp(best.x[j], lo[j], hi[j]);
    apply_free_value(out.params, out.init, spec.free[j],
                     std::pow(10.0, clamped));
  }
  out.init.T = out.params.lambda / out.params.mu;
  out.loss = best.loss;
  out.n_evals = total_evals;
  const std::size_t n_obs = obs.v_obs.size() + obs.a_obs.size();
  out.converged = best.converged && n_obs >= dim;
  out.trace = std::move(best.trace);
  return out;
}

ObservationSet synthesize_observations(const ModelParams& p, const State& init,
                                       const std::vector<double>& times,
                                       double noise_sd_log10,
                                       std::uint64_t seed,
                                       bool include_antibody,
                                       const IntegrationOptions& integration) {
  if (times.empty())
    throw std::invalid_argument("synthesize_observations: no times given");
  if (!(noise_sd_log10 >= 0.0))
    throw std::invalid_argument(
        "synthesize_observations: noise sd must be >= 0");

  double max_t = integration.t_start;
  for (double t : times) max_t = std::max(max_t, t);
  IntegrationOptions opts = integration;
  opts.t_end = std::max(max_t, integration.t_start + 1e-6);

  std::vector<double> sorted = times;
  std::sort(sorted.begin(), sorted.end());
  const auto states =
      sample_at_times(p, ModelVariant::Basic, init, opts, sorted);

  Rng rng(seed);
  std::vector<Observation> v_obs, a_obs;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    const double zv = noise_sd_log10 > 0.0 ? rng.normal() : 0.0;
    v_obs.push_back(
        {sorted[k], states[k].V * std::pow(10.0, noise_sd_log10 * zv)});
    if (include_antibody) {
      const double za = noise_sd_log10 > 0.0 ? rng.normal() : 0.0;
      a_obs.push_back(
          {sorted[k], states[k].A * std::pow(10.0, noise_sd_log10 * za)});
    }
  }
  return make_observation_set(std::move(v_obs), std::move(a_obs));
}

}  // namespace viraldyn
