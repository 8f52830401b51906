#include "core/model.hpp"

#include <cmath>

namespace viraldyn {

namespace {

bool neg_or_nonfinite(double v) { return !std::isfinite(v) || v < 0.0; }

}  // namespace

State make_state(double t, double T, double I, double V, double A,
                 std::optional<double> L) {
  if (!std::isfinite(t)) throw std::invalid_argument("state: t is not finite");
  if (neg_or_nonfinite(T))
    throw std::invalid_argument("state: T must be finite and non-negative");
  if (neg_or_nonfinite(I))
    throw std::invalid_argument("state: I must be finite and non-negative");
  if (neg_or_nonfinite(V))
    throw std::invalid_argument("state: V must be finite and non-negative");
  if (neg_or_nonfinite(A))
    throw std::invalid_argument("state: A must be finite and non-negative");
  if (L && neg_or_nonfinite(*L))
    throw std::invalid_argument("state: L must be finite and non-negative");
  State s;
  s.t = t;
  s.T = T;
  s.I = I;
  s.V = V;
  s.A = A;
  s.L = L;
  return s;
}

ValidationReport validate_params(const ModelParams& p, ModelVariant variant) {
  struct Field {
    const char* name;
    double value;
    bool strictly_positive;
  };
  const Field fields[] = {
      {"lambda", p.lambda, true}, {"mu", p.mu, true},
      {"beta0", p.beta0, true},   {"beta1", p.beta1, false},
      {"delta", p.delta, true},   {"omega", p.omega, true},
      {"c", p.c, true},           {"b", p.b, true},
      {"a", p.a, true},           {"sigma", p.sigma, true},
  };

  ValidationReport report;
  for (const auto& f : fields) {
    if (!std::isfinite(f.value))
      throw std::invalid_argument(std::string("params: ") + f.name +
                                  " is not finite");
    if (f.strictly_positive ? f.value <= 0.0 : f.value < 0.0)
      report.issues.push_back(
          {f.name,
           f.strictly_positive ? "must be strictly positive"
                               : "must be non-negative",
           true});
  }

  if (p.eta) {
    if (!std::isfinite(*p.eta))
      throw std::invalid_argument("params: eta is not finite");
    if (*p.eta <= 0.0)
      report.issues.push_back({"eta", "must be strictly positive", true});
    if (variant == ModelVariant::Basic)
      report.issues.push_back(
          {"eta", "ignored by the basic variant", false});
  } else if (variant == ModelVariant::Latent) {
    report.issues.push_back(
        {"eta", "required for the latent variant", true});
  }

  report.assumption1 = p.delta > p.mu;
  if (!report.assumption1)
    report.issues.push_back(
        {"delta",
         "delta <= mu: infected cells outlive targets on average; "
         "equilibrium admissibility results need delta > mu",
         false});
  return report;
}

void set_param_by_name(ModelParams& p, const std::string& name,
                       double value) {
  if (name == "lambda") p.lambda = value;
  else if (name == "mu") p.mu = value;
  else if (name == "beta0") p.beta0 = value;
  else if (name == "beta1") p.beta1 = value;
  else if (name == "delta") p.delta = value;
  else if (name == "omega") p.omega = value;
  else if (name == "c") p.c = value;
  else if (name == "b") p.b = value;
  else if (name == "a") p.a = value;
  else if (name == "sigma") p.sigma = value;
  else if (name == "eta") p.eta = value;
  else
    throw std::invalid_argument("params: unknown parameter name " + name);
}

double get_param_by_name(const ModelParams& p, const std::string& name) {
  if (name == "lambda") return p.lambda;
  if (name == "mu") return p.mu;
  if (name == "beta0") return p.beta0;
  if (name == "beta1") return p.beta1;
  if (name == "delta") return p.delta;
  if (name == "omega") return p.omega;
  if (name == "c") return p.c;
  if (name == "b") return p.b;
  if (name == "a") return p.a;
  if (name == "sigma") return p.sigma;
  if (name == "eta") {
    if (!p.eta) throw std::invalid_argument("params: eta is not set");
    return *p.eta;
  }
  throw std::invalid_argument("params: unknown parameter name " + name);
}

double beta_effective(const ModelParams& p, double A) {
  if (!(A >= 0.0)) throw DomainError("beta_effective: A must be >= 0");
  return p.beta0 + p.beta1 * A;
}

std::array<double, 4> rhs_basic(const ModelParams& p, const State& s) {
  const double beta = p.beta0 + p.beta1 * s.A;
  const double infection = beta * s.V * s.T;
  return {
      p.lambda - p.mu * s.T - infection,
      infection - p.delta * s.I,
      p.omega * s.I - p.c * s.V - p.b * s.A * s.V,
      p.a * s.V * s.A - p.sigma * s.A,
  };
}

std::array<double, 5> rhs_latent(const ModelParams& p, const State& s) {
  if (!p.eta)
    throw std::invalid_argument("rhs_latent: params.eta is required");
  if (!s.L) throw std::invalid_argument("rhs_latent: state.L is required");
  const double beta = p.beta0 + p.beta1 * s.A;
  const double infection = beta * s.V * s.T;
  const double eta = *p.eta;
  const double L = *s.L;
  return {
      p.lambda - p.mu * s.T - infection,
      infection - eta * L - p.mu * L,
      eta * L - p.delta * s.I,
      p.omega * s.I - p.c * s.V - p.b * s.A * s.V,
      p.a * s.V * s.A - p.sigma * s.A,
  };
}

}  // namespace viraldyn
