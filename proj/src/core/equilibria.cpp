#include "core/equilibria.hpp"

#include <algorithm>
#include <cmath>

namespace viraldyn {

namespace {

constexpr double kResidualTol = 1e-9;

// Tolerance for treating a marginally negative antibody solution as the
// w = 0 degenerate boundary rather than an assumption violation.
constexpr double kBoundaryTol = 1e-9;

EquilibriumPoint finish(const ModelParams& p, EquilibriumKind kind, double T,
                        double I, double V, double A) {
  EquilibriumPoint e;
  e.kind = kind;
  e.state = make_state(0.0, T, I, V, A);
  e.residual = scaled_rhs_residual(p, e.state);
  if (!(e.residual < kResidualTol))
    throw NumericError("equilibrium residual check failed: " +
                       std::to_string(e.residual));
  return e;
}

}  // namespace

DerivedThresholds derived_thresholds(const ModelParams& p) {
  DerivedThresholds d;
  d.r0 = p.beta0 * p.omega * p.lambda / (p.c * p.delta * p.mu);
  d.v_t = p.sigma / p.a;
  d.v_is = (d.r0 - 1.0) * p.mu / p.beta0;
  d.w = d.r0 - 1.0 - p.sigma * p.beta0 / (p.mu * p.a);
  d.zeta = p.delta - p.mu;
  d.r0_above_one = d.r0 > 1.0;
  d.assumption1 = d.zeta > 0.0;
  d.assumption2 = d.w > 0.0;
  return d;
}

EquilibriumPoint trivial_equilibrium(const ModelParams& p) {
  return finish(p, EquilibriumKind::Trivial, p.lambda / p.mu, 0.0, 0.0, 0.0);
}

EquilibriumPoint immunosuppression_equilibrium(const ModelParams& p) {
  const DerivedThresholds d = derived_thresholds(p);
  if (!d.r0_above_one)
    throw DomainError(
        "immunosuppression equilibrium requires r0 > 1; got r0 = " +
        std::to_string(d.r0));
  const double T = p.delta * p.c / (p.beta0 * p.omega);
  const double I = (d.r0 - 1.0) * p.c * p.mu / (p.omega * p.beta0);
  return finish(p, EquilibriumKind::Immunosuppression, T, I, d.v_is, 0.0);
}

EquilibriumPoint no_ade_equilibrium(const ModelParams& p) {
  if (p.beta1 != 0.0)
    throw DomainError("no-ADE equilibrium requires beta1 = 0");
  const DerivedThresholds d = derived_thresholds(p);
  if (d.w < 0.0)
    throw DomainError("no-ADE equilibrium requires v_is >= v_t (w >= 0)");
  const double denom = p.mu + p.beta0 * d.v_t;
  const double T = p.lambda / denom;
  const double I = p.beta0 * p.lambda * d.v_t / (p.delta * denom);
  double A = (p.omega * p.beta0 * p.lambda / (p.delta * denom) - p.c) / p.b;
  if (A < 0.0) {
    if (A < -kBoundaryTol)
      throw DomainError("no-ADE equilibrium requires v_is >= v_t (w >= 0)");
    A = 0.0;
  }
  return finish(p, EquilibriumKind::NoAde, T, I, d.v_t, A);
}

EquilibriumPoint ade_equilibrium(const ModelParams& p) {
  if (p.beta1 <= 0.0)
    throw DomainError("ADE equilibrium requires beta1 > 0");
  const DerivedThresholds d = derived_thresholds(p);
  if (!(d.w > 0.0))
    throw DomainError("ADE equilibrium requires v_is > v_t (w > 0)");

  // The antibody level solves c2*A^2 + c1*A + c0 = 0.
  const double c2 = p.delta * p.b * p.beta1 * d.v_t;
  const double c1 = p.delta * (p.c * p.beta1 * d.v_t + p.b * p.mu +
                               p.b * p.beta0 * d.v_t) -
                    p.omega * p.lambda * p.beta1;
  const double c0 =
      p.delta * p.c * (p.mu + p.beta0 * d.v_t) - p.omega * p.lambda * p.beta0;
  if (!(c0 / c2 < 0.0))
    throw NumericError(
        "ADE quadratic root product is not negative; no unique positive root");

  const double disc = c1 * c1 - 4.0 * c2 * c0;
  const double q =
      -0.5 * (c1 + std::copysign(std::sqrt(disc), c1 == 0.0 ? 1.0 : c1));
  const double root_a = q / c2;
  const double root_b = c0 / q;
  const double A = std::max(root_a, root_b);
  if (!(A > 0.0))
    throw NumericError("ADE quadratic produced no positive root");

  const double beta = p.beta0 + p.beta1 * A;
  const double T = p.delta * (p.c + p.b * A) / (p.omega * beta);
  const double I = d.v_t * (p.c + p.b * A) / p.omega;
  return finish(p, EquilibriumKind::Ade, T, I, d.v_t, A);
}

double scaled_rhs_residual(const ModelParams& p, const State& s) {
  const auto f = rhs_basic(p, s);
  const double beta = p.beta0 + p.beta1 * s.A;
  const double infection = std::abs(beta * s.V * s.T);
  const double scales[4] = {
      std::abs(p.lambda) + std::abs(p.mu * s.T) + infection,
      infection + std::abs(p.delta * s.I),
      std::abs(p.omega * s.I) + std::abs(p.c * s.V) +
          std::abs(p.b * s.A * s.V),
      std::abs(p.a * s.V * s.A) + std::abs(p.sigma * s.A),
  };
  double worst = 0.0;
  for (int i = 0; i < 4; ++i)
    worst = std::max(worst, std::abs(f[i]) / std::max(1.0, scales[i]));
  return worst;
}

double equilibrium_residual(const ModelParams& p, const EquilibriumPoint& e) {
  return scaled_rhs_residual(p, e.state);
}

}  // namespace viraldyn
