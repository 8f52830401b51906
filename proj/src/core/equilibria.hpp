#pragma once

#include "core/model.hpp"

namespace viraldyn {

/// Reproduction number and threshold viral loads derived from the rates.
struct DerivedThresholds {
  double r0;    ///< basic reproduction number beta0*omega*lambda/(c*delta*mu)
  double v_t;   ///< immune-response threshold viral load sigma/a (copies/ml)
  double v_is;  ///< immunosuppression viral load (r0-1)*mu/beta0 (copies/ml)
  double w;     ///< auxiliary r0 - 1 - sigma*beta0/(mu*a)
  double zeta;  ///< auxiliary delta - mu (1/day)

  bool r0_above_one;  ///< r0 > 1
  bool assumption1;   ///< delta > mu
  bool assumption2;   ///< v_is > v_t, equivalently w > 0
};

/// Steady-state families of the basic system.
enum class EquilibriumKind { Trivial, Immunosuppression, NoAde, Ade };

/// A steady state together with its verified residual.
struct EquilibriumPoint {
  EquilibriumKind kind;
  State state;      ///< t is ignored
  double residual;  ///< scaled max-norm of rhs_basic at state
};

/// Evaluates r0, v_t, v_is, w, zeta and the assumption flags.
DerivedThresholds derived_thresholds(const ModelParams& p);

/// Virus-free steady state (lambda/mu, 0, 0, 0).
EquilibriumPoint trivial_equilibrium(const ModelParams& p);

/// Steady state with no antibody response: A = 0, V = v_is.
/// Throws DomainError when r0 <= 1.
EquilibriumPoint immunosuppression_equilibrium(const ModelParams& p);

/// Steady state with active antibody response and beta1 = 0: V = v_t.
/// Throws DomainError when beta1 != 0 or when w < 0.
EquilibriumPoint no_ade_equilibrium(const ModelParams& p);

/// Steady state with active antibody response and beta1 > 0: V = v_t, with
/// the antibody level the unique positive root of a quadratic.
/// Throws DomainError when beta1 == 0 or when w < 0.
EquilibriumPoint ade_equilibrium(const ModelParams& p);

/// Max over the four equations of |rhs_i| / scale_i with
/// scale_i = max(1, sum of absolute values of the terms of equation i).
double scaled_rhs_residual(const ModelParams& p, const State& s);

/// Residual of an equilibrium point, recomputed from its state.
double equilibrium_residual(const ModelParams& p, const EquilibriumPoint& e);

}  // namespace viraldyn
