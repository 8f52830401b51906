#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>

#include "core/equilibria.hpp"
#include "core/model.hpp"

namespace viraldyn {

/// Real quartic g4*X^4 + g3*X^3 + g2*X^2 + g1*X + g0 with g4 > 0.
struct QuarticPoly {
  double g4 = 1.0;
  double g3 = 0.0;
  double g2 = 0.0;
  double g1 = 0.0;
  double g0 = 0.0;
};

/// Sign margins of the Routh-Hurwitz conditions for a quartic: the five
/// coefficients and the quantity g1*g2*g3 - g4*g1^2 - g3^2*g0. The verdict
/// passes iff all six margins are strictly positive.
struct RhMargins {
  std::array<double, 5> coeff;  ///< g4, g3, g2, g1, g0
  double hurwitz;               ///< g1*g2*g3 - g4*g1^2 - g3^2*g0
  bool pass;
};

enum class Classification { Stable, Unstable, Marginal };

/// Full local stability analysis of one equilibrium.
struct StabilityReport {
  Eigen::Matrix4d jacobian;
  QuarticPoly charpoly;
  RhMargins rh_margins;
  bool rh_pass;
  std::array<std::complex<double>, 4> eigenvalues;
  Classification classification;
};

/// Analytic Jacobian of rhs_basic at an arbitrary state, variable order
/// (T, I, V, A).
Eigen::Matrix4d jacobian_basic(const ModelParams& p, const State& s);

/// Monic characteristic polynomial det(X*Id - J) via principal-minor sums.
QuarticPoly characteristic_quartic(const Eigen::Matrix4d& J);

/// Closed-form characteristic coefficients at the no-ADE equilibrium,
/// expressed in (a, beta0, c, delta, mu, sigma, w, zeta). Independent of
/// characteristic_quartic; used as a cross-check oracle.
/// Throws DomainError unless beta1 = 0, delta > mu and w >= 0.
QuarticPoly gamma_closed_form_no_ade(const ModelParams& p);

/// Routh-Hurwitz verdict and margins. Throws DomainError when g4 <= 0.
RhMargins routh_hurwitz_quartic(const QuarticPoly& q);

/// The four roots, via a scaled companion matrix polished by one Newton
/// step per root. Throws DomainError when g4 <= 0 and NumericError when a
/// polished root fails the residual check.
std::array<std::complex<double>, 4> eigenvalues_quartic(const QuarticPoly& q);

/// Assembles the Jacobian, characteristic quartic, Routh-Hurwitz verdict,
/// eigenvalues and classification at an equilibrium point. Classification
/// uses the margin eps = 1e-9 * max(1, max |lambda|): Stable iff every real
/// part is below -eps, Unstable iff some real part exceeds +eps, else
/// Marginal. Throws std::invalid_argument when e.residual is out of
/// tolerance.
StabilityReport classify_equilibrium(const ModelParams& p,
                                     const EquilibriumPoint& e);

}  // namespace viraldyn
