#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "core/errors.hpp"

namespace viraldyn {

/// Rate constants of the within-host model.
///
/// Units: time in days, virus V in copies/ml, cells T/I/L in cells/ml,
/// antibody A in arbitrary units. Defaults are the baseline calibration
/// used throughout the reference scenarios.
struct ModelParams {
  double lambda = 9.66e6;  ///< target-cell production (cells/ml/day)
  double mu = 9.66;        ///< target-cell death rate (1/day)
  double beta0 = 1.28e-6;  ///< baseline infection rate (ml/virion/day)
  double beta1 = 0.0;      ///< ADE infection rate (ml^2/virion/unit/day)
  double delta = 16.22;    ///< infected-cell death rate (1/day)
  double omega = 59.74;    ///< virion production rate (virions/cell/day)
  double c = 1.45;         ///< virion clearance rate (1/day)
  double b = 0.52;         ///< antibody neutralization rate (ml/unit/day)
  double a = 9.15e-7;      ///< antibody stimulation rate (ml/virion/day)
  double sigma = 0.02;     ///< antibody decay rate (1/day)

  /// Latent-to-productive transition rate (1/day); only meaningful for the
  /// latent variant and absent otherwise.
  std::optional<double> eta;
};

/// Instantaneous compartment values.
struct State {
  double t = 0.0;  ///< time (days)
  double T = 0.0;  ///< target cells (cells/ml)
  double I = 0.0;  ///< infected cells (cells/ml)
  double V = 0.0;  ///< free virus (copies/ml)
  double A = 0.0;  ///< antibody level (arbitrary units)

  /// Latent infected cells (cells/ml); present only for the latent variant.
  std::optional<double> L;
};

/// Selects between the four-compartment system and the latent extension.
enum class ModelVariant { Basic, Latent };

/// One validation finding. Non-fatal issues are advisories (the system is
/// still well defined); fatal issues make the parameter set unusable.
struct ValidationIssue {
  std::string field;
  std::string message;
  bool fatal = false;
};

/// Outcome of validate_params.
struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool assumption1 = false;  ///< delta > mu

  /// True when no fatal issue was recorded.
  bool ok() const {
    for (const auto& i : issues)
      if (i.fatal) return false;
    return true;
  }
};

/// Validating constructor for State. Throws std::invalid_argument on
/// negative or non-finite components, or when L presence does not match
/// the variant.
State make_state(double t, double T, double I, double V, double A,
                 std::optional<double> L = std::nullopt);

/// Checks positivity of every rate, the delta > mu condition (reported as a
/// non-fatal advisory when violated) and eta presence against the variant.
/// Throws std::invalid_argument when any field is non-finite.
ValidationReport validate_params(const ModelParams& p, ModelVariant variant);

/// Sets one rate by its field name (lambda, mu, beta0, beta1, delta, omega,
/// c, b, a, sigma, eta). Throws std::invalid_argument for unknown names.
void set_param_by_name(ModelParams& p, const std::string& name, double value);

/// Reads one rate by its field name. Throws std::invalid_argument for
/// unknown names or when eta is requested but absent.
double get_param_by_name(const ModelParams& p, const std::string& name);

/// Effective infection rate beta0 + beta1 * A. Throws DomainError for A < 0.
double beta_effective(const ModelParams& p, double A);

/// Time derivatives (dT, dI, dV, dA) of the basic system.
std::array<double, 4> rhs_basic(const ModelParams& p, const State& s);

/// Time derivatives (dT, dL, dI, dV, dA) of the latent system.
/// Throws std::invalid_argument when p.eta or s.L is absent.
std::array<double, 5> rhs_latent(const ModelParams& p, const State& s);

}  // namespace viraldyn
