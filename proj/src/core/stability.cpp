#include "core/stability.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

namespace viraldyn {

namespace {

double det3(const Eigen::Matrix4d& m, int r0, int r1, int r2) {
  return m(r0, r0) * (m(r1, r1) * m(r2, r2) - m(r1, r2) * m(r2, r1)) -
         m(r0, r1) * (m(r1, r0) * m(r2, r2) - m(r1, r2) * m(r2, r0)) +
         m(r0, r2) * (m(r1, r0) * m(r2, r1) - m(r1, r1) * m(r2, r0));
}

double det4(const Eigen::Matrix4d& m) {
  double det = 0.0;
  double sign = 1.0;
  for (int col = 0; col < 4; ++col) {
    int sub[3];
    int k = 0;
    for (int j = 0; j < 4; ++j)
      if (j != col) sub[k++] = j;
    const double minor =
        m(1, sub[0]) * (m(2, sub[1]) * m(3, sub[2]) -
                        m(2, sub[2]) * m(3, sub[1])) -
        m(1, sub[1]) * (m(2, sub[0]) * m(3, sub[2]) -
                        m(2, sub[2]) * m(3, sub[0])) +
        m(1, sub[2]) * (m(2, sub[0]) * m(3, sub[1]) -
                        m(2, sub[1]) * m(3, sub[0]));
    det += sign * m(0, col) * minor;
    sign = -sign;
  }
  return det;
}

std::complex<double> eval_poly(const QuarticPoly& q, std::complex<double> x) {
  return (((q.g4 * x + q.g3) * x + q.g2) * x + q.g1) * x + q.g0;
}

std::complex<double> eval_poly_deriv(const QuarticPoly& q,
                                     std::complex<double> x) {
  return ((4.0 * q.g4 * x + 3.0 * q.g3) * x + 2.0 * q.g2) * x + q.g1;
}

}  // namespace

Eigen::Matrix4d jacobian_basic(const ModelParams& p, const State& s) {
  const double beta = p.beta0 + p.beta1 * s.A;
  Eigen::Matrix4d J;
  J << -beta * s.V - p.mu, 0.0, -beta * s.T, -p.beta1 * s.T * s.V,
      beta * s.V, -p.delta, beta * s.T, p.beta1 * s.T * s.V,
      0.0, p.omega, -(p.c + p.b * s.A), -p.b * s.V,
      0.0, 0.0, p.a * s.A, p.a * s.V - p.sigma;
  return J;
}

QuarticPoly characteristic_quartic(const Eigen::Matrix4d& J) {
  QuarticPoly q;
  q.g4 = 1.0;
  q.g3 = -(J(0, 0) + J(1, 1) + J(2, 2) + J(3, 3));

  double sum2 = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      sum2 += J(i, i) * J(j, j) - J(i, j) * J(j, i);
  q.g2 = sum2;

  double sum3 = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      for (int k = j + 1; k < 4; ++k) sum3 += det3(J, i, j, k);
  q.g1 = -sum3;

  q.g0 = det4(J);
  return q;
}

QuarticPoly gamma_closed_form_no_ade(const ModelParams& p) {
  if (p.beta1 != 0.0)
    throw DomainError("closed-form coefficients require beta1 = 0");
  const DerivedThresholds d = derived_thresholds(p);
  if (!d.assumption1)
    throw DomainError("closed-form coefficients require delta > mu");
  if (d.w < 0.0)
    throw DomainError("closed-form coefficients require w >= 0");

  const double a = p.a, b0 = p.beta0, c = p.c, dl = p.delta, mu = p.mu,
               sg = p.sigma, w = d.w;
  const double den = a * (a * mu + b0 * sg);

  QuarticPoly q;
  q.g4 = 1.0;
  q.g3 = (a * a * dl * mu + a * a * mu * mu + a * b0 * dl * sg +
          2.0 * a * b0 * mu * sg + a * c * (a * mu * (w + 1.0) + b0 * sg) +
          b0 * b0 * sg * sg) /
         den;
  q.g2 = (a * a * c * mu * mu * w + a * a * c * mu * mu +
          a * a * c * mu * sg * w + a * a * dl * mu * mu +
          a * b0 * c * mu * sg * w + 2.0 * a * b0 * c * mu * sg +
          2.0 * a * b0 * dl * mu * sg + b0 * b0 * c * sg * sg +
          b0 * b0 * dl * sg * sg) /
         den;
  q.g1 = c * sg *
         (a * a * dl * mu * w + a * a * mu * mu * w + a * b0 * dl * mu * w +
          a * b0 * dl * mu + a * b0 * mu * sg * w + b0 * b0 * dl * sg) /
         den;
  q.g0 = c * dl * mu * sg * w;
  return q;
}

RhMargins routh_hurwitz_quartic(const QuarticPoly& q) {
  if (!(q.g4 > 0.0))
    throw DomainError("Routh-Hurwitz test requires g4 > 0");
  RhMargins m;
  m.coeff = {q.g4, q.g3, q.g2, q.g1, q.g0};
  m.hurwitz =
      q.g1 * q.g2 * q.g3 - q.g4 * q.g1 * q.g1 - q.g3 * q.g3 * q.g0;
  m.pass = m.hurwitz > 0.0;
  for (double c : m.coeff) m.pass = m.pass && c > 0.0;
  return m;
}

std::array<std::complex<double>, 4> eigenvalues_quartic(const QuarticPoly& q) {
  if (!(q.g4 > 0.0))
    throw DomainError("eigenvalues_quartic requires g4 > 0");

  // Monic coefficients, then a power-of-magnitude scaling X = s*Y so the
  // companion matrix entries stay in a sane range across widely spread
  // coefficients.
  const double a3 = q.g3 / q.g4, a2 = q.g2 / q.g4, a1 = q.g1 / q.g4,
               a0 = q.g0 / q.g4;
  double s = 0.0;
  s = std::max(s, std::abs(a3));
  s = std::max(s, std::sqrt(std::abs(a2)));
  s = std::max(s, std::cbrt(std::abs(a1)));
  s = std::max(s, std::pow(std::abs(a0), 0.25));
  if (s == 0.0) return {0.0, 0.0, 0.0, 0.0};

  const double b3 = a3 / s, b2 = a2 / (s * s), b1 = a1 / (s * s * s),
               b0 = a0 / (s * s * s * s);
  Eigen::Matrix4d companion = Eigen::Matrix4d::Zero();
  companion(0, 3) = -b0;
  companion(1, 3) = -b1;
  companion(2, 3) = -b2;
  companion(3, 3) = -b3;
  companion(1, 0) = 1.0;
  companion(2, 1) = 1.0;
  companion(3, 2) = 1.0;

  // Parlett-Reinsch balancing with radix-2 factors. Eigen's QR iteration
  // does not balance on its own, and without it roots several decades
  // smaller than the dominant one drown in the matrix norm.
  bool changed = true;
  while (changed) {
    changed = false;
    for (int k = 0; k < 4; ++k) {
      double col = 0.0, row = 0.0;
      for (int j = 0; j < 4; ++j) {
        if (j == k) continue;
        col += std::abs(companion(j, k));
        row += std::abs(companion(k, j));
      }
      if (col == 0.0 || row == 0.0) continue;
      const double before = col + row;
      double factor = 1.0;
      while (col < row / 2.0) {
        col *= 2.0;
        row /= 2.0;
        factor *= 2.0;
      }
      while (col >= row * 2.0) {
        col /= 2.0;
        row *= 2.0;
        factor /= 2.0;
      }
      if (col + row < 0.95 * before) {
        changed = true;
        for (int j = 0; j < 4; ++j) {
          companion(j, k) *= factor;
          companion(k, j) /= factor;
        }
      }
    }
  }

  Eigen::EigenSolver<Eigen::Matrix4d> solver(companion);
  if (solver.info() != Eigen::Success)
    throw NumericError("companion eigen-decomposition did not converge");

  std::array<std::complex<double>, 4> roots;
  for (int i = 0; i < 4; ++i) {
    std::complex<double> root = s * solver.eigenvalues()(i);
    double best = std::abs(eval_poly(q, root));
    for (int step = 0; step < 8 && best > 0.0; ++step) {
      const std::complex<double> deriv = eval_poly_deriv(q, root);
      if (!(std::abs(deriv) > 0.0)) break;
      const std::complex<double> next = root - eval_poly(q, root) / deriv;
      const double next_abs = std::abs(eval_poly(q, next));
      if (!(next_abs < best)) break;
      root = next;
      best = next_abs;
    }
    // Residual must be small relative to the attainable evaluation
    // accuracy at this magnitude, which is governed by sum |g_i| |X|^i.
    const double r_abs = std::abs(root);
    const double eval_scale =
        std::abs(q.g0) +
        r_abs * (std::abs(q.g1) +
                 r_abs * (std::abs(q.g2) +
                          r_abs * (std::abs(q.g3) + r_abs * std::abs(q.g4))));
    const double tol =
        1e-9 * std::max(eval_scale, std::numeric_limits<double>::min());
    if (!(std::abs(eval_poly(q, root)) < tol))
      throw NumericError("quartic root residual check failed");
    roots[i] = root;
  }
  std::sort(roots.begin(), roots.end(), [](const std::complex<double>& x,
                                           const std::complex<double>& y) {
    if (x.real() != y.real()) return x.real() < y.real();
    return x.imag() < y.imag();
  });
  return roots;
}

StabilityReport classify_equilibrium(const ModelParams& p,
                                     const EquilibriumPoint& e) {
  if (!(equilibrium_residual(p, e) < 1e-9))
    throw std::invalid_argument(
        "classify_equilibrium: point is not an equilibrium (residual out of "
        "tolerance)");

  StabilityReport r;
  r.jacobian = jacobian_basic(p, e.state);
  r.charpoly = characteristic_quartic(r.jacobian);
  r.rh_margins = routh_hurwitz_quartic(r.charpoly);
  r.rh_pass = r.rh_margins.pass;
  r.eigenvalues = eigenvalues_quartic(r.charpoly);

  double max_abs = 0.0, max_re = -std::numeric_limits<double>::infinity();
  for (const auto& ev : r.eigenvalues) {
    max_abs = std::max(max_abs, std::abs(ev));
    max_re = std::max(max_re, ev.real());
  }
  const double eps = 1e-9 * std::max(1.0, max_abs);
  if (max_re > eps)
    r.classification = Classification::Unstable;
  else if (max_re < -eps)
    r.classification = Classification::Stable;
  else
    r.classification = Classification::Marginal;
  return r;
}

}  // namespace viraldyn
