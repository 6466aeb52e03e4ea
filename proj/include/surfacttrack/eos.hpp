#pragma once

// Surface tension equations of state gamma(r), the energy density F with
// gamma = F - r F', and the quadratic extension below r = eps.

#include "surfacttrack/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace surfacttrack {

enum class EosKind { constant, linear, langmuir };

inline std::string to_string(EosKind k) {
  switch (k) {
    case EosKind::constant: return "constant";
    case EosKind::linear: return "linear";
    case EosKind::langmuir: return "langmuir";
  }
  return "?";
}

inline EosKind parse_eos_kind(const std::string& s) {
  if (s == "constant") return EosKind::constant;
  if (s == "linear") return EosKind::linear;
  if (s == "langmuir") return EosKind::langmuir;
  throw ConfigError("unknown equation of state '" + s + "'");
}

struct EosModel {
  EosKind kind = EosKind::constant;
  double gamma0 = 1.0;
  double beta = 0.0;
  double psi_inf = std::numeric_limits<double>::infinity();
  double eps = 1e-5;

  void validate() const {
    if (!(gamma0 >= 0.0)) throw ConfigError("gamma0 must be non-negative");
    if (!(beta >= 0.0)) throw ConfigError("beta must be non-negative");
    if (!(eps > 0.0)) throw ConfigError("eps must be positive");
    if (!(psi_inf > 0.0)) throw ConfigError("psi_inf must be positive");
    if (kind == EosKind::langmuir && !std::isfinite(psi_inf))
      throw ConfigError("langmuir equation of state needs a finite psi_inf");
    if (kind == EosKind::langmuir && !(eps < psi_inf))
      throw ConfigError("eps must lie below psi_inf");
  }

  [[nodiscard]] bool is_constant() const { return kind == EosKind::constant || beta == 0.0; }

  // Unregularized functions, defined for 0 < r < psi_inf.

  [[nodiscard]] double gamma(double r) const {
    check_range(r);
    switch (kind) {
      case EosKind::constant: return gamma0;
      case EosKind::linear: return gamma0 * (1.0 - beta * r);
      case EosKind::langmuir: return gamma0 * (1.0 + beta * psi_inf * std::log1p(-r / psi_inf));
    }
    return gamma0;
  }

  [[nodiscard]] double f(double r) const {
    check_range(r);
    switch (kind) {
      case EosKind::constant: return gamma0;
      case EosKind::linear: return gamma0 * (1.0 + beta * r * (std::log(r) - 1.0));
      case EosKind::langmuir:
        return gamma0 * (1.0 + beta * (r * std::log(r / (psi_inf - r)) +
                                       psi_inf * std::log1p(-r / psi_inf)));
    }
    return gamma0;
  }

  [[nodiscard]] double fprime(double r) const {
    check_range(r);
    switch (kind) {
      case EosKind::constant: return 0.0;
      case EosKind::linear: return gamma0 * beta * std::log(r);
      case EosKind::langmuir: return gamma0 * beta * std::log(r / (psi_inf - r));
    }
    return 0.0;
  }

  [[nodiscard]] double fsecond(double r) const {
    check_range(r);
    switch (kind) {
      case EosKind::constant: return 0.0;
      case EosKind::linear: return gamma0 * beta / r;
      case EosKind::langmuir: return gamma0 * beta * psi_inf / (r * (psi_inf - r));
    }
    return 0.0;
  }

  // Regularized functions, defined for r < psi_inf.

  [[nodiscard]] double gamma_eps(double r) const {
    if (is_constant()) return gamma0;
    if (r >= eps) return gamma(r);
    return gamma(eps) + 0.5 * fsecond(eps) * (eps * eps - r * r);
  }

  [[nodiscard]] double f_eps(double r) const {
    if (is_constant()) return gamma0;
    if (r >= eps) return f(r);
    const double d = r - eps;
    return f(eps) + fprime(eps) * d + 0.5 * fsecond(eps) * d * d;
  }

  [[nodiscard]] double fprime_eps(double r) const {
    if (is_constant()) return 0.0;
    if (r >= eps) return fprime(r);
    return fprime(eps) + fsecond(eps) * (r - eps);
  }

  [[nodiscard]] double fsecond_eps(double r) const {
    if (is_constant()) return 0.0;
    if (r >= eps) return fsecond(r);
    return fsecond(eps);
  }

 private:
  void check_range(double r) const {
    if (kind == EosKind::langmuir && !(r < psi_inf))
      throw Error("surfactant concentration " + std::to_string(r) +
                  " outside the admissible range of the langmuir equation of state");
  }
};

/// Edge value of the surfactant used in the tangential flux of the ALE step.
/// It makes the discrete chain rule Psi* (F'(b) - F'(a)) = -(gamma(b) - gamma(a))
/// hold exactly.
inline double psi_star_edge(const EosModel& eos, double a, double b) {
  if (std::abs(a - b) < 1e-12) return 0.5 * (a + b);
  const double fa = eos.fprime_eps(a);
  const double fb = eos.fprime_eps(b);
  const double df = fb - fa;
  if (std::abs(df) <= 1e-14 * std::max({1.0, std::abs(fa), std::abs(fb)})) return 0.5 * (a + b);
  return -(eos.gamma_eps(b) - eos.gamma_eps(a)) / df;
}

}  // namespace surfacttrack
