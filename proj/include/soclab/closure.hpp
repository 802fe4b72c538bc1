#pragma once

// Closure relations linking the control parameter (first Pi group) to the
// scale-ratio group, for Kolmogorov turbulence and for avalanching systems.

#include <cmath>
#include <stdexcept>
#include <string>

#include "soclab/rational.hpp"

namespace soclab {

/// R ~ (L0/l_min)^beta and N ~ (L0/l_min)^alpha, hence R ~ N^(beta/alpha).
struct ClosureRelation {
  Rational beta;
  Rational alpha;
  Rational beta_n;

  ClosureRelation(Rational beta_, Rational alpha_) : beta(beta_), alpha(alpha_) {
    if (alpha <= Rational(0)) throw std::domain_error("closure requires alpha > 0");
    beta_n = beta / alpha;
  }

  /// K41 turbulence: energy balance fixes beta = 4/3.
  static ClosureRelation kolmogorov(Rational alpha = Rational(3)) { return {Rational(4, 3), alpha}; }

  /// Avalanching system in D dimensions: sand balance fixes beta = -D.
  static ClosureRelation avalanche(int dimension, Rational alpha) { return {Rational(-dimension), alpha}; }
};

struct K41Result {
  double reynolds = 0.0;       // R_E = U L0 / nu
  double eta = 0.0;            // dissipation scale, L0 R_E^{-3/4}
  double dof_estimate = 0.0;   // (L0/eta)^alpha
};

inline K41Result k41_relations(double speed, double outer_scale, double viscosity, double alpha = 3.0) {
  if (!(speed > 0.0) || !(outer_scale > 0.0) || !(viscosity > 0.0))
    throw std::domain_error("k41_relations: U, L0 and nu must be strictly positive");
  if (!(alpha > 0.0)) throw std::domain_error("k41_relations: alpha must be positive");
  K41Result r;
  r.reynolds = speed * outer_scale / viscosity;
  r.eta = outer_scale * std::pow(r.reynolds, -0.75);
  r.dof_estimate = std::pow(outer_scale / r.eta, alpha);
  return r;
}

struct AvalancheRelations {
  double control = 0.0;        // R_A = h / eps
  double control_predicted = 0.0;  // (L0/dl)^{-D}
  double beta_n = 0.0;         // -D / alpha
  double dof_estimate = 0.0;   // (L0/dl)^alpha
};

/// `drive_per_node` is h, `dissipation` the system-wide loss rate eps.
inline AvalancheRelations avalanche_relations(double drive_per_node, double dissipation, double scale_ratio,
                                              int dimension, double alpha) {
  if (!(dissipation > 0.0)) {
    if (dissipation == 0.0) throw std::domain_error("no dissipation channel");
    throw std::domain_error("avalanche_relations: dissipation rate must be positive");
  }
  if (drive_per_node < 0.0) throw std::domain_error("avalanche_relations: drive rate must be >= 0");
  if (!(scale_ratio >= 1.0)) throw std::domain_error("avalanche_relations: L0/dl must be >= 1");
  if (dimension < 1 || dimension > 3) throw std::domain_error("avalanche_relations: D must be 1, 2 or 3");
  if (!(alpha > 0.0)) throw std::domain_error("avalanche_relations: alpha must be positive");
  AvalancheRelations r;
  r.control = drive_per_node / dissipation;
  r.control_predicted = std::pow(scale_ratio, -dimension);
  r.beta_n = -static_cast<double>(dimension) / alpha;
  r.dof_estimate = std::pow(scale_ratio, alpha);
  return r;
}

enum class DriveRegime { SDIDT, Intermediate, Laminar };

inline const char* to_string(DriveRegime r) {
  switch (r) {
    case DriveRegime::SDIDT: return "SDIDT";
    case DriveRegime::Intermediate: return "Intermediate";
    case DriveRegime::Laminar: return "Laminar";
  }
  return "?";
}

/// SDIDT when h*dt <= margin*g*dl; laminar once h*dt >= margin*g*dl*(L0/dl)^D.
inline DriveRegime classify_drive_regime(double grains_per_event, double threshold_grains, double scale_ratio,
                                         int dimension, double margin = 0.5) {
  if (!(grains_per_event > 0.0) || !(threshold_grains > 0.0) || !(scale_ratio > 0.0) || dimension < 1)
    throw std::domain_error("classify_drive_regime: inputs must be positive");
  if (!(margin > 0.0 && margin < 1.0)) throw std::domain_error("classify_drive_regime: margin must lie in (0,1)");
  const double lower = margin * threshold_grains;
  if (grains_per_event <= lower) return DriveRegime::SDIDT;
  if (grains_per_event >= lower * std::pow(scale_ratio, dimension)) return DriveRegime::Laminar;
  return DriveRegime::Intermediate;
}

}  // namespace soclab
