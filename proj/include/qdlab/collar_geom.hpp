#pragma once

#include <functional>

namespace qdlab {

/// Injectivity-radius cap arsinh(1) of the collar lemma.
inline constexpr double kArsinhOne = 0.88137358701954302523;

/// Model hyperbolic collar C(ell) = (-X, X) x S^1 with metric rho^2(s)(ds^2 + dtheta^2).
struct CollarParams {
  double ell = 0.0;   ///< length of the core geodesic
  double X = 0.0;     ///< half-width X(ell)
  double delta_max = kArsinhOne;

  /// Validates ell > 0 and fills in X.
  static CollarParams make(double ell);

  bool operator==(const CollarParams&) const = default;
};

/// The delta-thin subcylinder (-x_delta, x_delta) x S^1 of a collar.
struct ThinPart {
  double delta = 0.0;
  double x_delta = 0.0;
  /// Set when delta >= arsinh(1): x_delta is clamped to X and the collar lemma no longer
  /// describes the thin part.
  bool outside_regime = false;

  bool empty() const { return x_delta <= 0.0; }
};

double half_width(double ell);

/// rho(s) = ell / (2 pi cos(ell s / 2pi)); requires |s| < pi^2 / ell.
double conformal_factor(double ell, double s);

ThinPart thin_threshold(double ell, double delta);

/// ell * sinh(delta) / (2 pi sinh(ell / 2)), the value rho takes on the boundary of the delta-thin part.
double rho_at_thin_boundary(double ell, double delta);

struct Dz2Norms {
  std::function<double(double)> pointwise;  ///< s -> |dz^2|_g = 2 rho^-2(s)
  double l1 = 0.0;                          ///< 8 pi X
  double l2_squared = 0.0;                  ///< 8 pi int rho^-2
  double l2 = 0.0;
};

Dz2Norms dz2_norms(double ell);

/// Closed form of int_{-a}^{a} rho^-2(s) ds for 0 <= a < pi^2/ell.
double integral_rho_inv_sq(double ell, double a);
/// Closed form of int_{0}^{a} rho^-1(s) ds.
double integral_rho_inv(double ell, double a);

}  // namespace qdlab
