#include "qdlab/collar_geom.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "qdlab/errors.hpp"

namespace qdlab {

namespace {
constexpr double kPi = std::numbers::pi;

void require_positive_length(double ell, const char* who) {
  if (!(ell > 0.0) || !std::isfinite(ell))
    throw DomainError(std::string(who) + ": geodesic length must be positive, got " +
                      std::to_string(ell));
}
}  // namespace

CollarParams CollarParams::make(double ell) {
  CollarParams c;
  c.ell = ell;
  c.X = half_width(ell);
  return c;
}

double half_width(double ell) {
  require_positive_length(ell, "half_width");
  // pi/2 - arctan(x) == atan2(1, x) for x > 0, without cancellation.
  return (2.0 * kPi / ell) * std::atan2(1.0, std::sinh(0.5 * ell));
}

double conformal_factor(double ell, double s) {
  require_positive_length(ell, "conformal_factor");
  const double u = ell * std::abs(s) / (2.0 * kPi);
  if (!(u < 0.5 * kPi))
    throw DomainError("conformal_factor: |s| must be below pi^2/ell");
  // cos(u) = sin(pi/2 - u); the complementary angle keeps digits near the collar ends.
  return ell / (2.0 * kPi * std::sin(0.5 * kPi - u));
}

double rho_at_thin_boundary(double ell, double delta) {
  return ell * std::sinh(delta) / (2.0 * kPi * std::sinh(0.5 * ell));
}

ThinPart thin_threshold(double ell, double delta) {
  require_positive_length(ell, "thin_threshold");
  if (!(delta > 0.0)) throw DomainError("thin_threshold: delta must be positive");
  ThinPart t;
  t.delta = delta;
  if (delta <= 0.5 * ell) return t;
  if (delta >= kArsinhOne) {
    t.x_delta = half_width(ell);
    t.outside_regime = true;
    return t;
  }
  const double ratio = std::sinh(0.5 * ell) / std::sinh(delta);
  // pi^2/ell - (2pi/ell) arcsin(r) = (2pi/ell) arccos(r)
  t.x_delta = (2.0 * kPi / ell) * std::acos(ratio);
  return t;
}

double integral_rho_inv_sq(double ell, double a) {
  const double k = 2.0 * kPi / ell;
  const double U = a / k;
  return k * k * k * (U + std::sin(U) * std::cos(U));
}

double integral_rho_inv(double ell, double a) {
  const double k = 2.0 * kPi / ell;
  return k * k * std::sin(a / k);
}

Dz2Norms dz2_norms(double ell) {
  const double X = half_width(ell);
  Dz2Norms n;
  n.pointwise = [ell](double s) {
    const double r = conformal_factor(ell, s);
    return 2.0 / (r * r);
  };
  n.l1 = 8.0 * kPi * X;
  n.l2_squared = 8.0 * kPi * integral_rho_inv_sq(ell, X);
  n.l2 = std::sqrt(n.l2_squared);
  return n;
}

}  // namespace qdlab
