#pragma once

#include <functional>
#include <vector>

namespace qdlab::quad {

struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre rule with n points on [a, b], nodes ascending.
Rule gauss_legendre(int n, double a = -1.0, double b = 1.0);

/// Barycentric interpolation weights for the Gauss-Legendre nodes of `gauss_legendre(n)`.
/// Scale-free, so they also serve any affine image of [-1, 1].
std::vector<double> gauss_legendre_barycentric(const Rule& reference);

/// Composite Gauss-Legendre rule: [a, b] split into `panels` equal panels of `order` points.
Rule composite_gauss(double a, double b, int panels, int order);

/// Composite Gauss rule with panel boundaries forced at every breakpoint inside (a, b).
Rule composite_gauss(double a, double b, const std::vector<double>& breakpoints, int panels,
                     int order);

/// Composite Gauss rule with breakpoints forced, each piece split into panels no wider than
/// `max_width`.
Rule composite_gauss_width(double a, double b, const std::vector<double>& breakpoints,
                           double max_width, int order);

/// Adaptive Gauss-Kronrod (7-15) integration to relative tolerance `rtol`.
double adaptive(const std::function<double(double)>& f, double a, double b,
                double rtol = 1e-13, int max_depth = 40);

}  // namespace qdlab::quad
