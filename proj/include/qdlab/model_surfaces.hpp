#pragma once

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qdlab {

using cplx = std::complex<double>;

/// C / Gamma_{a,b}, Gamma_{a,b} = { n b + m (a + i/b) }; unit area.
struct FlatTorus {
  double a = 0.0;
  double b = 1.0;

  static FlatTorus make(double a, double b);
  cplx omega1() const { return {b, 0.0}; }
  cplx omega2() const { return {a, 1.0 / b}; }
  /// z = u omega1 + v omega2.
  cplx point(double u, double v) const { return u * omega1() + v * omega2(); }
};

/// Samples of phi at z(u_i, v_j), u_i = i/M, v_j = j/M.
struct TorusField {
  FlatTorus torus;
  int M = 0;
  Eigen::MatrixXcd samples;  ///< M x M, rows u, columns v
};

/// Samples a function of x + iy. Throws DomainError when f is not Gamma-periodic
/// (mismatch across the seams above 1e-10 relative to the sampled sup).
TorusField sample_torus(const FlatTorus& torus, const std::function<cplx(double, double)>& f, int M = 256);

/// d_zbar phi on the same mesh, by spectral differentiation in lattice coordinates.
Eigen::MatrixXcd torus_dbar(const TorusField& phi);

/// Holomorphic projection: the area mean of phi (holomorphic QDs on a torus are c dz^2).
cplx torus_project(const TorusField& phi);

struct TorusNorms {
  double l1_residual = 0.0;  ///< ||Psi - P(Psi)||_{L^1} = 2 int |phi - mean|
  double dbar_l1 = 0.0;      ///< ||dbar Psi||_{L^1} = 2 sqrt(2) int |d_zbar phi|
  double ratio = 0.0;
};

/// Throws DomainError for holomorphic (constant) input.
TorusNorms torus_norms(const TorusField& phi);
double torus_ratio(const TorusField& phi);

struct TorusRow {
  double a = 0.0, b = 0.0;
  std::string mode_description;
  double l1_residual = 0.0, dbar_l1 = 0.0, ratio = 0.0;
};

struct TorusSweep {
  std::vector<TorusRow> rows;
  double slope = 0.0;      ///< least-squares slope of ratio against b
  double intercept = 0.0;
};

/// Ratio of phi = sin(2 pi x / b) over the given b values on Gamma_{a,b}.
TorusSweep torus_sweep(const std::vector<double>& bs, double a = 0.0, int M = 256);

/// Closed form b / (sqrt(2) pi) for the sine witness.
double torus_sine_ratio(double b);

/// A field on the plane chart of the round sphere, with optional exact d_zbar.
struct SphereField {
  std::function<cplx(cplx)> psi;
  std::function<cplx(cplx)> dbar;  ///< central differences when empty
};

struct SphereOptions {
  double r_max = 1000.0;  ///< radial truncation
  int panels = 64;        ///< Gauss panels in u, r = tan(u/2)
  int order = 12;
  int angles = 128;       ///< trapezoid nodes in the angle
  /// Shells [R/4, R/2] and [R/2, R] decaying by less than this factor mark the input as
  /// non-integrable; otherwise the tail beyond R is extrapolated geometrically.
  double tail_ratio = 0.75;
};

struct SphereNorms {
  double l1 = 0.0;       ///< 2 int |psi| dx dy
  double dbar_l1 = 0.0;  ///< sqrt(2) int (1 + |z|^2) |d_zbar psi| dx dy
  double ratio = 0.0;
};

/// Throws DomainError for non-integrable input or vanishing dbar.
SphereNorms sphere_norms(const SphereField& f, const SphereOptions& opts = {});
double sphere_ratio(const SphereField& f, const SphereOptions& opts = {});

/// Closed form 8 / (5 sqrt(2 pi)) for psi = exp(-|z|^2).
double sphere_gaussian_ratio();

}  // namespace qdlab
