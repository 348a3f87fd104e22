#pragma once

#include <complex>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "qdlab/collar_geom.hpp"

namespace qdlab {

using cplx = std::complex<double>;

/// Gauss-Legendre grid on [-S, S] together with the spectral machinery built on it:
/// barycentric interpolation, differentiation and Legendre analysis matrices.
/// Immutable once built; shared between fields.
class SpectralGrid {
 public:
  static std::shared_ptr<const SpectralGrid> make(double half_extent, int nodes);

  double half_extent() const { return half_extent_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }

  const Eigen::MatrixXd& differentiation() const { return diff_; }
  /// Row k maps node samples to the k-th Legendre coefficient on [-S, S].
  const Eigen::MatrixXd& legendre_analysis() const { return legendre_; }

  /// Row of barycentric weights interpolating node samples at s (exact at nodes).
  Eigen::RowVectorXd interpolation_row(double s) const;
  Eigen::MatrixXd interpolation_matrix(std::span<const double> points) const;

  bool same_as(const SpectralGrid& other) const;

 private:
  SpectralGrid() = default;
  double half_extent_ = 0.0;
  std::vector<double> nodes_, weights_, bary_;
  Eigen::MatrixXd diff_, legendre_;
};

/// Discretisation of a collar field.
struct GridSpec {
  int modes = 32;    ///< Fourier modes -modes..modes
  int nodes = 512;   ///< Gauss-Legendre nodes in s
  /// The grid spans the delta_margin-thin part; values >= arsinh(1) give the whole collar.
  double delta_margin = kArsinhOne;
};

std::shared_ptr<const SpectralGrid> collar_grid(const CollarParams& collar, const GridSpec& spec);

/// psi(s, theta) = sum_n c_n(s) e^{i n theta}, with c_n sampled at the grid nodes.
///
/// A mode flagged log-domain stores an amplitude p_n and represents c_n(s) = e^{n s} p_n(s);
/// holomorphic modes b_n e^{ns} then have constant amplitude and never overflow.
class SpectralField {
 public:
  SpectralField(std::shared_ptr<const SpectralGrid> grid, int max_mode, Eigen::MatrixXcd amplitudes,
                std::vector<bool> log_domain);

  static SpectralField zero(std::shared_ptr<const SpectralGrid> grid, int max_mode);
  /// Samples f at K = 4N+4 equispaced angles per node and keeps modes -N..N.
  static SpectralField from_function(std::shared_ptr<const SpectralGrid> grid, int max_mode,
                                     const std::function<cplx(double, double)>& f);
  /// c_n(s_j) = f(n, s_j).
  static SpectralField from_modes(std::shared_ptr<const SpectralGrid> grid, int max_mode,
                                  const std::function<cplx(int, double)>& f);

  const SpectralGrid& grid() const { return *grid_; }
  const std::shared_ptr<const SpectralGrid>& grid_ptr() const { return grid_; }
  int max_mode() const { return max_mode_; }
  int mode_count() const { return 2 * max_mode_ + 1; }
  int theta_samples() const { return 4 * max_mode_ + 4; }

  /// Row n + N holds the amplitudes of mode n.
  const Eigen::MatrixXcd& amplitudes() const { return amps_; }
  bool log_domain(int n) const { return log_domain_[n + max_mode_]; }
  const std::vector<bool>& log_domain_flags() const { return log_domain_; }

  /// c_n(s_j); throws NumericalError when the value overflows a double.
  cplx coefficient(int n, int j) const;
  /// Interpolated c_n(s) for all modes at an arbitrary s in [-S, S].
  Eigen::VectorXcd coefficients_at(double s) const;
  /// Column p holds c_n(s_p) for all modes.
  Eigen::MatrixXcd coefficients_at(std::span<const double> s) const;
  cplx value(double s, double theta) const;

  SpectralField scaled(cplx lambda) const;
  SpectralField operator+(const SpectralField& other) const;
  SpectralField operator-(const SpectralField& other) const;
  /// Same field with every mode outside `keep` set to zero.
  SpectralField with_modes(const std::function<bool(int)>& keep) const;

 private:
  std::shared_ptr<const SpectralGrid> grid_;
  int max_mode_ = 0;
  Eigen::MatrixXcd amps_;
  std::vector<bool> log_domain_;
};

/// A quadratic differential psi dz^2 on the model collar.
struct QDOnCollar {
  SpectralField field;
  CollarParams collar;

  QDOnCollar(SpectralField f, CollarParams c);
};

/// Principal part b0 dz^2 and collar-decay part of a holomorphic quadratic differential.
struct HoloSplit {
  cplx b0;
  QDOnCollar decay;
};

/// Integration window [a, b] in s with its own Gauss rule and interpolation from the grid.
struct CollarRegion {
  double a = 0.0, b = 0.0;
  bool full = false;
  std::vector<double> nodes, weights;
  Eigen::MatrixXd interp;  ///< region nodes x grid nodes (unused when full)

  static CollarRegion whole(const SpectralGrid& grid);
  static CollarRegion window(const SpectralGrid& grid, double a, double b);
};

// --- calculus -------------------------------------------------------------------------

/// Field of d_{zbar} psi = (1/2)(d_s + i d_theta) psi, mode-wise (1/2)(c_n' - n c_n).
/// Throws NumericalError when a sampled coefficient is not resolved by the grid.
QDOnCollar dbar(const QDOnCollar& psi);

/// 2 int int |psi| dtheta ds over the region.
double l1_norm(const QDOnCollar& psi, const CollarRegion& region);
double l1_norm(const QDOnCollar& psi);
/// Natural log of l1_norm; usable when the norm itself overflows.
double log_l1_norm(const QDOnCollar& psi, const CollarRegion& region);

/// ||dbar Psi||_{L^1} = 2 sqrt(2) int int rho^-1 |d_zbar psi| dtheta ds over the region.
double dbar_l1_norm(const QDOnCollar& psi, const CollarRegion& region);
double dbar_l1_norm(const QDOnCollar& psi);
double log_dbar_l1_norm(const QDOnCollar& psi, const CollarRegion& region);

/// sup over the region of the pointwise tensor norm |psi| 2 rho^-2, as a natural log.
double log_sup_norm(const QDOnCollar& psi, const CollarRegion& region);

/// <phi dz^2, psi dz^2> = 4 int phi conj(psi) rho^-2, by Parseval in theta.
cplx l2_inner(const QDOnCollar& phi, const QDOnCollar& psi);
double l2_norm(const QDOnCollar& psi);

/// Circle means alpha(s_j) = c_0(s_j) at the grid nodes.
Eigen::VectorXcd alpha(const QDOnCollar& psi);
cplx alpha_at(const QDOnCollar& psi, double s);
/// int |alpha(s)| ds over the region.
double alpha_l1(const QDOnCollar& psi, const CollarRegion& region);

/// The constant differential dz^2 on the same grid as `like`.
QDOnCollar dz2_field(const QDOnCollar& like);

/// Removes the dz^2 component so that <out, dz^2> = 0 on the collar.
QDOnCollar project_out_dz2(const QDOnCollar& psi);

struct ExtendOptions {
  /// Store modes with |n| S above the threshold as log-domain amplitudes. Without it such
  /// requests are rejected.
  bool allow_log_domain = true;
  /// Store every nonzero mode in log-domain form, regardless of |n| S.
  bool always_log_domain = false;
  double overflow_threshold = 300.0;
};

/// Phi = sum_n b_n e^{ns} e^{in theta} dz^2.
QDOnCollar holomorphic_extend(const std::map<int, cplx>& b, const CollarParams& collar,
                              const GridSpec& spec, const ExtendOptions& opts = {});

/// Splits a holomorphic field into b0 dz^2 and the remaining modes.
/// Throws DomainError when mode 0 is not constant in s.
HoloSplit holo_split(const QDOnCollar& phi, double rel_tol = 1e-8);

// --- serialization ---------------------------------------------------------------------

nlohmann::json to_json(const QDOnCollar& psi);
QDOnCollar field_from_json(const nlohmann::json& j);

}  // namespace qdlab
