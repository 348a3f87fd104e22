#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "qdlab/qd_field.hpp"

namespace qdlab {

inline constexpr double kDefaultDelta0 = 0.1;

struct CollarPoint {
  double s = 0.0;
  double theta = 0.0;
};

/// Omega_b(z0) = z0 + [-r, r] x [-(r + b), r + b] with r = rho^{-1/2}(s0), in the universal
/// cover of the cylinder.
struct RectangleSpec {
  CollarPoint z0;
  double b = 0.0;
  double h_minus = 0.0, h_plus = 0.0;  ///< s0 -/+ r
  double v_half = 0.0;                 ///< r + b

  double half_width() const { return 0.5 * (h_plus - h_minus); }
};

/// Checked constructor: z0 must lie in the delta0-thin part and b in [0, 2 pi].
RectangleSpec make_rectangle(const CollarParams& collar, CollarPoint z0, double b,
                             double delta0 = kDefaultDelta0);
/// Same geometry without the thin-part requirement.
RectangleSpec rectangle_geometry(const CollarParams& collar, CollarPoint z0, double b);

/// Number of period strips theta0 + 2 pi k + [0, 2 pi) met by the rectangle.
int wrap_count(const RectangleSpec& rect);
/// 2 (N + 2) with N = floor(rho^{-1/2}(s0) / 2 pi).
int wrap_bound(const CollarParams& collar, double s0);

struct CauchyOptions {
  double panel_width = 0.5;  ///< widest Gauss panel in s and theta
  int order = 4;             ///< Gauss points per panel
  double core_half = 0.5;    ///< half-side of the polar core around z0
  int b_nodes = 16;          ///< midpoint rule for the b-average

  /// Halves every panel.
  CauchyOptions refined() const;
};

/// The five terms of 2 pi i psi(z0) = I_Omega + I_V^+ + I_V^- + I_H^+ + I_H^-.
struct CauchyBreakdown {
  cplx i_omega, i_v_plus, i_v_minus, i_h_plus, i_h_minus;
  int wraps = 0;

  cplx sum() const { return i_omega + i_v_plus + i_v_minus + i_h_plus + i_h_minus; }
  /// sum / (2 pi i), the reconstructed value of psi at z0.
  cplx reconstructed() const;
};

/// Evaluates the five integrals on the periodic extension of psi.
/// Throws DomainError when the rectangle leaves the grid support.
CauchyBreakdown cauchy_reconstruct(const QDOnCollar& psi, CollarPoint z0, double b,
                                   const CauchyOptions& opts = {});
/// Mean of every term over b in [0, 2 pi].
CauchyBreakdown averaged_reconstruct(const QDOnCollar& psi, CollarPoint z0,
                                     const CauchyOptions& opts = {});

/// max over the vertical segments I_k, |k| <= N(s0), of
///   sup_{z in I_k} |1/(z - z0) - 1/(r + 2 pi i k)| / (2 pi rho(s0)).
double mean_value_error_ratio(const CollarParams& collar, double s0, int samples = 257);

/// max over s in [h^-(s0), h^+(s0)] of (1 + sum_{k=1}^{N+1} 1/k) / log(1/rho(s)).
double harmonic_sum_constant(const CollarParams& collar, double s0);

/// Terms of the mean-value bound for the b-averaged upper horizontal integral:
/// |mean_b I_H^+| <= alpha_term + C psi_term.
struct HorizontalBound {
  double mean_abs = 0.0;    ///< |mean_b I_H^+(z0, b)|
  double alpha_term = 0.0;  ///< rho^{1/2}(s0) int |alpha| over [h^-, h^+]
  double psi_term = 0.0;    ///< rho(s0) int int |psi| over [h^-, h^+] x S^1
  /// Smallest C making the bound hold (0 when the alpha term alone suffices).
  double constant() const;
};
HorizontalBound horizontal_bound(const QDOnCollar& psi, CollarPoint z0, const CauchyOptions& opts = {});

struct RemarkCheck {
  std::string name;
  double max_constant = 0.0;
  double bound = 0.0;
  double worst_point = 0.0;  ///< s0 (or s) where max_constant is attained
  bool pass = false;
};

struct RemarkReport {
  double ell = 0.0;
  double delta0 = 0.0;
  bool empty = false;  ///< no delta0-thin part: nothing to check
  std::vector<RemarkCheck> checks;

  bool pass() const;
};

/// Geometric properties of the rectangle family over a dense sample of the delta0-thin part.
RemarkReport remark_checks(const CollarParams& collar, double delta0 = kDefaultDelta0,
                           int samples = 2001);

/// psi = sum_{|n| <= N, |m| <= M} a_{nm} e^{i (n theta + m omega s)}, complex Gaussian a_{nm}.
struct TrigPolynomial {
  Eigen::MatrixXcd a;  ///< (2N+1) x (2M+1)
  double omega = 0.0;
  QDOnCollar psi;

  cplx exact(double s, double theta) const;
  /// max |psi| over a lattice of the grid support; a lower bound of the sup norm.
  double sampled_sup(int s_samples = 201, int theta_samples = 64) const;
};

TrigPolynomial random_trig_polynomial(const CollarParams& collar, std::uint64_t key, int N = 4, int M = 2,
                                      double omega = 0.5, int nodes = 128);

nlohmann::json to_json(const RemarkReport& report);
nlohmann::json to_json(const CauchyBreakdown& br);

}  // namespace qdlab
