#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "qdlab/qd_field.hpp"

namespace qdlab {

// --- random fields --------------------------------------------------------------------

/// Truncated field space: c_n(s) = sum_{k <= degree} a_{nk} P_k(s / S), |n| <= modes.
struct FieldSpace {
  int modes = 16;
  int degree = 12;
  int nodes = 256;
  double delta_margin = kArsinhOne;
};

/// Deterministic 64-bit stream key for (seed, task indices).
std::uint64_t stream_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

/// Complex Gaussian coefficients, E|a_{nk}|^2 = 4^{-|n|} 2^{-k}. Rows n + modes, columns k.
Eigen::MatrixXcd random_coefficients(const FieldSpace& space, std::uint64_t key);

/// The field with coefficients a on the collar grid of `space`. `theta_modes` > modes pads with
/// zero modes, which only refines the theta quadrature (K = 4 theta_modes + 4).
QDOnCollar synthesize(const CollarParams& collar, const FieldSpace& space, const Eigen::MatrixXcd& a,
                      int theta_modes = -1);

/// Same space with twice the s-nodes and twice the theta samples.
FieldSpace refined(const FieldSpace& space);

// --- ratios ---------------------------------------------------------------------------

enum class Objective { alpha, thin_mass };
std::string to_string(Objective o);
Objective objective_from_string(const std::string& s);

/// int |alpha| / (||dbar Psi|| + ell ||Psi||). Returns NaN for degenerate denominators.
double alpha_ratio(const QDOnCollar& psi);
/// ||Psi||_{L^1(delta-thin)} / (||dbar Psi|| + delta^{1/2} ||Psi||). NaN when degenerate.
double thin_mass_ratio(const QDOnCollar& psi, double delta);

// --- sweeps ---------------------------------------------------------------------------

struct SweepConfig {
  std::vector<double> ells{0.05, 0.1, 0.2, 0.4, 0.8};
  std::vector<double> deltas{0.45, 0.6, 0.8};  ///< thin_mass only
  int trials = 200;
  std::uint64_t seed = 1;
  FieldSpace space;
  bool refine = true;   ///< also evaluate every draw on the refined discretisation
  int threads = 1;
};

struct SweepPoint {
  double ell = 0.0;
  double delta = 0.0;  ///< 0 for the alpha objective
  bool empty = false;  ///< delta-thin part empty: point dropped
  int trials = 0;
  int redraws = 0;
  double max_ratio = 0.0;
  double mean_ratio = 0.0;
  double max_ratio_refined = 0.0;
  int argmax_trial = -1;
};

struct SweepReport {
  Objective objective = Objective::alpha;
  SweepConfig config;
  std::vector<SweepPoint> points;
  std::vector<double> max_by_ell;          ///< per entry of config.ells
  std::vector<double> max_by_ell_refined;
  double max_constant = 0.0;
  double max_ell = 0.0, max_delta = 0.0;
  double slope = 0.0;                      ///< least squares of log max_by_ell vs log ell
  double refinement_change = 0.0;          ///< max relative change of max_by_ell under refinement
  std::string config_hash;
};

SweepReport alpha_constant_sweep(const SweepConfig& cfg);
SweepReport thin_mass_sweep(const SweepConfig& cfg);

std::string sweep_csv(const SweepReport& r);
nlohmann::json sweep_json(const SweepReport& r);

// --- decay ----------------------------------------------------------------------------

struct DecayPoint {
  double delta = 0.0;
  double log_r = 0.0;  ///< log of sup_{delta-thin}|Phi|_g delta^2 / ||Phi||_{L^1}
  bool dropped = false;
  std::string reason;
};

struct DecayFit {
  double ell = 0.0;
  double slope = 0.0;  ///< d log r / d (1/delta)
  double intercept = 0.0;
  std::vector<DecayPoint> points;
  int used = 0;
};

std::vector<double> default_decay_deltas(double lo = 0.05, double hi = 0.5, int count = 10);

/// Fits log r against 1/delta for Phi = sum b_n e^{ns} e^{in theta} dz^2 (n != 0).
DecayFit decay_fit(double ell, const std::vector<double>& deltas, const std::map<int, cplx>& modes,
                   int nodes = 64);

// --- maximisation ---------------------------------------------------------------------

struct MaximizeConfig {
  Objective objective = Objective::alpha;
  double delta = 0.6;          ///< thin_mass only
  FieldSpace space;
  double eps = 0.01;           ///< |f|_eps = sqrt(|f|^2 + eps^2 m^2), m the mean of |psi|
  int restarts = 4;
  int screen = 200;            ///< random draws screened for starting points
  int max_iters = 1000;        ///< L-BFGS iterations per restart
  double rel_tol = 1e-10;      ///< relative change of the objective at convergence
  std::uint64_t seed = 1;
};

struct MaximizeResult {
  double ratio = 0.0;           ///< exact (unsmoothed) ratio of the witness
  double smoothed = 0.0;
  double best_screened = 0.0;   ///< best exact ratio among the screened draws
  bool converged = false;
  int iterations = 0;
  Eigen::MatrixXcd coefficients;
  double orthogonality = 0.0;   ///< |<Psi, dz^2>| / (||Psi||_2 ||dz^2||_2)
};

/// Ascent on the smoothed ratio over the truncated dz^2-orthogonal space, started from the
/// best of the sweep's draws for this ell. The reported ratio is exact and never below them.
MaximizeResult maximize_ratio(double ell, const MaximizeConfig& cfg);

/// Largest generalized Rayleigh quotient of the L^2 analogue of the objective:
/// int |alpha|^2 ds or ||Psi||^2_{L^2(delta-thin)}, over ||dbar Psi||^2_{L^2} + w^2 ||Psi||^2_{L^2}
/// with w = ell or delta^{1/2}. Norms are those of the hyperbolic metric
/// (||Psi||^2 = 4 int rho^-2 |psi|^2, ||dbar Psi||^2 = 8 int rho^-4 |d_zbar psi|^2).
double l2_surrogate(double ell, Objective objective, double delta, const FieldSpace& space);

/// Max of the torus ratio over phi = c1 sin(2 pi x/b) + c2 cos(2 pi x/b), (c1, c2) in C^2.
double maximize_torus_pair(double b, int M = 128, int samples = 16);

}  // namespace qdlab
