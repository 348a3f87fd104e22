#include "qdlab/constant_lab.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <cmath>
#include <exception>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

#include <Eigen/Eigenvalues>
#include <ceres/gradient_problem.h>
#include <ceres/gradient_problem_solver.h>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>

#include "qdlab/csv.hpp"
#include "qdlab/errors.hpp"
#include "qdlab/model_surfaces.hpp"

namespace qdlab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kDegenerate = 1e-14;
constexpr int kMaxRedraws = 64;

// Legendre P_k(s/S) and d/ds P_k(s/S), k = 0..D, as (D+1) x points matrices.
struct Basis {
  Eigen::MatrixXd P, dP;
};

Basis legendre_basis(int D, double S, const std::vector<double>& s) {
  const auto m = static_cast<Eigen::Index>(s.size());
  Basis b{Eigen::MatrixXd::Zero(D + 1, m), Eigen::MatrixXd::Zero(D + 1, m)};
  for (Eigen::Index j = 0; j < m; ++j) {
    const double x = s[static_cast<std::size_t>(j)] / S;
    b.P(0, j) = 1.0;
    if (D >= 1) {
      b.P(1, j) = x;
      b.dP(1, j) = 1.0;
    }
    for (int k = 1; k < D; ++k) {
      b.P(k + 1, j) = ((2 * k + 1) * x * b.P(k, j) - k * b.P(k - 1, j)) / (k + 1);
      b.dP(k + 1, j) = b.dP(k - 1, j) + (2 * k + 1) * b.P(k, j);
    }
  }
  b.dP /= S;
  return b;
}

template <class F>
void parallel_for(int count, int threads, F&& f) {
  threads = std::clamp(threads, 1, std::max(count, 1));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      try {
        for (int i; (i = next++) < count;) f(i);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
        next = count;
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::uint64_t ell_stream(double ell) { return std::bit_cast<std::uint64_t>(ell); }

std::uint64_t draw_key(std::uint64_t seed, double ell, int trial, int attempt) {
  return stream_key(seed, ell_stream(ell), static_cast<std::uint64_t>(trial) | (static_cast<std::uint64_t>(attempt) << 32));
}

void validate_space(const FieldSpace& s) {
  if (s.modes < 0 || s.degree < 0 || s.nodes < 8 || s.degree >= s.nodes)
    throw ConfigError("field space: need modes >= 0, degree >= 0, nodes >= 8 and degree < nodes");
}

// Fields of one space on one collar share the grid, the Legendre basis and the thin windows.
struct Synth {
  CollarParams collar;
  FieldSpace space;
  std::shared_ptr<const SpectralGrid> grid;
  Basis basis;
  CollarRegion whole;

  Synth(const CollarParams& c, const FieldSpace& sp)
      : collar(c),
        space(sp),
        grid(collar_grid(c, GridSpec{sp.modes, sp.nodes, sp.delta_margin})),
        basis(legendre_basis(sp.degree, grid->half_extent(), grid->nodes())),
        whole(CollarRegion::whole(*grid)) {}

  QDOnCollar field(const Eigen::MatrixXcd& a, int theta_modes = -1) const {
    const int N = space.modes;
    const int M = std::max(theta_modes, N);
    Eigen::MatrixXcd amps = Eigen::MatrixXcd::Zero(2 * M + 1, grid->size());
    amps.middleRows(M - N, 2 * N + 1) = a * basis.P.cast<cplx>();
    return QDOnCollar(SpectralField(grid, M, std::move(amps), std::vector<bool>(2 * M + 1, false)), collar);
  }
};

// Thin windows of a collar grid, one per delta (nullopt when empty).
std::vector<std::optional<CollarRegion>> thin_windows(const Synth& syn, const std::vector<double>& deltas) {
  std::vector<std::optional<CollarRegion>> out;
  for (double d : deltas) {
    const ThinPart tp = thin_threshold(syn.collar.ell, d);
    if (tp.empty()) {
      out.emplace_back();
      continue;
    }
    out.emplace_back(CollarRegion::window(*syn.grid, -tp.x_delta, tp.x_delta));
  }
  return out;
}

// Ratios of the projected field for every delta (alpha: one entry). Empty when degenerate.
std::vector<double> ratios(Objective obj, const QDOnCollar& raw, const CollarRegion& whole,
                           const std::vector<double>& deltas,
                           const std::vector<std::optional<CollarRegion>>& windows) {
  const QDOnCollar psi = project_out_dz2(raw);
  const double db = dbar_l1_norm(psi, whole);
  const double l1 = l1_norm(psi, whole);
  const double ell = psi.collar.ell;
  if (obj == Objective::alpha) {
    if (db < kDegenerate && ell * l1 < kDegenerate) return {};
    return {alpha_l1(psi, whole) / (db + ell * l1)};
  }
  const double dmin = *std::min_element(deltas.begin(), deltas.end());
  if (db < kDegenerate && std::sqrt(dmin) * l1 < kDegenerate) return {};
  std::vector<double> out;
  for (std::size_t i = 0; i < deltas.size(); ++i)
    out.push_back(windows[i] ? l1_norm(psi, *windows[i]) / (db + std::sqrt(deltas[i]) * l1) : kNaN);
  return out;
}

struct Trial {
  std::vector<double> base, fine;
  int redraws = 0;
  Eigen::MatrixXcd coefficients;
};

Trial run_trial(Objective obj, const Synth& base, const Synth* fine, const std::vector<double>& deltas,
                const std::vector<std::optional<CollarRegion>>& wb,
                const std::vector<std::optional<CollarRegion>>& wf, std::uint64_t seed, int trial) {
  Trial t;
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    const Eigen::MatrixXcd a = random_coefficients(base.space, draw_key(seed, base.collar.ell, trial, attempt));
    t.base = ratios(obj, base.field(a), base.whole, deltas, wb);
    if (t.base.empty()) {
      ++t.redraws;
      continue;
    }
    if (fine) t.fine = ratios(obj, fine->field(a, 2 * base.space.modes + 1), fine->whole, deltas, wf);
    t.coefficients = a;
    return t;
  }
  throw NumericalError("sweep: every redraw was degenerate");
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y, double* intercept = nullptr) {
  double mx = 0.0, my = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (std::isfinite(x[i]) && std::isfinite(y[i])) {
      mx += x[i];
      my += y[i];
      ++n;
    }
  if (n < 2) {
    if (intercept) *intercept = kNaN;
    return kNaN;
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (std::isfinite(x[i]) && std::isfinite(y[i])) {
      sxy += (x[i] - mx) * (y[i] - my);
      sxx += (x[i] - mx) * (x[i] - mx);
    }
  const double slope = sxy / sxx;
  if (intercept) *intercept = my - slope * mx;
  return slope;
}

SweepReport run_sweep(Objective obj, const SweepConfig& cfg) {
  if (cfg.trials < 1) throw ConfigError("sweep: trials must be >= 1");
  if (cfg.ells.empty()) throw ConfigError("sweep: empty ell grid");
  validate_space(cfg.space);
  std::vector<double> deltas = obj == Objective::alpha ? std::vector<double>{0.0} : cfg.deltas;
  if (obj == Objective::thin_mass) {
    if (deltas.empty()) throw ConfigError("thin_mass_sweep: empty delta grid");
    for (double d : deltas)
      if (!(d > 0.0)) throw ConfigError("thin_mass_sweep: delta must be positive");
  }

  const int L = static_cast<int>(cfg.ells.size());
  std::vector<std::unique_ptr<Synth>> base(L), fine(L);
  std::vector<std::vector<std::optional<CollarRegion>>> wb(L), wf(L);
  const FieldSpace fspace = refined(cfg.space);
  for (int i = 0; i < L; ++i) {
    const CollarParams c = CollarParams::make(cfg.ells[i]);
    base[i] = std::make_unique<Synth>(c, cfg.space);
    if (cfg.refine) fine[i] = std::make_unique<Synth>(c, fspace);
    if (obj == Objective::thin_mass) {
      wb[i] = thin_windows(*base[i], deltas);
      if (cfg.refine) wf[i] = thin_windows(*fine[i], deltas);
    }
  }

  std::vector<Trial> trials(static_cast<std::size_t>(L) * cfg.trials);
  parallel_for(static_cast<int>(trials.size()), cfg.threads, [&](int task) {
    const int i = task / cfg.trials, t = task % cfg.trials;
    trials[static_cast<std::size_t>(task)] =
        run_trial(obj, *base[i], fine[i].get(), deltas, wb[i], wf[i], cfg.seed, t);
  });

  SweepReport r;
  r.objective = obj;
  r.config = cfg;
  r.max_by_ell.assign(L, kNaN);
  r.max_by_ell_refined.assign(L, kNaN);
  r.max_constant = kNaN;
  for (int i = 0; i < L; ++i) {
    for (std::size_t d = 0; d < deltas.size(); ++d) {
      SweepPoint p;
      p.ell = cfg.ells[i];
      p.delta = deltas[d];
      p.empty = obj == Objective::thin_mass && !wb[i][d];
      p.max_ratio = p.max_ratio_refined = p.mean_ratio = kNaN;
      if (!p.empty) {
        double sum = 0.0;
        for (int t = 0; t < cfg.trials; ++t) {
          const Trial& tr = trials[static_cast<std::size_t>(i) * cfg.trials + t];
          const double v = tr.base[d];
          p.redraws += tr.redraws;
          ++p.trials;
          sum += v;
          if (!(v <= p.max_ratio)) {
            p.max_ratio = v;
            p.argmax_trial = t;
          }
          if (cfg.refine && !(tr.fine[d] <= p.max_ratio_refined)) p.max_ratio_refined = tr.fine[d];
        }
        p.mean_ratio = sum / p.trials;
        if (!(p.max_ratio <= r.max_by_ell[i])) r.max_by_ell[i] = p.max_ratio;
        if (cfg.refine && !(p.max_ratio_refined <= r.max_by_ell_refined[i]))
          r.max_by_ell_refined[i] = p.max_ratio_refined;
        if (!(p.max_ratio <= r.max_constant)) {
          r.max_constant = p.max_ratio;
          r.max_ell = p.ell;
          r.max_delta = p.delta;
        }
      }
      r.points.push_back(p);
    }
  }
  std::vector<double> lx, ly;
  for (int i = 0; i < L; ++i) {
    lx.push_back(std::log(cfg.ells[i]));
    ly.push_back(std::log(r.max_by_ell[i]));
    if (cfg.refine && std::isfinite(r.max_by_ell[i]))
      r.refinement_change = std::max(
          r.refinement_change, std::abs(r.max_by_ell_refined[i] - r.max_by_ell[i]) / r.max_by_ell[i]);
  }
  r.slope = fit_slope(lx, ly);
  return r;
}

}  // namespace

// --- random fields --------------------------------------------------------------------

std::uint64_t stream_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(seed), hi(seed), lo(a), hi(a), lo(b), hi(b)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

Eigen::MatrixXcd random_coefficients(const FieldSpace& space, std::uint64_t key) {
  validate_space(space);
  boost::random::mt19937_64 rng(key);
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  const int N = space.modes;
  Eigen::MatrixXcd a(2 * N + 1, space.degree + 1);
  for (int n = -N; n <= N; ++n)
    for (int k = 0; k <= space.degree; ++k) {
      // E|a|^2 = 4^{-|n|} 2^{-k}, split evenly between real and imaginary parts
      const double sd = std::pow(2.0, -std::abs(n)) * std::pow(2.0, -0.5 * k) * std::numbers::sqrt2 / 2.0;
      const double re = normal(rng);
      const double im = normal(rng);
      a(n + N, k) = sd * cplx(re, im);
    }
  return a;
}

QDOnCollar synthesize(const CollarParams& collar, const FieldSpace& space, const Eigen::MatrixXcd& a,
                      int theta_modes) {
  validate_space(space);
  if (a.rows() != 2 * space.modes + 1 || a.cols() != space.degree + 1)
    throw ConfigError("synthesize: coefficient matrix does not match the field space");
  return Synth(collar, space).field(a, theta_modes);
}

FieldSpace refined(const FieldSpace& space) {
  FieldSpace f = space;
  f.nodes *= 2;
  return f;
}

// --- ratios ---------------------------------------------------------------------------

std::string to_string(Objective o) { return o == Objective::alpha ? "alpha" : "thin_mass"; }

Objective objective_from_string(const std::string& s) {
  if (s == "alpha") return Objective::alpha;
  if (s == "thin_mass") return Objective::thin_mass;
  throw ConfigError("unknown objective '" + s + "' (expected alpha or thin_mass)");
}

double alpha_ratio(const QDOnCollar& psi) {
  const CollarRegion whole = CollarRegion::whole(psi.field.grid());
  const double db = dbar_l1_norm(psi, whole);
  const double l1 = l1_norm(psi, whole);
  if (db < kDegenerate && psi.collar.ell * l1 < kDegenerate) return kNaN;
  return alpha_l1(psi, whole) / (db + psi.collar.ell * l1);
}

double thin_mass_ratio(const QDOnCollar& psi, double delta) {
  const ThinPart tp = thin_threshold(psi.collar.ell, delta);
  if (tp.empty()) throw DomainError("thin_mass_ratio: the delta-thin part is empty");
  const CollarRegion whole = CollarRegion::whole(psi.field.grid());
  const double db = dbar_l1_norm(psi, whole);
  const double l1 = l1_norm(psi, whole);
  if (db < kDegenerate && std::sqrt(delta) * l1 < kDegenerate) return kNaN;
  const CollarRegion thin = CollarRegion::window(psi.field.grid(), -tp.x_delta, tp.x_delta);
  return l1_norm(psi, thin) / (db + std::sqrt(delta) * l1);
}

// --- sweeps ---------------------------------------------------------------------------

SweepReport alpha_constant_sweep(const SweepConfig& cfg) { return run_sweep(Objective::alpha, cfg); }
SweepReport thin_mass_sweep(const SweepConfig& cfg) { return run_sweep(Objective::thin_mass, cfg); }

std::string sweep_csv(const SweepReport& r) {
  std::ostringstream os;
  os << "objective,ell,delta,empty,trials,redraws,max_ratio,mean_ratio,max_ratio_refined,argmax_trial\n";
  for (const SweepPoint& p : r.points)
    os << to_string(r.objective) << ',' << num17(p.ell) << ',' << num17(p.delta) << ',' << (p.empty ? 1 : 0)
       << ',' << p.trials << ',' << p.redraws << ',' << num17(p.max_ratio) << ',' << num17(p.mean_ratio) << ','
       << num17(p.max_ratio_refined) << ',' << p.argmax_trial << '\n';
  return os.str();
}

namespace {
nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }
nlohmann::json finite_array(const std::vector<double>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (double x : v) a.push_back(finite_or_null(x));
  return a;
}
}  // namespace

nlohmann::json sweep_json(const SweepReport& r) {
  nlohmann::json grid = {{"ells", r.config.ells},
                         {"trials", r.config.trials},
                         {"modes", r.config.space.modes},
                         {"degree", r.config.space.degree},
                         {"nodes", r.config.space.nodes},
                         {"refine", r.config.refine}};
  if (r.objective == Objective::thin_mass) grid["deltas"] = r.config.deltas;
  return {{"objective", to_string(r.objective)},
          {"model", "dz2-orthogonal fields on the standalone collar"},
          {"grid", grid},
          {"max_constant", finite_or_null(r.max_constant)},
          {"max_location", {{"ell", r.max_ell}, {"delta", r.max_delta}}},
          {"max_by_ell", finite_array(r.max_by_ell)},
          {"max_by_ell_refined", finite_array(r.max_by_ell_refined)},
          {"fit_exponent", finite_or_null(r.slope)},
          {"refinement_change", r.refinement_change},
          {"seed", r.config.seed},
          {"config_hash", r.config_hash}};
}

// --- decay ----------------------------------------------------------------------------

std::vector<double> default_decay_deltas(double lo, double hi, int count) {
  if (count < 2 || !(lo > 0.0) || !(hi > lo)) throw ConfigError("decay deltas: need 0 < lo < hi and count >= 2");
  std::vector<double> d;
  for (int i = 0; i < count; ++i) d.push_back(lo + (hi - lo) * i / (count - 1));
  return d;
}

DecayFit decay_fit(double ell, const std::vector<double>& deltas, const std::map<int, cplx>& modes, int nodes) {
  if (modes.empty()) throw ConfigError("decay_fit: empty mode set");
  int N = 0;
  bool any = false;
  for (const auto& [n, b] : modes) {
    if (n == 0) throw DomainError("decay_fit: mode 0 is the principal part, not a collar-decay mode");
    N = std::max(N, std::abs(n));
    any = any || b != cplx{};
  }
  if (!any) throw DomainError("decay_fit: all mode coefficients vanish");
  const CollarParams collar = CollarParams::make(ell);
  ExtendOptions eo;
  eo.always_log_domain = true;
  const QDOnCollar phi = holomorphic_extend(modes, collar, GridSpec{N, nodes, kArsinhOne}, eo);
  const double log_l1 = log_l1_norm(phi, CollarRegion::whole(phi.field.grid()));

  DecayFit fit;
  fit.ell = ell;
  std::vector<double> x, y;
  for (double d : deltas) {
    DecayPoint p;
    p.delta = d;
    const ThinPart tp = thin_threshold(ell, d);
    if (tp.empty()) {
      p.dropped = true;
      p.reason = "empty thin part (delta <= ell/2)";
    } else if (tp.outside_regime) {
      p.dropped = true;
      p.reason = "delta >= arsinh(1)";
    } else {
      const CollarRegion win = CollarRegion::window(phi.field.grid(), -tp.x_delta, tp.x_delta);
      p.log_r = log_sup_norm(phi, win) + 2.0 * std::log(d) - log_l1;
      x.push_back(1.0 / d);
      y.push_back(p.log_r);
    }
    fit.points.push_back(p);
  }
  fit.used = static_cast<int>(x.size());
  if (fit.used < 2) throw DomainError("decay_fit: fewer than two delta values with a nonempty thin part");
  fit.slope = fit_slope(x, y, &fit.intercept);
  return fit;
}

// --- maximisation ---------------------------------------------------------------------

namespace {

// Smoothed ratio on a fixed quadrature, with its gradient in the coefficients.
// |f|_eps = sqrt(|f|^2 + eps^2 m^2) with m the mean of |psi|, so the smoothed ratio is
// invariant under psi -> lambda psi like the exact one.
class SmoothRatio {
 public:
  SmoothRatio(const Synth& syn, Objective obj, double delta) : obj_(obj) {
    const SpectralGrid& g = *syn.grid;
    N_ = syn.space.modes;
    D_ = syn.space.degree;
    const int K = 4 * N_ + 4;
    dtheta_ = 2 * kPi / K;
    E_.resize(2 * N_ + 1, K);
    for (int n = -N_; n <= N_; ++n)
      for (int k = 0; k < K; ++k) E_(n + N_, k) = std::polar(1.0, n * dtheta_ * k);
    P_ = syn.basis.P.cast<cplx>();
    dP_ = syn.basis.dP.cast<cplx>();
    const int J = g.size();
    w_.resize(J);
    rho_inv_.resize(J);
    mu_ = Eigen::VectorXd::Zero(D_ + 1);
    for (int j = 0; j < J; ++j) {
      w_(j) = g.weights()[j];
      rho_inv_(j) = 1.0 / conformal_factor(syn.collar.ell, g.nodes()[j]);
      mu_ += w_(j) * rho_inv_(j) * rho_inv_(j) * syn.basis.P.col(j);
    }
    nvec_.resize(2 * N_ + 1);
    for (int n = -N_; n <= N_; ++n) nvec_(n + N_) = n;
    weight_ = obj == Objective::alpha ? syn.collar.ell : std::sqrt(delta);
    if (obj == Objective::thin_mass) {
      const ThinPart tp = thin_threshold(syn.collar.ell, delta);
      if (tp.empty()) throw DomainError("maximize_ratio: the delta-thin part is empty");
      const CollarRegion win = CollarRegion::window(g, -tp.x_delta, tp.x_delta);
      Pt_ = legendre_basis(D_, g.half_extent(), win.nodes).P.cast<cplx>();
      wt_ = Eigen::Map<const Eigen::VectorXd>(win.weights.data(), static_cast<Eigen::Index>(win.weights.size()));
    }
  }

  struct Value {
    double ratio = 0.0, l1 = 0.0;
    Eigen::MatrixXcd grad;  ///< dR/dRe a + i dR/dIm a
  };

  Value eval(const Eigen::MatrixXcd& a, double eps, bool grad) const {
    const Eigen::MatrixXcd C = a * P_;
    const Eigen::MatrixXcd V = C.transpose() * E_;
    const Eigen::MatrixXcd B = 0.5 * (a * dP_ - nvec_.cast<cplx>().asDiagonal() * C);
    const Eigen::MatrixXcd W = B.transpose() * E_;
    const Eigen::VectorXd cL = 2 * dtheta_ * w_;
    const double wsum = cL.sum() * static_cast<double>(E_.cols());
    const Eigen::ArrayXXd absV = V.array().abs();
    const double mean = (cL.asDiagonal() * absV.matrix()).sum() / wsum;
    const double e2 = eps * eps * mean * mean;

    Value v;
    Term L = smooth_sum(V, cL, e2, grad);
    Term Dn = smooth_sum(W, 2 * std::numbers::sqrt2 * dtheta_ * w_.cwiseProduct(rho_inv_), e2, grad);
    Term A;
    if (obj_ == Objective::alpha)
      A = smooth_sum(C.row(N_).transpose(), w_, e2, grad);
    else
      A = smooth_sum((a * Pt_).transpose() * E_, 2 * dtheta_ * wt_, e2, grad);
    v.l1 = L.value;
    const double den = Dn.value + weight_ * L.value;
    v.ratio = A.value / den;
    if (!grad) return v;

    // gradients of the three sums in a, including their dependence on e2 through m^2
    const Eigen::MatrixXcd phase = (absV > 0.0).select(V.array() / absV.cast<cplx>(), cplx{}).matrix();
    const Eigen::MatrixXcd gm = 2.0 * mean / wsum * synth_adjoint(cL.cast<cplx>().asDiagonal() * phase, P_);
    const Eigen::MatrixXcd GL = synth_adjoint(L.u, P_) + eps * eps * L.de2 * gm;
    const Eigen::MatrixXcd T = (Dn.u * E_.adjoint()).transpose();
    const Eigen::MatrixXcd GD = 0.5 * (T * dP_.transpose() - nvec_.cast<cplx>().asDiagonal() * (T * P_.transpose())) +
                                eps * eps * Dn.de2 * gm;
    Eigen::MatrixXcd GA;
    if (obj_ == Objective::alpha) {
      GA = Eigen::MatrixXcd::Zero(a.rows(), a.cols());
      GA.row(N_) = A.u.transpose() * P_.transpose();
    } else {
      GA = synth_adjoint(A.u, Pt_);
    }
    GA += eps * eps * A.de2 * gm;
    v.grad = (GA - v.ratio * (GD + weight_ * GL)) / den;
    return v;
  }

  /// Free coordinates: every coefficient except a_{00}, which the dz^2 constraint
  /// sum_k a_{0k} mu_k = 0 determines. Packed as (Re, Im) pairs.
  int dimension() const { return 2 * ((2 * N_ + 1) * (D_ + 1) - 1); }

  Eigen::MatrixXcd unpack(const double* x) const {
    Eigen::MatrixXcd a(2 * N_ + 1, D_ + 1);
    int p = 0;
    for (int r = 0; r < a.rows(); ++r)
      for (int k = 0; k < a.cols(); ++k) {
        if (r == N_ && k == 0) continue;
        a(r, k) = cplx(x[p], x[p + 1]);
        p += 2;
      }
    a(N_, 0) = 0.0;
    a(N_, 0) = -(a.row(N_) * mu_.cast<cplx>())(0) / mu_(0);
    return a;
  }

  std::vector<double> pack(const Eigen::MatrixXcd& a) const {
    std::vector<double> x;
    for (int r = 0; r < a.rows(); ++r)
      for (int k = 0; k < a.cols(); ++k) {
        if (r == N_ && k == 0) continue;
        x.push_back(a(r, k).real());
        x.push_back(a(r, k).imag());
      }
    return x;
  }

  /// Gradient in the free coordinates, by the chain rule through a_{00}.
  void pack_gradient(const Eigen::MatrixXcd& g, double* out) const {
    int p = 0;
    for (int r = 0; r < g.rows(); ++r)
      for (int k = 0; k < g.cols(); ++k) {
        if (r == N_ && k == 0) continue;
        cplx v = g(r, k);
        if (r == N_) v -= g(N_, 0) * (mu_(k) / mu_(0));
        out[p] = v.real();
        out[p + 1] = v.imag();
        p += 2;
      }
  }

  /// Removes the dz^2 component, then scales to l1 = 1.
  void project_normalize(Eigen::MatrixXcd& a) const {
    a(N_, 0) -= (a.row(N_) * mu_.cast<cplx>())(0) / mu_(0);
    const double l1 = eval(a, 0.0, false).l1;
    if (!(l1 > 0.0)) throw NumericalError("maximize_ratio: field with vanishing l1 norm");
    a /= l1;
  }

 private:
  struct Term {
    double value = 0.0;
    double de2 = 0.0;     ///< d value / d e2
    Eigen::MatrixXcd u;   ///< c_j M / |M|_eps
  };

  // sum_j c_j sum_k sqrt(|M_jk|^2 + e2)
  static Term smooth_sum(const Eigen::MatrixXcd& M, const Eigen::VectorXd& c, double e2, bool grad) {
    const Eigen::ArrayXXd mag = (M.array().abs2() + e2).sqrt();
    Term t;
    t.value = (c.asDiagonal() * mag.matrix()).sum();
    if (grad) {
      t.u = c.cast<cplx>().asDiagonal() * (M.array() / mag.cast<cplx>()).matrix();
      t.de2 = 0.5 * (c.asDiagonal() * mag.inverse().matrix()).sum();
    }
    return t;
  }

  // Adjoint of a -> (a Q)^T E applied to U (points x angles).
  Eigen::MatrixXcd synth_adjoint(const Eigen::MatrixXcd& U, const Eigen::MatrixXcd& Q) const {
    return (U * E_.adjoint()).transpose() * Q.transpose();
  }

  Objective obj_;
  int N_ = 0, D_ = 0;
  double dtheta_ = 0.0, weight_ = 0.0;
  Eigen::MatrixXcd E_, P_, dP_, Pt_;
  Eigen::VectorXd w_, rho_inv_, wt_, mu_, nvec_;
};

class NegatedRatio : public ceres::FirstOrderFunction {
 public:
  NegatedRatio(const SmoothRatio& r, double eps) : r_(r), eps_(eps) {}
  bool Evaluate(const double* x, double* cost, double* gradient) const override {
    const Eigen::MatrixXcd a = r_.unpack(x);
    const SmoothRatio::Value v = r_.eval(a, eps_, gradient != nullptr);
    if (!std::isfinite(v.ratio)) return false;
    *cost = -v.ratio;
    if (gradient) {
      r_.pack_gradient(v.grad, gradient);
      for (int i = 0; i < NumParameters(); ++i) gradient[i] = -gradient[i];
    }
    return true;
  }
  int NumParameters() const override { return r_.dimension(); }

 private:
  const SmoothRatio& r_;
  double eps_;
};

}  // namespace

MaximizeResult maximize_ratio(double ell, const MaximizeConfig& cfg) {
  validate_space(cfg.space);
  if (!(cfg.eps > 0.0)) throw ConfigError("maximize_ratio: smoothing eps must be positive");
  if (cfg.restarts < 1 || cfg.screen < 1 || cfg.max_iters < 1)
    throw ConfigError("maximize_ratio: need restarts >= 1, screen >= 1, max_iters >= 1");
  const Synth syn(CollarParams::make(ell), cfg.space);
  const std::vector<double> deltas{cfg.delta};
  std::vector<std::optional<CollarRegion>> windows;
  if (cfg.objective == Objective::thin_mass) {
    windows = thin_windows(syn, deltas);
    if (!windows[0]) throw DomainError("maximize_ratio: the delta-thin part is empty");
  }
  const SmoothRatio obj(syn, cfg.objective, cfg.delta);
  auto exact = [&](const Eigen::MatrixXcd& a) {
    const QDOnCollar psi = syn.field(a);
    return cfg.objective == Objective::alpha ? alpha_ratio(psi) : thin_mass_ratio(psi, cfg.delta);
  };

  // Screen the sweep's draws; the best ones seed the ascent.
  std::vector<std::pair<double, Eigen::MatrixXcd>> screened;
  for (int t = 0; t < cfg.screen; ++t) {
    Trial tr = run_trial(cfg.objective, syn, nullptr, deltas, windows, {}, cfg.seed, t);
    screened.emplace_back(tr.base[0], std::move(tr.coefficients));
  }
  std::stable_sort(screened.begin(), screened.end(), [](const auto& x, const auto& y) { return x.first > y.first; });

  MaximizeResult res;
  res.best_screened = screened.front().first;
  res.coefficients = screened.front().second;
  obj.project_normalize(res.coefficients);
  res.ratio = res.best_screened;
  res.converged = true;

  ceres::GradientProblemSolver::Options opts;
  opts.line_search_direction_type = ceres::LBFGS;
  opts.max_num_iterations = cfg.max_iters;
  opts.function_tolerance = cfg.rel_tol;
  opts.gradient_tolerance = 1e-12;
  opts.parameter_tolerance = 1e-12;
  opts.logging_type = ceres::SILENT;
  const ceres::GradientProblem problem(new NegatedRatio(obj, cfg.eps));

  const int starts = std::min<int>(cfg.restarts, static_cast<int>(screened.size()));
  for (int r = 0; r < starts; ++r) {
    Eigen::MatrixXcd a = screened[static_cast<std::size_t>(r)].second;
    obj.project_normalize(a);
    std::vector<double> x = obj.pack(a);
    ceres::GradientProblemSolver::Summary summary;
    ceres::Solve(opts, problem, x.data(), &summary);
    res.iterations += static_cast<int>(summary.iterations.size());
    res.converged = res.converged && summary.termination_type == ceres::CONVERGENCE;
    a = obj.unpack(x.data());
    obj.project_normalize(a);
    const double value = exact(a);
    if (value > res.ratio) {
      res.ratio = value;
      res.coefficients = a;
    }
  }

  res.smoothed = obj.eval(res.coefficients, cfg.eps, false).ratio;
  const QDOnCollar w = syn.field(res.coefficients);
  const QDOnCollar one = dz2_field(w);
  res.orthogonality = std::abs(l2_inner(w, one)) / (l2_norm(w) * l2_norm(one));
  return res;
}

double l2_surrogate(double ell, Objective objective, double delta, const FieldSpace& space) {
  validate_space(space);
  const Synth syn(CollarParams::make(ell), space);
  const SpectralGrid& g = *syn.grid;
  const int J = g.size(), D = space.degree;
  Eigen::VectorXd w(J), r2(J);
  for (int j = 0; j < J; ++j) {
    w(j) = g.weights()[j];
    r2(j) = std::pow(conformal_factor(ell, g.nodes()[j]), -2);
  }
  const Eigen::MatrixXd& P = syn.basis.P;
  const Eigen::MatrixXd& dP = syn.basis.dP;
  const Eigen::MatrixXd mass = P * w.cwiseProduct(r2).asDiagonal() * P.transpose();
  const double weight = objective == Objective::alpha ? ell : std::sqrt(delta);

  Eigen::MatrixXd thin;
  if (objective == Objective::thin_mass) {
    const ThinPart tp = thin_threshold(ell, delta);
    if (tp.empty()) throw DomainError("l2_surrogate: the delta-thin part is empty");
    const CollarRegion win = CollarRegion::window(g, -tp.x_delta, tp.x_delta);
    const Eigen::MatrixXd Pt = legendre_basis(D, g.half_extent(), win.nodes).P;
    Eigen::VectorXd wt(Pt.cols());
    for (Eigen::Index p = 0; p < wt.size(); ++p)
      wt(p) = win.weights[static_cast<std::size_t>(p)] * std::pow(conformal_factor(ell, win.nodes[static_cast<std::size_t>(p)]), -2);
    thin = 4 * 2 * kPi * Pt * wt.asDiagonal() * Pt.transpose();
  }

  // dz^2-orthogonality only constrains mode 0: sum_k a_{0k} mu_k = 0
  const Eigen::VectorXd mu = P * w.cwiseProduct(r2);
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(D + 1, D);
  for (int k = 1; k <= D; ++k) {
    Z(k, k - 1) = 1.0;
    Z(0, k - 1) = -mu(k) / mu(0);
  }

  double best = 0.0;
  for (int n = -space.modes; n <= space.modes; ++n) {
    if (objective == Objective::alpha && n != 0) continue;
    const Eigen::MatrixXd Bn = dP - n * P;
    Eigen::MatrixXd den = 8 * 2 * kPi * 0.25 * Bn * w.cwiseProduct(r2).cwiseProduct(r2).asDiagonal() * Bn.transpose() +
                          weight * weight * 4 * 2 * kPi * mass;
    Eigen::MatrixXd num = objective == Objective::alpha ? Eigen::MatrixXd(P * w.asDiagonal() * P.transpose()) : thin;
    if (n == 0) {
      if (D == 0) continue;
      den = Z.transpose() * den * Z;
      num = Z.transpose() * num * Z;
    }
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(num, den);
    if (es.info() != Eigen::Success) throw NumericalError("l2_surrogate: generalized eigensolver failed");
    best = std::max(best, es.eigenvalues().maxCoeff());
  }
  return best;
}

double maximize_torus_pair(double b, int M, int samples) {
  if (samples < 2) throw ConfigError("maximize_torus_pair: need samples >= 2");
  const FlatTorus torus = FlatTorus::make(0.0, b);
  const TorusField s = sample_torus(torus, [b](double x, double) { return cplx(std::sin(2 * kPi * x / b)); }, M);
  const TorusField c = sample_torus(torus, [b](double x, double) { return cplx(std::cos(2 * kPi * x / b)); }, M);
  double best = 0.0;
  // (c1, c2) = (cos t, sin t e^{i phi}) up to an irrelevant overall scale
  for (int i = 0; i < samples; ++i) {
    const double t = 0.5 * kPi * i / (samples - 1);
    for (int k = 0; k < samples; ++k) {
      const cplx c2 = std::polar(std::sin(t), 2 * kPi * k / samples);
      TorusField f = s;
      f.samples = std::cos(t) * s.samples + c2 * c.samples;
      best = std::max(best, torus_ratio(f));
    }
  }
  return best;
}

}  // namespace qdlab
