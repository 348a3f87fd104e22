#include "qdlab/cauchy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/tools/roots.hpp>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>

#include "qdlab/errors.hpp"
#include "qdlab/quadrature.hpp"

namespace qdlab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr cplx kI{0.0, 1.0};
constexpr double kInf = std::numeric_limits<double>::infinity();

double inv_sqrt_rho(double ell, double s) { return 1.0 / std::sqrt(conformal_factor(ell, s)); }

// psi on the tensor grid s x theta (rows s, columns theta).
Eigen::MatrixXcd tensor_values(const SpectralField& f, const std::vector<double>& s,
                               const std::vector<double>& theta) {
  const Eigen::MatrixXcd c = f.coefficients_at(std::span<const double>(s));
  const int N = f.max_mode();
  Eigen::MatrixXcd E(f.mode_count(), static_cast<Eigen::Index>(theta.size()));
  for (int r = 0; r < f.mode_count(); ++r)
    for (std::size_t k = 0; k < theta.size(); ++k)
      E(r, static_cast<Eigen::Index>(k)) = std::polar(1.0, (r - N) * theta[k]);
  return c.transpose() * E;
}

// psi at scattered points.
Eigen::VectorXcd point_values(const SpectralField& f, const std::vector<double>& s,
                              const std::vector<double>& theta) {
  const Eigen::MatrixXcd c = f.coefficients_at(std::span<const double>(s));
  const int N = f.max_mode();
  Eigen::VectorXcd out(static_cast<Eigen::Index>(s.size()));
  for (std::size_t p = 0; p < s.size(); ++p) {
    cplx v{};
    for (int r = 0; r < f.mode_count(); ++r)
      v += c(r, static_cast<Eigen::Index>(p)) * std::polar(1.0, (r - N) * theta[p]);
    out(static_cast<Eigen::Index>(p)) = v;
  }
  return out;
}

std::vector<double> seams(const RectangleSpec& R) {
  std::vector<double> out;
  for (int k = 1; 2 * kPi * k < R.v_half; ++k) {
    out.push_back(R.z0.theta + 2 * kPi * k);
    out.push_back(R.z0.theta - 2 * kPi * k);
  }
  return out;
}

void require_on_grid(const QDOnCollar& psi, const RectangleSpec& R) {
  const double S = psi.field.grid().half_extent();
  if (R.h_minus < -S * (1 + 1e-12) || R.h_plus > S * (1 + 1e-12))
    throw DomainError("rectangle [" + std::to_string(R.h_minus) + ", " + std::to_string(R.h_plus) +
                      "] leaves the grid support [-S, S] with S = " + std::to_string(S));
}

struct Horizontal {
  cplx plus, minus;
};

Horizontal horizontal_terms(const QDOnCollar& psi, const RectangleSpec& R, const CauchyOptions& o) {
  const quad::Rule rs = quad::composite_gauss_width(R.h_minus, R.h_plus, {}, o.panel_width, o.order);
  const double s0 = R.z0.s, c = R.v_half;
  const Eigen::MatrixXcd v =
      tensor_values(psi.field, rs.nodes, {R.z0.theta + c, R.z0.theta - c});
  Horizontal h{};
  for (std::size_t i = 0; i < rs.nodes.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double ds = rs.nodes[i] - s0;
    h.plus -= rs.weights[i] * v(row, 0) / cplx(ds, c);
    h.minus += rs.weights[i] * v(row, 1) / cplx(ds, -c);
  }
  return h;
}

CauchyBreakdown reconstruct(const QDOnCollar& psi, const QDOnCollar& d, const RectangleSpec& R,
                            const CauchyOptions& o) {
  require_on_grid(psi, R);
  const double s0 = R.z0.s, t0 = R.z0.theta;
  const double a = R.half_width(), c = R.v_half;
  CauchyBreakdown out{};
  out.wraps = wrap_count(R);

  const Horizontal h = horizontal_terms(psi, R, o);
  out.i_h_plus = h.plus;
  out.i_h_minus = h.minus;

  const std::vector<double> cuts = seams(R);
  const quad::Rule rt = quad::composite_gauss_width(t0 - c, t0 + c, cuts, o.panel_width, o.order);
  const Eigen::MatrixXcd vv = tensor_values(psi.field, {R.h_plus, R.h_minus}, rt.nodes);
  for (std::size_t k = 0; k < rt.nodes.size(); ++k) {
    const auto col = static_cast<Eigen::Index>(k);
    const double dt = rt.nodes[k] - t0;
    out.i_v_plus += kI * rt.weights[k] * vv(0, col) / cplx(a, dt);
    out.i_v_minus -= kI * rt.weights[k] * vv(1, col) / cplx(-a, dt);
  }

  // I_Omega = -2i int int dbar psi / (z - z0) dx dy: tensor Gauss away from z0, polar core around it.
  const double r0 = std::min(o.core_half, a);
  std::vector<double> tcuts = cuts;
  tcuts.push_back(t0 - r0);
  tcuts.push_back(t0 + r0);
  const quad::Rule qs = quad::composite_gauss_width(R.h_minus, R.h_plus, {s0 - r0, s0 + r0}, o.panel_width, o.order);
  const quad::Rule qt = quad::composite_gauss_width(t0 - c, t0 + c, tcuts, o.panel_width, o.order);
  const Eigen::MatrixXcd g = tensor_values(d.field, qs.nodes, qt.nodes);
  cplx area{};
  for (std::size_t i = 0; i < qs.nodes.size(); ++i) {
    const double ds = qs.nodes[i] - s0;
    const bool s_core = std::abs(ds) < r0;
    cplx row{};
    for (std::size_t k = 0; k < qt.nodes.size(); ++k) {
      const double dt = qt.nodes[k] - t0;
      if (s_core && std::abs(dt) < r0) continue;
      row += qt.weights[k] * g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) / cplx(ds, dt);
    }
    area += qs.weights[i] * row;
  }

  // Core square split into four triangles with apex z0; dx dy / (z - z0) = e^{-i phi} dr dphi.
  const double step = o.panel_width / (r0 * std::numbers::sqrt2);
  const quad::Rule ru = quad::composite_gauss_width(-kPi / 4, kPi / 4, {}, step, o.order);
  const quad::Rule rr = quad::composite_gauss_width(0.0, 1.0, {}, step, o.order);
  std::vector<double> ps, pt, pw;
  std::vector<cplx> ph;
  for (int side = 0; side < 4; ++side) {
    for (std::size_t j = 0; j < ru.nodes.size(); ++j) {
      const double u = ru.nodes[j];
      const double phi = side * kPi / 2 + u;
      const double reach = r0 / std::cos(u);
      for (std::size_t m = 0; m < rr.nodes.size(); ++m) {
        const double r = rr.nodes[m] * reach;
        ps.push_back(s0 + r * std::cos(phi));
        pt.push_back(t0 + r * std::sin(phi));
        pw.push_back(ru.weights[j] * rr.weights[m] * reach);
        ph.push_back(std::polar(1.0, -phi));
      }
    }
  }
  const Eigen::VectorXcd gc = point_values(d.field, ps, pt);
  for (std::size_t p = 0; p < ps.size(); ++p) area += pw[p] * gc(static_cast<Eigen::Index>(p)) * ph[p];
  out.i_omega = -2.0 * kI * area;
  return out;
}

}  // namespace

RectangleSpec rectangle_geometry(const CollarParams& collar, CollarPoint z0, double b) {
  if (!(b >= 0.0 && b <= 2 * kPi)) throw DomainError("rectangle: b must lie in [0, 2 pi]");
  if (!(std::abs(z0.s) < collar.X)) throw DomainError("rectangle: z0 outside the collar");
  const double r = inv_sqrt_rho(collar.ell, z0.s);
  RectangleSpec R;
  R.z0 = z0;
  R.b = b;
  R.h_minus = z0.s - r;
  R.h_plus = z0.s + r;
  R.v_half = r + b;
  return R;
}

RectangleSpec make_rectangle(const CollarParams& collar, CollarPoint z0, double b, double delta0) {
  const ThinPart t = thin_threshold(collar.ell, delta0);
  if (t.empty() || !(std::abs(z0.s) < t.x_delta))
    throw DomainError("rectangle: z0 = (" + std::to_string(z0.s) + ", " + std::to_string(z0.theta) +
                      ") is not in the delta0-thin part (|s| < " + std::to_string(t.x_delta) + ")");
  return rectangle_geometry(collar, z0, b);
}

int wrap_count(const RectangleSpec& rect) {
  const double c = rect.v_half / (2 * kPi);
  return static_cast<int>(std::ceil(c) - std::floor(-c));
}

int wrap_bound(const CollarParams& collar, double s0) {
  const int N = static_cast<int>(std::floor(inv_sqrt_rho(collar.ell, s0) / (2 * kPi)));
  return 2 * (N + 2);
}

CauchyOptions CauchyOptions::refined() const {
  CauchyOptions o = *this;
  o.panel_width *= 0.5;
  return o;
}

cplx CauchyBreakdown::reconstructed() const { return sum() / (2.0 * kPi * kI); }

CauchyBreakdown cauchy_reconstruct(const QDOnCollar& psi, CollarPoint z0, double b, const CauchyOptions& opts) {
  const RectangleSpec R = rectangle_geometry(psi.collar, z0, b);
  require_on_grid(psi, R);
  return reconstruct(psi, dbar(psi), R, opts);
}

CauchyBreakdown averaged_reconstruct(const QDOnCollar& psi, CollarPoint z0, const CauchyOptions& opts) {
  if (opts.b_nodes < 1) throw ConfigError("averaged_reconstruct: b_nodes must be positive");
  require_on_grid(psi, rectangle_geometry(psi.collar, z0, 2 * kPi));
  const QDOnCollar d = dbar(psi);
  CauchyBreakdown mean{};
  for (int k = 0; k < opts.b_nodes; ++k) {
    const double b = 2 * kPi * (k + 0.5) / opts.b_nodes;
    const CauchyBreakdown br = reconstruct(psi, d, rectangle_geometry(psi.collar, z0, b), opts);
    mean.i_omega += br.i_omega;
    mean.i_v_plus += br.i_v_plus;
    mean.i_v_minus += br.i_v_minus;
    mean.i_h_plus += br.i_h_plus;
    mean.i_h_minus += br.i_h_minus;
    mean.wraps = std::max(mean.wraps, br.wraps);
  }
  const double inv = 1.0 / opts.b_nodes;
  mean.i_omega *= inv;
  mean.i_v_plus *= inv;
  mean.i_v_minus *= inv;
  mean.i_h_plus *= inv;
  mean.i_h_minus *= inv;
  return mean;
}

double mean_value_error_ratio(const CollarParams& collar, double s0, int samples) {
  const double r = inv_sqrt_rho(collar.ell, s0);
  const int N = static_cast<int>(std::floor(r / (2 * kPi)));
  double worst = 0.0;
  for (int k = -N; k <= N; ++k) {
    const cplx ref = 1.0 / cplx(r, 2 * kPi * k);
    for (int q = 0; q < samples; ++q) {
      const double t = 2 * kPi * (k + static_cast<double>(q) / (samples - 1));
      worst = std::max(worst, std::abs(1.0 / cplx(r, t) - ref));
    }
  }
  return worst / (2 * kPi * conformal_factor(collar.ell, s0));
}

double harmonic_sum_constant(const CollarParams& collar, double s0) {
  const double r = inv_sqrt_rho(collar.ell, s0);
  const int N = static_cast<int>(std::floor(r / (2 * kPi)));
  double h = 1.0;
  for (int k = 1; k <= N + 1; ++k) h += 1.0 / k;
  // rho grows with |s|, so log(1/rho) is smallest at the endpoint farthest from the core
  const double far = std::max(std::abs(s0 - r), std::abs(s0 + r));
  if (far >= kPi * kPi / collar.ell) return kInf;
  const double lg = -std::log(conformal_factor(collar.ell, far));
  return lg > 0.0 ? h / lg : kInf;
}

double HorizontalBound::constant() const {
  if (psi_term <= 0.0) return mean_abs > alpha_term ? kInf : 0.0;
  return std::max(0.0, mean_abs - alpha_term) / psi_term;
}

HorizontalBound horizontal_bound(const QDOnCollar& psi, CollarPoint z0, const CauchyOptions& opts) {
  if (opts.b_nodes < 1) throw ConfigError("horizontal_bound: b_nodes must be positive");
  const RectangleSpec R0 = rectangle_geometry(psi.collar, z0, 0.0);
  require_on_grid(psi, R0);
  cplx mean{};
  for (int k = 0; k < opts.b_nodes; ++k) {
    const double b = 2 * kPi * (k + 0.5) / opts.b_nodes;
    mean += horizontal_terms(psi, rectangle_geometry(psi.collar, z0, b), opts).plus;
  }
  mean /= static_cast<double>(opts.b_nodes);
  const double rho0 = conformal_factor(psi.collar.ell, z0.s);
  const CollarRegion w = CollarRegion::window(psi.field.grid(), R0.h_minus, R0.h_plus);
  HorizontalBound hb;
  hb.mean_abs = std::abs(mean);
  hb.alpha_term = std::sqrt(rho0) * alpha_l1(psi, w);
  hb.psi_term = rho0 * 0.5 * l1_norm(psi, w);
  return hb;
}

bool RemarkReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const RemarkCheck& c) { return c.pass; });
}

namespace {

struct Tracker {
  RemarkCheck check;
  explicit Tracker(std::string name, double bound) {
    check.name = std::move(name);
    check.bound = bound;
    check.max_constant = -kInf;
  }
  void see(double value, double where) {
    if (std::isnan(value)) value = kInf;
    if (value > check.max_constant) {
      check.max_constant = value;
      check.worst_point = where;
    }
  }
  RemarkCheck done() {
    check.pass = check.max_constant <= check.bound;
    return check;
  }
};

// rho(s) with the domain guard turned into +inf.
double rho_or_inf(double ell, double s) {
  return std::abs(s) < kPi * kPi / ell ? conformal_factor(ell, s) : kInf;
}

// Solves h(t) = s for increasing h on [lo, hi]; NaN when s is not bracketed.
double invert(const std::function<double(double)>& h, double s, double lo, double hi) {
  const double flo = h(lo) - s, fhi = h(hi) - s;
  if (flo > 0.0 || fhi < 0.0) return std::numeric_limits<double>::quiet_NaN();
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  std::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve([&](double t) { return h(t) - s; }, lo, hi, flo, fhi,
                                                   boost::math::tools::eps_tolerance<double>(52), iters);
  return 0.5 * (r.first + r.second);
}

}  // namespace

RemarkReport remark_checks(const CollarParams& collar, double delta0, int samples) {
  if (samples < 3) throw ConfigError("remark_checks: need at least 3 samples");
  RemarkReport rep;
  rep.ell = collar.ell;
  rep.delta0 = delta0;
  const double ell = collar.ell;
  const ThinPart thin = thin_threshold(ell, delta0);
  if (thin.empty() || ell >= 2 * delta0) {
    rep.empty = true;
    return rep;
  }
  const double Xd0 = thin.x_delta;
  const double X2d0 = thin_threshold(ell, 2 * delta0).x_delta;
  std::vector<double> s0s(static_cast<std::size_t>(samples));
  for (int i = 0; i < samples; ++i) s0s[i] = Xd0 * (2.0 * i / (samples - 1) - 1.0);

  // (i) containment, over delta in (ell/2, delta0]
  Tracker contain("containment", 1.0);
  const int deltas = 200;
  for (int q = 1; q <= deltas; ++q) {
    const double delta = 0.5 * ell + (delta0 - 0.5 * ell) * q / deltas;
    const double xd = thin_threshold(ell, delta).x_delta;
    const double x2d = thin_threshold(ell, 2 * delta).x_delta;
    for (int i = 0; i <= 100; ++i) {
      const double s0 = xd * i / 100.0;
      contain.see((s0 + inv_sqrt_rho(ell, s0)) / x2d, s0);
    }
  }
  rep.checks.push_back(contain.done());

  // (ii) rho comparability over each rectangle
  Tracker comp("comparability", 2.0);
  for (double s0 : s0s) {
    const double r = inv_sqrt_rho(ell, s0);
    const double rho0 = conformal_factor(ell, s0);
    std::vector<double> cand{s0 - r, s0 + r};
    if (s0 - r < 0.0 && s0 + r > 0.0) cand.push_back(0.0);
    for (double s : cand) {
      const double rho = rho_or_inf(ell, s);
      comp.see(std::max(rho / rho0, rho0 / rho), s0);
    }
  }
  rep.checks.push_back(comp.done());

  // (iii) h^+- derivatives near one and the width of the inverse window
  Tracker deriv("h_derivative", 0.1);
  Tracker width("inverse_width", 3.0);
  const double k = 2 * kPi / ell;
  auto h_plus = [&](double t) { return t + inv_sqrt_rho(ell, t); };
  auto h_minus = [&](double t) { return t - inv_sqrt_rho(ell, t); };
  for (double s : s0s) {
    const double slope = 0.5 * inv_sqrt_rho(ell, s) * std::tan(s / k) / k;
    deriv.see(std::abs(slope), s);
    const double lo = invert(h_plus, s, -X2d0, X2d0);
    const double hi = invert(h_minus, s, -X2d0, X2d0);
    width.see((hi - lo) / inv_sqrt_rho(ell, s), s);
  }
  rep.checks.push_back(deriv.done());
  rep.checks.push_back(width.done());

  Tracker wraps("wrapping", 1.0);
  Tracker mv("mean_value_error", 1.0);
  Tracker harm("harmonic_sum", 1.0);
  for (int i = 0; i < samples; i += std::max(1, samples / 200)) {
    const double s0 = s0s[i];
    wraps.see(static_cast<double>(wrap_count(rectangle_geometry(collar, {s0, 0.0}, 2 * kPi))) /
                  wrap_bound(collar, s0),
              s0);
    mv.see(mean_value_error_ratio(collar, s0), s0);
    harm.see(harmonic_sum_constant(collar, s0), s0);
  }
  rep.checks.push_back(wraps.done());
  rep.checks.push_back(mv.done());
  rep.checks.push_back(harm.done());
  return rep;
}

nlohmann::json to_json(const RemarkReport& report) {
  nlohmann::json checks = nlohmann::json::array();
  for (const RemarkCheck& c : report.checks)
    checks.push_back({{"name", c.name},
                      {"max_constant", c.max_constant},
                      {"bound", c.bound},
                      {"worst_point", c.worst_point},
                      {"pass", c.pass}});
  return {{"ell", report.ell},
          {"delta0", report.delta0},
          {"empty", report.empty},
          {"pass", report.pass()},
          {"checks", checks}};
}

cplx TrigPolynomial::exact(double s, double theta) const {
  const auto N = (a.rows() - 1) / 2, M = (a.cols() - 1) / 2;
  cplx v{};
  for (Eigen::Index n = -N; n <= N; ++n)
    for (Eigen::Index m = -M; m <= M; ++m)
      v += a(n + N, m + M) * std::polar(1.0, static_cast<double>(n) * theta + static_cast<double>(m) * omega * s);
  return v;
}

double TrigPolynomial::sampled_sup(int s_samples, int theta_samples) const {
  const double S = psi.field.grid().half_extent();
  double sup = 0.0;
  for (int i = 0; i < s_samples; ++i)
    for (int k = 0; k < theta_samples; ++k)
      sup = std::max(sup, std::abs(exact(-S + 2 * S * i / (s_samples - 1), 2 * kPi * k / theta_samples)));
  return sup;
}

TrigPolynomial random_trig_polynomial(const CollarParams& collar, std::uint64_t key, int N, int M, double omega,
                                      int nodes) {
  if (N < 0 || M < 0) throw ConfigError("random_trig_polynomial: need N, M >= 0");
  boost::random::mt19937_64 rng(key);
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXcd a(2 * N + 1, 2 * M + 1);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      const double re = normal(rng);
      a(i, j) = cplx(re, normal(rng));
    }
  GridSpec g;
  g.modes = N;
  g.nodes = nodes;
  auto fn = [&](int n, double s) {
    cplx v{};
    for (int m = -M; m <= M; ++m) v += a(n + N, m + M) * std::polar(1.0, m * omega * s);
    return v;
  };
  QDOnCollar psi(SpectralField::from_modes(collar_grid(collar, g), N, fn), collar);
  return TrigPolynomial{std::move(a), omega, std::move(psi)};
}

nlohmann::json to_json(const CauchyBreakdown& br) {
  auto pair = [](cplx z) { return nlohmann::json::array({z.real(), z.imag()}); };
  return {{"i_omega", pair(br.i_omega)},   {"i_v_plus", pair(br.i_v_plus)},
          {"i_v_minus", pair(br.i_v_minus)}, {"i_h_plus", pair(br.i_h_plus)},
          {"i_h_minus", pair(br.i_h_minus)}, {"wraps", br.wraps}};
}

}  // namespace qdlab
