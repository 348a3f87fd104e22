#include "qdlab/qd_field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "qdlab/errors.hpp"
#include "qdlab/quadrature.hpp"

namespace qdlab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double rate(const std::vector<bool>& flags, int N, int row) {
  return flags[row] ? static_cast<double>(row - N) : 0.0;
}

double log_sum_exp(const std::vector<double>& terms) {
  double m = kNegInf;
  for (double t : terms) m = std::max(m, t);
  if (m == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - m);
  return m + std::log(acc);
}

// theta-samples of psi at a set of s-points, each row rescaled by exp(-log_scale).
struct ThetaSamples {
  std::vector<double> log_scale;
  Eigen::MatrixXcd values;  // points x K
};

ThetaSamples sample_theta(const Eigen::MatrixXcd& amps, const std::vector<double>& s,
                          const std::vector<bool>& flags, int N) {
  const int modes = 2 * N + 1;
  const int K = 4 * N + 4;
  const auto P = static_cast<Eigen::Index>(s.size());
  ThetaSamples out;
  out.log_scale.assign(s.size(), 0.0);
  Eigen::MatrixXcd q(P, modes);
  for (Eigen::Index p = 0; p < P; ++p) {
    double m = kNegInf;
    for (int r = 0; r < modes; ++r) {
      const double a = std::abs(amps(r, p));
      if (a > 0.0) m = std::max(m, rate(flags, N, r) * s[p] + std::log(a));
    }
    if (m == kNegInf) m = 0.0;
    out.log_scale[p] = m;
    for (int r = 0; r < modes; ++r) {
      const cplx a = amps(r, p);
      q(p, r) = (a == cplx{}) ? cplx{} : a * std::exp(rate(flags, N, r) * s[p] - m);
    }
  }
  Eigen::MatrixXcd E(modes, K);
  for (int r = 0; r < modes; ++r)
    for (int k = 0; k < K; ++k) E(r, k) = std::polar(1.0, (r - N) * 2.0 * kPi * k / K);
  out.values = q * E;
  return out;
}

Eigen::MatrixXcd region_amplitudes(const SpectralField& f, const CollarRegion& region) {
  if (region.full) return f.amplitudes();
  return f.amplitudes() * region.interp.transpose();
}

void require_region_on_grid(const SpectralGrid& grid, const CollarRegion& region) {
  const double S = grid.half_extent();
  const double slack = 1e-12 * S;
  if (region.a < -S - slack || region.b > S + slack)
    throw DomainError("region [" + std::to_string(region.a) + ", " + std::to_string(region.b) +
                      "] exceeds the grid support");
  if (region.full && static_cast<int>(region.nodes.size()) != grid.size())
    throw DomainError("region was built for a different grid");
}

// Fastest exponential rate carried by a nonzero log-domain mode.
double log_domain_rate(const SpectralField& f) {
  double r = 0.0;
  for (int n = -f.max_mode(); n <= f.max_mode(); ++n)
    if (f.log_domain(n) && f.amplitudes().row(n + f.max_mode()).cwiseAbs().maxCoeff() > 0.0)
      r = std::max(r, std::abs(static_cast<double>(n)));
  return r;
}

// Composite rule on [a, b] with panels growing geometrically away from both ends, so that
// profiles like e^{+-rate s} are resolved where they peak.
quad::Rule graded_rule(double a, double b, double rate) {
  constexpr int kOrder = 16;
  const double hmax = (b - a) / 16.0;
  std::vector<double> left{a}, right{b};
  double h = std::min(1.0 / rate, hmax);
  while (left.back() + h < right.back() - h) {
    left.push_back(left.back() + h);
    right.push_back(right.back() - h);
    h = std::min(1.5 * h, hmax);
  }
  std::vector<double> edges(left.begin(), left.end());
  edges.insert(edges.end(), right.rbegin(), right.rend());
  quad::Rule out;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    if (edges[i + 1] <= edges[i]) continue;
    const quad::Rule r = quad::gauss_legendre(kOrder, edges[i], edges[i + 1]);
    out.nodes.insert(out.nodes.end(), r.nodes.begin(), r.nodes.end());
    out.weights.insert(out.weights.end(), r.weights.begin(), r.weights.end());
  }
  return out;
}

// log of factor * int int g(s) |psi| dtheta ds.
double log_weighted_l1(const SpectralField& f, const CollarRegion& region,
                       const std::function<double(double)>& weight, double factor) {
  require_region_on_grid(f.grid(), region);
  std::vector<double> nodes = region.nodes, weights = region.weights;
  Eigen::MatrixXcd amps;
  const double rate = log_domain_rate(f);
  if (rate * (region.b - region.a) > 30.0) {
    quad::Rule g = graded_rule(region.a, region.b, rate);
    nodes = std::move(g.nodes);
    weights = std::move(g.weights);
    amps = f.amplitudes() * f.grid().interpolation_matrix(nodes).transpose();
  } else {
    amps = region_amplitudes(f, region);
  }
  const ThetaSamples ts = sample_theta(amps, nodes, f.log_domain_flags(), f.max_mode());
  const double dtheta = 2.0 * kPi / f.theta_samples();
  std::vector<double> terms(nodes.size(), kNegInf);
  for (std::size_t p = 0; p < nodes.size(); ++p) {
    const double a = ts.values.row(static_cast<Eigen::Index>(p)).cwiseAbs().sum() * dtheta;
    const double w = weights[p] * weight(nodes[p]);
    if (a > 0.0 && w > 0.0) terms[p] = std::log(a) + std::log(w) + ts.log_scale[p];
  }
  return std::log(factor) + log_sum_exp(terms);
}

double finite_or_throw(double log_value, const char* who) {
  const double v = std::exp(log_value);
  if (!std::isfinite(v))
    throw NumericalError(std::string(who) + ": value overflows double; use the log-domain variant");
  return v;
}

void require_same_collar(const QDOnCollar& a, const QDOnCollar& b) {
  if (a.collar.ell != b.collar.ell || !a.field.grid().same_as(b.field.grid()))
    throw DomainError("fields live on different collars or grids");
}

void check_resolved(const SpectralField& f) {
  const SpectralGrid& g = f.grid();
  const Eigen::MatrixXcd coef = f.amplitudes() * g.legendre_analysis().transpose();
  const int J = g.size();
  const int tail = std::max(2, J / 8);
  for (int r = 0; r < f.mode_count(); ++r) {
    const double mx = coef.row(r).cwiseAbs().maxCoeff();
    if (mx == 0.0) continue;
    const double tmax = coef.row(r).tail(tail).cwiseAbs().maxCoeff();
    if (tmax > 1e-8 * mx)
      throw NumericalError("dbar: mode " + std::to_string(r - f.max_mode()) +
                           " is not resolved by the s-grid (Legendre tail " + std::to_string(tmax / mx) +
                           "); refine the grid or use the log-domain representation");
  }
}

}  // namespace

// --- SpectralGrid ---------------------------------------------------------------------

std::shared_ptr<const SpectralGrid> SpectralGrid::make(double half_extent, int nodes) {
  if (!(half_extent > 0.0)) throw DomainError("SpectralGrid: half extent must be positive");
  if (nodes < 2) throw DomainError("SpectralGrid: need at least two nodes");
  auto g = std::shared_ptr<SpectralGrid>(new SpectralGrid());
  g->half_extent_ = half_extent;
  const quad::Rule ref = quad::gauss_legendre(nodes);
  g->bary_ = quad::gauss_legendre_barycentric(ref);
  g->nodes_.resize(nodes);
  g->weights_.resize(nodes);
  for (int j = 0; j < nodes; ++j) {
    g->nodes_[j] = half_extent * ref.nodes[j];
    g->weights_[j] = half_extent * ref.weights[j];
  }

  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(nodes, nodes);
  for (int i = 0; i < nodes; ++i) {
    double diag = 0.0;
    for (int j = 0; j < nodes; ++j) {
      if (i == j) continue;
      const double d = (g->bary_[j] / g->bary_[i]) / (g->nodes_[i] - g->nodes_[j]);
      D(i, j) = d;
      diag -= d;
    }
    D(i, i) = diag;
  }
  g->diff_ = std::move(D);

  Eigen::MatrixXd L(nodes, nodes);
  for (int j = 0; j < nodes; ++j) {
    const double t = ref.nodes[j];
    double p0 = 1.0, p1 = t;
    for (int k = 0; k < nodes; ++k) {
      double pk;
      if (k == 0) {
        pk = 1.0;
      } else if (k == 1) {
        pk = t;
      } else {
        pk = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      L(k, j) = 0.5 * (2.0 * k + 1.0) * ref.weights[j] * pk;
    }
  }
  g->legendre_ = std::move(L);
  return g;
}

Eigen::RowVectorXd SpectralGrid::interpolation_row(double s) const {
  const int J = size();
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(J);
  double denom = 0.0;
  for (int j = 0; j < J; ++j) {
    const double d = s - nodes_[j];
    if (d == 0.0) {
      row.setZero();
      row(j) = 1.0;
      return row;
    }
    row(j) = bary_[j] / d;
    denom += row(j);
  }
  return row / denom;
}

Eigen::MatrixXd SpectralGrid::interpolation_matrix(std::span<const double> points) const {
  Eigen::MatrixXd M(static_cast<Eigen::Index>(points.size()), size());
  for (std::size_t p = 0; p < points.size(); ++p)
    M.row(static_cast<Eigen::Index>(p)) = interpolation_row(points[p]);
  return M;
}

bool SpectralGrid::same_as(const SpectralGrid& other) const {
  return this == &other || (half_extent_ == other.half_extent_ && size() == other.size());
}

std::shared_ptr<const SpectralGrid> collar_grid(const CollarParams& collar, const GridSpec& spec) {
  if (spec.modes < 0) throw ConfigError("grid: modes must be non-negative");
  const ThinPart t = thin_threshold(collar.ell, spec.delta_margin);
  if (t.empty())
    throw DomainError("grid: the delta_margin-thin part of the collar is empty");
  return SpectralGrid::make(std::min(t.x_delta, collar.X), spec.nodes);
}

// --- SpectralField --------------------------------------------------------------------

SpectralField::SpectralField(std::shared_ptr<const SpectralGrid> grid, int max_mode,
                             Eigen::MatrixXcd amplitudes, std::vector<bool> log_domain)
    : grid_(std::move(grid)),
      max_mode_(max_mode),
      amps_(std::move(amplitudes)),
      log_domain_(std::move(log_domain)) {
  if (!grid_) throw DomainError("SpectralField: null grid");
  if (max_mode_ < 0) throw DomainError("SpectralField: negative mode bound");
  if (amps_.rows() != mode_count() || amps_.cols() != grid_->size())
    throw DomainError("SpectralField: coefficient matrix must be (2N+1) x nodes");
  if (static_cast<int>(log_domain_.size()) != mode_count())
    throw DomainError("SpectralField: one log-domain flag per mode required");
}

SpectralField SpectralField::zero(std::shared_ptr<const SpectralGrid> grid, int max_mode) {
  const int J = grid->size();
  return SpectralField(std::move(grid), max_mode, Eigen::MatrixXcd::Zero(2 * max_mode + 1, J),
                       std::vector<bool>(2 * max_mode + 1, false));
}

SpectralField SpectralField::from_function(std::shared_ptr<const SpectralGrid> grid, int max_mode,
                                           const std::function<cplx(double, double)>& f) {
  const int K = 4 * max_mode + 4;
  const int J = grid->size();
  Eigen::MatrixXcd samples(J, K);
  for (int j = 0; j < J; ++j)
    for (int k = 0; k < K; ++k) samples(j, k) = f(grid->nodes()[j], 2.0 * kPi * k / K);
  Eigen::MatrixXcd F(K, 2 * max_mode + 1);
  for (int k = 0; k < K; ++k)
    for (int n = -max_mode; n <= max_mode; ++n)
      F(k, n + max_mode) = std::polar(1.0 / K, -n * 2.0 * kPi * k / K);
  Eigen::MatrixXcd amps = (samples * F).transpose();
  return SpectralField(std::move(grid), max_mode, std::move(amps),
                       std::vector<bool>(2 * max_mode + 1, false));
}

SpectralField SpectralField::from_modes(std::shared_ptr<const SpectralGrid> grid, int max_mode,
                                        const std::function<cplx(int, double)>& f) {
  const int J = grid->size();
  Eigen::MatrixXcd amps(2 * max_mode + 1, J);
  for (int n = -max_mode; n <= max_mode; ++n)
    for (int j = 0; j < J; ++j) amps(n + max_mode, j) = f(n, grid->nodes()[j]);
  return SpectralField(std::move(grid), max_mode, std::move(amps),
                       std::vector<bool>(2 * max_mode + 1, false));
}

cplx SpectralField::coefficient(int n, int j) const {
  const int r = n + max_mode_;
  const cplx c = amps_(r, j) * std::exp(rate(log_domain_, max_mode_, r) * grid_->nodes()[j]);
  if (!std::isfinite(c.real()) || !std::isfinite(c.imag()))
    throw NumericalError("coefficient overflows double for mode " + std::to_string(n));
  return c;
}

Eigen::VectorXcd SpectralField::coefficients_at(double s) const {
  const double S = grid_->half_extent();
  if (std::abs(s) > S * (1.0 + 1e-12))
    throw DomainError("coefficients_at: s outside the grid support");
  Eigen::VectorXcd c = amps_ * grid_->interpolation_row(s).transpose();
  for (int r = 0; r < mode_count(); ++r) {
    if (!log_domain_[r]) continue;
    c(r) *= std::exp(rate(log_domain_, max_mode_, r) * s);
    if (!std::isfinite(std::abs(c(r))))
      throw NumericalError("coefficients_at: overflow in log-domain mode");
  }
  return c;
}

Eigen::MatrixXcd SpectralField::coefficients_at(std::span<const double> s) const {
  const double S = grid_->half_extent();
  for (double x : s)
    if (std::abs(x) > S * (1.0 + 1e-12)) throw DomainError("coefficients_at: s outside the grid support");
  Eigen::MatrixXcd c = amps_ * grid_->interpolation_matrix(s).transpose();
  for (int r = 0; r < mode_count(); ++r) {
    if (!log_domain_[r]) continue;
    for (std::size_t p = 0; p < s.size(); ++p) {
      const auto col = static_cast<Eigen::Index>(p);
      c(r, col) *= std::exp(rate(log_domain_, max_mode_, r) * s[p]);
      if (!std::isfinite(std::abs(c(r, col))))
        throw NumericalError("coefficients_at: overflow in log-domain mode");
    }
  }
  return c;
}

cplx SpectralField::value(double s, double theta) const {
  const Eigen::VectorXcd c = coefficients_at(s);
  cplx v{};
  for (int r = 0; r < mode_count(); ++r) v += c(r) * std::polar(1.0, (r - max_mode_) * theta);
  return v;
}

SpectralField SpectralField::scaled(cplx lambda) const {
  return SpectralField(grid_, max_mode_, amps_ * lambda, log_domain_);
}

SpectralField SpectralField::operator+(const SpectralField& other) const {
  if (!grid_->same_as(other.grid())) throw DomainError("SpectralField: grids differ");
  const int N = std::max(max_mode_, other.max_mode_);
  Eigen::MatrixXcd amps = Eigen::MatrixXcd::Zero(2 * N + 1, grid_->size());
  std::vector<bool> flags(2 * N + 1, false);
  const auto& s = grid_->nodes();
  auto accumulate = [&](const SpectralField& f) {
    for (int n = -f.max_mode_; n <= f.max_mode_; ++n) {
      const int src = n + f.max_mode_;
      const int dst = n + N;
      const bool src_log = f.log_domain_[src];
      if (f.amps_.row(src).isZero(0.0)) continue;
      if (amps.row(dst).isZero(0.0)) {
        flags[dst] = src_log;
        amps.row(dst) = f.amps_.row(src);
        continue;
      }
      if (flags[dst] == src_log) {
        amps.row(dst) += f.amps_.row(src);
        continue;
      }
      // Mixed storage: bring the plain row into log-domain form.
      for (int j = 0; j < grid_->size(); ++j) {
        const double e = std::exp(-n * s[j]);
        if (!std::isfinite(e))
          throw NumericalError("SpectralField: cannot combine plain and log-domain mode " +
                               std::to_string(n));
        if (src_log) {
          amps(dst, j) = amps(dst, j) * e + f.amps_(src, j);
        } else {
          amps(dst, j) += f.amps_(src, j) * e;
        }
      }
      flags[dst] = true;
    }
  };
  accumulate(*this);
  accumulate(other);
  return SpectralField(grid_, N, std::move(amps), std::move(flags));
}

SpectralField SpectralField::operator-(const SpectralField& other) const {
  return *this + other.scaled(-1.0);
}

SpectralField SpectralField::with_modes(const std::function<bool(int)>& keep) const {
  Eigen::MatrixXcd amps = amps_;
  for (int n = -max_mode_; n <= max_mode_; ++n)
    if (!keep(n)) amps.row(n + max_mode_).setZero();
  return SpectralField(grid_, max_mode_, std::move(amps), log_domain_);
}

QDOnCollar::QDOnCollar(SpectralField f, CollarParams c) : field(std::move(f)), collar(c) {
  if (field.grid().half_extent() > collar.X * (1.0 + 1e-12))
    throw DomainError("QDOnCollar: grid extends beyond the collar");
}

// --- regions --------------------------------------------------------------------------

CollarRegion CollarRegion::whole(const SpectralGrid& grid) {
  CollarRegion r;
  r.a = -grid.half_extent();
  r.b = grid.half_extent();
  r.full = true;
  r.nodes = grid.nodes();
  r.weights = grid.weights();
  return r;
}

CollarRegion CollarRegion::window(const SpectralGrid& grid, double a, double b) {
  const double S = grid.half_extent();
  const double slack = 1e-12 * S;
  if (!(a < b)) throw DomainError("region: need a < b");
  if (a < -S - slack || b > S + slack)
    throw DomainError("region [" + std::to_string(a) + ", " + std::to_string(b) +
                      "] exceeds the grid support [-S, S] with S = " + std::to_string(S));
  a = std::max(a, -S);
  b = std::min(b, S);
  if (a <= -S + slack && b >= S - slack) return whole(grid);
  CollarRegion r;
  r.a = a;
  r.b = b;
  const quad::Rule rule = quad::gauss_legendre(grid.size(), a, b);
  r.nodes = rule.nodes;
  r.weights = rule.weights;
  r.interp = grid.interpolation_matrix(r.nodes);
  return r;
}

// --- calculus -------------------------------------------------------------------------

QDOnCollar dbar(const QDOnCollar& psi) {
  const SpectralField& f = psi.field;
  check_resolved(f);
  const Eigen::MatrixXcd dp = f.amplitudes() * f.grid().differentiation().transpose();
  Eigen::MatrixXcd out(f.mode_count(), f.grid().size());
  for (int r = 0; r < f.mode_count(); ++r) {
    const int n = r - f.max_mode();
    if (f.log_domain(n)) {
      // c = e^{ns} p  =>  c' - n c = e^{ns} p'
      out.row(r) = 0.5 * dp.row(r);
    } else {
      out.row(r) = 0.5 * (dp.row(r) - static_cast<double>(n) * f.amplitudes().row(r));
    }
  }
  return QDOnCollar(SpectralField(f.grid_ptr(), f.max_mode(), std::move(out), f.log_domain_flags()),
                    psi.collar);
}

double log_l1_norm(const QDOnCollar& psi, const CollarRegion& region) {
  return log_weighted_l1(psi.field, region, [](double) { return 1.0; }, 2.0);
}

double l1_norm(const QDOnCollar& psi, const CollarRegion& region) {
  return finite_or_throw(log_l1_norm(psi, region), "l1_norm");
}

double l1_norm(const QDOnCollar& psi) {
  return l1_norm(psi, CollarRegion::whole(psi.field.grid()));
}

double log_dbar_l1_norm(const QDOnCollar& psi, const CollarRegion& region) {
  const QDOnCollar d = dbar(psi);
  const double ell = psi.collar.ell;
  return log_weighted_l1(d.field, region,
                         [ell](double s) { return 1.0 / conformal_factor(ell, s); },
                         2.0 * std::numbers::sqrt2);
}

double dbar_l1_norm(const QDOnCollar& psi, const CollarRegion& region) {
  return finite_or_throw(log_dbar_l1_norm(psi, region), "dbar_l1_norm");
}

double dbar_l1_norm(const QDOnCollar& psi) {
  return dbar_l1_norm(psi, CollarRegion::whole(psi.field.grid()));
}

double log_sup_norm(const QDOnCollar& psi, const CollarRegion& region) {
  const SpectralField& f = psi.field;
  require_region_on_grid(f.grid(), region);
  std::vector<double> pts = region.nodes;
  pts.push_back(region.a);
  pts.push_back(region.b);
  const Eigen::MatrixXcd amps = f.amplitudes() * f.grid().interpolation_matrix(pts).transpose();
  const ThetaSamples ts = sample_theta(amps, pts, f.log_domain_flags(), f.max_mode());
  double best = kNegInf;
  for (std::size_t p = 0; p < pts.size(); ++p) {
    const double a = ts.values.row(static_cast<Eigen::Index>(p)).cwiseAbs().maxCoeff();
    if (a <= 0.0) continue;
    const double rho = conformal_factor(psi.collar.ell, pts[p]);
    best = std::max(best, std::log(a) + ts.log_scale[p] + std::log(2.0) - 2.0 * std::log(rho));
  }
  return best;
}

cplx l2_inner(const QDOnCollar& phi, const QDOnCollar& psi) {
  require_same_collar(phi, psi);
  const SpectralField& a = phi.field;
  const SpectralField& b = psi.field;
  const auto& s = a.grid().nodes();
  const auto& w = a.grid().weights();
  const int N = std::min(a.max_mode(), b.max_mode());
  cplx total{};
  for (int n = -N; n <= N; ++n) {
    const int ra = n + a.max_mode();
    const int rb = n + b.max_mode();
    const double rate_sum = (a.log_domain(n) ? n : 0) + (b.log_domain(n) ? n : 0);
    for (int j = 0; j < a.grid().size(); ++j) {
      const double rho = conformal_factor(phi.collar.ell, s[j]);
      const cplx term = a.amplitudes()(ra, j) * std::conj(b.amplitudes()(rb, j));
      if (term == cplx{}) continue;
      total += term * (w[j] * std::exp(rate_sum * s[j]) / (rho * rho));
    }
  }
  total *= 8.0 * kPi;
  if (!std::isfinite(std::abs(total)))
    throw NumericalError("l2_inner: overflow (log-domain modes too large for an L2 product)");
  return total;
}

double l2_norm(const QDOnCollar& psi) { return std::sqrt(l2_inner(psi, psi).real()); }

Eigen::VectorXcd alpha(const QDOnCollar& psi) {
  const SpectralField& f = psi.field;
  return f.amplitudes().row(f.max_mode()).transpose();
}

cplx alpha_at(const QDOnCollar& psi, double s) {
  return psi.field.coefficients_at(s)(psi.field.max_mode());
}

double alpha_l1(const QDOnCollar& psi, const CollarRegion& region) {
  require_region_on_grid(psi.field.grid(), region);
  const Eigen::VectorXcd a0 = alpha(psi);
  Eigen::VectorXcd vals = region.full ? a0 : Eigen::VectorXcd(region.interp * a0);
  double acc = 0.0;
  for (std::size_t p = 0; p < region.nodes.size(); ++p)
    acc += region.weights[p] * std::abs(vals(static_cast<Eigen::Index>(p)));
  return acc;
}

QDOnCollar dz2_field(const QDOnCollar& like) {
  Eigen::MatrixXcd amps = Eigen::MatrixXcd::Ones(1, like.field.grid().size());
  return QDOnCollar(SpectralField(like.field.grid_ptr(), 0, std::move(amps), {false}), like.collar);
}

QDOnCollar project_out_dz2(const QDOnCollar& psi) {
  const QDOnCollar one = dz2_field(psi);
  const cplx coeff = l2_inner(psi, one) / l2_inner(one, one).real();
  Eigen::MatrixXcd amps = psi.field.amplitudes();
  amps.row(psi.field.max_mode()).array() -= coeff;
  return QDOnCollar(SpectralField(psi.field.grid_ptr(), psi.field.max_mode(), std::move(amps),
                                  psi.field.log_domain_flags()),
                    psi.collar);
}

QDOnCollar holomorphic_extend(const std::map<int, cplx>& b, const CollarParams& collar,
                              const GridSpec& spec, const ExtendOptions& opts) {
  auto grid = collar_grid(collar, spec);
  const int N = spec.modes;
  const double S = grid->half_extent();
  Eigen::MatrixXcd amps = Eigen::MatrixXcd::Zero(2 * N + 1, grid->size());
  std::vector<bool> flags(2 * N + 1, false);
  for (const auto& [n, bn] : b) {
    if (std::abs(n) > N)
      throw DomainError("holomorphic_extend: mode " + std::to_string(n) +
                        " exceeds the grid's mode range");
    const int r = n + N;
    const bool large = std::abs(n) * S > opts.overflow_threshold;
    if (n != 0 && (opts.always_log_domain || large)) {
      if (!opts.allow_log_domain)
        throw NumericalError("holomorphic_extend: e^{ns} overflows for mode " + std::to_string(n) +
                             " without the log-domain representation");
      flags[r] = true;
      amps.row(r).setConstant(bn);
    } else {
      for (int j = 0; j < grid->size(); ++j) amps(r, j) = bn * std::exp(n * grid->nodes()[j]);
    }
  }
  return QDOnCollar(SpectralField(grid, N, std::move(amps), std::move(flags)), collar);
}

HoloSplit holo_split(const QDOnCollar& phi, double rel_tol) {
  const Eigen::VectorXcd c0 = alpha(phi);
  const auto& w = phi.field.grid().weights();
  cplx mean{};
  double wsum = 0.0;
  for (int j = 0; j < c0.size(); ++j) {
    mean += w[j] * c0(j);
    wsum += w[j];
  }
  mean /= wsum;
  const double scale = c0.cwiseAbs().maxCoeff();
  const double spread = (c0.array() - mean).abs().maxCoeff();
  if (spread > rel_tol * std::max(scale, std::numeric_limits<double>::min()))
    throw DomainError("holo_split: mode 0 varies in s, field is not holomorphic");
  SpectralField decay = phi.field.with_modes([](int n) { return n != 0; });
  return HoloSplit{mean, QDOnCollar(std::move(decay), phi.collar)};
}

// --- serialization ---------------------------------------------------------------------

nlohmann::json to_json(const QDOnCollar& psi) {
  const SpectralField& f = psi.field;
  nlohmann::json re = nlohmann::json::array();
  nlohmann::json im = nlohmann::json::array();
  for (int r = 0; r < f.mode_count(); ++r) {
    std::vector<double> vr(f.grid().size()), vi(f.grid().size());
    for (int j = 0; j < f.grid().size(); ++j) {
      vr[j] = f.amplitudes()(r, j).real();
      vi[j] = f.amplitudes()(r, j).imag();
    }
    re.push_back(vr);
    im.push_back(vi);
  }
  return {{"schema", "qdlab.field/v1"},
          {"ell", psi.collar.ell},
          {"half_extent", f.grid().half_extent()},
          {"modes", f.max_mode()},
          {"s_nodes", f.grid().nodes()},
          {"coeffs_re", re},
          {"coeffs_im", im},
          {"log_domain_flags", f.log_domain_flags()}};
}

QDOnCollar field_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema") != "qdlab.field/v1") throw ConfigError("field json: unknown schema");
    const auto collar = CollarParams::make(j.at("ell").get<double>());
    const double S = j.at("half_extent").get<double>();
    const int N = j.at("modes").get<int>();
    const auto nodes = j.at("s_nodes").get<std::vector<double>>();
    auto grid = SpectralGrid::make(S, static_cast<int>(nodes.size()));
    for (std::size_t k = 0; k < nodes.size(); ++k)
      if (std::abs(nodes[k] - grid->nodes()[k]) > 1e-12 * S)
        throw ConfigError("field json: s_nodes are not the Gauss-Legendre nodes on [-S, S]");
    const auto re = j.at("coeffs_re").get<std::vector<std::vector<double>>>();
    const auto im = j.at("coeffs_im").get<std::vector<std::vector<double>>>();
    const auto flags = j.at("log_domain_flags").get<std::vector<bool>>();
    if (static_cast<int>(re.size()) != 2 * N + 1 || im.size() != re.size())
      throw ConfigError("field json: coefficient rows do not match the mode count");
    Eigen::MatrixXcd amps(2 * N + 1, grid->size());
    for (int r = 0; r < 2 * N + 1; ++r) {
      if (static_cast<int>(re[r].size()) != grid->size() || im[r].size() != re[r].size())
        throw ConfigError("field json: coefficient columns do not match the node count");
      for (int k = 0; k < grid->size(); ++k) amps(r, k) = {re[r][k], im[r][k]};
    }
    return QDOnCollar(SpectralField(grid, N, std::move(amps), flags), collar);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("field json: ") + e.what());
  }
}

}  // namespace qdlab
