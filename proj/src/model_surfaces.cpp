#include "qdlab/model_surfaces.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include "qdlab/errors.hpp"
#include "qdlab/quadrature.hpp"

namespace qdlab {

namespace {

constexpr double kPi = std::numbers::pi;

// FFTW's planner is not reentrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// In-place 2D DFT of a row-major M x M buffer.
void dft2(std::vector<cplx>& data, int M, int sign) {
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_dft_2d(M, M, p, p, sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(plan);
}

int wavenumber(int k, int M) {
  if (2 * k == M) return 0;  // Nyquist: no odd derivative
  return k < M / 2 ? k : k - M;
}

}  // namespace

FlatTorus FlatTorus::make(double a, double b) {
  if (!(b > 0.0) || !std::isfinite(b) || !std::isfinite(a))
    throw DomainError("torus: need finite a and b > 0");
  return FlatTorus{a, b};
}

TorusField sample_torus(const FlatTorus& torus, const std::function<cplx(double, double)>& f, int M) {
  if (M < 8 || M % 2 != 0) throw ConfigError("torus mesh size must be even and at least 8");
  TorusField out{torus, M, Eigen::MatrixXcd(M, M)};
  auto at = [&](cplx z) { return f(z.real(), z.imag()); };
  double sup = 0.0;
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j) {
      const cplx v = at(torus.point(static_cast<double>(i) / M, static_cast<double>(j) / M));
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
        throw DomainError("torus field is not finite at a sample point");
      out.samples(i, j) = v;
      sup = std::max(sup, std::abs(v));
    }
  double mismatch = 0.0;
  for (int i = 0; i < M; ++i) {
    const cplx z = torus.point(static_cast<double>(i) / M, 0.0);
    mismatch = std::max(mismatch, std::abs(at(z + torus.omega2()) - out.samples(i, 0)));
    const cplx w = torus.point(0.0, static_cast<double>(i) / M);
    mismatch = std::max(mismatch, std::abs(at(w + torus.omega1()) - out.samples(0, i)));
  }
  if (mismatch > 1e-10 * std::max(1.0, sup))
    throw DomainError("field is not periodic for the lattice (seam mismatch " + std::to_string(mismatch) + ")");
  return out;
}

Eigen::MatrixXcd torus_dbar(const TorusField& phi) {
  const int M = phi.M;
  std::vector<cplx> hat(static_cast<std::size_t>(M) * M);
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j) hat[static_cast<std::size_t>(i) * M + j] = phi.samples(i, j);
  dft2(hat, M, FFTW_FORWARD);
  std::vector<cplx> du(hat.size()), dv(hat.size());
  const double norm = 1.0 / (static_cast<double>(M) * M);
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * M + j;
      du[k] = hat[k] * cplx(0.0, 2 * kPi * wavenumber(i, M)) * norm;
      dv[k] = hat[k] * cplx(0.0, 2 * kPi * wavenumber(j, M)) * norm;
    }
  dft2(du, M, FFTW_BACKWARD);
  dft2(dv, M, FFTW_BACKWARD);
  // x = u b + v a, y = v / b:  d_x = d_u / b,  d_y = b d_v - a d_u
  const double a = phi.torus.a, b = phi.torus.b;
  Eigen::MatrixXcd out(M, M);
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * M + j;
      const cplx dx = du[k] / b;
      const cplx dy = b * dv[k] - a * du[k];
      out(i, j) = 0.5 * (dx + cplx(0.0, 1.0) * dy);
    }
  return out;
}

cplx torus_project(const TorusField& phi) { return phi.samples.mean(); }

TorusNorms torus_norms(const TorusField& phi) {
  const cplx mean = torus_project(phi);
  TorusNorms n;
  n.l1_residual = 2.0 * (phi.samples.array() - mean).abs().mean();
  n.dbar_l1 = 2.0 * std::numbers::sqrt2 * torus_dbar(phi).cwiseAbs().mean();
  const double scale = std::max(n.l1_residual, phi.samples.cwiseAbs().mean());
  if (!(n.dbar_l1 > 1e-12 * std::max(scale, 1e-300)))
    throw DomainError("torus_ratio: dbar of the field vanishes (holomorphic input), ratio undefined");
  n.ratio = n.l1_residual / n.dbar_l1;
  return n;
}

double torus_ratio(const TorusField& phi) { return torus_norms(phi).ratio; }

double torus_sine_ratio(double b) { return b / (std::numbers::sqrt2 * kPi); }

TorusSweep torus_sweep(const std::vector<double>& bs, double a, int M) {
  TorusSweep sw;
  for (double b : bs) {
    const FlatTorus t = FlatTorus::make(a, b);
    const TorusField f = sample_torus(t, [b](double x, double) { return cplx(std::sin(2 * kPi * x / b)); }, M);
    const TorusNorms n = torus_norms(f);
    sw.rows.push_back({a, b, "sin(2 pi x / b)", n.l1_residual, n.dbar_l1, n.ratio});
  }
  if (sw.rows.size() >= 2) {
    double mb = 0.0, mr = 0.0;
    for (const TorusRow& r : sw.rows) {
      mb += r.b;
      mr += r.ratio;
    }
    mb /= static_cast<double>(sw.rows.size());
    mr /= static_cast<double>(sw.rows.size());
    double sxy = 0.0, sxx = 0.0;
    for (const TorusRow& r : sw.rows) {
      sxy += (r.b - mb) * (r.ratio - mr);
      sxx += (r.b - mb) * (r.b - mb);
    }
    sw.slope = sxy / sxx;
    sw.intercept = mr - sw.slope * mb;
  }
  return sw;
}

double sphere_gaussian_ratio() { return 8.0 / (5.0 * std::sqrt(2.0 * kPi)); }

SphereNorms sphere_norms(const SphereField& f, const SphereOptions& o) {
  if (!f.psi) throw ConfigError("sphere field has no psi");
  if (!(o.r_max > 0.0) || o.panels < 1 || o.order < 1 || o.angles < 4)
    throw ConfigError("sphere options out of range");
  auto dbar = f.dbar;
  if (!dbar) {
    dbar = [psi = f.psi](cplx z) {
      const double h = 1e-5 * std::max(1.0, std::abs(z));
      const cplx dx = (psi(z + h) - psi(z - h)) / (2 * h);
      const cplx dy = (psi(z + cplx(0, h)) - psi(z - cplx(0, h))) / (2 * h);
      return 0.5 * (dx + cplx(0.0, 1.0) * dy);
    };
  }
  auto u_of = [](double r) { return 2.0 * std::atan(r); };
  const double uq = u_of(0.25 * o.r_max), uh = u_of(0.5 * o.r_max), um = u_of(o.r_max);
  const quad::Rule rule = quad::composite_gauss(0.0, um, {uq, uh}, o.panels, o.order);

  // shell sums: [0, R/4), [R/4, R/2), [R/2, R]
  double l1[3] = {0, 0, 0}, db[3] = {0, 0, 0};
  const double dphi = 2 * kPi / o.angles;
  for (std::size_t p = 0; p < rule.nodes.size(); ++p) {
    const double u = rule.nodes[p];
    const double r = std::tan(0.5 * u);
    const double jac = 0.5 * (1.0 + r * r) * r * rule.weights[p] * dphi;  // dr r dphi
    double a = 0.0, d = 0.0;
    for (int k = 0; k < o.angles; ++k) {
      const cplx z = std::polar(r, k * dphi);
      a += std::abs(f.psi(z));
      d += std::abs(dbar(z));
    }
    if (!std::isfinite(a) || !std::isfinite(d)) throw DomainError("sphere field is not finite on the grid");
    const int shell = u < uq ? 0 : (u < uh ? 1 : 2);
    l1[shell] += 2.0 * a * jac;
    db[shell] += std::numbers::sqrt2 * (1.0 + r * r) * d * jac;
  }
  // Outer shells scale geometrically for power-law tails; extrapolate the part beyond r_max.
  auto with_tail = [&](const double* s, const char* what) {
    const double total = s[0] + s[1] + s[2];
    if (s[2] <= 1e-12 * total) return total;
    const double q = s[1] > 0.0 ? s[2] / s[1] : INFINITY;
    if (q >= o.tail_ratio)
      throw DomainError(std::string("sphere_ratio: ") + what +
                        " does not decay fast enough to be integrable (outer shell ratio " + std::to_string(q) + ")");
    return total + s[2] * q / (1.0 - q);
  };
  SphereNorms n;
  n.l1 = with_tail(l1, "|psi|");
  n.dbar_l1 = with_tail(db, "(1+|z|^2)|d_zbar psi|");
  if (!(n.dbar_l1 > 1e-12 * std::max(n.l1, 1e-300)))
    throw DomainError("sphere_ratio: dbar of the field vanishes, ratio undefined");
  n.ratio = n.l1 / n.dbar_l1;
  return n;
}

double sphere_ratio(const SphereField& f, const SphereOptions& opts) { return sphere_norms(f, opts).ratio; }

}  // namespace qdlab
