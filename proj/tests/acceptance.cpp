// Prints one line per acceptance criterion; exits 1 when any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include "qdlab/cauchy.hpp"
#include "qdlab/collar_geom.hpp"
#include "qdlab/constant_lab.hpp"
#include "qdlab/model_surfaces.hpp"
#include "qdlab/qd_field.hpp"

using namespace qdlab;
namespace fs = std::filesystem;

namespace {

constexpr double pi = std::numbers::pi;

struct Clock {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

int failures = 0;

void report(int n, const char* tag, bool pass, const std::string& detail) {
  std::printf("criterion %d [%s] %s: %s\n", n, tag, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... v) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, v...);
  return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

void torus() {
  Clock c;
  const TorusSweep sw = torus_sweep({5, 10, 20, 50, 100});
  double worst = 0;
  for (const TorusRow& r : sw.rows) worst = std::max(worst, rel(r.ratio, torus_sine_ratio(r.b)));
  const double slope_err = rel(sw.slope, 1 / (std::sqrt(2.0) * pi));
  const double t = c.seconds();
  report(1, "torus-nonuniform-poincare", worst <= 0.01 && slope_err <= 0.02 && t < 10,
         fmt("ratio rel err %.3g <= 0.01; slope rel err %.3g <= 0.02; %.2f s < 10 s", worst, slope_err, t));
}

void collar_identities() {
  std::vector<double> ells;
  for (int i = 0; i <= 24; ++i) ells.push_back(std::pow(10.0, -3.0 + 3.0 * i / 24));
  double identity = 0, l1 = 0, gap = 0, lo = INFINITY, hi = 0;
  for (double ell : ells) {
    const CollarParams collar = CollarParams::make(ell);
    for (double delta : {0.05, 0.1, 0.2, 0.4, 0.6, 0.8}) {
      const ThinPart t = thin_threshold(ell, delta);
      if (t.empty() || t.outside_regime) continue;
      identity = std::max(identity, rel(conformal_factor(ell, t.x_delta), ell * std::sinh(delta) / (2 * pi * std::sinh(ell / 2))));
    }
    const auto grid = SpectralGrid::make(collar.X, 256);
    const QDOnCollar one(SpectralField(grid, 0, Eigen::MatrixXcd::Ones(1, grid->size()), {false}), collar);
    l1 = std::max({l1, rel(l1_norm(one), 8 * pi * collar.X), rel(dz2_norms(ell).l1, 8 * pi * collar.X)});
    const double scaled = std::pow(l2_norm(one), 2) * ell * ell * ell;
    lo = std::min(lo, scaled);
    hi = std::max(hi, scaled);
    for (int i = 0; i < 4001; ++i) {
      const double s = -collar.X + 2 * collar.X * i / 4000;
      gap = std::max(gap, conformal_factor(ell, s) * (collar.X - std::abs(s)));
    }
  }
  const bool band = lo >= 10 && hi <= 1e3;
  report(2, "collar-identities", identity <= 1e-12 && l1 <= 1e-10 && band && gap <= pi / 2,
         fmt("rho(X_delta) rel err %.3g <= 1e-12; dz2 L1 rel err %.3g <= 1e-10; "
             "ell^3 ||dz2||^2 in [%.6g, %.6g], required within [10, 1000]; max rho (X-|s|) %.6f <= pi/2",
             identity, l1, lo, hi, gap));
}

void dbar_exactness() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::normal_distribution<double> N;
  GridSpec spec;
  spec.modes = 4;
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    const double ell = 0.05 + 0.95 * U(rng);
    std::map<int, cplx> b;
    for (int n = -spec.modes; n <= spec.modes; ++n)
      if (U(rng) < 0.6) b[n] = cplx(N(rng), N(rng));
    if (b.empty()) b[1] = 1.0;
    const QDOnCollar phi = holomorphic_extend(b, CollarParams::make(ell), spec);
    const CollarRegion R = CollarRegion::whole(phi.field.grid());
    worst = std::max(worst, std::exp(log_dbar_l1_norm(phi, R) - log_l1_norm(phi, R)));
  }
  report(3, "spectral-dbar-exactness", worst < 1e-10, fmt("max ||dbar Phi|| / ||Phi|| over 100 fields %.3g < 1e-10", worst));
}

void cauchy() {
  Clock c;
  const CollarParams collar = CollarParams::make(0.3);
  const CauchyOptions opts;
  const CauchyOptions fine = opts.refined();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double worst = 0, min_factor = INFINITY;
  for (int f = 0; f < 50; ++f) {
    const TrigPolynomial tp = random_trig_polynomial(collar, stream_key(11, 0xA4, f));
    const double sup = tp.sampled_sup();
    for (int q = 0; q < 20; ++q) {
      const CollarPoint z0{(U(rng) - 0.5) * 0.6 * collar.X, 2 * pi * U(rng)};
      const double b = 2 * pi * U(rng);
      const cplx exact = tp.exact(z0.s, z0.theta);
      const double e0 = std::abs(cauchy_reconstruct(tp.psi, z0, b, opts).reconstructed() - exact) / sup;
      const double e1 = std::abs(cauchy_reconstruct(tp.psi, z0, b, fine).reconstructed() - exact) / sup;
      worst = std::max(worst, e0);
      if (e0 >= 1e-13) min_factor = std::min(min_factor, e0 / e1);
    }
  }
  const double t = c.seconds();
  report(4, "cauchy-reconstruction", worst < 1e-4 && min_factor >= 4 && t < 60,
         fmt("max error / sup|psi| %.3g < 1e-4; min refinement gain %.3g >= 4; %.2f s < 60 s", worst, min_factor, t));
}

void rectangles() {
  int evaluated = 0, failed = 0;
  std::string worst;
  for (int i = 0; i < 10; ++i) {
    const double ell = 0.05 + 0.45 * i / 9;
    const RemarkReport rep = remark_checks(CollarParams::make(ell), 0.1);
    for (const RemarkCheck& k : rep.checks) {
      ++evaluated;
      if (!k.pass) {
        ++failed;
        worst = fmt("%s at ell %.3g: %.4g > %.4g", k.name.c_str(), ell, k.max_constant, k.bound);
      }
    }
  }
  report(5, "collar-rectangles", evaluated > 0 && failed == 0,
         fmt("%d of %d checks hold (containment, comparability <= 2, inverse-width gap <= 3 rho^-1/2) over ell in [0.05, 0.5]%s%s",
             evaluated - failed, evaluated, worst.empty() ? "" : "; ", worst.c_str()));
}

void decay() {
  Clock c;
  const DecayFit fit = decay_fit(0.5, default_decay_deltas(), {{1, 1.0}});
  const double err = fit.used >= 2 ? rel(fit.slope, -pi) : NAN;
  const double t = c.seconds();
  report(6, "collar-decay-estimate", err <= 0.1 && t < 30,
         fmt("ell 0.5: slope %.4f over %d points, rel err vs -pi %.3g <= 0.1; %.2f s < 30 s", fit.slope, fit.used, err, t));
}

void uniformity() {
  Clock c;
  SweepConfig cfg;
  cfg.threads = static_cast<int>(std::clamp(std::thread::hardware_concurrency(), 1u, 8u));
  const SweepReport a = alpha_constant_sweep(cfg);
  const SweepReport m = thin_mass_sweep(cfg);
  const double t = c.seconds();
  const bool ok = a.slope >= -0.1 && m.slope >= -0.1 && a.refinement_change <= 0.05 && m.refinement_change <= 0.05 && t < 300;
  report(7, "mean-value-estimate, thin-part-mass-estimate", ok,
         fmt("slopes %.3f (alpha), %.3f (thin) >= -0.1; refinement change %.3g, %.3g <= 0.05; %.1f s < 300 s",
             a.slope, m.slope, a.refinement_change, m.refinement_change, t));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void determinism(const std::string& cli) {
  const fs::path root = fs::temp_directory_path() / ("qdlab-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(root);
  bool ok = true;
  std::string why;
  for (const char* run : {"a", "b"}) {
    const std::string cmd = "\"" + cli + "\" verify-all --seed 5 --out \"" + (root / run).string() + "\" > /dev/null";
    const int rc = std::system(cmd.c_str());
    if (rc != 0) why += fmt("run %s exited %d; ", run, rc);
  }
  int files = 0;
  for (const auto& e : fs::directory_iterator(root / "a")) {
    const fs::path other = root / "b" / e.path().filename();
    ++files;
    if (!fs::exists(other) || slurp(e.path()) != slurp(other)) {
      ok = false;
      why += e.path().filename().string() + " differs; ";
    }
  }
  for (const auto& e : fs::directory_iterator(root / "b"))
    if (!fs::exists(root / "a" / e.path().filename())) ok = false;
  fs::remove_all(root);
  report(8, "verify-all-determinism", ok && files > 0,
         fmt("%d CSV/JSON files compared byte for byte across two verify-all runs%s%s", files, why.empty() ? "" : "; ",
             why.c_str()));
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance <path to qdlab>\n");
    return 2;
  }
  torus();
  collar_identities();
  dbar_exactness();
  cauchy();
  rectangles();
  decay();
  uniformity();
  determinism(argv[1]);
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
