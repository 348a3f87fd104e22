#include <cmath>
#include <numbers>

#include "doctest.h"
#include "qdlab/constant_lab.hpp"
#include "qdlab/errors.hpp"
#include "qdlab/model_surfaces.hpp"

using namespace qdlab;
using std::numbers::pi;

namespace {

QDOnCollar exp_field(double ell, int nodes = 64) {
  const CollarParams c = CollarParams::make(ell);
  auto grid = collar_grid(c, GridSpec{0, nodes});
  return QDOnCollar(SpectralField::from_modes(grid, 0, [](int, double s) { return cplx(std::exp(s)); }), c);
}

SweepConfig small_sweep() {
  SweepConfig c;
  c.ells = {0.2, 0.8};
  c.deltas = {0.3, 0.6};
  c.trials = 6;
  c.space.modes = 6;
  c.space.degree = 8;
  c.space.nodes = 96;
  return c;
}

}  // namespace

TEST_CASE("random coefficients") {
  FieldSpace sp;
  sp.modes = 2;
  sp.degree = 3;
  CHECK(stream_key(1, 2, 3) == stream_key(1, 2, 3));
  CHECK(stream_key(1, 2, 3) != stream_key(1, 2, 4));
  CHECK(stream_key(1, 2, 3) != stream_key(2, 2, 3));
  CHECK(random_coefficients(sp, 42) == random_coefficients(sp, 42));
  CHECK(random_coefficients(sp, 42) != random_coefficients(sp, 43));

  // E|a_{nk}|^2 = 4^{-|n|} 2^{-k}
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(5, 4);
  const int draws = 4000;
  for (int t = 0; t < draws; ++t) acc += random_coefficients(sp, stream_key(7, t)).cwiseAbs2();
  acc /= draws;
  for (int n = -2; n <= 2; ++n)
    for (int k = 0; k <= 3; ++k)
      CHECK(acc(n + 2, k) == doctest::Approx(std::pow(4.0, -std::abs(n)) * std::pow(2.0, -k)).epsilon(0.1));
}

TEST_CASE("synthesize matches the Legendre expansion") {
  FieldSpace sp;
  sp.modes = 3;
  sp.degree = 5;
  sp.nodes = 40;
  const CollarParams c = CollarParams::make(0.6);
  const Eigen::MatrixXcd a = random_coefficients(sp, 5);
  const QDOnCollar psi = synthesize(c, sp, a);
  const double S = psi.field.grid().half_extent();
  for (double s : {-0.9 * S, -1.0, 0.0, 2.5, 0.99 * S})
    for (double th : {0.0, 1.1, 4.0}) {
      cplx want{};
      for (int n = -3; n <= 3; ++n)
        for (int k = 0; k <= 5; ++k)
          want += a(n + 3, k) * std::legendre(k, s / S) * std::polar(1.0, n * th);
      CHECK(std::abs(psi.field.value(s, th) - want) < 1e-12 * (1 + std::abs(want)));
    }
  // padding only adds zero modes
  const QDOnCollar padded = synthesize(c, sp, a, 7);
  CHECK(padded.field.max_mode() == 7);
  CHECK(l1_norm(padded) == doctest::Approx(l1_norm(psi)).epsilon(1e-3));
  CHECK_THROWS_AS(synthesize(c, sp, Eigen::MatrixXcd::Zero(2, 2)), ConfigError);
}

TEST_CASE("ratios on closed-form fields") {
  SUBCASE("psi = e^s at ell = 1") {
    const QDOnCollar psi = exp_field(1.0);
    CHECK(alpha_ratio(psi) == doctest::Approx(0.0220192461267519022708).epsilon(1e-9));
    CHECK(thin_mass_ratio(psi, 0.7) == doctest::Approx(0.0508806351859315941583).epsilon(1e-9));
    CHECK_THROWS_AS(thin_mass_ratio(psi, 0.4), DomainError);
  }
  SUBCASE("scale invariance") {
    const FieldSpace sp{4, 6, 64};
    const QDOnCollar psi = project_out_dz2(synthesize(CollarParams::make(0.3), sp, random_coefficients(sp, 9)));
    QDOnCollar scaled(psi.field.scaled(cplx(-2.5, 4.0)), psi.collar);
    CHECK(alpha_ratio(scaled) == doctest::Approx(alpha_ratio(psi)).epsilon(1e-12));
    CHECK(thin_mass_ratio(scaled, 0.5) == doctest::Approx(thin_mass_ratio(psi, 0.5)).epsilon(1e-12));
  }
  SUBCASE("dz^2 projects to zero and is rejected") {
    const QDOnCollar psi = exp_field(0.5);
    const QDOnCollar z = project_out_dz2(dz2_field(psi));
    CHECK(std::isnan(alpha_ratio(z)));
    CHECK(std::isnan(thin_mass_ratio(z, 0.5)));
  }
  SUBCASE("holomorphic field after projection: alpha vanishes, ell ||Psi|| dominates") {
    const CollarParams c = CollarParams::make(0.8);
    const QDOnCollar phi = project_out_dz2(holomorphic_extend({{0, 2.0}, {1, 0.3}, {-2, cplx(0, 1)}}, c, GridSpec{2, 128}));
    const double db = dbar_l1_norm(phi);
    CHECK(db < 1e-9 * c.ell * l1_norm(phi));
    CHECK(alpha_ratio(phi) < 1e-12);
  }
  SUBCASE("field supported outside the thin part") {
    const CollarParams c = CollarParams::make(0.1);
    auto grid = collar_grid(c, GridSpec{1, 512});
    const double S = grid->half_extent();
    const ThinPart tp = thin_threshold(0.1, 0.1);
    REQUIRE(tp.x_delta + 15 < S);
    const QDOnCollar psi(SpectralField::from_modes(grid, 1, [&](int n, double s) {
                           return cplx(n == 1 ? std::exp(-0.5 * std::pow(s - (S - 5), 2)) : 0.0);
                         }), c);
    CHECK(thin_mass_ratio(psi, 0.1) < 1e-12);
  }
}

TEST_CASE("sweeps") {
  const SweepConfig cfg = small_sweep();
  const SweepReport a = alpha_constant_sweep(cfg);
  SUBCASE("alpha report") {
    REQUIRE(a.points.size() == 2);
    for (const SweepPoint& p : a.points) {
      CHECK(p.trials == cfg.trials);
      CHECK(p.max_ratio >= p.mean_ratio);
      CHECK(p.max_ratio > 0.0);
      // int |alpha| <= ||Psi|| / (4 pi)
      CHECK(p.max_ratio <= 1.0 / (4 * pi * p.ell));
      CHECK(std::abs(p.max_ratio_refined - p.max_ratio) < 0.05 * p.max_ratio);
    }
    CHECK(a.max_constant == std::max(a.points[0].max_ratio, a.points[1].max_ratio));
    CHECK(std::isfinite(a.slope));
    CHECK(a.refinement_change < 0.05);
  }
  SUBCASE("deterministic, thread-independent, seed-dependent") {
    CHECK(sweep_csv(alpha_constant_sweep(cfg)) == sweep_csv(a));
    SweepConfig threaded = cfg;
    threaded.threads = 3;
    CHECK(sweep_csv(alpha_constant_sweep(threaded)) == sweep_csv(a));
    SweepConfig other = cfg;
    other.seed = 2;
    CHECK(sweep_csv(alpha_constant_sweep(other)) != sweep_csv(a));
    CHECK(sweep_json(a).dump() == sweep_json(alpha_constant_sweep(cfg)).dump());
  }
  SUBCASE("thin mass report") {
    const SweepReport t = thin_mass_sweep(cfg);
    REQUIRE(t.points.size() == 4);
    // ell = 0.8: delta = 0.3 <= ell/2 gives an empty thin part
    CHECK(t.points[2].empty);
    CHECK(std::isnan(t.points[2].max_ratio));
    CHECK_FALSE(t.points[3].empty);
    for (const SweepPoint& p : t.points) {
      if (p.empty) continue;
      CHECK(p.max_ratio <= 1.0 / std::sqrt(p.delta));
      CHECK(std::abs(p.max_ratio_refined - p.max_ratio) < 0.05 * p.max_ratio);
    }
    // a wider thin part holds more mass for the same draws
    CHECK(t.points[1].max_ratio > t.points[0].max_ratio * std::sqrt(0.3 / 0.6));
    const nlohmann::json j = sweep_json(t);
    CHECK(j["objective"] == "thin_mass");
    CHECK(j["grid"]["deltas"].size() == 2);
    CHECK(j["seed"] == 1);
  }
  SUBCASE("csv layout") {
    const std::string csv = sweep_csv(a);
    CHECK(csv.rfind("objective,ell,delta,empty,trials,redraws,max_ratio,mean_ratio,max_ratio_refined,argmax_trial\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  }
  SUBCASE("errors") {
    SweepConfig bad = cfg;
    bad.trials = 0;
    CHECK_THROWS_AS(alpha_constant_sweep(bad), ConfigError);
    bad = cfg;
    bad.deltas.clear();
    CHECK_THROWS_AS(thin_mass_sweep(bad), ConfigError);
    bad = cfg;
    bad.ells = {-1.0};
    CHECK_THROWS_AS(alpha_constant_sweep(bad), DomainError);
  }
}

TEST_CASE("decay_fit") {
  const std::vector<double> deltas = default_decay_deltas();
  REQUIRE(deltas.size() == 10);
  SUBCASE("mode 1 against the closed-form fit") {
    const DecayFit small = decay_fit(0.05, deltas, {{1, 1.0}});
    CHECK(small.used == 10);
    CHECK(small.slope == doctest::Approx(-3.305856031510719).epsilon(1e-6));
    CHECK(small.slope == doctest::Approx(-pi).epsilon(0.1));
    const DecayFit half = decay_fit(0.5, deltas, {{1, 1.0}});
    CHECK(half.used == 5);
    CHECK(half.slope == doctest::Approx(-4.400947918619419).epsilon(1e-6));
    for (const DecayPoint& p : half.points) CHECK(p.dropped == (p.delta <= 0.25));
  }
  SUBCASE("symmetries") {
    const double ref = decay_fit(0.05, deltas, {{1, 1.0}}).slope;
    CHECK(decay_fit(0.05, deltas, {{-1, 1.0}}).slope == doctest::Approx(ref).epsilon(1e-9));
    CHECK(decay_fit(0.05, deltas, {{1, 7.0}}).slope == doctest::Approx(ref).epsilon(1e-9));
    CHECK(decay_fit(0.05, deltas, {{1, std::polar(1.0, 0.7)}}).slope == doctest::Approx(ref).epsilon(1e-9));
  }
  SUBCASE("mixed modes decay at least as fast") {
    const DecayFit m = decay_fit(0.05, deltas, {{1, 1.0}, {-1, 0.5}, {2, cplx(0, 1)}, {-2, 0.2}});
    CHECK(m.slope <= -pi + 0.1 * pi);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(decay_fit(0.05, deltas, {{0, 1.0}}), DomainError);
    CHECK_THROWS_AS(decay_fit(0.05, deltas, {}), ConfigError);
    CHECK_THROWS_AS(decay_fit(1.5, deltas, {{1, 1.0}}), DomainError);
  }
}

TEST_CASE("maximize_ratio") {
  MaximizeConfig mc;
  mc.space.modes = 6;
  mc.space.degree = 8;
  mc.space.nodes = 96;
  mc.screen = 12;
  mc.restarts = 1;
  mc.max_iters = 300;
  const double ell = 0.4;
  SUBCASE("dominates the sweep draws, witness is admissible") {
    const MaximizeResult r = maximize_ratio(ell, mc);
    SweepConfig sc;
    sc.ells = {ell};
    sc.trials = mc.screen;
    sc.space = mc.space;
    sc.refine = false;
    const SweepReport sw = alpha_constant_sweep(sc);
    CHECK(r.best_screened == sw.max_constant);
    CHECK(r.ratio >= sw.max_constant);
    CHECK(r.ratio > 2 * sw.max_constant);
    CHECK(r.orthogonality < 1e-10);
    const QDOnCollar w = synthesize(CollarParams::make(ell), mc.space, r.coefficients);
    CHECK(l1_norm(w) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(alpha_ratio(w) == doctest::Approx(r.ratio).epsilon(1e-12));
  }
  SUBCASE("thin mass objective") {
    mc.objective = Objective::thin_mass;
    mc.delta = 0.6;
    const MaximizeResult r = maximize_ratio(ell, mc);
    CHECK(r.ratio >= r.best_screened);
    CHECK(r.ratio <= 1.0 / std::sqrt(0.6));
    CHECK(r.orthogonality < 1e-10);
    mc.delta = 0.1;
    CHECK_THROWS_AS(maximize_ratio(ell, mc), DomainError);
  }
  SUBCASE("halving eps changes the exact ratio by less than 2%") {
    mc.max_iters = 1000;
    const double r1 = maximize_ratio(ell, mc).ratio;
    mc.eps *= 0.5;
    const double r2 = maximize_ratio(ell, mc).ratio;
    CHECK(std::abs(r2 - r1) < 0.02 * r1);
  }
  SUBCASE("errors") {
    mc.eps = 0.0;
    CHECK_THROWS_AS(maximize_ratio(ell, mc), ConfigError);
  }
}

TEST_CASE("l2_surrogate") {
  FieldSpace sp{4, 8, 96};
  const double ell = 0.3;
  const double la = l2_surrogate(ell, Objective::alpha, 0.0, sp);
  const double lt = l2_surrogate(ell, Objective::thin_mass, 0.5, sp);
  SUBCASE("grid convergence") {
    FieldSpace fine = sp;
    fine.nodes = 192;
    CHECK(l2_surrogate(ell, Objective::alpha, 0.0, fine) == doctest::Approx(la).epsilon(1e-10));
    CHECK(l2_surrogate(ell, Objective::thin_mass, 0.5, fine) == doctest::Approx(lt).epsilon(1e-10));
    CHECK(lt <= 1.0 / 0.5);
  }
  SUBCASE("bounds every Rayleigh quotient in the space") {
    const CollarParams c = CollarParams::make(ell);
    const ThinPart tp = thin_threshold(ell, 0.5);
    for (int t = 0; t < 20; ++t) {
      const QDOnCollar psi = project_out_dz2(synthesize(c, sp, random_coefficients(sp, stream_key(3, t))));
      const SpectralField& f = psi.field;
      const QDOnCollar d = dbar(psi);
      double a2 = 0.0, db2 = 0.0, thin2 = 0.0;
      for (int j = 0; j < f.grid().size(); ++j) {
        const double s = f.grid().nodes()[j], w = f.grid().weights()[j];
        const double r2 = std::pow(conformal_factor(ell, s), -2);
        a2 += w * std::norm(f.coefficient(0, j));
        for (int n = -sp.modes; n <= sp.modes; ++n) db2 += 8 * 2 * pi * w * r2 * r2 * std::norm(d.field.coefficient(n, j));
      }
      const CollarRegion win = CollarRegion::window(f.grid(), -tp.x_delta, tp.x_delta);
      const Eigen::MatrixXcd cw = f.coefficients_at(win.nodes);
      for (std::size_t p = 0; p < win.nodes.size(); ++p)
        thin2 += 4 * 2 * pi * win.weights[p] * std::pow(conformal_factor(ell, win.nodes[p]), -2) *
                 cw.col(static_cast<Eigen::Index>(p)).squaredNorm();
      const double l2 = std::pow(l2_norm(psi), 2);
      CHECK(a2 / (db2 + ell * ell * l2) <= la * (1 + 1e-10));
      CHECK(thin2 / (db2 + 0.5 * l2) <= lt * (1 + 1e-10));
    }
  }
}

TEST_CASE("torus pair maximisation") {
  for (double b : {10.0, 20.0}) CHECK(maximize_torus_pair(b) == doctest::Approx(torus_sine_ratio(b)).epsilon(0.01));
  CHECK_THROWS_AS(maximize_torus_pair(10.0, 64, 1), ConfigError);
}
