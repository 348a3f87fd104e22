#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "qdlab/cauchy.hpp"
#include "qdlab/errors.hpp"

using namespace qdlab;
using std::numbers::pi;

namespace {

struct TrigField {
  QDOnCollar psi;
  std::vector<std::vector<cplx>> a;  // a[n + N][m + M]
  int N, M;
  double omega;

  cplx exact(double s, double t) const {
    cplx v{};
    for (int n = -N; n <= N; ++n)
      for (int m = -M; m <= M; ++m) v += a[n + N][m + M] * std::polar(1.0, n * t + m * omega * s);
    return v;
  }
  double sup() const {
    double acc = 0.0;
    for (const auto& row : a)
      for (cplx x : row) acc += std::abs(x);
    return acc;
  }
};

TrigField random_trig(double ell, std::mt19937_64& rng, int N = 4, int M = 2, double omega = 0.5) {
  std::normal_distribution<double> nd;
  std::vector<std::vector<cplx>> a(2 * N + 1, std::vector<cplx>(2 * M + 1));
  for (auto& row : a)
    for (auto& x : row) x = cplx(nd(rng), nd(rng));
  const CollarParams c = CollarParams::make(ell);
  GridSpec g;
  g.modes = N;
  g.nodes = 128;
  auto fn = [&](int n, double s) {
    cplx v{};
    for (int m = -M; m <= M; ++m) v += a[n + N][m + M] * std::polar(1.0, m * omega * s);
    return v;
  };
  return {QDOnCollar(SpectralField::from_modes(collar_grid(c, g), N, fn), c), a, N, M, omega};
}

QDOnCollar single_mode(double ell, int n, const std::function<cplx(double)>& c_n, int nodes = 96) {
  const CollarParams c = CollarParams::make(ell);
  GridSpec g;
  g.modes = std::max(1, std::abs(n));
  g.nodes = nodes;
  return QDOnCollar(SpectralField::from_modes(collar_grid(c, g), g.modes,
                                              [&](int m, double s) { return m == n ? c_n(s) : cplx{}; }),
                    c);
}

}  // namespace

TEST_CASE("make_rectangle") {
  const CollarParams c = CollarParams::make(0.05);
  const double Xd0 = thin_threshold(0.05, 0.1).x_delta;
  SUBCASE("b = 0 is a square of half-side rho^-1/2") {
    const RectangleSpec R = make_rectangle(c, {1.5, 0.2}, 0.0);
    const double r = 1.0 / std::sqrt(conformal_factor(0.05, 1.5));
    CHECK(R.half_width() == doctest::Approx(r).epsilon(1e-14));
    CHECK(R.v_half == doctest::Approx(r).epsilon(1e-14));
    CHECK(R.h_plus - R.h_minus == doctest::Approx(2 * r).epsilon(1e-14));
    CHECK(0.5 * (R.h_plus + R.h_minus) == doctest::Approx(1.5));
  }
  SUBCASE("v_half = rho^-1/2 + b") {
    const RectangleSpec R = make_rectangle(c, {-7.0, 0.0}, 2.5);
    CHECK(R.v_half - R.half_width() == doctest::Approx(2.5).epsilon(1e-14));
  }
  SUBCASE("rectangles from the delta-thin part stay in the 2 delta-thin part") {
    const double delta = 0.05;
    const double xd = thin_threshold(0.05, delta).x_delta;
    const double x2d = thin_threshold(0.05, 2 * delta).x_delta;
    for (int i = 0; i <= 50; ++i) {
      const double s0 = xd * (2.0 * i / 50 - 1.0) * (1 - 1e-12);
      const RectangleSpec R = make_rectangle(c, {s0, 0.0}, 2 * pi);
      CHECK(R.h_minus > -x2d);
      CHECK(R.h_plus < x2d);
    }
  }
  SUBCASE("preconditions") {
    CHECK_THROWS_AS(make_rectangle(c, {Xd0 + 1.0, 0.0}, 0.0), DomainError);
    CHECK_THROWS_AS(make_rectangle(c, {0.0, 0.0}, -0.1), DomainError);
    CHECK_THROWS_AS(make_rectangle(c, {0.0, 0.0}, 7.0), DomainError);
    // ell = 0.3 has no 0.1-thin part at all
    CHECK_THROWS_AS(make_rectangle(CollarParams::make(0.3), {0.0, 0.0}, 0.0), DomainError);
  }
}

TEST_CASE("wrapping count") {
  for (double ell : {0.01, 0.05, 0.15})
    for (double s0 : {0.0, 3.0, 20.0})
      for (double b : {0.0, 1.0, 2 * pi}) {
        const CollarParams c = CollarParams::make(ell);
        CHECK(wrap_count(rectangle_geometry(c, {s0, 0.3}, b)) <= wrap_bound(c, s0));
      }
}

TEST_CASE("cauchy_reconstruct on exact cases") {
  SUBCASE("constant field") {
    const auto psi = single_mode(0.3, 0, [](double) { return cplx(2.0, -1.0); }, 32);
    for (double b : {0.0, 1.3, 2 * pi}) {
      const CauchyBreakdown br = cauchy_reconstruct(psi, {4.0, 1.0}, b);
      CHECK(std::abs(br.i_omega) < 1e-13);
      CHECK(std::abs(br.reconstructed() - cplx(2.0, -1.0)) < 1e-10);
    }
  }
  SUBCASE("holomorphic field: boundary terms alone") {
    ExtendOptions log;
    log.always_log_domain = true;
    GridSpec g;
    g.modes = 1;
    g.nodes = 64;
    const auto psi = holomorphic_extend({{1, 1.0}}, CollarParams::make(0.3), g, log);
    const CollarPoint z0{2.0, 0.7};
    const cplx exact = std::exp(cplx(z0.s, z0.theta));
    const CauchyBreakdown br = cauchy_reconstruct(psi, z0, 0.9);
    CHECK(std::abs(br.i_omega) < 1e-12 * std::abs(exact));
    CHECK(std::abs(br.reconstructed() - exact) < 1e-6 * std::abs(exact));
    CHECK(std::abs(cauchy_reconstruct(psi, z0, 0.9, CauchyOptions{}.refined()).reconstructed() - exact) <
          1e-9 * std::abs(exact));
  }
  SUBCASE("rectangle outside the grid support") {
    GridSpec g;
    g.modes = 1;
    g.nodes = 32;
    g.delta_margin = 0.1;
    const CollarParams c = CollarParams::make(0.05);
    const QDOnCollar psi(SpectralField::zero(collar_grid(c, g), 1), c);
    const double edge = psi.field.grid().half_extent();
    CHECK_THROWS_AS(cauchy_reconstruct(psi, {edge - 1.0, 0.0}, 0.0), DomainError);
  }
}

TEST_CASE("cauchy_reconstruct on random trigonometric polynomials") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int f = 0; f < 4; ++f) {
    const TrigField tf = random_trig(0.3, rng);
    const double X = tf.psi.collar.X;
    for (int q = 0; q < 5; ++q) {
      const CollarPoint z0{(U(rng) - 0.5) * 0.6 * X, 2 * pi * U(rng)};
      const double b = 2 * pi * U(rng);
      const cplx exact = tf.exact(z0.s, z0.theta);
      CHECK(std::abs(tf.psi.field.value(z0.s, z0.theta) - exact) < 1e-11 * tf.sup());
      const CauchyOptions o;
      const double e0 = std::abs(cauchy_reconstruct(tf.psi, z0, b, o).reconstructed() - exact);
      const double e1 = std::abs(cauchy_reconstruct(tf.psi, z0, b, o.refined()).reconstructed() - exact);
      CHECK(e0 < 1e-4 * tf.sup());
      CHECK(e1 * 4.0 <= e0);
    }
  }
}

TEST_CASE("b-stability and averaging") {
  std::mt19937_64 rng(5);
  const TrigField tf = random_trig(0.3, rng, 3, 1);
  const CollarPoint z0{1.0, 2.0};
  const cplx target = 2.0 * pi * cplx(0, 1) * tf.exact(z0.s, z0.theta);
  const CauchyBreakdown b1 = cauchy_reconstruct(tf.psi, z0, 0.5);
  const CauchyBreakdown b2 = cauchy_reconstruct(tf.psi, z0, 4.0);
  CHECK(std::abs(b1.sum() - target) < 1e-5 * tf.sup());
  CHECK(std::abs(b2.sum() - target) < 1e-5 * tf.sup());
  CHECK(std::abs(b1.i_h_plus - b2.i_h_plus) > 1e-3 * tf.sup());

  const CauchyBreakdown avg = averaged_reconstruct(tf.psi, z0);
  CHECK(std::abs(avg.sum() - target) < 1e-5 * tf.sup());

  const auto one = single_mode(0.3, 0, [](double) { return cplx(1.0); }, 32);
  CHECK(std::abs(averaged_reconstruct(one, {-3.0, 0.0}).reconstructed() - 1.0) < 1e-10);
}

TEST_CASE("mean-value and harmonic-sum bounds") {
  for (double ell : {0.01, 0.05, 0.15}) {
    const CollarParams c = CollarParams::make(ell);
    const double Xd0 = thin_threshold(ell, 0.1).x_delta;
    for (int i = 0; i <= 20; ++i) {
      const double s0 = Xd0 * (i / 20.0);
      CHECK(mean_value_error_ratio(c, s0) <= 1.0);
      CHECK(harmonic_sum_constant(c, s0) <= 1.0);
    }
  }
}

TEST_CASE("averaged upper horizontal integral") {
  SUBCASE("psi = e^{i theta}: alpha vanishes and the rho(s0) term carries the bound") {
    const auto e = single_mode(0.3, 1, [](double) { return cplx(1.0); });
    for (double s0 : {0.0, 5.0, 10.0}) {
      const HorizontalBound hb = horizontal_bound(e, {s0, 0.3});
      CHECK(hb.alpha_term == doctest::Approx(0.0));
      CHECK(hb.mean_abs > 0.0);
      CHECK(hb.constant() <= 1.0);
    }
  }
  SUBCASE("random fields") {
    std::mt19937_64 rng(9);
    for (int f = 0; f < 3; ++f) {
      const TrigField tf = random_trig(0.3, rng, 3, 1);
      CHECK(horizontal_bound(tf.psi, {2.0, 1.0}).constant() <= 1.0);
    }
  }
}

TEST_CASE("remark_checks") {
  SUBCASE("ell = 0.05, delta0 = 0.1: everything holds") {
    const RemarkReport rep = remark_checks(CollarParams::make(0.05));
    CHECK_FALSE(rep.empty);
    CHECK(rep.pass());
    for (const RemarkCheck& c : rep.checks) CHECK_MESSAGE(c.pass, c.name);
    CHECK(rep.checks.size() == 7);
  }
  SUBCASE("h^+- derivatives agree with finite differences") {
    const double ell = 0.05;
    const double Xd0 = thin_threshold(ell, 0.1).x_delta;
    auto hp = [&](double t) { return t + 1.0 / std::sqrt(conformal_factor(ell, t)); };
    double worst = 0.0;
    for (int i = 0; i <= 40; ++i) {
      const double s = Xd0 * (2.0 * i / 40 - 1.0);
      const double h = 1e-3;
      const double d = (hp(s + h) - hp(s - h)) / (2 * h);
      CHECK(d >= 0.9);
      CHECK(d <= 1.1);
      worst = std::max(worst, std::abs(d - 1.0));
    }
    const RemarkReport rep = remark_checks(CollarParams::make(ell));
    const auto it = std::find_if(rep.checks.begin(), rep.checks.end(),
                                 [](const RemarkCheck& c) { return c.name == "h_derivative"; });
    REQUIRE(it != rep.checks.end());
    CHECK(it->max_constant == doctest::Approx(worst).epsilon(1e-4));
  }
  SUBCASE("no thin part gives an empty report") {
    for (double ell : {0.3, 1.5, 2 * kArsinhOne}) {
      const RemarkReport rep = remark_checks(CollarParams::make(ell));
      CHECK(rep.empty);
      CHECK(rep.checks.empty());
      CHECK(rep.pass());
    }
  }
  SUBCASE("comparability constant tends to one as delta0 shrinks") {
    double prev = 1e9;
    for (double d0 : {0.1, 0.05, 0.02, 0.01}) {
      const RemarkReport rep = remark_checks(CollarParams::make(0.005), d0, 401);
      const double cst = rep.checks[1].max_constant;
      CHECK(cst < prev);
      CHECK(cst >= 1.0);
      prev = cst;
    }
    CHECK(prev < 1.06);
  }
  SUBCASE("json report") {
    const auto j = to_json(remark_checks(CollarParams::make(0.1), 0.1, 101));
    REQUIRE(j["checks"].is_array());
    for (const auto& c : j["checks"]) {
      CHECK(c.contains("name"));
      CHECK(c.contains("max_constant"));
      CHECK(c.contains("worst_point"));
      CHECK(c.contains("pass"));
    }
  }
}

TEST_CASE("random_trig_polynomial") {
  const CollarParams c = CollarParams::make(0.3);
  const TrigPolynomial t = random_trig_polynomial(c, 17);
  CHECK(t.a == random_trig_polynomial(c, 17).a);
  CHECK(t.a != random_trig_polynomial(c, 18).a);
  CHECK(t.a.rows() == 9);
  CHECK(t.a.cols() == 5);
  const double sup = t.sampled_sup();
  CHECK(sup > 0.0);
  CHECK(sup <= t.a.cwiseAbs().sum());
  for (double s : {-10.0, 0.0, 3.3})
    for (double th : {0.0, 2.0}) CHECK(std::abs(t.psi.field.value(s, th) - t.exact(s, th)) < 1e-11 * sup);
  const CollarPoint z0{1.5, 0.4};
  CHECK(std::abs(cauchy_reconstruct(t.psi, z0, 1.0).reconstructed() - t.exact(z0.s, z0.theta)) < 1e-4 * sup);
}
