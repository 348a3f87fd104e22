#include <cmath>
#include <numbers>
#include <functional>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "doctest.h"
#include "qdlab/collar_geom.hpp"
#include "qdlab/errors.hpp"

using namespace qdlab;
using std::numbers::pi;

namespace {

// Independent oracle: adaptive Gauss-Kronrod on the raw integrand in s.
double gk(const std::function<double(double)>& f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 30, 1e-14);
}

double rho_direct(double ell, double s) { return ell / (2.0 * pi * std::cos(ell * s / (2.0 * pi))); }

}  // namespace

TEST_CASE("half_width closed-form values") {
  const double ell_max = 2.0 * std::asinh(1.0);
  CHECK(half_width(ell_max) == doctest::Approx(pi * pi / (2.0 * ell_max)).epsilon(1e-14));
  CHECK(half_width(ell_max) == doctest::Approx(2.79949517050552259).epsilon(1e-14));
  // mpmath, 30 digits
  CHECK(half_width(1.0) == doctest::Approx(6.85128106282923551).epsilon(1e-14));
  for (double ell : {1e-3, 1e-5, 1e-8}) CHECK(half_width(ell) * ell == doctest::Approx(pi * pi).epsilon(2 * ell));
  CHECK(half_width(1e-3) < pi * pi / 1e-3);
  CHECK_THROWS_AS(half_width(0.0), DomainError);
  CHECK_THROWS_AS(half_width(-1.0), DomainError);
}

TEST_CASE("conformal factor") {
  CHECK(conformal_factor(0.7, 0.0) == doctest::Approx(0.7 / (2 * pi)));
  CHECK(conformal_factor(0.7, 3.0) == doctest::Approx(conformal_factor(0.7, -3.0)));
  CHECK_THROWS_AS(conformal_factor(0.1, pi * pi / 0.1), DomainError);

  SUBCASE("monotone in |s| and rho (X - |s|) <= pi/2") {
    for (double ell : {1e-3, 0.05, 0.5, 1.0, 2.0 * std::asinh(1.0)}) {
      const double X = half_width(ell);
      double prev = 0.0;
      for (int k = 0; k <= 2000; ++k) {
        const double s = X * k / 2000.0;
        const double r = conformal_factor(ell, s);
        CHECK(r >= prev);
        CHECK(r * (X - s) <= pi / 2);
        prev = r;
      }
    }
  }

  SUBCASE("sup of rho (X - |s|) approaches pi/2 as ell -> 0") {
    auto sup = [](double ell) {
      const double X = half_width(ell);
      double m = 0.0;
      for (int k = 0; k <= 20000; ++k) {
        const double s = X * k / 20000.0;
        m = std::max(m, conformal_factor(ell, s) * (X - s));
      }
      return m;
    };
    CHECK(sup(1e-4) > sup(0.1));
    CHECK(sup(1e-4) == doctest::Approx(pi / 2).epsilon(1e-3));
  }
}

TEST_CASE("thin threshold") {
  SUBCASE("boundary and empty cases") {
    CHECK(thin_threshold(0.4, 0.2).x_delta == 0.0);
    CHECK(thin_threshold(0.4, 0.2).empty());
    CHECK(thin_threshold(0.4, 0.1).empty());
    CHECK(thin_threshold(0.4, 0.2 * (1 + 1e-12)).x_delta == doctest::Approx(0.0).epsilon(1e-4));
  }
  SUBCASE("direct formula") {
    // mpmath: pi^2/l - (2 pi/l) asin(sinh(l/2)/sinh(d)) at l = 0.1, d = 0.2
    CHECK(thin_threshold(0.1, 0.2).x_delta == doctest::Approx(82.9205903477422341).epsilon(1e-13));
    const double oracle = pi * pi / 0.1 - (2 * pi / 0.1) * std::asin(std::sinh(0.05) / std::sinh(0.2));
    CHECK(thin_threshold(0.1, 0.2).x_delta == doctest::Approx(oracle).epsilon(1e-13));
  }
  SUBCASE("outside the collar-lemma regime clamps to X") {
    const ThinPart t = thin_threshold(0.3, 1.2);
    CHECK(t.outside_regime);
    CHECK(t.x_delta == half_width(0.3));
    CHECK_FALSE(thin_threshold(0.3, 0.5).outside_regime);
  }
  SUBCASE("monotone in delta and bounded by X") {
    for (double ell : {1e-3, 0.1, 1.0}) {
      double prev = 0.0;
      for (int k = 1; k <= 400; ++k) {
        const double d = 1.2 * k / 400.0;
        const double x = thin_threshold(ell, d).x_delta;
        CHECK(x >= prev);
        CHECK(x <= half_width(ell));
        prev = x;
      }
    }
  }
  SUBCASE("rho at X_delta") {
    const double x = thin_threshold(0.1, 0.1).x_delta;
    CHECK(conformal_factor(0.1, x) == doctest::Approx(0.0318707856441628012).epsilon(1e-12));
  }
}

TEST_CASE("composition identity rho(X_delta) = ell sinh(delta) / (2 pi sinh(ell/2))") {
  for (double ell : {1e-3, 3e-3, 1e-2, 0.05, 0.2, 0.6, 1.0}) {
    for (int k = 1; k < 200; ++k) {
      const double d = ell / 2 + (std::asinh(1.0) - ell / 2) * k / 200.0;
      const double x = thin_threshold(ell, d).x_delta;
      const double expected = ell * std::sinh(d) / (2 * pi * std::sinh(ell / 2));
      CHECK(conformal_factor(ell, x) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("rho(X_delta) is of order delta; best constant is pi") {
  // ratio rho(X_delta)/delta = (ell / 2 sinh(ell/2)) (sinh(delta)/delta) / pi equals 1/pi at delta = ell/2.
  double worst = 1.0;
  for (int i = 0; i <= 60; ++i) {
    const double ell = std::pow(10.0, -3.0 + 3.0 * i / 60.0);
    for (int k = 1; k < 100; ++k) {
      const double d = ell / 2 + (std::asinh(1.0) - ell / 2) * k / 100.0;
      const double r = conformal_factor(ell, thin_threshold(ell, d).x_delta) / d;
      worst = std::max({worst, r, 1.0 / r});
    }
  }
  CHECK(worst <= pi);
  CHECK(worst >= 3.0);
}

TEST_CASE("dz^2 norms") {
  SUBCASE("pointwise") {
    const Dz2Norms n = dz2_norms(0.3);
    CHECK(n.pointwise(0.0) == doctest::Approx(2.0 / std::pow(0.3 / (2 * pi), 2)));
  }
  SUBCASE("L1 equals 8 pi X against quadrature") {
    for (double ell : {1e-3, 0.05, 0.5, 1.0}) {
      const Dz2Norms n = dz2_norms(ell);
      const double X = half_width(ell);
      // |dz^2|_g dv_g = 2 rho^-2 rho^2 ds dtheta
      const double q = 2.0 * pi * gk([&](double s) { return 2.0 * std::pow(rho_direct(ell, s), -2) *
                                                           std::pow(rho_direct(ell, s), 2); },
                                     -X, X);
      CHECK(n.l1 == doctest::Approx(8 * pi * X).epsilon(1e-14));
      CHECK(std::abs(n.l1 - q) / q < 1e-10);
    }
  }
  SUBCASE("L2 closed form against quadrature") {
    const Dz2Norms n = dz2_norms(1.0);
    CHECK(n.l2_squared == doctest::Approx(9352.70329276550047).epsilon(1e-13));
    const double X = half_width(1.0);
    const double q = 8 * pi * gk([](double s) { return std::pow(rho_direct(1.0, s), -2); }, -X, X);
    CHECK(n.l2_squared == doctest::Approx(q).epsilon(1e-12));
  }
  SUBCASE("L2^2 ell^3 stays between positive bounds and converges as ell -> 0") {
    const double limit = 4 * pi * pi * std::pow(2 * pi, 3);
    double prev = 0.0;
    for (double ell : {1.0, 0.5, 0.1, 1e-2, 1e-3}) {
      const double v = dz2_norms(ell).l2_squared * std::pow(ell, 3);
      CHECK(v > prev);
      CHECK(v < limit);
      prev = v;
    }
    CHECK(prev == doctest::Approx(limit).epsilon(1e-5));
  }
}

TEST_CASE("int_0^X rho^-1 closed form and bound") {
  for (double ell : {1e-3, 0.1, 1.0}) {
    const double X = half_width(ell);
    const double q = gk([&](double s) { return 1.0 / rho_direct(ell, s); }, 0.0, X);
    CHECK(integral_rho_inv(ell, X) == doctest::Approx(q).epsilon(1e-12));
    CHECK(integral_rho_inv(ell, X) <= std::pow(2 * pi / ell, 2));
  }
}
