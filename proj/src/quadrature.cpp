#include "qdlab/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace qdlab::quad {

namespace {

// Legendre P_n(x) and its derivative by the three-term recurrence.
std::pair<double, double> legendre_with_derivative(int n, double x) {
  double p0 = 1.0;
  double p1 = x;
  if (n == 0) return {1.0, 0.0};
  for (int k = 2; k <= n; ++k) {
    const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = pk;
  }
  const double dp = n * (x * p1 - p0) / (x * x - 1.0);
  return {p1, dp};
}

}  // namespace

Rule gauss_legendre(int n, double a, double b) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
  Rule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Tricomi initial guess, then Newton.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      auto [p, dp] = legendre_with_derivative(n, x);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    auto [p, dp] = legendre_with_derivative(n, x);
    (void)p;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    r.nodes[i] = -x;
    r.nodes[n - 1 - i] = x;
    r.weights[i] = w;
    r.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) r.nodes[n / 2] = 0.0;
  const double mid = 0.5 * (a + b);
  const double hw = 0.5 * (b - a);
  for (int i = 0; i < n; ++i) {
    r.nodes[i] = mid + hw * r.nodes[i];
    r.weights[i] *= hw;
  }
  return r;
}

std::vector<double> gauss_legendre_barycentric(const Rule& reference) {
  // w_j = (-1)^j sqrt((1 - x_j^2) lambda_j) for nodes on [-1, 1].
  const std::size_t n = reference.nodes.size();
  std::vector<double> w(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double x = reference.nodes[j];
    const double s = std::sqrt((1.0 - x * x) * reference.weights[j]);
    w[j] = (j % 2 == 0) ? s : -s;
  }
  return w;
}

Rule composite_gauss(double a, double b, int panels, int order) {
  return composite_gauss(a, b, {}, panels, order);
}

Rule composite_gauss(double a, double b, const std::vector<double>& breakpoints, int panels,
                     int order) {
  if (panels < 1) throw std::invalid_argument("composite_gauss: panels must be positive");
  std::vector<double> cuts{a, b};
  for (double c : breakpoints)
    if (c > a && c < b) cuts.push_back(c);
  std::sort(cuts.begin(), cuts.end());
  const Rule ref = gauss_legendre(order);
  Rule out;
  out.nodes.reserve(static_cast<std::size_t>(panels) * order * (cuts.size() - 1));
  out.weights.reserve(out.nodes.capacity());
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    const double lo = cuts[c];
    const double h = (cuts[c + 1] - lo) / panels;
    for (int p = 0; p < panels; ++p) {
      const double pa = lo + p * h;
      for (int q = 0; q < order; ++q) {
        out.nodes.push_back(pa + 0.5 * h * (ref.nodes[q] + 1.0));
        out.weights.push_back(0.5 * h * ref.weights[q]);
      }
    }
  }
  return out;
}

Rule composite_gauss_width(double a, double b, const std::vector<double>& breakpoints,
                           double max_width, int order) {
  if (!(max_width > 0.0)) throw std::invalid_argument("composite_gauss_width: width must be positive");
  std::vector<double> cuts{a, b};
  for (double c : breakpoints)
    if (c > a && c < b) cuts.push_back(c);
  std::sort(cuts.begin(), cuts.end());
  const Rule ref = gauss_legendre(order);
  Rule out;
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    const double len = cuts[c + 1] - cuts[c];
    if (len <= 0.0) continue;
    const int panels = std::max(1, static_cast<int>(std::ceil(len / max_width - 1e-12)));
    const double h = len / panels;
    for (int p = 0; p < panels; ++p) {
      const double pa = cuts[c] + p * h;
      for (int q = 0; q < order; ++q) {
        out.nodes.push_back(pa + 0.5 * h * (ref.nodes[q] + 1.0));
        out.weights.push_back(0.5 * h * ref.weights[q]);
      }
    }
  }
  return out;
}

double adaptive(const std::function<double(double)>& f, double a, double b, double rtol,
                int max_depth) {
  using boost::math::quadrature::gauss_kronrod;
  double err = 0.0;
  return gauss_kronrod<double, 15>::integrate(f, a, b, static_cast<unsigned>(max_depth), rtol,
                                              &err);
}

}  // namespace qdlab::quad
