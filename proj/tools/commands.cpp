#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/uniform_01.hpp>

#include "output.hpp"
#include "qdlab/cauchy.hpp"
#include "qdlab/collar_geom.hpp"
#include "qdlab/constant_lab.hpp"
#include "qdlab/csv.hpp"
#include "qdlab/errors.hpp"
#include "qdlab/model_surfaces.hpp"
#include "qdlab/qd_field.hpp"

using nlohmann::json;
using qdlab::cplx;
using qdlab::num17;

namespace qdcli {

namespace {

constexpr double pi = std::numbers::pi;
constexpr const char* kModel = "dz2-orthogonal fields on the standalone collar";

std::vector<double> doubles(const json& j) { return j.get<std::vector<double>>(); }
double tol(const RunConfig& c, const char* key) { return c.params["tolerances"][key].get<double>(); }
int integer(const RunConfig& c, const char* key) { return c.params[key].get<int>(); }
double number(const RunConfig& c, const char* key) { return c.params[key].get<double>(); }

std::string g6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

std::vector<double> log10s(const std::vector<double>& v) {
  std::vector<double> out;
  for (double x : v) out.push_back(x > 0 ? std::log10(x) : NAN);
  return out;
}

// --- geom -------------------------------------------------------------------------------

CommandResult geom(const RunConfig& c) {
  CommandResult r;
  const auto ells = doubles(c.params["ells"]);
  const auto deltas = doubles(c.params["deltas"]);
  const int nodes = integer(c, "s_nodes");
  const int samples = integer(c, "samples");
  if (ells.empty()) throw qdlab::ConfigError("geom: ells must not be empty");
  if (samples < 3) throw qdlab::ConfigError("geom: samples must be >= 3");
  const double limit = 4 * pi * pi * std::pow(2 * pi, 3);

  std::ostringstream csv;
  csv << "ell,X,delta,empty,x_delta,rho_at_x_delta,rho_identity,identity_rel_err,dz2_l1,dz2_l1_closed,"
         "l1_rel_err,dz2_l2_squared,l2_rel_err,l2_squared_ell3,limit_rel_dev,max_rho_gap\n";
  double worst_identity = 0, worst_l1 = 0, worst_l2 = 0, worst_gap = 0;
  std::vector<std::pair<double, double>> dev;  // (ell, deviation from the small-ell limit)
  json rows = json::array();
  std::vector<double> plot_x, plot_y;
  for (double ell : ells) {
    const auto collar = qdlab::CollarParams::make(ell);
    const double X = collar.X;
    const auto grid = qdlab::SpectralGrid::make(X, nodes);
    Eigen::MatrixXcd amps = Eigen::MatrixXcd::Ones(1, grid->size());
    const qdlab::QDOnCollar one(qdlab::SpectralField(grid, 0, amps, {false}), collar);
    const qdlab::Dz2Norms closed = qdlab::dz2_norms(ell);
    const double l1 = qdlab::l1_norm(one);
    const double l2sq = std::pow(qdlab::l2_norm(one), 2);
    const double l1_err = rel(l1, closed.l1), l2_err = rel(l2sq, closed.l2_squared);
    worst_l1 = std::max(worst_l1, l1_err);
    worst_l2 = std::max(worst_l2, l2_err);
    const double scaled = closed.l2_squared * ell * ell * ell;
    dev.emplace_back(ell, rel(scaled, limit));
    plot_x.push_back(std::log10(ell));
    plot_y.push_back(scaled);
    double gap = 0;
    for (int i = 0; i < samples; ++i) {
      const double s = -X + 2 * X * i / (samples - 1);
      gap = std::max(gap, qdlab::conformal_factor(ell, s) * (X - std::abs(s)));
    }
    worst_gap = std::max(worst_gap, gap);
    for (double delta : deltas) {
      const qdlab::ThinPart t = qdlab::thin_threshold(ell, delta);
      double lhs = NAN, rhs = NAN, err = NAN;
      if (!t.empty() && !t.outside_regime) {
        lhs = qdlab::conformal_factor(ell, t.x_delta);
        rhs = qdlab::rho_at_thin_boundary(ell, delta);
        err = rel(lhs, rhs);
        worst_identity = std::max(worst_identity, err);
      }
      csv << num17(ell) << ',' << num17(X) << ',' << num17(delta) << ',' << (t.empty() ? 1 : 0) << ','
          << num17(t.x_delta) << ',' << num17(lhs) << ',' << num17(rhs) << ',' << num17(err) << ',' << num17(l1)
          << ',' << num17(closed.l1) << ',' << num17(l1_err) << ',' << num17(l2sq) << ',' << num17(l2_err) << ','
          << num17(scaled) << ',' << num17(dev.back().second) << ',' << num17(gap) << '\n';
    }
    rows.push_back({{"ell", ell}, {"X", X}, {"dz2_l1", l1}, {"l2_squared_ell3", scaled}, {"max_rho_gap", gap}});
  }
  // l2 ell^3 tends to its limit: the deviation shrinks with ell and is small at the smallest ell.
  std::sort(dev.begin(), dev.end());
  double monotone = 0;
  for (std::size_t i = 1; i < dev.size(); ++i) monotone = std::max(monotone, dev[i - 1].second - dev[i].second);

  r.csv = csv.str();
  r.results = {{"rows", rows}, {"l2_squared_ell3_limit", limit}};
  r.checks = {{"rho(X_delta) identity, max rel err", worst_identity, "<=", tol(c, "identity")},
              {"dz2 L1 = 8 pi X, max rel err", worst_l1, "<=", tol(c, "l1")},
              {"dz2 L2^2 quadrature vs closed form, max rel err", worst_l2, "<=", tol(c, "l2")},
              {"ell^3 ||dz2||^2 deviation from 4 pi^2 (2 pi)^3 at smallest ell", dev.front().second, "<=",
               tol(c, "l2_limit")},
              {"ell^3 ||dz2||^2 deviation non-increasing as ell decreases", monotone, "<=", 0.0},
              {"max rho(s) (X - |s|) vs pi/2", worst_gap, "<=", pi / 2 * (1 + 1e-12)}};
  if (c.svg)
    r.svg = line_chart("ell^3 ||dz^2||^2 on the collar", "log10 ell", "ell^3 ||dz^2||^2",
                       {{"ell^3 ||dz^2||^2", plot_x, plot_y},
                        {"4 pi^2 (2 pi)^3", {plot_x.front(), plot_x.back()}, {limit, limit}}},
                       "");
  return r;
}

// --- cauchy-check -----------------------------------------------------------------------

CommandResult cauchy_check(const RunConfig& c) {
  CommandResult r;
  const double ell = number(c, "ell");
  const int fields = integer(c, "fields"), points = integer(c, "points");
  if (fields < 1 || points < 1) throw qdlab::ConfigError("cauchy-check: fields and points must be >= 1");
  const auto collar = qdlab::CollarParams::make(ell);
  qdlab::CauchyOptions opts;
  opts.panel_width = number(c, "panel_width");
  opts.order = integer(c, "order");
  opts.b_nodes = integer(c, "b_quad_points");
  const qdlab::CauchyOptions fine = opts.refined();
  // Errors this close to rounding cannot shrink further under refinement.
  constexpr double floor = 1e-13;

  std::ostringstream csv;
  csv << "field,point,s0,theta0,b,sup_norm,rel_error,rel_error_refined,refinement_factor\n";
  double worst = 0, worst_avg = 0, min_factor = INFINITY;
  int at_floor = 0;
  for (int f = 0; f < fields; ++f) {
    const qdlab::TrigPolynomial tp =
        qdlab::random_trig_polynomial(collar, qdlab::stream_key(c.seed, 0xCA, f), integer(c, "n_modes"),
                                      integer(c, "s_modes"), number(c, "omega"), integer(c, "s_nodes"));
    const double sup = tp.sampled_sup();
    boost::random::mt19937_64 rng(qdlab::stream_key(c.seed, 0xCB, f));
    boost::random::uniform_01<double> U;
    for (int q = 0; q < points; ++q) {
      const double s0 = (U(rng) - 0.5) * 0.6 * collar.X;
      const double th0 = 2 * pi * U(rng);
      const double b = 2 * pi * U(rng);
      const qdlab::CollarPoint z0{s0, th0};
      const cplx exact = tp.exact(s0, th0);
      const double e0 = std::abs(qdlab::cauchy_reconstruct(tp.psi, z0, b, opts).reconstructed() - exact) / sup;
      const double e1 = std::abs(qdlab::cauchy_reconstruct(tp.psi, z0, b, fine).reconstructed() - exact) / sup;
      const double factor = e0 / e1;
      worst = std::max(worst, e0);
      if (e0 < floor) ++at_floor;
      else min_factor = std::min(min_factor, factor);
      if (q == 0)
        worst_avg = std::max(
            worst_avg, std::abs(qdlab::averaged_reconstruct(tp.psi, z0, opts).reconstructed() - exact) / sup);
      csv << f << ',' << q << ',' << num17(s0) << ',' << num17(th0) << ',' << num17(b) << ',' << num17(sup) << ','
          << num17(e0) << ',' << num17(e1) << ',' << num17(factor) << '\n';
    }
  }
  r.csv = csv.str();

  std::ostringstream rect;
  rect << "ell,empty,check,max_constant,bound,worst_point,pass\n";
  json reports = json::array();
  bool rectangles_ok = true;
  int checked = 0;
  for (double re : doubles(c.params["rectangle_ells"])) {
    const qdlab::RemarkReport rep = qdlab::remark_checks(qdlab::CollarParams::make(re), number(c, "delta0"));
    reports.push_back(qdlab::to_json(rep));
    if (rep.empty) rect << num17(re) << ",1,,,,,\n";
    for (const qdlab::RemarkCheck& k : rep.checks) {
      rect << num17(re) << ",0," << k.name << ',' << num17(k.max_constant) << ',' << num17(k.bound) << ','
             << num17(k.worst_point) << ',' << (k.pass ? 1 : 0) << '\n';
      rectangles_ok = rectangles_ok && k.pass;
      ++checked;
    }
  }
  r.extra_csv.emplace_back("rectangles", rect.str());
  r.results = {{"ell", ell},
               {"fields", fields},
               {"points", points},
               {"max_rel_error", worst},
               {"max_rel_error_averaged", worst_avg},
               {"min_refinement_factor", std::isfinite(min_factor) ? json(min_factor) : json(nullptr)},
               {"samples_at_rounding_floor", at_floor},
               {"rectangle_reports", reports}};
  r.checks = {{"reconstruction error / sup|psi|", worst, "<=", tol(c, "reconstruction")},
              {"averaged reconstruction error / sup|psi|", worst_avg, "<=", tol(c, "reconstruction")},
              {"min error reduction under refinement", std::isfinite(min_factor) ? min_factor : INFINITY, ">=",
               tol(c, "refinement_factor")},
              {"rectangle containment, comparability and inverse-width checks failing", rectangles_ok ? 0.0 : 1.0,
               "<=", 0.0},
              {"rectangle checks evaluated", static_cast<double>(checked), ">=", 1.0}};
  return r;
}

// --- torus-sweep ------------------------------------------------------------------------

CommandResult torus(const RunConfig& c) {
  CommandResult r;
  const auto bs = doubles(c.params["bs"]);
  if (bs.size() < 2) throw qdlab::ConfigError("torus-sweep: at least two b values are needed");
  const qdlab::TorusSweep sw = qdlab::torus_sweep(bs, number(c, "a"), integer(c, "mesh"));
  std::ostringstream csv;
  csv << "a,b,mode,l1_residual,dbar_l1,ratio,closed_form,rel_error\n";
  double worst = 0;
  std::vector<double> x, y, yc;
  for (const qdlab::TorusRow& row : sw.rows) {
    const double cf = qdlab::torus_sine_ratio(row.b);
    worst = std::max(worst, rel(row.ratio, cf));
    csv << num17(row.a) << ',' << num17(row.b) << ',' << row.mode_description << ',' << num17(row.l1_residual)
        << ',' << num17(row.dbar_l1) << ',' << num17(row.ratio) << ',' << num17(cf) << ','
        << num17(rel(row.ratio, cf)) << '\n';
    x.push_back(row.b);
    y.push_back(row.ratio);
    yc.push_back(cf);
  }
  const double want = 1 / (std::sqrt(2.0) * pi);
  r.csv = csv.str();
  r.results = {{"slope", sw.slope}, {"intercept", sw.intercept}, {"closed_form_slope", want}};
  r.checks = {{"ratio vs b/(sqrt 2 pi), max rel err", worst, "<=", tol(c, "ratio")},
              {"slope vs 1/(sqrt 2 pi), rel err", rel(sw.slope, want), "<=", tol(c, "slope")}};
  if (c.svg)
    r.svg = line_chart("Torus Poincare ratio of sin(2 pi x/b)", "b", "ratio",
                       {{"computed", x, y}, {"b/(sqrt 2 pi)", x, yc}}, "");
  return r;
}

// --- sphere-check -----------------------------------------------------------------------

CommandResult sphere(const RunConfig& c) {
  CommandResult r;
  qdlab::SphereOptions o;
  o.r_max = number(c, "r_max");
  o.panels = integer(c, "panels");
  o.order = integer(c, "order");
  o.angles = integer(c, "angles");
  struct Case {
    std::string name;
    qdlab::SphereField f;
    double expected;
  };
  const std::vector<Case> cases{
      {"exp(-|z|^2)",
       {[](cplx z) { return cplx(std::exp(-std::norm(z))); }, [](cplx z) { return -z * std::exp(-std::norm(z)); }},
       qdlab::sphere_gaussian_ratio()},
      {"(1+|z|^2)^-3",
       {[](cplx z) { return cplx(std::pow(1 + std::norm(z), -3)); },
        [](cplx z) { return -3.0 * z * std::pow(1 + std::norm(z), -4); }},
       8 / (3 * std::sqrt(2.0) * pi)}};
  std::ostringstream csv;
  csv << "field,l1,dbar_l1,ratio,closed_form,rel_error\n";
  double worst = 0;
  json rows = json::array();
  for (const Case& k : cases) {
    const qdlab::SphereNorms n = qdlab::sphere_norms(k.f, o);
    const double e = rel(n.ratio, k.expected);
    worst = std::max(worst, e);
    csv << k.name << ',' << num17(n.l1) << ',' << num17(n.dbar_l1) << ',' << num17(n.ratio) << ','
        << num17(k.expected) << ',' << num17(e) << '\n';
    rows.push_back({{"field", k.name}, {"ratio", n.ratio}, {"closed_form", k.expected}});
  }
  bool rejected = false;
  try {
    qdlab::sphere_ratio({[](cplx) { return cplx(1.0); }, [](cplx) { return cplx{}; }}, o);
  } catch (const qdlab::DomainError&) {
    rejected = true;
  }
  r.csv = csv.str();
  r.results = {{"rows", rows}, {"holomorphic_constant_rejected", rejected}};
  r.checks = {{"ratio vs closed form, max rel err", worst, "<=", tol(c, "ratio")},
              {"holomorphic constant not rejected", rejected ? 0.0 : 1.0, "<=", 0.0}};
  return r;
}

// --- decay-fit --------------------------------------------------------------------------

std::map<int, cplx> parse_modes(const json& j) {
  std::map<int, cplx> modes;
  for (auto it = j.begin(); it != j.end(); ++it) {
    std::size_t used = 0;
    int n = 0;
    try {
      n = std::stoi(it.key(), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != it.key().size()) throw qdlab::ConfigError("decay-fit: mode key '" + it.key() + "' is not an integer");
    const json& v = *it;
    if (v.is_number()) modes[n] = cplx(v.get<double>(), 0.0);
    else if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
      modes[n] = cplx(v[0].get<double>(), v[1].get<double>());
    else throw qdlab::ConfigError("decay-fit: mode " + it.key() + " must be a number or [re, im]");
  }
  return modes;
}

CommandResult decay(const RunConfig& c) {
  CommandResult r;
  const double ell = number(c, "ell");
  const qdlab::DecayFit fit =
      qdlab::decay_fit(ell, doubles(c.params["deltas"]), parse_modes(c.params["modes"]), integer(c, "s_nodes"));
  std::ostringstream csv;
  csv << "ell,delta,inv_delta,log_r,dropped,reason\n";
  std::vector<double> x, y, yf;
  for (const qdlab::DecayPoint& p : fit.points) {
    csv << num17(ell) << ',' << num17(p.delta) << ',' << num17(1 / p.delta) << ',' << num17(p.log_r) << ','
        << (p.dropped ? 1 : 0) << ',' << p.reason << '\n';
    if (!p.dropped) {
      x.push_back(1 / p.delta);
      y.push_back(p.log_r);
      yf.push_back(fit.intercept + fit.slope / p.delta);
    }
  }
  r.csv = csv.str();
  r.results = {{"ell", ell}, {"slope", fit.slope}, {"intercept", fit.intercept}, {"used", fit.used},
               {"target_slope", -pi}};
  r.checks = {{"fitted points", static_cast<double>(fit.used), ">=", 2.0},
              {"slope vs -pi, rel err", fit.used >= 2 ? rel(fit.slope, -pi) : NAN, "<=", tol(c, "slope")}};
  if (c.svg)
    r.svg = line_chart("Decay on the thin part", "1/delta", "log r", {{"measured", x, y}, {"fit", x, yf}}, "");
  return r;
}

// --- sweeps -----------------------------------------------------------------------------

qdlab::FieldSpace space_of(const RunConfig& c) {
  qdlab::FieldSpace s;
  s.modes = integer(c, "n_modes");
  s.degree = integer(c, "degree");
  s.nodes = integer(c, "s_nodes");
  return s;
}

CommandResult sweep(const RunConfig& c, qdlab::Objective obj) {
  CommandResult r;
  qdlab::SweepConfig sc;
  sc.ells = doubles(c.params["ells"]);
  if (c.params.contains("deltas")) sc.deltas = doubles(c.params["deltas"]);
  sc.trials = integer(c, "trials");
  sc.seed = c.seed;
  sc.space = space_of(c);
  sc.refine = c.params["refine"].get<bool>();
  sc.threads = c.threads;
  qdlab::SweepReport rep = obj == qdlab::Objective::alpha ? qdlab::alpha_constant_sweep(sc) : qdlab::thin_mass_sweep(sc);
  rep.config_hash = c.hash();
  r.csv = qdlab::sweep_csv(rep);
  r.results = qdlab::sweep_json(rep);
  r.checks.push_back({"slope of log max constant vs log ell", rep.slope, ">=", tol(c, "min_slope")});
  if (sc.refine)
    r.checks.push_back({"max constant change under refinement", rep.refinement_change, "<=", tol(c, "refinement")});
  if (c.svg) {
    std::vector<Series> s{{"max ratio", log10s(sc.ells), log10s(rep.max_by_ell)}};
    if (sc.refine) s.push_back({"refined", log10s(sc.ells), log10s(rep.max_by_ell_refined)});
    r.svg = line_chart("Largest observed constant (" + qdlab::to_string(obj) + ")", "log10 ell",
                       "log10 max ratio", s, kModel);
  }
  return r;
}

// --- maximize ---------------------------------------------------------------------------

CommandResult maximize(const RunConfig& c) {
  CommandResult r;
  const double ell = number(c, "ell");
  qdlab::MaximizeConfig mc;
  mc.objective = qdlab::objective_from_string(c.params["objective"].get<std::string>());
  mc.delta = number(c, "delta");
  mc.space = space_of(c);
  mc.eps = number(c, "eps");
  mc.restarts = integer(c, "restarts");
  mc.screen = integer(c, "screen");
  mc.max_iters = integer(c, "max_iters");
  mc.seed = c.seed;
  const qdlab::MaximizeResult m = qdlab::maximize_ratio(ell, mc);
  const double l2 = qdlab::l2_surrogate(ell, mc.objective, mc.delta, mc.space);
  std::ostringstream csv;
  csv << "objective,ell,delta,ratio,smoothed,best_screened,converged,iterations,orthogonality,l2_surrogate\n";
  csv << qdlab::to_string(mc.objective) << ',' << num17(ell) << ','
      << num17(mc.objective == qdlab::Objective::alpha ? 0.0 : mc.delta) << ',' << num17(m.ratio) << ','
      << num17(m.smoothed) << ',' << num17(m.best_screened) << ',' << (m.converged ? 1 : 0) << ',' << m.iterations
      << ',' << num17(m.orthogonality) << ',' << num17(l2) << '\n';
  json coeffs = json::array();
  for (Eigen::Index i = 0; i < m.coefficients.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.coefficients.cols(); ++k)
      row.push_back({m.coefficients(i, k).real(), m.coefficients(i, k).imag()});
    coeffs.push_back(row);
  }
  r.csv = csv.str();
  r.results = {{"objective", qdlab::to_string(mc.objective)},
               {"model", kModel},
               {"ell", ell},
               {"ratio", m.ratio},
               {"smoothed", m.smoothed},
               {"best_screened", m.best_screened},
               {"status", m.converged ? "converged" : "not converged"},
               {"iterations", m.iterations},
               {"orthogonality", m.orthogonality},
               {"l2_surrogate", l2},
               {"witness_coefficients", coeffs}};
  r.checks = {{"witness ratio minus best screened draw", m.ratio - m.best_screened, ">=", 0.0},
              {"witness |<Psi, dz2>| / norms", m.orthogonality, "<=", tol(c, "orthogonality")}};
  return r;
}

// --- output -----------------------------------------------------------------------------

std::string metadata_line(const RunConfig& c, const std::string& tag) {
  return std::string("qdlab ") + kVersion + " | command=" + c.command + " | tag=" + tag +
         " | config_hash=" + c.hash() + " | seed=" + std::to_string(c.seed);
}

json check_json(const Check& k) {
  return {{"name", k.name}, {"value", k.value}, {"op", k.op}, {"limit", k.limit}, {"pass", k.pass()}};
}

void write_outputs(const RunConfig& c, const CommandResult& r) {
  const std::string base = c.out + "/" + c.command;
  const std::string meta = metadata_line(c, r.tag);
  write_file(base + ".csv", "# " + meta + "\n" + r.csv);
  for (const auto& [suffix, body] : r.extra_csv) write_file(base + "-" + suffix + ".csv", "# " + meta + "\n" + body);
  json checks = json::array();
  for (const Check& k : r.checks) checks.push_back(check_json(k));
  const json doc = {{"tool", "qdlab"},     {"version", kVersion}, {"schema", kSchema},
                    {"command", c.command}, {"tag", r.tag},        {"config_hash", c.hash()},
                    {"seed", c.seed},       {"config", c.params},  {"results", r.results},
                    {"checks", checks},     {"pass", r.pass()}};
  write_file(base + ".json", doc.dump(2) + "\n");
  if (c.svg && r.svg) {
    std::string svg = *r.svg;
    const std::string marker = "<!--  -->";
    const auto at = svg.find(marker);
    if (at != std::string::npos) svg.replace(at, marker.size(), "<!-- " + meta + " -->");
    else {
      const auto end = svg.find('\n');
      svg.insert(end + 1, "<!-- " + meta + " -->\n");
    }
    write_file(base + ".svg", svg);
  }
}

void print_summary(const CommandResult& r, std::ostream& out) {
  for (const Check& k : r.checks)
    out << (k.pass() ? "  PASS  " : "  FAIL  ") << k.name << ": " << g6(k.value) << ' ' << k.op << ' '
        << g6(k.limit) << '\n';
  const auto passed = std::count_if(r.checks.begin(), r.checks.end(), [](const Check& k) { return k.pass(); });
  out << r.command << " [" << r.tag << "]: " << (r.pass() ? "PASS" : "FAIL") << " (" << passed << '/'
      << r.checks.size() << " checks)\n";
}

int verify_all(const RunConfig& c, std::ostream& out) {
  std::ostringstream csv;
  csv << "command,tag,config_hash,checks,passed,pass,error\n";
  json suites = json::array();
  bool all = true;
  for (const std::string& name : command_names()) {
    if (name == "verify-all") continue;
    Overrides o;
    o.seed = c.seed;
    o.out = c.out;
    o.svg = c.svg;
    o.threads = c.threads;
    const RunConfig sub = make_config(name, verify_preset(name), o);
    CommandResult r;
    std::string error;
    try {
      r = run_command(sub);
    } catch (const qdlab::NumericalError& e) {
      r.command = name;
      r.tag = command_tag(name);
      r.checks.push_back({"computation completed", 0.0, ">=", 1.0});
      error = e.what();
    }
    write_outputs(sub, r);
    print_summary(r, out);
    const auto passed = std::count_if(r.checks.begin(), r.checks.end(), [](const Check& k) { return k.pass(); });
    csv << name << ',' << r.tag << ',' << sub.hash() << ',' << r.checks.size() << ',' << passed << ','
        << (r.pass() ? 1 : 0) << ',' << error << '\n';
    suites.push_back({{"command", name}, {"tag", r.tag}, {"config_hash", sub.hash()}, {"pass", r.pass()}});
    all = all && r.pass();
  }
  const std::string meta = metadata_line(c, command_tag("verify-all"));
  write_file(c.out + "/verify-all.csv", "# " + meta + "\n" + csv.str());
  const json doc = {{"tool", "qdlab"},         {"version", kVersion},          {"schema", kSchema},
                    {"command", "verify-all"}, {"tag", command_tag("verify-all")}, {"config_hash", c.hash()},
                    {"seed", c.seed},          {"suites", suites},             {"pass", all}};
  write_file(c.out + "/verify-all.json", doc.dump(2) + "\n");
  out << "verify-all: " << (all ? "PASS" : "FAIL") << '\n';
  return all ? 0 : 1;
}

}  // namespace

bool Check::pass() const {
  if (std::isnan(value)) return false;
  return op == "<=" ? value <= limit : value >= limit;
}

bool CommandResult::pass() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Check& k) { return k.pass(); });
}

std::string command_tag(const std::string& command) {
  static const std::map<std::string, std::string> tags{{"geom", "collar-identities"},
                                                       {"cauchy-check", "cauchy-reconstruction"},
                                                       {"torus-sweep", "torus-nonuniform-poincare"},
                                                       {"sphere-check", "sphere-poincare"},
                                                       {"decay-fit", "collar-decay-estimate"},
                                                       {"collar-alpha", "mean-value-estimate"},
                                                       {"thin-mass", "thin-part-mass-estimate"},
                                                       {"maximize", "adversarial-constant-search"},
                                                       {"verify-all", "all-suites"}};
  return tags.at(command);
}

CommandResult run_command(const RunConfig& cfg) {
  CommandResult r;
  const std::string& cmd = cfg.command;
  if (cmd == "geom") r = geom(cfg);
  else if (cmd == "cauchy-check") r = cauchy_check(cfg);
  else if (cmd == "torus-sweep") r = torus(cfg);
  else if (cmd == "sphere-check") r = sphere(cfg);
  else if (cmd == "decay-fit") r = decay(cfg);
  else if (cmd == "collar-alpha") r = sweep(cfg, qdlab::Objective::alpha);
  else if (cmd == "thin-mass") r = sweep(cfg, qdlab::Objective::thin_mass);
  else if (cmd == "maximize") r = maximize(cfg);
  else throw qdlab::ConfigError("run_command: '" + cmd + "' is not a single suite");
  r.command = cmd;
  r.tag = command_tag(cmd);
  return r;
}

json verify_preset(const std::string& command) {
  json p = {{"schema", kSchema}};
  if (command == "cauchy-check") {
    p["fields"] = 3;
    p["points"] = 4;
    p["rectangle_ells"] = {0.05, 0.19, 0.5};
  } else if (command == "collar-alpha" || command == "thin-mass") {
    p["trials"] = 20;
    p["n_modes"] = 8;
    p["degree"] = 8;
    p["s_nodes"] = 128;
  } else if (command == "maximize") {
    p["n_modes"] = 6;
    p["degree"] = 8;
    p["s_nodes"] = 96;
    p["screen"] = 12;
    p["restarts"] = 1;
    p["max_iters"] = 200;
  }
  return p;
}

int execute(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    if (cfg.command == "verify-all") return verify_all(cfg, out);
    const CommandResult r = run_command(cfg);
    write_outputs(cfg, r);
    print_summary(r, out);
    return r.pass() ? 0 : 1;
  } catch (const qdlab::ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const qdlab::DomainError& e) {
    err << "domain error: " << e.what() << '\n';
    return 2;
  } catch (const qdlab::NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace qdcli
