#pragma once

// Verification engine: the per-family check suite behind `verify`, `sweep`
// and the acceptance gate. Each check pins its tolerance in code; checks
// that do not apply to a configuration are reported as skipped with a
// reason, and a run passes iff every executed check passes.

#include <chrono>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "krf/curvature.hpp"
#include "krf/flow.hpp"
#include "krf/global_geometry.hpp"
#include "krf/metric_family.hpp"
#include "krf/oracle.hpp"
#include "krf/run_config.hpp"

namespace krf {

enum class CheckStatus { Pass, Fail, Skip };

struct CheckResult {
    std::string id;
    std::string name;
    CheckStatus status = CheckStatus::Skip;
    double measured = 0.0;
    double threshold = 0.0;
    std::string detail;
    double seconds = 0.0;
};

struct VerifyReport {
    MetricFamily family;
    GridSpec grid;
    std::vector<CheckResult> checks;
    std::vector<AuditFinding> findings;
    std::optional<SignChangeReport> sign_change;

    bool all_pass() const {
        for (const auto& c : checks)
            if (c.status == CheckStatus::Fail) return false;
        return true;
    }
};

namespace detail {

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

inline CheckResult make_check(const std::string& id, const std::string& name, bool pass, double measured,
                              double threshold, const std::string& detail, double secs) {
    return {id, name, pass ? CheckStatus::Pass : CheckStatus::Fail, measured, threshold, detail, secs};
}

inline CheckResult skip_check(const std::string& id, const std::string& name, const std::string& reason) {
    return {id, name, CheckStatus::Skip, 0.0, 0.0, reason, 0.0};
}

/// Deterministic uniform in [0,1) from a mt19937_64 stream (the distribution
/// templates are implementation-defined, this is not).
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double gaussian(std::mt19937_64& rng) {
    // Box-Muller; deterministic across platforms
    double u1 = uniform01(rng), u2 = uniform01(rng);
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Seeded sample points with |z| log-uniform in [0.1, 10].
inline std::vector<Point> seeded_points(int n, std::size_t count, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::vector<Point> pts;
    pts.reserve(count);
    while (pts.size() < count) {
        Point z(static_cast<std::size_t>(n));
        double norm2 = 0.0;
        for (auto& zi : z) {
            zi = Complex(gaussian(rng), gaussian(rng));
            norm2 += std::norm(zi);
        }
        if (norm2 < 1e-12) continue;
        const double radius = std::exp(std::log(0.1) + uniform01(rng) * (std::log(10.0) - std::log(0.1)));
        const double scale = radius / std::sqrt(norm2);
        for (auto& zi : z) zi *= scale;
        pts.push_back(std::move(z));
    }
    return pts;
}

inline double matrix_rel_diff(const HermitianForm& a, const HermitianForm& b) {
    double scale = 0.0, diff = 0.0;
    for (int i = 0; i < a.dim(); ++i)
        for (int j = 0; j < a.dim(); ++j) {
            scale = std::max(scale, std::abs(b(i, j)));
            diff = std::max(diff, std::abs(a(i, j) - b(i, j)));
        }
    return diff / std::max(scale, 1e-300);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Individual checks (tolerances pinned here)

/// max |psi - (n-a)| <= 1e-12 and max |psi_r| <= 1e-10 over the grid.
inline CheckResult check_psi_constancy(const MetricFamily& f, const GridSpec& g, FormulaVersion v) {
    detail::Stopwatch sw;
    const auto prof = build_profile(f, g);
    const auto field = psi_of(prof, f.n, v);
    const double want = static_cast<double>(f.n) - f.a;
    double dev = 0.0, devr = 0.0;
    for (std::size_t i = 0; i < prof.size(); ++i) {
        if (!field.valid[i]) continue;
        dev = std::max(dev, std::abs(field.psi[i] - want));
        devr = std::max(devr, std::abs(field.psi_r[i]));
    }
    const bool pass = dev <= 1e-12 && devr <= 1e-10;
    return detail::make_check("psi-constancy", "Ricci potential constancy psi = n - a", pass, std::max(dev, devr),
                              1e-12, "max|psi-(n-a)|=" + format_double(dev, 3) + " max|psi_r|=" + format_double(devr, 3),
                              sw.seconds());
}

/// Closed-form g, g^{-1}, Rc (and Riemann at n=2) vs the FD oracle at seeded
/// points, relative error <= 1e-5.
inline CheckResult check_oracle_equivalence(const MetricFamily& f, unsigned seed, std::size_t points = 20) {
    detail::Stopwatch sw;
    double worst = 0.0;
    std::string worst_what = "none";
    const auto pts = detail::seeded_points(f.n, points, seed);
    for (const auto& z : pts) {
        const auto g_cf = metric_at(f, z);
        const double dg = detail::matrix_rel_diff(fd_metric(f, z), g_cf);
        if (dg > worst) { worst = dg; worst_what = "metric"; }
        HermitianForm gi_fd;
        gi_fd.m = fd_metric(f, z).m.inverse();
        const double dgi = detail::matrix_rel_diff(gi_fd, inverse_metric_at(f, z));
        if (dgi > worst) { worst = dgi; worst_what = "inverse"; }
        const double drc = detail::matrix_rel_diff(fd_ricci(f, z), ricci_at(f, z, f.n, FormulaVersion::DeterminantDerived));
        if (drc > worst) { worst = drc; worst_what = "ricci"; }
        if (f.n == 2) {
            const auto r_fd = fd_riemann(f, z);
            const auto r_cf = riemann_at(f, z, 2);
            double scale = 0.0, diff = 0.0;
            for (int i = 0; i < 16; ++i) {
                scale = std::max(scale, std::abs(r_cf.c[i]));
                diff = std::max(diff, std::abs(r_fd.c[i] - r_cf.c[i]));
            }
            const double dr = diff / std::max(scale, 1e-300);
            if (dr > worst) { worst = dr; worst_what = "riemann"; }
        }
    }
    return detail::make_check("oracle-equivalence", "closed forms vs finite-difference oracle", worst <= 1e-5, worst,
                              1e-5, "worst quantity: " + worst_what + " over " + std::to_string(pts.size()) + " points",
                              sw.seconds());
}

/// Bisectional identities on the grid: bXX + bXY = 0 and bXX = a c / phi^3 to
/// 1e-12; frame identities bXX + bXY = psi_r/phi_r and bYY + bXY = psi/phi to 1e-10.
inline CheckResult check_bisectional_identities(const MetricFamily& f, const GridSpec& g, FormulaVersion v) {
    detail::Stopwatch sw;
    if (f.n != 2) return detail::skip_check("bisectional-identities", "bisectional identities", "requires n = 2");
    double d_sum = 0.0, d_family = 0.0, d_frame = 0.0;
    for (std::size_t i = 0; i < g.nodes; ++i) {
        const long double r = static_cast<long double>(g.r_min) + static_cast<long double>(g.spacing()) * i;
        const auto j = eval_family<long double>(f, r);
        const auto b = bisectional_from_jet(j);
        d_sum = std::max(d_sum, std::abs(b.bXX + b.bXY));
        const double family_val =
            static_cast<double>(static_cast<long double>(f.a) * static_cast<long double>(f.c) / (j.phi * j.phi * j.phi));
        d_family = std::max(d_family, std::abs(b.bXX - family_val));
        const double psi = static_cast<double>(psi_from_jet(j, 2, v));
        const double psi_r = static_cast<double>(psi_r_from_jet(j, 2, v));
        d_frame = std::max(d_frame, std::abs(b.bXX + b.bXY - psi_r / static_cast<double>(j.phi_r)));
        d_frame = std::max(d_frame, std::abs(b.bYY + b.bXY - psi / static_cast<double>(j.phi)));
    }
    const bool pass = d_sum <= 1e-12 && d_family <= 1e-12 && d_frame <= 1e-10;
    return detail::make_check("bisectional-identities", "bisectional curvature identities", pass,
                              std::max({d_sum, d_family, d_frame}), 1e-12,
                              "|bXX+bXY|=" + format_double(d_sum, 3) + " |bXX-ac/phi^3|=" + format_double(d_family, 3) +
                                  " frame=" + format_double(d_frame, 3),
                              sw.seconds());
}

/// One implicit step at dt = 1e-7: (psi_r(dt) - psi_r(0))/dt vs the closed
/// form, relative 1e-2 on r in [-6, 6] where |formula| >= 1e-6.
inline CheckResult check_initial_derivative(const MetricFamily& f, const GridSpec& g, FormulaVersion v) {
    detail::Stopwatch sw;
    const double dt = 1e-7;
    const auto rate = one_step_psi_r_rate(f, g, v, dt);
    const double h = g.spacing();
    double worst = 0.0;
    std::size_t tested = 0;
    for (std::size_t i = 0; i < g.nodes; ++i) {
        const double r = g.r_min + h * static_cast<double>(i);
        if (r < -6.0 - 1e-12 || r > 6.0 + 1e-12) continue;
        const double K = initial_derivatives(f, r, v).dpsir_dt;
        if (std::abs(K) < 1e-6) continue;
        ++tested;
        worst = std::max(worst, std::abs(rate[i] - K) / std::abs(K));
    }
    return detail::make_check("initial-derivative", "one-step d(psi_r)/dt vs closed form", worst <= 1e-2, worst, 1e-2,
                              std::to_string(tested) + " gated nodes, dt=1e-7", sw.seconds());
}

/// Evolve to t_final and check the lambda2 sign regions against
/// r* = (1/a) log(ac): negative for r <= r* - 0.05 (trusted window), positive
/// on [r* + 0.05, 5], boundary within 2 cells, and min lambda1 w >= 0.9 (n-a).
inline CheckResult check_sign_change(const MetricFamily& f, const GridSpec& g, FormulaVersion v, double t_final,
                                     const SolverControls& controls, VerifyReport* attach = nullptr) {
    detail::Stopwatch sw;
    auto state0 = initial_flow_state(f, g, v);
    std::vector<double> snaps{0.25 * t_final, 0.5 * t_final, 0.75 * t_final, t_final};
    const auto ev = evolve(state0, t_final, controls, snaps);
    const auto scan = sign_change_scan(state0, ev.state, v);
    if (attach) attach->sign_change = scan;
    const double rstar = scan.boundary_predicted;
    const auto l2 = lambda2_field(ev.state);
    const std::size_t lo = ev.state.window_lo(), hi = ev.state.window_hi();
    std::size_t neg_bad = 0, pos_bad = 0;
    for (std::size_t i = lo; i <= hi; ++i) {
        const double r = ev.state.grid[i];
        if (r <= rstar - 0.05 && !(l2[i] < -scan.eps_sign)) ++neg_bad;
        if (r >= rstar + 0.05 && r <= 5.0 && !(l2[i] > scan.eps_sign)) ++pos_bad;
    }
    double min_psi = std::numeric_limits<double>::infinity();
    for (const auto& s : ev.snapshots) min_psi = std::min(min_psi, s.min_psi_window);
    const double psi0 = static_cast<double>(f.n) - f.a;
    const bool lambda1_ok = min_psi >= 0.9 * psi0;
    const bool pass = scan.applicable && scan.match && neg_bad == 0 && pos_bad == 0 && lambda1_ok;
    const double bdev = std::abs(scan.boundary_detected - rstar);
    return detail::make_check(
        "sign-change", "mixed Ricci curvature appears exactly below r*", pass, bdev, 2.0 * g.spacing(),
        "boundary=" + format_double(scan.boundary_detected, 6) + " predicted=" + format_double(rstar, 6) +
            " bad-nodes neg=" + std::to_string(neg_bad) + " pos=" + std::to_string(pos_bad) +
            " min(lambda1 w)=" + format_double(min_psi, 6) + " steps=" + std::to_string(ev.steps_taken),
        sw.seconds());
}

/// Fitted series coefficients vs (sqrt(c), 1/sqrt(c), -1/(2 c^{3/2})) at n=2,
/// or the nth-root analogs, relative 1e-4.
inline CheckResult check_calabi_series(const MetricFamily& f) {
    detail::Stopwatch sw;
    if (!f.integer_a()) return detail::skip_check("calabi-series", "smooth-extension series fit", "non-integer a: extension criterion not applicable");
    if (f.c <= 0.0) return detail::skip_check("calabi-series", "smooth-extension series fit", "c = 0 has no zero section");
    const int k = static_cast<int>(std::lround(f.a));
    const auto fit = series_fit_calabi(f, k);
    double e0, e1, e2;
    if (f.variant == Variant::Sqrt) {
        e0 = std::sqrt(f.c);
        e1 = 1.0 / (f.a * std::sqrt(f.c));
        e2 = -1.0 / (2.0 * f.a * f.a * std::pow(f.c, 1.5));
    } else {
        const double n = static_cast<double>(f.n);
        e0 = std::pow(f.c, 1.0 / n);
        e1 = e0 / (f.a * f.c);
        e2 = e0 * (1.0 - n) / (2.0 * f.a * f.a * f.c * f.c);
    }
    const double rel = std::max({std::abs(fit.a0 - e0) / std::abs(e0), std::abs(fit.a1 - e1) / std::abs(e1),
                                 std::abs(fit.a2 - e2) / std::abs(e2)});
    const bool pass = rel <= 1e-4 && fit.criterion && fit.fit_residual <= 1e-10 * fit.a0;
    return detail::make_check("calabi-series", "smooth-extension series fit", pass, rel, 1e-4,
                              "a0=" + format_double(fit.a0, 8) + " a1=" + format_double(fit.a1, 8) +
                                  " a2=" + format_double(fit.a2, 8) + " resid=" + format_double(fit.fit_residual, 3),
                              sw.seconds());
}

/// Honest completeness checks: left tail |s(-40,0)-s(-30,0)| <= 1e-6 and
/// within 2% of the analytic tail estimate; right ratio s(0,24)/s(0,20)
/// within 1% of e^a.
inline CheckResult check_completeness(const MetricFamily& f) {
    detail::Stopwatch sw;
    const double a = f.a;
    const double cauchy = std::abs(arclength(f, -40.0 / a, 0.0) - arclength(f, -30.0 / a, 0.0));
    bool left_ok = cauchy <= 1e-6;
    std::string tail_note;
    if (f.c > 0.0) {
        // tail = (1/2) int_{-40/a}^{-30/a} sqrt(phi_r) ~ e^{a r/2} / c^{1/4}
        const double est = (std::exp(-15.0) - std::exp(-20.0)) / (a * std::pow(f.c, 0.25)) * 2.0 * 0.5;
        left_ok = left_ok && std::abs(cauchy - est) <= 0.02 * est;
        tail_note = " tail-est=" + format_double(est, 6);
    }
    const double s20 = arclength(f, 0.0, 20.0 / a), s24 = arclength(f, 0.0, 24.0 / a);
    const double ratio = s24 / s20;
    const double dev = std::abs(ratio - std::numbers::e) / std::numbers::e;
    const bool right_ok = dev <= 0.01;
    return detail::make_check("completeness", "complete at +inf, finite distance to -inf", left_ok && right_ok,
                              std::max(cauchy, dev), 1e-6,
                              "left-cauchy=" + format_double(cauchy, 6) + tail_note +
                                  " right-ratio=" + format_double(ratio, 8) + " dev=" + format_double(dev, 3),
                              sw.seconds());
}

/// Density ratio at r_probe = 30 with extrapolation: 0.25 +- 0.01 for
/// n = 2, k = 1 (flat families must give 1.0 +- 1e-6).
inline CheckResult check_density_ratio(const MetricFamily& f) {
    detail::Stopwatch sw;
    if (!f.integer_a()) return detail::skip_check("density-ratio", "asymptotic cone density ratio", "non-integer a");
    const int k = f.is_flat() ? 1 : static_cast<int>(std::lround(f.a));
    const auto dr = density_ratio(f, k, 30.0);
    bool pass;
    double want, tol;
    if (f.is_flat()) {
        want = 1.0;
        tol = 1e-6;
        pass = std::abs(dr.extrapolated - want) <= tol;
    } else if (f.n == 2 && k == 1) {
        want = 0.25;
        tol = 0.01;
        pass = std::abs(dr.extrapolated - want) <= tol;
    } else {
        // no independent pinned value; report side by side with the stated one
        return detail::make_check("density-ratio", "asymptotic cone density ratio", true, dr.extrapolated, 0.0,
                                  "computed=" + format_double(dr.extrapolated, 8) +
                                      " stated=" + format_double(dr.stated, 8) + " (reported, not asserted)",
                                  sw.seconds());
    }
    return detail::make_check("density-ratio", "asymptotic cone density ratio", pass,
                              std::abs(dr.extrapolated - want), tol,
                              "raw=" + format_double(dr.raw, 8) + " extrapolated=" + format_double(dr.extrapolated, 8),
                              sw.seconds());
}

/// 2 pi sqrt(c) exact to 1e-12.
inline CheckResult check_zero_section(const MetricFamily& f) {
    detail::Stopwatch sw;
    if (f.n != 2) return detail::skip_check("zero-section", "zero-section area", "requires n = 2");
    if (!f.integer_a()) return detail::skip_check("zero-section", "zero-section area", "non-integer a: no bundle extension");
    if (f.c == 0.0) return detail::skip_check("zero-section", "zero-section area", "c = 0 has no zero section");
    const double area = zero_section_area(f);
    const double want = 2.0 * std::numbers::pi * std::sqrt(f.c);
    const double err = std::abs(area - want);
    return detail::make_check("zero-section", "zero-section area", err <= 1e-12, err, 1e-12,
                              "area=" + format_double(area, 17), sw.seconds());
}

/// Flat fixed point: evolve to t = 1, sup-norm change on the trusted window
/// <= 1e-10; analytic curvature reports and evolved eigenvalue fields <= 1e-10.
inline CheckResult check_flat_fixed_point(const MetricFamily& f) {
    detail::Stopwatch sw;
    if (!f.is_flat()) return detail::skip_check("flat-fixed-point", "flat family is stationary", "family is not flat");
    const GridSpec g{-12.0, 12.0, 4801};  // h = 0.005 keeps truncation drift below the bound
    SolverControls ctl;
    ctl.dt_init = 1e-3;
    ctl.dt_max = 0.05;
    auto s0 = initial_flow_state(f, g, FormulaVersion::DeterminantDerived);
    const auto ev = evolve(s0, 1.0, ctl);
    double dphi = 0.0;
    for (std::size_t i = s0.window_lo(); i <= s0.window_hi(); ++i)
        dphi = std::max(dphi, std::abs(ev.state.phi[i] - s0.phi[i]));
    double curv = 0.0;
    const GridSpec report_grid{-12.0, 12.0, 2401};
    if (f.n == 2) curv = curvature_sup(f, report_grid);
    const auto prof = build_profile(f, report_grid);
    const auto field = psi_of(prof, f.n, FormulaVersion::DeterminantDerived);
    for (std::size_t i = 0; i < prof.size(); ++i)
        curv = std::max({curv, std::abs(field.psi[i]), std::abs(field.psi_r[i])});
    const auto l2 = lambda2_field(ev.state);
    const auto l1 = lambda1_field(ev.state);
    double lcurv = 0.0;
    for (std::size_t i = ev.state.window_lo(); i <= ev.state.window_hi(); ++i)
        lcurv = std::max({lcurv, std::abs(l2[i]), std::abs(l1[i])});
    const double worst = std::max({dphi, curv, lcurv});
    return detail::make_check("flat-fixed-point", "flat family is a fixed point", worst <= 1e-10, worst, 1e-10,
                              "sup|dphi|=" + format_double(dphi, 3) + " curvature=" + format_double(curv, 3) +
                                  " evolved-lambda=" + format_double(lcurv, 3) + " steps=" + std::to_string(ev.steps_taken),
                              sw.seconds());
}

// ---------------------------------------------------------------------------
// Orchestration

/// The check set appropriate to a configured family.
inline VerifyReport run_verify(const RunConfig& cfg) {
    cfg.validate();
    const MetricFamily& f = cfg.family;
    VerifyReport rep;
    rep.family = f;
    rep.grid = cfg.grid;

    if (f.is_flat()) {
        rep.checks.push_back(check_flat_fixed_point(f));
        rep.checks.push_back(check_density_ratio(f));
        return rep;
    }

    if (!f.theorem_range()) {
        rep.checks.push_back(detail::skip_check("theorem-range", "0 < a < n required",
                                                "family outside the positive-Ricci range; nothing to verify"));
        return rep;
    }

    rep.checks.push_back(check_psi_constancy(f, cfg.grid, cfg.version));
    rep.checks.push_back(check_initial_derivative(f, cfg.grid, cfg.version));
    rep.checks.push_back(check_sign_change(f, cfg.grid, cfg.version, cfg.t_final, cfg.controls, &rep));
    if (f.n == 2) {
        rep.checks.push_back(check_oracle_equivalence(f, cfg.seed));
        rep.checks.push_back(check_bisectional_identities(f, cfg.grid, cfg.version));
        rep.checks.push_back(check_calabi_series(f));
        rep.checks.push_back(check_completeness(f));
        rep.checks.push_back(check_density_ratio(f));
        rep.checks.push_back(check_zero_section(f));
    } else {
        rep.checks.push_back(check_oracle_equivalence(f, cfg.seed));
        rep.findings = audit_general_dimension(f.n, f.a, f.c);
        // the run's own formula route must be oracle-consistent
        double worst = 0.0;
        bool ok = true;
        for (const auto& fnd : rep.findings) {
            if (fnd.variant == f.variant && fnd.version == cfg.version) {
                worst = std::max(worst, fnd.discrepancy);
                ok = ok && fnd.consistent;
            }
        }
        rep.checks.push_back(detail::make_check("audit-own-route", "configured formula route is oracle-consistent", ok,
                                                worst, AuditFinding::tolerance,
                                                std::to_string(rep.findings.size()) + " findings attached", 0.0));
        // density ratio reported side by side for n >= 3
        if (f.integer_a()) {
            const auto dr = density_ratio(f, static_cast<int>(std::lround(f.a)), 40.0);
            AuditFinding fnd;
            fnd.location = "asymptotic cone density ratio";
            fnd.quantity = "density_ratio";
            fnd.variant = f.variant;
            fnd.version = cfg.version;
            fnd.printed_value = dr.stated;
            fnd.oracle_value = dr.extrapolated;
            fnd.discrepancy = dr.rel_diff;
            fnd.consistent = dr.matches_stated;
            rep.findings.push_back(fnd);
        }
    }
    return rep;
}

}  // namespace krf
