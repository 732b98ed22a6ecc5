#pragma once

// First-principles finite-difference oracle: builds g from second differences
// of the Kahler potential P, Ricci from -d dbar log det g with det g taken
// numerically from the closed-form metric matrix, and the Riemann tensor from
// the coordinate formula with finite differences of g. It is the arbiter for
// every closed-form expression, in particular for the two general-dimension
// formula versions.
//
// FD internals run in long double: the second-difference cancellation noise
// eps |f| / h^2 in double does not clear the 1e-5 agreement targets at the
// default relative step h = 1e-5.

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "krf/curvature.hpp"
#include "krf/hermitian.hpp"
#include "krf/metric_family.hpp"
#include "krf/quadrature.hpp"

namespace krf {

// ---------------------------------------------------------------------------
// Kahler potential

/// P(r) = integral of phi from 0 to r (additive constant fixed by P(0) = 0).
inline double potential_value(const MetricFamily& f, double r) {
    f.validate();
    return integrate<double>([&](double s) { return eval_family(f, s).phi; }, 0.0, r);
}

/// Same value from the higher-order rule (self-validation route).
inline double potential_value_check(const MetricFamily& f, double r) {
    f.validate();
    return integrate_check<double>([&](double s) { return eval_family(f, s).phi; }, 0.0, r);
}

// ---------------------------------------------------------------------------
// Complex-derivative stencils. Points are z in C^n; derivatives are taken in
// the 2n real coordinates (x_k, y_k), z_k = x_k + i y_k, with
//   d/dz_k    = (d/dx_k - i d/dy_k)/2
//   d/dzbar_k = (d/dx_k + i d/dy_k)/2

namespace fd {

using LD = long double;
using CLD = std::complex<long double>;

template <typename T>
using RealField = std::function<T(const std::vector<CLD>&)>;

inline std::vector<CLD> to_ld(const Point& z) {
    std::vector<CLD> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = CLD(z[i].real(), z[i].imag());
    return out;
}

inline std::vector<CLD> shifted(const std::vector<CLD>& z, int coord, LD dx, LD dy) {
    auto out = z;
    out[coord] += CLD(dx, dy);
    return out;
}

/// Mixed real second derivative d^2 f / (du dv) by central differences, where
/// u, v are real coordinates encoded as (index, is_imag).
template <typename T>
T second_diff(const RealField<T>& f, const std::vector<CLD>& z, int ci, bool ii, int cj, bool ij, LD h) {
    auto move = [&](const std::vector<CLD>& p, int c, bool imag, LD s) {
        return shifted(p, c, imag ? LD(0) : s, imag ? s : LD(0));
    };
    if (ci == cj && ii == ij) {
        const T fp = f(move(z, ci, ii, h));
        const T f0 = f(z);
        const T fm = f(move(z, ci, ii, -h));
        return (fp - LD(2) * f0 + fm) / (h * h);
    }
    const T fpp = f(move(move(z, ci, ii, h), cj, ij, h));
    const T fpm = f(move(move(z, ci, ii, h), cj, ij, -h));
    const T fmp = f(move(move(z, ci, ii, -h), cj, ij, h));
    const T fmm = f(move(move(z, ci, ii, -h), cj, ij, -h));
    return (fpp - fpm - fmp + fmm) / (LD(4) * h * h);
}

/// First complex derivatives d/dz_i and d/dzbar_j of a complex-valued field.
template <typename T>
T dz(const RealField<T>& f, const std::vector<CLD>& z, int i, LD h) {
    const T fx = (f(shifted(z, i, h, 0)) - f(shifted(z, i, -h, 0))) / (LD(2) * h);
    const T fy = (f(shifted(z, i, 0, h)) - f(shifted(z, i, 0, -h))) / (LD(2) * h);
    return (fx - CLD(0, 1) * fy) / LD(2);
}

template <typename T>
T dzbar(const RealField<T>& f, const std::vector<CLD>& z, int j, LD h) {
    const T fx = (f(shifted(z, j, h, 0)) - f(shifted(z, j, -h, 0))) / (LD(2) * h);
    const T fy = (f(shifted(z, j, 0, h)) - f(shifted(z, j, 0, -h))) / (LD(2) * h);
    return (fx + CLD(0, 1) * fy) / LD(2);
}

/// d^2 / dz_i dzbar_j of a real-valued field:
/// (d_xi d_xj + d_yi d_yj)/4 + i (d_xi d_yj - d_yi d_xj)/4
inline CLD complex_hessian_entry(const RealField<LD>& f, const std::vector<CLD>& z, int i, int j, LD h) {
    const LD xx = second_diff(f, z, i, false, j, false, h);
    const LD yy = second_diff(f, z, i, true, j, true, h);
    LD xy = 0, yx = 0;
    if (i != j) {  // for i == j the imaginary part vanishes identically
        xy = second_diff(f, z, i, false, j, true, h);
        yx = second_diff(f, z, i, true, j, false, h);
    }
    return CLD((xx + yy) / LD(4), (xy - yx) / LD(4));
}

/// Full complex Hessian, symmetrized into a HermitianForm.
inline HermitianForm complex_hessian(const RealField<LD>& f, const Point& z0, double h_abs) {
    const int n = static_cast<int>(z0.size());
    const auto z = to_ld(z0);
    HermitianForm out(n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            const CLD v = complex_hessian_entry(f, z, i, j, static_cast<LD>(h_abs));
            out.set(i, j, Complex(static_cast<double>(v.real()), static_cast<double>(v.imag())));
        }
    out.symmetrize();
    return out;
}

/// Closed-form metric matrix in long double at a stencil point.
inline Eigen::Matrix<CLD, Eigen::Dynamic, Eigen::Dynamic> metric_matrix_ld(const MetricFamily& fam,
                                                                           const std::vector<CLD>& z) {
    const int n = static_cast<int>(z.size());
    LD w = 0;
    for (const auto& zi : z) w += std::norm(zi);
    const LD r = std::log(w);
    const auto j = eval_family<LD>(fam, r);
    Eigen::Matrix<CLD, Eigen::Dynamic, Eigen::Dynamic> m(n, n);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
            CLD v = (j.phi_r - j.phi) / (w * w) * std::conj(z[i]) * z[k];
            if (i == k) v += j.phi / w;
            m(i, k) = v;
        }
    return m;
}

inline LD log_det_metric_ld(const MetricFamily& fam, const std::vector<CLD>& z) {
    const auto m = metric_matrix_ld(fam, z);
    const CLD det = Eigen::Matrix<CLD, Eigen::Dynamic, Eigen::Dynamic>(m).determinant();
    return std::log(det.real());
}

}  // namespace fd

inline void require_fd_step(double h) {
    if (!(h > 1e-7 && h < 1e-3)) throw std::invalid_argument("fd step h must lie in (1e-7, 1e-3) relative");
}

/// g from central second differences of P. The potential is integrated from
/// an anchor at the base point (P is defined up to an additive constant),
/// which removes the cancellation error of large P values.
inline HermitianForm fd_metric(const MetricFamily& f, const Point& z, double h = 1e-5) {
    f.validate();
    require_nonzero(z);
    require_fd_step(h);
    const double w0 = squared_norm(z);
    if (w0 < 1e-200) throw std::invalid_argument("fd_metric: step underflow near |z| = 0");
    const long double r0 = std::log(static_cast<long double>(w0));
    fd::RealField<fd::LD> pot = [&](const std::vector<fd::CLD>& p) -> fd::LD {
        fd::LD w = 0;
        for (const auto& zi : p) w += std::norm(zi);
        return integrate<long double>([&](long double s) { return eval_family<long double>(f, s).phi; }, r0,
                                      std::log(w), 1e-17L);
    };
    return fd::complex_hessian(pot, z, h * std::sqrt(w0));
}

/// Fully-FD metric: second differences of P evaluated from the global anchor
/// (slower, noisier; end-to-end validation mode).
inline HermitianForm fd_metric_global_anchor(const MetricFamily& f, const Point& z, double h = 1e-4) {
    f.validate();
    require_nonzero(z);
    require_fd_step(h);
    const double w0 = squared_norm(z);
    fd::RealField<fd::LD> pot = [&](const std::vector<fd::CLD>& p) -> fd::LD {
        fd::LD w = 0;
        for (const auto& zi : p) w += std::norm(zi);
        return integrate<long double>([&](long double s) { return eval_family<long double>(f, s).phi; }, 0.0L,
                                      std::log(w), 1e-16L);
    };
    return fd::complex_hessian(pot, z, h * std::sqrt(w0));
}

/// Ricci = -d dbar log det g, with det g evaluated numerically from the
/// closed-form metric matrix at the stencil points. Independent of any psi
/// formula, which is exactly what the general-dimension audit needs.
inline HermitianForm fd_ricci(const MetricFamily& f, const Point& z, double h = 1e-5) {
    f.validate();
    require_nonzero(z);
    require_fd_step(h);
    const double w0 = squared_norm(z);
    fd::RealField<fd::LD> negG = [&](const std::vector<fd::CLD>& p) -> fd::LD {
        return -fd::log_det_metric_ld(f, p);
    };
    return fd::complex_hessian(negG, z, h * std::sqrt(w0));
}

/// Riemann components (n = 2) from
/// R_{i jbar k lbar} = -d_i dbar_j g_{k lbar} + g^{p qbar} d_i g_{k qbar} dbar_j g_{p lbar}
/// with finite differences of the closed-form g.
inline RiemannComponents fd_riemann(const MetricFamily& f, const Point& z, double h = 1e-5) {
    f.validate();
    if (f.n != 2 || z.size() != 2) throw std::invalid_argument("fd_riemann: only complex dimension 2");
    require_nonzero(z);
    require_fd_step(h);
    using fd::CLD;
    using fd::LD;
    const double w0 = squared_norm(z);
    const LD hh = static_cast<LD>(h) * std::sqrt(static_cast<LD>(w0));
    const auto zl = fd::to_ld(z);

    auto entry = [&](int k, int l) {
        return fd::RealField<CLD>([&f, k, l](const std::vector<CLD>& p) -> CLD {
            return fd::metric_matrix_ld(f, p)(k, l);
        });
    };
    // inverse metric at the base point (numeric inverse of the closed form);
    // the upper-index tensor is g^{p qbar} = (G^{-1})(q, p) for Hermitian G
    const auto g0 = fd::metric_matrix_ld(f, zl);
    const Eigen::Matrix<CLD, Eigen::Dynamic, Eigen::Dynamic> ginv = g0.inverse();

    RiemannComponents out;
    std::array<std::array<std::array<CLD, 2>, 2>, 2> dg{}, dgb{};  // d_i g_{k q}, dbar_j g_{p l}
    for (int i = 0; i < 2; ++i)
        for (int k = 0; k < 2; ++k)
            for (int q = 0; q < 2; ++q) {
                dg[i][k][q] = fd::dz(entry(k, q), zl, i, hh);
                dgb[i][k][q] = fd::dzbar(entry(k, q), zl, i, hh);
            }
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                for (int l = 0; l < 2; ++l) {
                    // -d_i dbar_j g_{k l}
                    auto ekl = entry(k, l);
                    fd::RealField<CLD> dbarj = [&](const std::vector<CLD>& p) -> CLD {
                        return fd::dzbar(ekl, p, j, hh);
                    };
                    CLD val = -fd::dz(dbarj, zl, i, hh);
                    for (int p = 0; p < 2; ++p)
                        for (int q = 0; q < 2; ++q) val += ginv(q, p) * dg[i][k][q] * dgb[j][p][l];
                    out.at(i, j, k, l) = Complex(static_cast<double>(val.real()), static_cast<double>(val.imag()));
                }
    return out;
}

// ---------------------------------------------------------------------------
// Series fit for the smooth-extension criterion: phi = a0 + a1 w^k + a2 w^{2k} + O(w^{3k})

struct CalabiFit {
    double a0 = 0.0, a1 = 0.0, a2 = 0.0;
    double fit_residual = 0.0;  // max |phi - fit| over the window
    bool criterion = false;     // a0 > 0 and a1 > 0
};

/// Least-squares fit of phi against {1, w^k, w^{2k}, w^{3k}} on
/// w in [1e-6, 1e-3], 50 log-spaced samples.
inline CalabiFit series_fit_calabi(const MetricFamily& f, int k) {
    f.validate();
    if (k < 1) throw std::invalid_argument("series_fit_calabi: k must be a positive integer");
    constexpr int m = 50;
    const double w_lo = 1e-6, w_hi = 1e-3;
    Eigen::MatrixXd A(m, 4);
    Eigen::VectorXd b(m);
    // column scaling keeps the Vandermonde conditioning manageable
    const double s1 = std::pow(w_hi, k), s2 = s1 * s1, s3 = s2 * s1;
    for (int i = 0; i < m; ++i) {
        const double w = w_lo * std::pow(w_hi / w_lo, static_cast<double>(i) / (m - 1));
        const double x = std::pow(w, k);
        A(i, 0) = 1.0;
        A(i, 1) = x / s1;
        A(i, 2) = x * x / s2;
        A(i, 3) = x * x * x / s3;
        b(i) = eval_family(f, std::log(w)).phi;
    }
    Eigen::VectorXd sol = A.colPivHouseholderQr().solve(b);
    CalabiFit out;
    out.a0 = sol(0);
    out.a1 = sol(1) / s1;
    out.a2 = sol(2) / s2;
    const Eigen::VectorXd resid = A * sol - b;
    out.fit_residual = resid.cwiseAbs().maxCoeff();
    out.criterion = out.a0 > 0.0 && out.a1 > 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// Audit records

struct AuditFinding {
    std::string location;   // anchor of the audited formula
    std::string quantity;   // psi | phi_t | dpsir_dt0 | density_ratio | ...
    Variant variant = Variant::Sqrt;
    FormulaVersion version = FormulaVersion::DirectExtension;
    double printed_value = 0.0;  // candidate closed form at the worst probe
    double oracle_value = 0.0;
    double discrepancy = 0.0;  // max relative discrepancy over probes
    bool consistent = false;

    static constexpr double tolerance = 1e-4;
};

/// psi at (zeta, 0, ..., 0) read off a Ricci matrix: R_{22bar} * w.
inline double psi_from_ricci(const HermitianForm& rc, double w) { return rc(1, 1).real() * w; }

/// Audit of the general-dimension formulas: for every (variant, version)
/// pair compare the closed-form psi and phi_t against the fd_ricci oracle,
/// and the candidate (d psi_r/dt)|0 closed forms against a one-step time
/// difference of the determinant-derived flow. At n = 2 every combination
/// coincides and all findings come back consistent; n >= 3 is where the two
/// versions separate.
std::vector<AuditFinding> audit_general_dimension(int n, double a, double c);  // defined below (needs flow.hpp)

}  // namespace krf

#include "krf/flow.hpp"

namespace krf {

inline std::vector<AuditFinding> audit_general_dimension(int n, double a, double c) {
    if (n < 2) throw std::invalid_argument("audit_general_dimension: n must be >= 2");
    std::vector<AuditFinding> findings;
    const std::vector<double> probes{-2.0, -0.7, 0.3, 0.9, 1.7};
    const double dt = 1e-7;
    const GridSpec grid{-8.0, 8.0, 1601};

    for (Variant var : {Variant::Sqrt, Variant::NthRoot}) {
        MetricFamily fam{n, a, c, var};
        // oracle psi at the probe radii (independent of any psi formula)
        std::vector<double> psi_oracle(probes.size());
        for (std::size_t i = 0; i < probes.size(); ++i) {
            const double w = std::exp(probes[i]);
            Point z(static_cast<std::size_t>(n), Complex(0, 0));
            z[0] = Complex(std::sqrt(w), 0.0);
            psi_oracle[i] = psi_from_ricci(fd_ricci(fam, z), w);
        }
        // one-step rate of psi_r under the true (determinant-derived) flow
        const auto rate = one_step_psi_r_rate(fam, grid, FormulaVersion::DeterminantDerived, dt);
        const double h = grid.spacing();

        for (FormulaVersion ver : {FormulaVersion::DirectExtension, FormulaVersion::DeterminantDerived}) {
            const std::string tag = std::string(to_string(var)) + "+" + to_string(ver);
            {  // psi
                AuditFinding fnd;
                fnd.location = "general-n Ricci potential (" + tag + ")";
                fnd.quantity = "psi";
                fnd.variant = var;
                fnd.version = ver;
                for (std::size_t i = 0; i < probes.size(); ++i) {
                    const double cand = psi_from_jet(eval_family(fam, probes[i]), n, ver);
                    const double rel = std::abs(cand - psi_oracle[i]) / std::max(1e-30, std::abs(psi_oracle[i]));
                    if (rel >= fnd.discrepancy) {
                        fnd.discrepancy = rel;
                        fnd.printed_value = cand;
                        fnd.oracle_value = psi_oracle[i];
                    }
                }
                fnd.consistent = fnd.discrepancy <= AuditFinding::tolerance;
                findings.push_back(fnd);
            }
            {  // phi_t (must equal -psi_true for the Kahler-Ricci flow)
                AuditFinding fnd;
                fnd.location = "general-n flow equation (" + tag + ")";
                fnd.quantity = "phi_t";
                fnd.variant = var;
                fnd.version = ver;
                const double k = ver == FormulaVersion::DirectExtension ? 1.0 : static_cast<double>(n - 1);
                for (std::size_t i = 0; i < probes.size(); ++i) {
                    const auto j = eval_family(fam, probes[i]);
                    const double cand = j.phi_rr / j.phi_r + k * j.phi_r / j.phi - n;
                    const double want = -psi_oracle[i];
                    const double rel = std::abs(cand - want) / std::max(1e-30, std::abs(want));
                    if (rel >= fnd.discrepancy) {
                        fnd.discrepancy = rel;
                        fnd.printed_value = cand;
                        fnd.oracle_value = want;
                    }
                }
                fnd.consistent = fnd.discrepancy <= AuditFinding::tolerance;
                findings.push_back(fnd);
            }
            {  // (d psi_r / dt)|_{t=0}; probes gated to where the measured
               // rate is resolvable (the factor e^{ar} - ac vanishes at r*)
                AuditFinding fnd;
                fnd.location = "general-n initial d(psi_r)/dt (" + tag + ")";
                fnd.quantity = "dpsir_dt0";
                fnd.variant = var;
                fnd.version = ver;
                double scale = 0.0;
                for (double rp : probes)
                    scale = std::max(scale, std::abs(rate[static_cast<std::size_t>(std::llround((rp - grid.r_min) / h))]));
                for (double rp : probes) {
                    const auto idx = static_cast<std::size_t>(std::llround((rp - grid.r_min) / h));
                    const double meas = rate[idx];
                    if (std::abs(meas) < 1e-6 * scale) continue;
                    const double cand = initial_derivatives(fam, rp, ver).dpsir_dt;
                    const double rel = std::abs(cand - meas) / std::abs(meas);
                    if (rel >= fnd.discrepancy) {
                        fnd.discrepancy = rel;
                        fnd.printed_value = cand;
                        fnd.oracle_value = meas;
                    }
                }
                fnd.consistent = fnd.discrepancy <= AuditFinding::tolerance;
                findings.push_back(fnd);
            }
        }
    }
    return findings;
}

}  // namespace krf
