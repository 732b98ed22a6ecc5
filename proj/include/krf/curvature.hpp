#pragma once

// Closed-form geometry of the U(n)-invariant metrics: metric and inverse,
// Ricci potential psi and Ricci tensor, eigenvalue fields, Christoffel
// symbols and the full Riemann tensor (complex dimension 2), and the
// bisectional curvatures in the canonical unit frame at (zeta, 0, ..., 0).
//
// Two conventions for the Ricci potential of a general-dimension profile are
// kept side by side and every consumer states which one it uses:
//
//   DirectExtension:     psi = n -       phi_r/phi - phi_rr/phi_r
//   DeterminantDerived:  psi = n - (n-1) phi_r/phi - phi_rr/phi_r
//
// They coincide at n = 2. DeterminantDerived is G_r for
// G = -log det g = n r - (n-1) log phi - log phi_r and is the default; the
// finite-difference oracle adjudicates between them at n > 2.

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "krf/hermitian.hpp"
#include "krf/metric_family.hpp"
#include "krf/radial_profile.hpp"
#include "krf/stencils.hpp"

namespace krf {

enum class FormulaVersion { DirectExtension, DeterminantDerived };

inline const char* to_string(FormulaVersion v) {
    return v == FormulaVersion::DirectExtension ? "direct-extension" : "determinant-derived";
}

// ---------------------------------------------------------------------------
// psi from a jet

template <typename Real>
Real psi_from_jet(const Jet<Real>& j, int n, FormulaVersion v) {
    const Real k = v == FormulaVersion::DirectExtension ? Real(1) : Real(n - 1);
    return Real(n) - k * j.phi_r / j.phi - j.phi_rr / j.phi_r;
}

template <typename Real>
Real psi_r_from_jet(const Jet<Real>& j, int n, FormulaVersion v) {
    const Real k = v == FormulaVersion::DirectExtension ? Real(1) : Real(n - 1);
    const Real q1 = j.phi_r / j.phi;
    const Real q2 = j.phi_rr / j.phi_r;
    return -k * (j.phi_rr / j.phi - q1 * q1) - (j.phi_rrr / j.phi_r - q2 * q2);
}

/// psi and psi_r fields on a profile. Analytic profiles use the closed forms;
/// numeric profiles use the tabulated FD derivatives with psi_r = D1(psi).
/// Nodes where phi_r underflows are flagged invalid and excluded.
struct PsiField {
    std::vector<double> psi, psi_r;
    std::vector<char> valid;
    std::size_t excluded = 0;
};

inline PsiField psi_of(const RadialProfile& p, int n, FormulaVersion v) {
    const std::size_t m = p.size();
    PsiField f;
    f.psi.assign(m, 0.0);
    f.psi_r.assign(m, 0.0);
    f.valid.assign(m, 1);
    for (std::size_t i = 0; i < m; ++i) {
        if (!(std::abs(p.phi_r[i]) >= 1e-300)) {
            f.valid[i] = 0;
            ++f.excluded;
            continue;
        }
        Jet<double> j{p.phi[i], p.phi_r[i], p.phi_rr[i], p.phi_rrr[i]};
        f.psi[i] = psi_from_jet(j, n, v);
        if (p.provenance == Provenance::Analytic) f.psi_r[i] = psi_r_from_jet(j, n, v);
    }
    if (p.provenance == Provenance::Numeric) {
        if (f.excluded != 0) throw std::runtime_error("psi_of: degenerate phi_r nodes in numeric profile");
        f.psi_r = differentiate_profile(f.psi, p.r);
    }
    return f;
}

// ---------------------------------------------------------------------------
// Jet lookup at arbitrary r (closed form, or 5-point interpolation for
// numeric profiles; out-of-grid r rejected)

inline Jet<double> jet_at(const RadialProfile& p, double r) {
    if (p.provenance == Provenance::Analytic) return eval_family(*p.family, r);
    if (r < p.r.front() || r > p.r.back()) throw std::out_of_range("jet_at: r outside numeric grid");
    const std::size_t n = p.size();
    std::size_t i0 = p.node_at(r);
    i0 = i0 < 2 ? 0 : std::min(i0 - 2, n - 5);
    auto lagrange = [&](const std::vector<double>& f) {
        double acc = 0.0;
        for (std::size_t k = i0; k < i0 + 5; ++k) {
            double w = 1.0;
            for (std::size_t l = i0; l < i0 + 5; ++l)
                if (l != k) w *= (r - p.r[l]) / (p.r[k] - p.r[l]);
            acc += w * f[k];
        }
        return acc;
    };
    return Jet<double>{lagrange(p.phi), lagrange(p.phi_r), lagrange(p.phi_rr), lagrange(p.phi_rrr)};
}

inline Jet<double> jet_at(const MetricFamily& f, double r) { return eval_family(f, r); }

// ---------------------------------------------------------------------------
// Point evaluations on C^n \ {0}

using Point = std::vector<Complex>;  // z in C^n, z != 0

inline double squared_norm(const Point& z) {
    double w = 0.0;
    for (const auto& zi : z) w += std::norm(zi);
    return w;
}

/// alpha * delta_ij + beta * conj(z_i) z_j  (the shared radial shape of g,
/// g^{-1} and Rc in this symmetry class)
inline HermitianForm radial_form(double alpha, double beta, const Point& z) {
    const int n = static_cast<int>(z.size());
    HermitianForm h(n);
    for (int i = 0; i < n; ++i) {
        h.set(i, i, alpha + beta * std::norm(z[i]));
        for (int j = i + 1; j < n; ++j) h.set(i, j, beta * std::conj(z[i]) * z[j]);
    }
    return h;
}

inline void require_nonzero(const Point& z) {
    if (z.empty() || squared_norm(z) == 0.0) throw std::invalid_argument("point z = 0 rejected");
}

/// g_ij = e^{-r} phi delta_ij + e^{-2r} (phi_r - phi) conj(z_i) z_j
template <typename Source>
HermitianForm metric_at(const Source& src, const Point& z) {
    require_nonzero(z);
    const double w = squared_norm(z);
    const double r = std::log(w);
    const auto j = jet_at(src, r);
    return radial_form(j.phi / w, (j.phi_r - j.phi) / (w * w), z);
}

/// Matrix inverse of metric_at: (e^r / phi) delta_ij + (1/phi_r - 1/phi) conj(z_i) z_j
template <typename Source>
HermitianForm inverse_metric_at(const Source& src, const Point& z) {
    require_nonzero(z);
    const double w = squared_norm(z);
    const double r = std::log(w);
    const auto j = jet_at(src, r);
    return radial_form(w / j.phi, 1.0 / j.phi_r - 1.0 / j.phi, z);
}

/// R_ij = e^{-r} psi delta_ij + e^{-2r} (psi_r - psi) conj(z_i) z_j
template <typename Source>
HermitianForm ricci_at(const Source& src, const Point& z, int n, FormulaVersion v) {
    require_nonzero(z);
    const double w = squared_norm(z);
    const double r = std::log(w);
    const auto j = jet_at(src, r);
    const double psi = psi_from_jet(j, n, v);
    const double psi_r = psi_r_from_jet(j, n, v);
    return radial_form(psi / w, (psi_r - psi) / (w * w), z);
}

/// Eigenvalues of the Ricci matrix: lambda1 = psi/w (multiplicity n-1) and
/// lambda2 = psi_r/w. Note the generalized (Rc, g) eigenvalues are psi/phi
/// and psi_r/phi_r instead; both are validated against Eigen in the tests,
/// and all of them share the sign of psi resp. psi_r.
struct RicciEigenvalues {
    double lambda1;  // multiplicity n-1
    double lambda2;
};

template <typename Source>
RicciEigenvalues ricci_eigenvalues(const Source& src, double r, int n, FormulaVersion v) {
    const auto j = jet_at(src, r);
    if (!(j.phi > 0.0) || !(j.phi_r > 0.0)) throw std::domain_error("ricci_eigenvalues: Kahler condition fails at r");
    const double w = std::exp(r);
    return {psi_from_jet(j, n, v) / w, psi_r_from_jet(j, n, v) / w};
}

// ---------------------------------------------------------------------------
// Christoffel symbols, complex dimension 2 only

struct Christoffels {
    Complex g111, g112, g122;  // Gamma^1_{11}, Gamma^1_{12}, Gamma^1_{22}
    Complex g211, g212, g222;  // Gamma^2_{11}, Gamma^2_{12}, Gamma^2_{22}
};

template <typename Source>
Christoffels christoffels_at(const Source& src, const Point& z, int n) {
    if (n != 2 || z.size() != 2) throw std::invalid_argument("christoffels_at: only complex dimension 2");
    require_nonzero(z);
    const double w = squared_norm(z);
    const auto j = jet_at(src, std::log(w));
    const double u = std::norm(z[0]), v = std::norm(z[1]);
    const double q2 = j.phi_rr / j.phi_r, q1 = j.phi_r / j.phi;
    const Complex z1b = std::conj(z[0]), z2b = std::conj(z[1]);
    const double w2 = w * w;
    Christoffels c;
    c.g111 = z1b / w2 * (u * q2 + 2.0 * v * q1 + u - 2.0 * w);
    c.g112 = z2b / w2 * (u * q2 + (v - u) * q1 - v);
    c.g122 = z[0] * z2b * z2b / w2 * (q2 - 2.0 * q1 + 1.0);
    c.g211 = z1b * z1b * z[1] / w2 * (q2 - 2.0 * q1 + 1.0);
    c.g212 = z1b / w2 * (v * q2 + (u - v) * q1 - u);
    c.g222 = z2b / w2 * (v * q2 + 2.0 * u * q1 + v - 2.0 * w);
    return c;
}

// ---------------------------------------------------------------------------
// Riemann tensor, complex dimension 2 only

/// All 16 components R_{i jbar k lbar}, i,j,k,l in {0,1}.
struct RiemannComponents {
    std::array<Complex, 16> c{};
    Complex& at(int i, int j, int k, int l) { return c[((i * 2 + j) * 2 + k) * 2 + l]; }
    Complex at(int i, int j, int k, int l) const { return c[((i * 2 + j) * 2 + k) * 2 + l]; }
};

template <typename Source>
RiemannComponents riemann_at(const Source& src, const Point& z, int n) {
    if (n != 2 || z.size() != 2) throw std::invalid_argument("riemann_at: only complex dimension 2");
    require_nonzero(z);
    const double w = squared_norm(z);
    const double r = std::log(w);
    const auto j = jet_at(src, r);
    // R_{i jbar k lbar} = e^{-4r} A zb_i z_j zb_k z_l
    //                   + e^{-3r} B (zb_i z_j d_kl + zb_i d_jk z_l + d_ij zb_k z_l + d_il z_j zb_k)
    //                   + e^{-2r} C (d_ij d_kl + d_il d_jk)
    const double A = -j.phi_rrr + 4.0 * j.phi_rr - 2.0 * j.phi_r + 2.0 * j.phi - 4.0 * j.phi_r * j.phi_r / j.phi +
                     j.phi_rr * j.phi_rr / j.phi_r;
    const double B = -j.phi_rr + j.phi_r - j.phi + j.phi_r * j.phi_r / j.phi;
    const double C = j.phi - j.phi_r;
    const double e2 = 1.0 / (w * w), e3 = e2 / w, e4 = e3 / w;
    RiemannComponents out;
    auto zb = [&](int i) { return std::conj(z[i]); };
    auto d = [](int i, int j) { return i == j ? 1.0 : 0.0; };
    for (int i = 0; i < 2; ++i)
        for (int jj = 0; jj < 2; ++jj)
            for (int k = 0; k < 2; ++k)
                for (int l = 0; l < 2; ++l) {
                    Complex val = e4 * A * zb(i) * z[jj] * zb(k) * z[l];
                    val += e3 * B *
                           (zb(i) * z[jj] * d(k, l) + zb(i) * d(jj, k) * z[l] + d(i, jj) * zb(k) * z[l] +
                            d(i, l) * z[jj] * zb(k));
                    val += e2 * C * (d(i, jj) * d(k, l) + d(i, l) * d(jj, k));
                    out.at(i, jj, k, l) = val;
                }
    return out;
}

// ---------------------------------------------------------------------------
// Bisectional curvatures in the unit frame X = (|zeta|/sqrt(phi_r)) d/dz_1,
// Y = (|zeta|/sqrt(phi)) d/dz_2 at (zeta, 0, ..., 0) with |zeta|^2 = e^r.
// The values depend only on r.

struct Bisectional {
    double bXX, bXY, bYY;
};

template <typename Real>
Bisectional bisectional_from_jet(const Jet<Real>& j) {
    Bisectional b;
    b.bXX = static_cast<double>((j.phi_rr * j.phi_rr / j.phi_r - j.phi_rrr) / (j.phi_r * j.phi_r));
    b.bXY = static_cast<double>((j.phi_r * j.phi_r / j.phi - j.phi_rr) / (j.phi * j.phi_r));
    b.bYY = static_cast<double>(2.0 * (j.phi - j.phi_r) / (j.phi * j.phi));
    return b;
}

template <typename Source>
Bisectional bisectional_at(const Source& src, double r) {
    const auto j = jet_at(src, r);
    if (!(j.phi > 0.0) || !(j.phi_r > 0.0)) throw std::domain_error("bisectional_at: Kahler condition fails at r");
    return bisectional_from_jet(j);
}

/// Family overload in long double: the bracket phi_rr^2/phi_r - phi_rrr
/// cancels by a factor ~ a c e^{-a r} at the left end, which costs ~6 digits
/// in double near r = -12 and would spoil the 1e-12 identity checks.
inline Bisectional bisectional_at(const MetricFamily& f, double r) {
    const auto j = eval_family<long double>(f, static_cast<long double>(r));
    if (!(j.phi > 0.0L) || !(j.phi_r > 0.0L)) throw std::domain_error("bisectional_at: Kahler condition fails at r");
    return bisectional_from_jet(j);
}

/// Bounded-curvature proxy: max over grid nodes of max(|bXX|, |bXY|, |bYY|).
inline double curvature_sup(const RadialProfile& p) {
    double sup = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        Jet<double> j{p.phi[i], p.phi_r[i], p.phi_rr[i], p.phi_rrr[i]};
        const auto b = bisectional_from_jet(j);
        sup = std::max({sup, std::abs(b.bXX), std::abs(b.bXY), std::abs(b.bYY)});
    }
    return sup;
}

/// Family overload (long-double evaluation at the nodes of g).
inline double curvature_sup(const MetricFamily& f, const GridSpec& g) {
    g.validate();
    double sup = 0.0;
    for (std::size_t i = 0; i < g.nodes; ++i) {
        const auto b = bisectional_at(f, g.r_min + g.spacing() * static_cast<double>(i));
        sup = std::max({sup, std::abs(b.bXX), std::abs(b.bXY), std::abs(b.bYY)});
    }
    return sup;
}

// ---------------------------------------------------------------------------
// Per-node summary at the canonical point (zeta, 0, ..., 0), |zeta|^2 = e^r

struct CurvaturePointReport {
    double r = 0.0, w = 0.0;
    double psi = 0.0, psi_r = 0.0;
    double lambda1 = 0.0, lambda2 = 0.0;
    double bXX = 0.0, bXY = 0.0, bYY = 0.0;
    bool has_christoffels = false;  // only for n = 2
    Christoffels christoffels{};
};

template <typename Source>
CurvaturePointReport curvature_point_report(const Source& src, double r, int n, FormulaVersion v) {
    CurvaturePointReport rep;
    rep.r = r;
    rep.w = std::exp(r);
    const auto j = jet_at(src, r);
    rep.psi = psi_from_jet(j, n, v);
    rep.psi_r = psi_r_from_jet(j, n, v);
    rep.lambda1 = rep.psi / rep.w;
    rep.lambda2 = rep.psi_r / rep.w;
    const auto b = bisectional_from_jet(j);
    rep.bXX = b.bXX;
    rep.bXY = b.bXY;
    rep.bYY = b.bYY;
    if (n == 2) {
        rep.has_christoffels = true;
        const Point zeta{Complex(std::sqrt(rep.w), 0.0), Complex(0.0, 0.0)};
        rep.christoffels = christoffels_at(src, zeta, 2);
    }
    return rep;
}

}  // namespace krf
