#pragma once

// U(n)-invariant metric families on C^n \ {0}. A family is the closed-form
// radial potential derivative phi(r), r = log|z|^2, in one of two shapes:
//
//   Sqrt:     phi = sqrt((2/a) e^{ar} + c)        (satisfies phi phi_r = e^{ar})
//   NthRoot:  phi = ((n/a) e^{ar} + c)^{1/n}      (satisfies phi^{n-1} phi_r = e^{ar})
//
// The two coincide at n = 2. The Sqrt shape is the one whose curvature is
// fully worked out in complex dimension 2; at n > 2 it is kept for audit runs
// only. Derivatives up to third order come from differentiating the defining
// identity, never from finite differences.

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

namespace krf {

enum class Variant { Sqrt, NthRoot };

inline const char* to_string(Variant v) { return v == Variant::Sqrt ? "sqrt" : "nthroot"; }

inline Variant variant_from_string(const std::string& s) {
    if (s == "sqrt") return Variant::Sqrt;
    if (s == "nthroot") return Variant::NthRoot;
    throw std::invalid_argument("unknown variant '" + s + "' (expected sqrt|nthroot)");
}

struct MetricFamily {
    int n = 2;          // complex dimension, >= 2
    double a = 1.0;     // exponent parameter, > 0; integer a in [1, n-1] for bundle extension
    double c = 1.0;     // cone parameter, >= 0 (c = 0 only for degenerate test cases)
    Variant variant = Variant::Sqrt;

    void validate() const {
        if (n < 2) throw std::invalid_argument("MetricFamily: n must be >= 2");
        if (!(a > 0.0)) throw std::invalid_argument("MetricFamily: a must be > 0");
        if (!(c >= 0.0)) throw std::invalid_argument("MetricFamily: c must be >= 0");
    }

    /// Positive Ricci range 0 < a < n; required for the sign-change theorems.
    bool theorem_range() const { return a > 0.0 && a < static_cast<double>(n); }

    /// c = 0 with a = n collapses to the flat metric phi = e^r.
    bool is_flat() const { return c == 0.0 && a == static_cast<double>(n); }

    bool integer_a() const { return a == std::floor(a) && a >= 1.0; }

    std::string describe() const {
        std::ostringstream os;
        os << "n=" << n << " a=" << a << " c=" << c << " variant=" << to_string(variant);
        return os.str();
    }
};

/// phi and its first three r-derivatives at one point.
template <typename Real>
struct Jet {
    Real phi, phi_r, phi_rr, phi_rrr;
};

/// Closed-form evaluation of the family jet. Throws std::domain_error when
/// e^{ar} overflows (non-finite result), reporting the offending r.
template <typename Real = double>
Jet<Real> eval_family(const MetricFamily& f, Real r) {
    f.validate();
    const Real a = static_cast<Real>(f.a);
    const Real c = static_cast<Real>(f.c);
    const Real e = std::exp(a * r);
    Jet<Real> j;
    if (f.variant == Variant::Sqrt) {
        j.phi = std::sqrt(Real(2) / a * e + c);
        // phi phi_r = e^{ar}; differentiate twice more:
        //   phi_r^2 + phi phi_rr = a e^{ar}
        //   3 phi_r phi_rr + phi phi_rrr = a^2 e^{ar}
        j.phi_r = e / j.phi;
        j.phi_rr = (a * e - j.phi_r * j.phi_r) / j.phi;
        j.phi_rrr = (a * a * e - Real(3) * j.phi_r * j.phi_rr) / j.phi;
    } else {
        const Real n = static_cast<Real>(f.n);
        j.phi = std::pow(n / a * e + c, Real(1) / n);
        // phi^{n-1} phi_r = e^{ar}; differentiating:
        //   (n-1) phi^{n-2} phi_r^2 + phi^{n-1} phi_rr = a e^{ar}
        //   (n-1)(n-2) phi^{n-3} phi_r^3 + 3(n-1) phi^{n-2} phi_r phi_rr + phi^{n-1} phi_rrr = a^2 e^{ar}
        const Real p1mn = std::pow(j.phi, Real(1) - n);
        j.phi_r = e * p1mn;
        j.phi_rr = a * e * p1mn - (n - 1) * j.phi_r * j.phi_r / j.phi;
        j.phi_rrr = a * a * e * p1mn - (n - 1) * (n - 2) * j.phi_r * j.phi_r * j.phi_r / (j.phi * j.phi)
                    - Real(3) * (n - 1) * j.phi_r * j.phi_rr / j.phi;
    }
    if (!std::isfinite(j.phi) || !std::isfinite(j.phi_r) || !std::isfinite(j.phi_rr) || !std::isfinite(j.phi_rrr)) {
        std::ostringstream os;
        os << "eval_family: domain overflow (non-finite result) at r=" << static_cast<double>(r);
        throw std::domain_error(os.str());
    }
    return j;
}

}  // namespace krf
