#pragma once

// Thin adaptive Gauss-Kronrod wrappers (Boost.Math) used by the potential,
// arclength and volume integrals.

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace krf {

/// Adaptive (G7,K15) integral of f over [a, b].
template <typename Real = double, typename F>
Real integrate(F&& f, Real a, Real b, Real tol = Real(1e-14)) {
    if (a == b) return Real(0);
    return boost::math::quadrature::gauss_kronrod<Real, 15>::integrate(std::forward<F>(f), a, b, 15, tol);
}

/// Same integral at a higher rule order; used for quadrature self-validation.
template <typename Real = double, typename F>
Real integrate_check(F&& f, Real a, Real b, Real tol = Real(1e-14)) {
    if (a == b) return Real(0);
    return boost::math::quadrature::gauss_kronrod<Real, 31>::integrate(std::forward<F>(f), a, b, 12, tol);
}

}  // namespace krf
