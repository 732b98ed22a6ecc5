#pragma once

// Finite-difference stencils on uniform grids: 4th-order central rows in the
// interior, 4th-order one-sided rows at the two nodes nearest each end.
// Weights come from Fornberg's recursion, generated in long double.

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace krf {

// Fornberg weights for the m-th derivative at x0 from nodes x[0..nn-1].
// Returns w such that f^(m)(x0) ~= sum_i w[i] f(x[i]).
template <typename Real>
std::vector<Real> fornberg_weights(Real x0, std::span<const Real> x, int m) {
    const int nn = static_cast<int>(x.size());
    if (nn < m + 1) throw std::invalid_argument("fornberg_weights: too few nodes");
    std::vector<Real> c(static_cast<size_t>(nn) * (m + 1), Real(0));
    auto C = [&](int i, int j) -> Real& { return c[static_cast<size_t>(i) * (m + 1) + j]; };
    Real c1 = 1;
    Real c4 = x[0] - x0;
    C(0, 0) = 1;
    for (int i = 1; i < nn; ++i) {
        const int mn = std::min(i, m);
        Real c2 = 1;
        Real c5 = c4;
        c4 = x[i] - x0;
        for (int j = 0; j < i; ++j) {
            const Real c3 = x[i] - x[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k)
                    C(i, k) = c1 * (k * C(i - 1, k - 1) - c5 * C(i - 1, k)) / c2;
                C(i, 0) = -c1 * c5 * C(i - 1, 0) / c2;
            }
            for (int k = mn; k >= 1; --k)
                C(j, k) = (c4 * C(j, k) - k * C(j, k - 1)) / c3;
            C(j, 0) = c4 * C(j, 0) / c3;
        }
        c1 = c2;
    }
    std::vector<Real> w(nn);
    for (int i = 0; i < nn; ++i) w[i] = C(i, m);
    return w;
}

/// One stencil row: derivative at node i uses values[i + first .. i + first + weights.size() - 1].
template <typename Real>
struct StencilRow {
    int first = 0;
    std::vector<Real> weights;
};

/// 4th-order differentiation rows for a uniform grid of n nodes with spacing h.
/// order = 1 or 2. Rows 0,1 and n-2,n-1 are one-sided; the rest share the
/// central row. Minimum grid size: 5 nodes for order 1, 6 for order 2.
template <typename Real>
class DerivativeOperator {
public:
    DerivativeOperator(int order, std::size_t n, Real h) : order_(order), n_(n) {
        if (order != 1 && order != 2) throw std::invalid_argument("DerivativeOperator: order must be 1 or 2");
        const int side = order == 1 ? 5 : 6;  // one-sided rows need one extra point for D2
        if (n_ < static_cast<size_t>(side)) throw std::invalid_argument("DerivativeOperator: grid too short");
        auto make = [&](int first, int pts) {
            std::vector<long double> xs(pts);
            for (int k = 0; k < pts; ++k) xs[k] = static_cast<long double>(first + k);
            auto wl = fornberg_weights<long double>(0.0L, xs, order);
            StencilRow<Real> row;
            row.first = first;
            row.weights.resize(pts);
            const long double scale = order == 1 ? 1.0L / static_cast<long double>(h)
                                                 : 1.0L / (static_cast<long double>(h) * static_cast<long double>(h));
            for (int k = 0; k < pts; ++k) row.weights[k] = static_cast<Real>(wl[k] * scale);
            return row;
        };
        rows_[0] = make(0, side);
        rows_[1] = make(-1, side);
        rows_[2] = make(-2, 5);  // symmetric central row, both orders
        rows_[3] = make(-(side - 2), side);
        rows_[4] = make(-(side - 1), side);
    }

    int order() const { return order_; }
    std::size_t size() const { return n_; }

    const StencilRow<Real>& row(std::size_t i) const {
        if (i == 0) return rows_[0];
        if (i == 1) return rows_[1];
        if (i == n_ - 2) return rows_[3];
        if (i == n_ - 1) return rows_[4];
        return rows_[2];
    }

    /// Apply to a full field.
    std::vector<Real> apply(std::span<const Real> v) const {
        if (v.size() != n_) throw std::invalid_argument("DerivativeOperator::apply: size mismatch");
        std::vector<Real> out(n_);
        for (std::size_t i = 0; i < n_; ++i) out[i] = at(v, i);
        return out;
    }

    /// Derivative at a single node.
    Real at(std::span<const Real> v, std::size_t i) const {
        const auto& rw = row(i);
        Real acc = 0;
        const std::size_t j0 = i + static_cast<std::size_t>(static_cast<long>(rw.first));
        for (std::size_t k = 0; k < rw.weights.size(); ++k) acc += rw.weights[k] * v[j0 + k];
        return acc;
    }

private:
    int order_;
    std::size_t n_;
    std::array<StencilRow<Real>, 5> rows_;
};

}  // namespace krf
