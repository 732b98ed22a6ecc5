#pragma once

// Banded LU with partial pivoting (LAPACK gbtrf-style band storage).
// Used for the Newton linear solves of the flow stepper, where the analytic
// Jacobian has bandwidth 5 (4th-order interior stencils plus one-sided rows).

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace krf {

/// n x n matrix with kl sub- and ku superdiagonals. Storage has kl extra
/// superdiagonal rows for pivoting fill, laid out column by column:
/// entry (i, j) lives at band(kl + ku + i - j, j) for max(0,j-ku-kl') ...
template <typename Real>
class BandedMatrix {
public:
    BandedMatrix(std::size_t n, int kl, int ku)
        : n_(n), kl_(kl), ku_(ku), ldab_(2 * kl + ku + 1), a_(ldab_ * n, Real(0)) {}

    std::size_t size() const { return n_; }
    int kl() const { return kl_; }
    int ku() const { return ku_; }

    void zero() { std::fill(a_.begin(), a_.end(), Real(0)); }

    Real& operator()(std::size_t i, std::size_t j) {
        const long d = static_cast<long>(i) - static_cast<long>(j);
        if (d > kl_ || -d > ku_ + kl_) throw std::out_of_range("BandedMatrix: outside band");
        return a_[(kl_ + ku_ + d) + ldab_ * j];
    }
    Real get(std::size_t i, std::size_t j) const {
        const long d = static_cast<long>(i) - static_cast<long>(j);
        if (d > kl_ || -d > ku_ + kl_) return Real(0);
        return a_[(kl_ + ku_ + d) + ldab_ * j];
    }

    void add(std::size_t i, std::size_t j, Real v) { (*this)(i, j) += v; }

    /// y = A x
    std::vector<Real> multiply(std::span<const Real> x) const {
        std::vector<Real> y(n_, Real(0));
        for (std::size_t j = 0; j < n_; ++j) {
            const std::size_t ilo = j > static_cast<std::size_t>(ku_) ? j - ku_ : 0;
            const std::size_t ihi = std::min(n_ - 1, j + kl_);
            for (std::size_t i = ilo; i <= ihi; ++i) y[i] += get(i, j) * x[j];
        }
        return y;
    }

    /// In-place LU factorization with partial pivoting. Throws on singularity.
    void factor() {
        piv_.resize(n_);
        const int kv = kl_ + ku_;  // effective superdiagonals after fill
        for (std::size_t j = 0; j < n_; ++j) {
            // pivot search in column j over rows j .. min(j+kl, n-1)
            const std::size_t imax = std::min(n_ - 1, j + kl_);
            std::size_t p = j;
            Real best = std::abs(at(j, j));
            for (std::size_t i = j + 1; i <= imax; ++i) {
                const Real v = std::abs(at(i, j));
                if (v > best) { best = v; p = i; }
            }
            if (!(best > Real(0))) throw std::runtime_error("BandedMatrix::factor: singular matrix");
            piv_[j] = p;
            const std::size_t jhi = std::min(n_ - 1, j + kv);
            if (p != j)
                for (std::size_t c = j; c <= jhi; ++c) std::swap(at(j, c), at(p, c));
            const Real d = at(j, j);
            for (std::size_t i = j + 1; i <= imax; ++i) {
                const Real m = at(i, j) / d;
                at(i, j) = m;
                for (std::size_t c = j + 1; c <= jhi; ++c) at(i, c) -= m * at(j, c);
            }
        }
        factored_ = true;
    }

    /// Solve A x = b using the stored factorization.
    std::vector<Real> solve(std::span<const Real> b) const {
        if (!factored_) throw std::logic_error("BandedMatrix::solve: factor() first");
        std::vector<Real> x(b.begin(), b.end());
        const int kv = kl_ + ku_;
        for (std::size_t j = 0; j < n_; ++j) {
            if (piv_[j] != j) std::swap(x[j], x[piv_[j]]);
            const std::size_t imax = std::min(n_ - 1, j + kl_);
            for (std::size_t i = j + 1; i <= imax; ++i) x[i] -= at_c(i, j) * x[j];
        }
        for (std::size_t jj = n_; jj-- > 0;) {
            const std::size_t jlo = jj > static_cast<std::size_t>(kv) ? jj - kv : 0;
            x[jj] /= at_c(jj, jj);
            for (std::size_t i = jlo; i < jj; ++i) x[i] -= at_c(i, jj) * x[jj];
        }
        return x;
    }

private:
    // unchecked band access within the widened (pivot-fill) band
    Real& at(std::size_t i, std::size_t j) {
        return a_[(kl_ + ku_ + static_cast<long>(i) - static_cast<long>(j)) + ldab_ * j];
    }
    Real at_c(std::size_t i, std::size_t j) const {
        return a_[(kl_ + ku_ + static_cast<long>(i) - static_cast<long>(j)) + ldab_ * j];
    }

    std::size_t n_;
    int kl_, ku_;
    std::size_t ldab_;
    std::vector<Real> a_;
    std::vector<std::size_t> piv_;
    bool factored_ = false;
};

}  // namespace krf
