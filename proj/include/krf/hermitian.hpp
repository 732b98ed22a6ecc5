#pragma once

// Small dense Hermitian forms in the coordinate basis (dz_1, ..., dz_n),
// plus the eigensolves used as the independent route in tests.

#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace krf {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// n x n Hermitian matrix of complex entries, indexed (i, jbar).
/// Entries are stored with exact conjugate symmetry.
struct HermitianForm {
    CMatrix m;

    HermitianForm() = default;
    explicit HermitianForm(int dim) : m(CMatrix::Zero(dim, dim)) {}

    int dim() const { return static_cast<int>(m.rows()); }

    /// Set entry (i, jbar) and its mirror; diagonal imaginary parts dropped.
    void set(int i, int j, Complex v) {
        if (i == j) {
            m(i, j) = Complex(v.real(), 0.0);
        } else {
            m(i, j) = v;
            m(j, i) = std::conj(v);
        }
    }

    Complex operator()(int i, int j) const { return m(i, j); }

    /// max_ij |A_ij - conj(A_ji)| (0 by construction for set()-built forms)
    double hermiticity_defect() const {
        double d = 0.0;
        for (int i = 0; i < dim(); ++i)
            for (int j = 0; j < dim(); ++j) d = std::max(d, std::abs(m(i, j) - std::conj(m(j, i))));
        return d;
    }

    /// Replace by (A + A^H)/2.
    void symmetrize() { m = ((m + m.adjoint()) / 2.0).eval(); }

    std::vector<double> eigenvalues() const {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(m);
        if (es.info() != Eigen::Success) throw std::runtime_error("HermitianForm: eigensolve failed");
        std::vector<double> out(es.eigenvalues().data(), es.eigenvalues().data() + dim());
        return out;
    }

    bool positive_definite() const {
        for (double ev : eigenvalues())
            if (!(ev > 0.0)) return false;
        return true;
    }
};

/// Generalized eigenvalues of (A, B) with B Hermitian positive definite,
/// i.e. the spectrum of B^{-1} A. Ascending.
inline std::vector<double> generalized_eigenvalues(const HermitianForm& a, const HermitianForm& b) {
    Eigen::GeneralizedSelfAdjointEigenSolver<CMatrix> es(a.m, b.m);
    if (es.info() != Eigen::Success) throw std::runtime_error("generalized_eigenvalues: solve failed");
    return std::vector<double>(es.eigenvalues().data(), es.eigenvalues().data() + a.dim());
}

}  // namespace krf
