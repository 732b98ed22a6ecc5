#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "krf/oracle.hpp"

using namespace krf;

namespace {
const MetricFamily kMain{2, 1.0, 1.0, Variant::Sqrt};
const MetricFamily kFlat{2, 2.0, 0.0, Variant::Sqrt};

double matrix_rel(const HermitianForm& a, const HermitianForm& b) {
    double scale = 0.0, diff = 0.0;
    for (int i = 0; i < a.dim(); ++i)
        for (int j = 0; j < a.dim(); ++j) {
            scale = std::max(scale, std::abs(b(i, j)));
            diff = std::max(diff, std::abs(a(i, j) - b(i, j)));
        }
    return diff / std::max(scale, 1e-300);
}
}  // namespace

TEST_CASE("potential of the flat family is w - 1") {
    for (double r : {-3.0, -0.5, 0.0, 1.0, 2.5})
        CHECK(potential_value(kFlat, r) == Catch::Approx(std::exp(r) - 1.0).margin(1e-12));
}

TEST_CASE("potential re-differentiates to phi") {
    // 5-point central stencil over the quadrature-backed P
    const double h = 1e-3;
    for (double r : {-4.0, -1.0, 0.0, 1.7, 4.0}) {
        const double d = (potential_value(kMain, r - 2 * h) - 8 * potential_value(kMain, r - h) +
                          8 * potential_value(kMain, r + h) - potential_value(kMain, r + 2 * h)) /
                         (12 * h);
        CHECK(d == Catch::Approx(eval_family(kMain, r).phi).epsilon(1e-10));
    }
}

TEST_CASE("two quadrature orders agree") {
    for (double r : {-5.0, 1.0, 6.0})
        CHECK(std::abs(potential_value(kMain, r) - potential_value_check(kMain, r)) <= 1e-12);
}

TEST_CASE("fd metric: flat family gives the identity") {
    for (const Point& z : {Point{Complex(1, 0), Complex(0, 0)}, Point{Complex(0.4, -0.7), Complex(1.2, 0.3)}}) {
        const auto g = fd_metric(kFlat, z);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) CHECK(std::abs(g(i, j) - (i == j ? 1.0 : 0.0)) <= 1e-8);
    }
}

TEST_CASE("fd metric matches the closed form at the default step") {
    const Point z1{Complex(1, 0), Complex(0, 0)};
    CHECK(matrix_rel(fd_metric(kMain, z1, 1e-5), metric_at(kMain, z1)) <= 1e-6);
    const Point z2{Complex(1, 0), Complex(1, 0)};
    CHECK(matrix_rel(fd_metric(kMain, z2, 1e-5), metric_at(kMain, z2)) <= 1e-6);
    const Point z3{Complex(0.8, 0.3), Complex(-0.5, 1.1)};
    CHECK(matrix_rel(fd_metric(kMain, z3), metric_at(kMain, z3)) <= 1e-6);
    CHECK(fd_metric(kMain, z3).hermiticity_defect() == 0.0);
}

TEST_CASE("fd metric preconditions") {
    const Point z{Complex(1, 0), Complex(0, 0)};
    CHECK_THROWS_AS(fd_metric(kMain, z, 1e-8), std::invalid_argument);
    CHECK_THROWS_AS(fd_metric(kMain, z, 1e-2), std::invalid_argument);
    CHECK_THROWS_AS(fd_metric(kMain, Point{Complex(0, 0), Complex(0, 0)}), std::invalid_argument);
}

TEST_CASE("fd metric converges at second order") {
    const Point z{Complex(0.9, 0.2), Complex(-0.3, 0.8)};
    const double e1 = matrix_rel(fd_metric(kMain, z, 8e-4), metric_at(kMain, z));
    const double e2 = matrix_rel(fd_metric(kMain, z, 4e-4), metric_at(kMain, z));
    REQUIRE(e1 > 1e-10);
    CHECK(e1 / e2 >= 3.0);
}

TEST_CASE("global-anchor fd metric validates the anchored route") {
    const Point z{Complex(1, 0), Complex(1, 0)};
    CHECK(matrix_rel(fd_metric_global_anchor(kMain, z, 1e-4), metric_at(kMain, z)) <= 1e-5);
}

TEST_CASE("fd ricci matches diag(psi_r, psi)/w") {
    const Point z{Complex(1, 0), Complex(0, 0)};
    const auto rc = fd_ricci(kMain, z);
    CHECK(std::abs(rc(0, 0)) <= 1e-6);
    CHECK(rc(1, 1).real() == Catch::Approx(1.0).margin(1e-6));
    const auto rcf = fd_ricci(kFlat, Point{Complex(0.6, 0.1), Complex(-0.2, 0.9)});
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) CHECK(std::abs(rcf(i, j)) <= 1e-8);
}

TEST_CASE("fd ricci adjudicates the general-dimension Ricci potential") {
    // nth-root family at n = 3: the determinant-derived psi is 2, and the
    // oracle confirms diag(psi_r, psi, psi) = diag(0, 2, 2) at (1, 0, 0)
    MetricFamily f3{3, 1.0, 1.0, Variant::NthRoot};
    const Point z{Complex(1, 0), Complex(0, 0), Complex(0, 0)};
    const auto rc = fd_ricci(f3, z);
    CHECK(std::abs(rc(0, 0)) <= 1e-5);
    CHECK(rc(1, 1).real() == Catch::Approx(2.0).margin(1e-5));
    CHECK(rc(2, 2).real() == Catch::Approx(2.0).margin(1e-5));
    // and therefore the direct-extension psi (= 3 - phi_r/phi - phi_rr/phi_r)
    // is wrong for this family away from n = 2
    const double psi_direct = psi_from_jet(eval_family(f3, 0.0), 3, FormulaVersion::DirectExtension);
    CHECK(std::abs(psi_direct - rc(1, 1).real()) > 0.1);
}

TEST_CASE("fd riemann matches the closed form, including complex points") {
    const Point pts[] = {Point{Complex(1, 0), Complex(0, 0)}, Point{Complex(1, 0), Complex(1, 0)},
                         Point{Complex(0.8, 0.3), Complex(-0.5, 1.1)}};
    for (const auto& z : pts) {
        const auto r_fd = fd_riemann(kMain, z);
        const auto r_cf = riemann_at(kMain, z, 2);
        double scale = 0.0, diff = 0.0;
        for (int i = 0; i < 16; ++i) {
            scale = std::max(scale, std::abs(r_cf.c[i]));
            diff = std::max(diff, std::abs(r_fd.c[i] - r_cf.c[i]));
        }
        CHECK(diff / scale <= 1e-5);
    }
    const auto rf = fd_riemann(kFlat, Point{Complex(0.5, 0.5), Complex(-0.7, 0.2)});
    for (const auto& v : rf.c) CHECK(std::abs(v) <= 1e-7);
}

TEST_CASE("fd riemann reproduces the frame value ac/phi^3") {
    const Point zeta{Complex(1, 0), Complex(0, 0)};
    const auto R = fd_riemann(kMain, zeta);
    const auto j = eval_family(kMain, 0.0);
    const double frame = (R.at(0, 0, 0, 0)).real() / (j.phi_r * j.phi_r);
    CHECK(frame == Catch::Approx(kMain.a * kMain.c / std::pow(j.phi, 3.0)).epsilon(1e-5));
}

TEST_CASE("series fit recovers the asymptotic expansion") {
    {
        const auto fit = series_fit_calabi(kMain, 1);
        CHECK(fit.a0 == Catch::Approx(1.0).epsilon(1e-4));
        CHECK(fit.a1 == Catch::Approx(1.0).epsilon(1e-4));
        CHECK(fit.a2 == Catch::Approx(-0.5).epsilon(1e-4));
        CHECK(fit.criterion);
        CHECK(fit.fit_residual <= 1e-10 * fit.a0);
    }
    {
        const auto fit = series_fit_calabi(MetricFamily{2, 1.0, 4.0, Variant::Sqrt}, 1);
        CHECK(fit.a0 == Catch::Approx(2.0).epsilon(1e-4));
        CHECK(fit.a1 == Catch::Approx(0.5).epsilon(1e-4));
        CHECK(fit.a2 == Catch::Approx(-0.0625).epsilon(1e-4));
    }
    {
        // nth-root family, n = 3, a = 1, c = 1: coefficients (1, 1, -1)
        const auto fit = series_fit_calabi(MetricFamily{3, 1.0, 1.0, Variant::NthRoot}, 1);
        CHECK(fit.a0 == Catch::Approx(1.0).epsilon(1e-4));
        CHECK(fit.a1 == Catch::Approx(1.0).epsilon(1e-4));
        CHECK(fit.a2 == Catch::Approx(-1.0).epsilon(1e-4));
    }
    {
        // wrong k: the w^1 term is not representable, the residual flags it
        const auto fit = series_fit_calabi(kMain, 2);
        CHECK(fit.fit_residual > 1e-6 * fit.a0);
    }
    CHECK_THROWS_AS(series_fit_calabi(kMain, 0), std::invalid_argument);
    CHECK_THROWS_AS(series_fit_calabi(kMain, -3), std::invalid_argument);
}

TEST_CASE("general-dimension audit separates the formula versions at n = 3") {
    const auto findings = audit_general_dimension(3, 1.0, 1.0);
    REQUIRE(findings.size() == 12);
    auto find = [&](Variant var, FormulaVersion ver, const std::string& q) -> const AuditFinding& {
        for (const auto& f : findings)
            if (f.variant == var && f.version == ver && f.quantity == q) return f;
        FAIL("finding not present");
        return findings.front();
    };
    // the determinant-derived route on the nth-root family is fully consistent
    CHECK(find(Variant::NthRoot, FormulaVersion::DeterminantDerived, "psi").consistent);
    CHECK(find(Variant::NthRoot, FormulaVersion::DeterminantDerived, "phi_t").consistent);
    CHECK(find(Variant::NthRoot, FormulaVersion::DeterminantDerived, "dpsir_dt0").consistent);
    // the direct extension fails on both families at n = 3
    CHECK_FALSE(find(Variant::Sqrt, FormulaVersion::DirectExtension, "psi").consistent);
    CHECK_FALSE(find(Variant::NthRoot, FormulaVersion::DirectExtension, "psi").consistent);
    CHECK_FALSE(find(Variant::NthRoot, FormulaVersion::DirectExtension, "phi_t").consistent);
    CHECK_FALSE(find(Variant::NthRoot, FormulaVersion::DirectExtension, "dpsir_dt0").consistent);
    // the determinant-derived psi is G_r of the true metric on any profile,
    // so it is consistent even on the sqrt family
    CHECK(find(Variant::Sqrt, FormulaVersion::DeterminantDerived, "psi").consistent);
    CHECK(find(Variant::Sqrt, FormulaVersion::DeterminantDerived, "phi_t").consistent);
    // but the constant-psi initial-rate formula is not valid there
    CHECK_FALSE(find(Variant::Sqrt, FormulaVersion::DeterminantDerived, "dpsir_dt0").consistent);
    // psi on the nth-root family: consistent value is n - a = 2
    const auto& good = find(Variant::NthRoot, FormulaVersion::DeterminantDerived, "psi");
    CHECK(good.printed_value == Catch::Approx(2.0).epsilon(1e-8));
    CHECK(good.discrepancy <= 1e-8);
}

TEST_CASE("everything coincides in complex dimension 2") {
    for (const auto& f : audit_general_dimension(2, 1.0, 1.0)) {
        INFO(f.location << " " << f.quantity);
        CHECK(f.consistent);
    }
}
