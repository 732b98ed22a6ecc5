#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "krf/global_geometry.hpp"

using namespace krf;

namespace {
const MetricFamily kMain{2, 1.0, 1.0, Variant::Sqrt};
const MetricFamily kFlat{2, 2.0, 0.0, Variant::Sqrt};
}  // namespace

TEST_CASE("flat arclength is Euclidean") {
    // radial distance from |z| = 1 to |z| = 5
    CHECK(arclength(kFlat, 0.0, 2.0 * std::log(5.0)) == Catch::Approx(4.0).epsilon(1e-12));
    CHECK(arclength_from_left(kFlat, 0.0) == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("left end is at finite distance; honest Cauchy tail") {
    const double tail = std::abs(arclength(kMain, -40.0, 0.0) - arclength(kMain, -30.0, 0.0));
    // frozen 50-digit value 3.038411668793824596807e-7 (= the e^{ar/2} tail;
    // a bound of 1e-8 for this difference is not attainable)
    CHECK(tail == Catch::Approx(3.0384116687938246e-7).epsilon(1e-8));
    CHECK(tail <= 5e-7);
    CHECK(arclength_from_left(kMain, 0.0) > 0.0);
    CHECK(std::isfinite(arclength_from_left(kMain, 0.0)));
}

TEST_CASE("right end diverges with growth rate a/4; honest e-ratios") {
    const double s16 = arclength(kMain, 0.0, 16.0);
    const double s20 = arclength(kMain, 0.0, 20.0);
    const double s24 = arclength(kMain, 0.0, 24.0);
    // frozen 50-digit values
    CHECK(s16 == Catch::Approx(90.0785577255385390).epsilon(1e-10));
    CHECK(s20 == Catch::Approx(247.8559669633815009).epsilon(1e-10));
    CHECK(s20 / s16 == Catch::Approx(2.7515534575784049).epsilon(1e-10));   // 1.22% above e
    CHECK(s24 / s20 == Catch::Approx(2.7303737764266425).epsilon(1e-10));   // 0.44% above e
    CHECK(std::abs(s24 / s20 - std::numbers::e) / std::numbers::e <= 0.01);
    CHECK(std::abs(s20 / s16 - std::numbers::e) / std::numbers::e > 0.01);  // R = 16 is not asymptotic yet
    // deviation from e decays like e^{-R/4}
    CHECK(std::abs(s24 / s20 - std::numbers::e) < std::abs(s20 / s16 - std::numbers::e));
}

TEST_CASE("volume calibration and closed form") {
    // flat: Euclidean ball volume pi^2 w^2 / 2
    for (double r : {-1.0, 0.0, 2.0}) {
        const double w = std::exp(r);
        CHECK(volume_to(kFlat, r, 2, 1) == Catch::Approx(std::numbers::pi * std::numbers::pi * w * w / 2.0)
                                                .epsilon(1e-12));
    }
    // main family: V(r) = (pi^2/2)(phi^2 - 1), i.e. pi^2 e^r
    for (double r : {-2.0, 0.0, 1.0, 3.0}) {
        const double phi2 = eval_family(kMain, r).phi * eval_family(kMain, r).phi;
        CHECK(volume_to(kMain, r, 2, 1) ==
              Catch::Approx(std::numbers::pi * std::numbers::pi / 2.0 * (phi2 - 1.0)).epsilon(1e-10));
    }
    // V(r)/e^r -> pi^2
    CHECK(volume_to(kMain, 25.0, 2, 1) / std::exp(25.0) ==
          Catch::Approx(std::numbers::pi * std::numbers::pi).epsilon(1e-9));
    CHECK_THROWS_AS(volume_to(kMain, 0.0, 2, 0), std::invalid_argument);
}

TEST_CASE("volume derivative consistency") {
    // dV/dr from differencing the quadrature equals (pi^n/(n-1)!) phi^{n-1} phi_r / k
    const double h = 1e-4;
    for (double r : {-1.0, 0.5, 2.0}) {
        const double d = (volume_to(kMain, r - 2 * h, 2, 1) - 8.0 * volume_to(kMain, r - h, 2, 1) +
                          8.0 * volume_to(kMain, r + h, 2, 1) - volume_to(kMain, r + 2 * h, 2, 1)) /
                         (12.0 * h);
        const auto j = eval_family(kMain, r);
        CHECK(d == Catch::Approx(std::numbers::pi * std::numbers::pi * j.phi * j.phi_r).epsilon(1e-8));
    }
}

TEST_CASE("density ratio: flat calibration and the 1/4 cone") {
    const auto flat = density_ratio(kFlat, 1, 30.0);
    CHECK(flat.extrapolated == Catch::Approx(1.0).margin(1e-6));
    const auto main = density_ratio(kMain, 1, 30.0);
    CHECK(main.raw == Catch::Approx(0.250278813703).margin(1e-8));  // frozen quadrature value
    CHECK(main.extrapolated == Catch::Approx(0.25).margin(1e-3));
    const auto c4 = density_ratio(MetricFamily{2, 1.0, 4.0, Variant::Sqrt}, 1, 30.0);
    CHECK(c4.extrapolated == Catch::Approx(0.25).margin(0.01));  // c-independence of the cone
    CHECK_THROWS_AS(density_ratio(kMain, 1, 10.0), std::invalid_argument);
}

TEST_CASE("density ratio at n = 3 disagrees with the stated k^{1-n}/2^n") {
    // quadrature converges to (a/n)^n / k: 1/27 and 4/27 for k = a in {1, 2}
    const auto k1 = density_ratio(MetricFamily{3, 1.0, 1.0, Variant::NthRoot}, 1, 40.0);
    CHECK(k1.extrapolated == Catch::Approx(1.0 / 27.0).margin(2e-3));
    CHECK(k1.stated == Catch::Approx(0.125).epsilon(1e-12));
    CHECK_FALSE(k1.matches_stated);
    const auto k2 = density_ratio(MetricFamily{3, 2.0, 1.0, Variant::NthRoot}, 2, 40.0);
    CHECK(k2.extrapolated == Catch::Approx(4.0 / 27.0).margin(1e-4));
    CHECK(k2.stated == Catch::Approx(1.0 / 32.0).epsilon(1e-12));
    CHECK_FALSE(k2.matches_stated);
}

TEST_CASE("zero-section area") {
    CHECK(zero_section_area(kMain) == Catch::Approx(2.0 * std::numbers::pi).margin(1e-12));
    CHECK(zero_section_area(MetricFamily{2, 1.0, 4.0, Variant::Sqrt}) ==
          Catch::Approx(4.0 * std::numbers::pi).margin(1e-12));
    CHECK_THROWS_AS(zero_section_area(kFlat), std::invalid_argument);  // c = 0
    CHECK_THROWS_AS(zero_section_area(MetricFamily{2, 1.5, 1.0, Variant::Sqrt}), std::invalid_argument);
    CHECK_THROWS_AS(zero_section_area(MetricFamily{3, 1.0, 1.0, Variant::NthRoot}), std::invalid_argument);
}

TEST_CASE("asymptotic decay rates") {
    const auto p = build_profile(kMain, GridSpec{-12.0, 12.0, 2401});
    const auto rates = asymptotic_rates(p);
    CHECK(rates.applicable);
    CHECK(rates.left_slope == Catch::Approx(1.0).epsilon(0.02));
    CHECK(rates.right_slope == Catch::Approx(0.5).epsilon(0.02));
    CHECK(rates.left_within_2pct);
    CHECK(rates.right_within_2pct);
    // crossover sits at (1/a) log(ac/2)
    CHECK(rates.crossover == Catch::Approx(std::log(0.5)).margin(0.05));

    const auto flat = asymptotic_rates(build_profile(kFlat, GridSpec{-12.0, 12.0, 2401}));
    CHECK_FALSE(flat.applicable);  // single exponential regime at c = 0
    CHECK(flat.left_slope == Catch::Approx(1.0).epsilon(0.02));
    CHECK(flat.right_slope == Catch::Approx(1.0).epsilon(0.02));

    const auto c100 = asymptotic_rates(build_profile(MetricFamily{2, 1.0, 100.0, Variant::Sqrt},
                                                     GridSpec{-20.0, 20.0, 4001}));
    CHECK(c100.left_slope == Catch::Approx(1.0).epsilon(0.02));
    CHECK(c100.right_slope == Catch::Approx(0.5).epsilon(0.02));
    // crossover shifted right by about log(100)
    const auto c1 = asymptotic_rates(build_profile(kMain, GridSpec{-20.0, 20.0, 4001}));
    CHECK(c100.crossover - c1.crossover == Catch::Approx(std::log(100.0)).margin(0.05));
}

TEST_CASE("geometry report aggregates the global checks") {
    const auto rep = geometry_report(kMain, GridSpec{-12.0, 12.0, 2401});
    CHECK(rep.arclength_left > 0.0);
    CHECK(rep.right_divergent);
    CHECK(rep.right_growth_rate == Catch::Approx(0.25).epsilon(0.02));  // a/4
    CHECK(rep.zero_section_area == Catch::Approx(2.0 * std::numbers::pi).margin(1e-12));
    CHECK(rep.density_ratio_estimate == Catch::Approx(0.25).margin(1e-3));
    CHECK(rep.curvature_sup == Catch::Approx(2.0).margin(1e-4));
    CHECK(rep.volume_profile.size() == 5);
}
