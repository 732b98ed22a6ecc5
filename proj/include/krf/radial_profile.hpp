#pragma once

// Radial profiles: phi and its r-derivatives tabulated on a uniform grid,
// either filled from a family's closed forms (Analytic) or from supplied
// values with 4th-order finite differences (Numeric).

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "krf/metric_family.hpp"
#include "krf/stencils.hpp"

namespace krf {

enum class Provenance { Analytic, Numeric };

struct GridSpec {
    double r_min = -12.0;
    double r_max = 12.0;
    std::size_t nodes = 2401;

    void validate() const {
        if (!(r_min < r_max)) throw std::invalid_argument("GridSpec: r_min must be < r_max");
        if (nodes < 5) throw std::invalid_argument("GridSpec: node_count below minimum (5)");
    }
    double spacing() const { return (r_max - r_min) / static_cast<double>(nodes - 1); }
};

struct RadialProfile {
    std::vector<double> r;
    std::vector<double> phi, phi_r, phi_rr, phi_rrr;
    Provenance provenance = Provenance::Analytic;
    std::optional<MetricFamily> family;  // set when provenance == Analytic

    std::size_t size() const { return r.size(); }
    double spacing() const { return r.size() > 1 ? (r.back() - r.front()) / static_cast<double>(r.size() - 1) : 0.0; }

    /// Index of the grid node nearest to x (grid must contain x).
    std::size_t node_at(double x) const {
        if (x < r.front() - 0.5 * spacing() || x > r.back() + 0.5 * spacing())
            throw std::out_of_range("RadialProfile::node_at: r outside grid");
        const auto i = static_cast<std::size_t>(std::llround((x - r.front()) / spacing()));
        return std::min(i, r.size() - 1);
    }
};

inline void require_uniform(std::span<const double> grid) {
    if (grid.size() < 5) throw std::invalid_argument("grid too short (need >= 5 nodes)");
    const double h = (grid.back() - grid.front()) / static_cast<double>(grid.size() - 1);
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (std::abs(grid[i] - grid[i - 1] - h) > 1e-9 * std::max(1.0, std::abs(h)))
            throw std::invalid_argument("non-uniform grid rejected");
    }
}

/// 4th-order derivative of tabulated values on a uniform grid.
inline std::vector<double> differentiate_profile(std::span<const double> values, std::span<const double> grid) {
    if (values.size() != grid.size()) throw std::invalid_argument("differentiate_profile: size mismatch");
    require_uniform(grid);
    const double h = (grid.back() - grid.front()) / static_cast<double>(grid.size() - 1);
    DerivativeOperator<double> d1(1, grid.size(), h);
    return d1.apply(values);
}

/// Uniform grid filled from the family's closed forms.
inline RadialProfile build_profile(const MetricFamily& f, const GridSpec& g) {
    f.validate();
    g.validate();
    RadialProfile p;
    p.provenance = Provenance::Analytic;
    p.family = f;
    const std::size_t n = g.nodes;
    p.r.resize(n);
    p.phi.resize(n);
    p.phi_r.resize(n);
    p.phi_rr.resize(n);
    p.phi_rrr.resize(n);
    const double h = g.spacing();
    for (std::size_t i = 0; i < n; ++i) {
        const double ri = g.r_min + h * static_cast<double>(i);
        p.r[i] = ri;
        const auto j = eval_family(f, ri);
        p.phi[i] = j.phi;
        p.phi_r[i] = j.phi_r;
        p.phi_rr[i] = j.phi_rr;
        p.phi_rrr[i] = j.phi_rrr;
    }
    return p;
}

/// Profile from raw phi values; derivatives by finite differences
/// (phi_rrr = D1 applied to the D2 field, adequate for diagnostics).
inline RadialProfile numeric_profile(std::span<const double> grid, std::span<const double> phi_values) {
    if (grid.size() != phi_values.size()) throw std::invalid_argument("numeric_profile: size mismatch");
    require_uniform(grid);
    RadialProfile p;
    p.provenance = Provenance::Numeric;
    p.r.assign(grid.begin(), grid.end());
    p.phi.assign(phi_values.begin(), phi_values.end());
    const double h = p.spacing();
    const std::size_t n = grid.size();
    if (n < 6) throw std::invalid_argument("numeric_profile: need >= 6 nodes");
    DerivativeOperator<double> d1(1, n, h), d2(2, n, h);
    p.phi_r = d1.apply(p.phi);
    p.phi_rr = d2.apply(p.phi);
    p.phi_rrr = d1.apply(p.phi_rr);
    return p;
}

/// Per-node Kahler positivity diagnostic (phi > 0 and phi_r > 0). Never throws.
struct KahlerReport {
    bool ok = true;
    std::vector<char> node_ok;
    std::size_t bad_count = 0;
    std::ptrdiff_t first_bad_node = -1;
    double min_phi = 0.0;
    double min_phi_r = 0.0;
};

inline KahlerReport check_kahler(const RadialProfile& p) {
    KahlerReport rep;
    const std::size_t n = p.size();
    rep.node_ok.assign(n, 1);
    if (n == 0) return rep;
    rep.min_phi = p.phi[0];
    rep.min_phi_r = p.phi_r[0];
    for (std::size_t i = 0; i < n; ++i) {
        rep.min_phi = std::min(rep.min_phi, p.phi[i]);
        rep.min_phi_r = std::min(rep.min_phi_r, p.phi_r[i]);
        const bool good = p.phi[i] > 0.0 && p.phi_r[i] > 0.0;
        if (!good) {
            rep.node_ok[i] = 0;
            ++rep.bad_count;
            if (rep.first_bad_node < 0) rep.first_bad_node = static_cast<std::ptrdiff_t>(i);
        }
    }
    rep.ok = rep.bad_count == 0;
    return rep;
}

}  // namespace krf
