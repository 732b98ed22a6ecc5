#pragma once

// Run configuration shared by the CLI subcommands. Validated against the
// module preconditions before any computation; violations map to exit code 2.

#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "krf/flow.hpp"
#include "krf/metric_family.hpp"
#include "krf/radial_profile.hpp"

namespace krf {

struct ConfigError : std::invalid_argument {
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

struct RunConfig {
    MetricFamily family{2, 1.0, 1.0, Variant::Sqrt};
    GridSpec grid{-12.0, 12.0, 2401};
    SolverControls controls{};
    FormulaVersion version = FormulaVersion::DeterminantDerived;
    double t_final = 1e-3;
    std::string out_dir = ".";
    std::set<std::string> formats{"csv", "json"};
    std::vector<double> sweep_c;               // optional c sweep values
    std::vector<std::pair<int, double>> sweep_na;  // optional (n, a) pairs
    unsigned seed = 42;
    int jobs = 1;
    int snapshots = 5;

    void validate() const {
        try {
            family.validate();
            grid.validate();
            controls.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        if (!(t_final > 0.0)) throw ConfigError("t_final must be positive");
        if (jobs < 1) throw ConfigError("jobs must be >= 1");
        if (snapshots < 1) throw ConfigError("snapshots must be >= 1");
        for (const auto& f : formats)
            if (f != "csv" && f != "json" && f != "svg") throw ConfigError("unknown output format '" + f + "'");
        for (double c : sweep_c)
            if (!(c >= 0.0)) throw ConfigError("sweep c values must be >= 0");
        for (const auto& [n, a] : sweep_na) {
            if (n < 2) throw ConfigError("sweep n values must be >= 2");
            if (!(a > 0.0)) throw ConfigError("sweep a values must be > 0");
        }
    }
};

}  // namespace krf
