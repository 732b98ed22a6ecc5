// krf: command-line laboratory for U(n)-invariant Kahler metrics on
// C^n \ {0} and their Ricci flow.
//
// Subcommands:
//   report   per-node table of phi, psi, eigenvalue and curvature fields
//   flow     evolve a family and locate the lambda2 sign-change boundary
//   verify   run the full check suite for one family (exit 0 iff all pass)
//   sweep    verify over parameter lists, aggregate one CSV row per tuple
//   oracle   finite-difference cross-checks and the formula audit
//
// Exit codes: 0 success, 1 check failure, 2 configuration error,
// 3 solver failure.

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <CLI11.hpp>

#include "krf/curvature.hpp"
#include "krf/flow.hpp"
#include "krf/global_geometry.hpp"
#include "krf/metric_family.hpp"
#include "krf/oracle.hpp"
#include "krf/report_io.hpp"
#include "krf/run_config.hpp"
#include "krf/verify.hpp"

namespace fs = std::filesystem;
using namespace krf;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitSolverFailure = 3;

struct CliOptions {
    RunConfig cfg;
    std::string grid_spec;
    std::string variant_name = "sqrt";
    std::string version_name = "determinant-derived";
    std::string formats_csv = "csv,json";
    std::vector<int> sweep_n;
    std::vector<std::string> sweep_na_tokens;
};

void apply_common(CliOptions& o) {
    if (!o.grid_spec.empty()) {
        double rmin, rmax;
        long nodes;
        char c1, c2;
        std::istringstream is(o.grid_spec);
        if (!(is >> rmin >> c1 >> rmax >> c2 >> nodes) || c1 != ':' || c2 != ':' || nodes < 5)
            throw ConfigError("bad --grid, expected rmin:rmax:nodes");
        o.cfg.grid = GridSpec{rmin, rmax, static_cast<std::size_t>(nodes)};
    }
    o.cfg.family.variant = variant_from_string(o.variant_name);
    if (o.version_name == "determinant-derived") o.cfg.version = FormulaVersion::DeterminantDerived;
    else if (o.version_name == "direct-extension") o.cfg.version = FormulaVersion::DirectExtension;
    else throw ConfigError("unknown --formula-version '" + o.version_name + "'");
    o.cfg.formats.clear();
    std::istringstream fs_in(o.formats_csv);
    std::string tok;
    while (std::getline(fs_in, tok, ',')) if (!tok.empty()) o.cfg.formats.insert(tok);
    // sweep expansion: explicit n:a tokens, or n lists with a = 1..n-1
    for (const auto& t : o.sweep_na_tokens) {
        const auto pos = t.find(':');
        if (pos == std::string::npos) throw ConfigError("bad --sweep-na token '" + t + "', expected n:a");
        o.cfg.sweep_na.emplace_back(std::stoi(t.substr(0, pos)), std::stod(t.substr(pos + 1)));
    }
    for (int n : o.sweep_n)
        for (int a = 1; a <= n - 1; ++a) o.cfg.sweep_na.emplace_back(n, static_cast<double>(a));
    o.cfg.validate();
    fs::create_directories(o.cfg.out_dir);
}

void add_common_flags(CLI::App* cmd, CliOptions& o) {
    cmd->add_option("--n", o.cfg.family.n, "complex dimension (>= 2)")->capture_default_str();
    cmd->add_option("--a", o.cfg.family.a, "exponent parameter a > 0")->capture_default_str();
    cmd->add_option("--c", o.cfg.family.c, "cone parameter c >= 0")->capture_default_str();
    cmd->add_option("--variant", o.variant_name, "family shape: sqrt | nthroot")->capture_default_str();
    cmd->add_option("--formula-version", o.version_name,
                    "psi/flow formulas: determinant-derived | direct-extension")
        ->capture_default_str();
    cmd->add_option("--t-final", o.cfg.t_final, "flow end time")->capture_default_str();
    cmd->add_option("--grid", o.grid_spec, "grid as rmin:rmax:nodes (default -12:12:2401)");
    cmd->add_option("--out", o.cfg.out_dir, "output directory")->capture_default_str();
    cmd->add_option("--formats", o.formats_csv, "comma list from csv,json,svg")->capture_default_str();
    cmd->add_option("--jobs", o.cfg.jobs, "max concurrent sweep workers")->capture_default_str();
    cmd->add_option("--seed", o.cfg.seed, "seed for oracle sample points")->capture_default_str();
    cmd->add_option("--snapshots", o.cfg.snapshots, "number of flow snapshots")->capture_default_str();
    cmd->add_option("--dt-init", o.cfg.controls.dt_init, "initial time step")->capture_default_str();
    cmd->add_option("--dt-max", o.cfg.controls.dt_max, "maximum time step")->capture_default_str();
    cmd->set_config("--config", "", "config file (key = value lines, # comments)");
}

ordered_json family_json(const MetricFamily& f) {
    return ordered_json{{"n", f.n}, {"a", f.a}, {"c", f.c}, {"variant", to_string(f.variant)}};
}

ordered_json finding_json(const AuditFinding& fnd) {
    return ordered_json{{"location", fnd.location},
                        {"quantity", fnd.quantity},
                        {"variant", to_string(fnd.variant)},
                        {"version", to_string(fnd.version)},
                        {"candidate_value", fnd.printed_value},
                        {"oracle_value", fnd.oracle_value},
                        {"discrepancy", fnd.discrepancy},
                        {"verdict", fnd.consistent ? "consistent" : "inconsistent"}};
}

ordered_json check_json(const CheckResult& c) {
    const char* st = c.status == CheckStatus::Pass ? "pass" : c.status == CheckStatus::Fail ? "fail" : "skip";
    return ordered_json{{"id", c.id},       {"name", c.name},           {"status", st},
                        {"measured", c.measured}, {"threshold", c.threshold}, {"detail", c.detail}};
}

int cmd_report(const CliOptions& o) {
    const auto& cfg = o.cfg;
    const auto prof = build_profile(cfg.family, cfg.grid);
    CsvWriter csv({"r", "phi", "phi_r", "psi", "psi_r", "lambda1", "lambda2", "bXX", "bXY", "bYY"});
    std::vector<double> xs, l2s, bxx, bxy, byy;
    for (std::size_t i = 0; i < prof.size(); ++i) {
        const auto rep = curvature_point_report(cfg.family, prof.r[i], cfg.family.n, cfg.version);
        csv.row(std::array<double, 10>{rep.r, prof.phi[i], prof.phi_r[i], rep.psi, rep.psi_r, rep.lambda1, rep.lambda2,
                                       rep.bXX, rep.bXY, rep.bYY});
        xs.push_back(rep.r);
        l2s.push_back(rep.lambda2);
        bxx.push_back(rep.bXX);
        bxy.push_back(rep.bXY);
        byy.push_back(rep.bYY);
    }
    const fs::path out(cfg.out_dir);
    if (cfg.formats.count("csv")) csv.save(out / "report.csv");
    if (cfg.formats.count("svg")) {
        SvgPlot p1("lambda2 along the radial coordinate", "r", "lambda2");
        p1.add({"lambda2", "#1f6fb2", xs, l2s});
        p1.save(out / "lambda2.svg");
        SvgPlot p2("bisectional curvatures in the canonical frame", "r", "B");
        p2.add({"B(X,X)", "#1f6fb2", xs, bxx});
        p2.add({"B(X,Y)", "#b23b1f", xs, bxy});
        p2.add({"B(Y,Y)", "#2e8b57", xs, byy});
        p2.save(out / "bisectional.svg");
    }
    std::cout << "report: " << prof.size() << " nodes for " << cfg.family.describe() << " -> " << cfg.out_dir
              << "\n";
    return kExitOk;
}

int cmd_flow(const CliOptions& o) {
    const auto& cfg = o.cfg;
    auto state0 = initial_flow_state(cfg.family, cfg.grid, cfg.version);
    std::vector<double> snap_times;
    for (int i = 1; i <= cfg.snapshots; ++i)
        snap_times.push_back(cfg.t_final * static_cast<double>(i) / cfg.snapshots);
    const auto ev = evolve(state0, cfg.t_final, cfg.controls, snap_times);
    const auto scan = sign_change_scan(state0, ev.state, cfg.version);

    const fs::path out(cfg.out_dir);
    if (cfg.formats.count("csv")) {
        CsvWriter csv({"t", "r", "lambda2"});
        for (const auto& snap : ev.snapshots)
            for (std::size_t i = 0; i < state0.size(); ++i)
                csv.row(std::array<double, 3>{snap.t, state0.grid[i], snap.lambda2[i]});
        csv.save(out / "flow.csv");
    }
    if (cfg.formats.count("svg")) {
        SvgPlot plot("lambda2 after the flow", "r", "lambda2");
        plot.add({"t = " + format_double(ev.state.t, 6), "#1f6fb2", state0.grid, ev.snapshots.back().lambda2});
        plot.save(out / "flow_lambda2.svg");
    }
    const std::string verdict = !scan.applicable ? "not-applicable" : (scan.match ? "pass" : "fail");
    if (cfg.formats.count("json")) {
        ordered_json j{{"family", family_json(cfg.family)},
                       {"t_final", ev.state.t},
                       {"steps", ev.steps_taken},
                       {"steps_rejected", ev.steps_rejected},
                       {"boundary_detected", scan.boundary_detected},
                       {"boundary_predicted", scan.boundary_predicted},
                       {"negative_nodes", scan.negative_nodes},
                       {"eps_sign", scan.eps_sign},
                       {"verdict", verdict}};
        write_text_file(out / "flow_summary.json", j.dump(2) + "\n");
    }
    std::cout << "flow: t=" << format_double(ev.state.t, 6) << " boundary=" << format_double(scan.boundary_detected, 6)
              << " predicted=" << format_double(scan.boundary_predicted, 6) << " verdict=" << verdict << "\n";
    return verdict == "fail" ? kExitCheckFailure : kExitOk;
}

ordered_json verify_json(const VerifyReport& rep) {
    ordered_json checks = ordered_json::array();
    for (const auto& c : rep.checks) checks.push_back(check_json(c));
    ordered_json findings = ordered_json::array();
    for (const auto& f : rep.findings) findings.push_back(finding_json(f));
    ordered_json j{{"family", family_json(rep.family)},
                   {"grid", ordered_json{{"r_min", rep.grid.r_min}, {"r_max", rep.grid.r_max}, {"nodes", rep.grid.nodes}}},
                   {"checks", checks},
                   {"audit_findings", findings},
                   {"all_pass", rep.all_pass()}};
    if (rep.sign_change) {
        j["sign_change"] = ordered_json{{"boundary_detected", rep.sign_change->boundary_detected},
                                        {"boundary_predicted", rep.sign_change->boundary_predicted},
                                        {"negative_nodes", rep.sign_change->negative_nodes}};
    }
    return j;
}

int cmd_verify(const CliOptions& o) {
    const auto rep = run_verify(o.cfg);
    if (o.cfg.formats.count("json"))
        write_text_file(fs::path(o.cfg.out_dir) / "verify.json", verify_json(rep).dump(2) + "\n");
    for (const auto& c : rep.checks) {
        const char* st = c.status == CheckStatus::Pass ? "PASS" : c.status == CheckStatus::Fail ? "FAIL" : "SKIP";
        std::cout << st << " " << c.id << ": " << c.detail << "\n";
    }
    for (const auto& f : rep.findings)
        std::cout << "finding " << (f.consistent ? "consistent  " : "INCONSISTENT") << " " << f.quantity << " ["
                  << to_string(f.variant) << " + " << to_string(f.version) << "] discrepancy="
                  << format_double(f.discrepancy, 3) << "\n";
    return rep.all_pass() ? kExitOk : kExitCheckFailure;
}

int cmd_sweep(const CliOptions& o) {
    const auto& cfg = o.cfg;
    std::vector<std::pair<int, double>> nas = cfg.sweep_na;
    if (nas.empty()) nas.emplace_back(cfg.family.n, cfg.family.a);
    std::vector<double> cs = cfg.sweep_c;
    if (cs.empty()) cs.push_back(cfg.family.c);

    struct Row {
        int n;
        double a, c;
        double boundary_detected = std::numeric_limits<double>::quiet_NaN();
        double boundary_predicted = std::numeric_limits<double>::quiet_NaN();
        bool all_pass = false;
    };
    std::vector<Row> rows;
    for (const auto& [n, a] : nas)
        for (double c : cs) rows.push_back({n, a, c});
    std::sort(rows.begin(), rows.end(), [](const Row& x, const Row& y) {
        return std::tie(x.n, x.a, x.c) < std::tie(y.n, y.a, y.c);
    });

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= rows.size()) return;
            Row& row = rows[i];
            RunConfig local = cfg;
            local.family.n = row.n;
            local.family.a = row.a;
            local.family.c = row.c;
            try {
                const auto rep = run_verify(local);
                row.all_pass = rep.all_pass();
                if (rep.sign_change) {
                    row.boundary_detected = rep.sign_change->boundary_detected;
                    row.boundary_predicted = rep.sign_change->boundary_predicted;
                }
            } catch (const std::exception&) {
                row.all_pass = false;  // recorded per-row, sweep continues
            }
        }
    };
    const int workers = std::max(1, std::min<int>(cfg.jobs, static_cast<int>(rows.size())));
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    CsvWriter csv({"n", "a", "c", "boundary_detected", "boundary_predicted", "all_pass"});
    for (const auto& row : rows)
        csv.row(std::array<double, 6>{static_cast<double>(row.n), row.a, row.c, row.boundary_detected,
                                      row.boundary_predicted, row.all_pass ? 1.0 : 0.0});
    csv.save(fs::path(cfg.out_dir) / "sweep.csv");
    std::cout << "sweep: " << rows.size() << " rows -> " << (fs::path(cfg.out_dir) / "sweep.csv").string() << "\n";
    return kExitOk;
}

int cmd_oracle(const CliOptions& o) {
    const auto& cfg = o.cfg;
    const auto& f = cfg.family;
    ordered_json points = ordered_json::array();
    for (const auto& z : detail::seeded_points(f.n, 20, cfg.seed)) {
        const double dg = detail::matrix_rel_diff(fd_metric(f, z), metric_at(f, z));
        const double drc =
            detail::matrix_rel_diff(fd_ricci(f, z), ricci_at(f, z, f.n, FormulaVersion::DeterminantDerived));
        double dr = 0.0;
        if (f.n == 2) {
            const auto r_fd = fd_riemann(f, z);
            const auto r_cf = riemann_at(f, z, 2);
            double scale = 0.0, diff = 0.0;
            for (int i = 0; i < 16; ++i) {
                scale = std::max(scale, std::abs(r_cf.c[i]));
                diff = std::max(diff, std::abs(r_fd.c[i] - r_cf.c[i]));
            }
            dr = diff / std::max(scale, 1e-300);
        }
        ordered_json zj = ordered_json::array();
        for (const auto& zi : z) zj.push_back(ordered_json::array({zi.real(), zi.imag()}));
        points.push_back(ordered_json{{"z", zj},
                                      {"metric_rel_err", dg},
                                      {"ricci_rel_err", drc},
                                      {"riemann_rel_err", dr},
                                      {"consistent", dg <= AuditFinding::tolerance && drc <= AuditFinding::tolerance &&
                                                         dr <= AuditFinding::tolerance}});
    }
    ordered_json findings = ordered_json::array();
    for (const auto& fnd : audit_general_dimension(f.n, f.a, f.c)) findings.push_back(finding_json(fnd));
    ordered_json j{{"seed", cfg.seed}, {"family", family_json(f)}, {"points", points}, {"findings", findings}};
    write_text_file(fs::path(cfg.out_dir) / "oracle.json", j.dump(2) + "\n");
    std::cout << "oracle: " << points.size() << " sample points, " << findings.size() << " findings -> "
              << (fs::path(cfg.out_dir) / "oracle.json").string() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for U(n)-invariant Kahler metrics and their Ricci flow"};
    app.require_subcommand(1);
    CliOptions o;

    auto* report = app.add_subcommand("report", "tabulate per-node geometry fields");
    auto* flow = app.add_subcommand("flow", "evolve and locate the lambda2 sign boundary");
    auto* verify = app.add_subcommand("verify", "run the verification suite for one family");
    auto* sweep = app.add_subcommand("sweep", "verify across parameter lists");
    auto* oracle = app.add_subcommand("oracle", "finite-difference cross-checks and formula audit");
    for (auto* cmd : {report, flow, verify, sweep, oracle}) add_common_flags(cmd, o);
    sweep->add_option("--sweep-c", o.cfg.sweep_c, "comma list of c values")->delimiter(',');
    sweep->add_option("--sweep-n", o.sweep_n, "comma list of n values (a expands to 1..n-1)")->delimiter(',');
    sweep->add_option("--sweep-na", o.sweep_na_tokens, "comma list of n:a pairs")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfigError;
    }

    try {
        apply_common(o);
        if (report->parsed()) return cmd_report(o);
        if (flow->parsed()) return cmd_flow(o);
        if (verify->parsed()) return cmd_verify(o);
        if (sweep->parsed()) return cmd_sweep(o);
        if (oracle->parsed()) return cmd_oracle(o);
        return kExitConfigError;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const FlowError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kExitSolverFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitSolverFailure;
    }
}
