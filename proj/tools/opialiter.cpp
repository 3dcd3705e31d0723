// opialiter: run fixed-point scenarios, check exported traces, and replay
// the built-in reproduction suite.
//
// Exit codes: 0 success / all checks hold, 1 a check fails, 2 usage or
// parse error, 3 engine error.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "opialiter/io.hpp"
#include "opialiter/operators.hpp"
#include "opialiter/scenario.hpp"
#include "opialiter/suite.hpp"

namespace {

using namespace opialiter;

constexpr int exit_ok = 0;
constexpr int exit_check_failed = 1;
constexpr int exit_usage = 2;
constexpr int exit_engine = 3;

std::optional<std::uint64_t> seed_from_env() {
    const char* raw = std::getenv("OPIALITER_SEED");
    if (!raw || !*raw) {
        return std::nullopt;
    }
    try {
        std::size_t used = 0;
        const auto v = std::stoull(raw, &used);
        if (used == std::string(raw).size()) {
            return v;
        }
    } catch (const std::exception&) {
    }
    throw ParseError("OPIALITER_SEED", "not a non-negative integer");
}

/// A JSON argument, or @path to read it from a file.
ordered_json json_arg(const std::string& raw, const std::string& field) {
    const std::string text = !raw.empty() && raw[0] == '@' ? read_file(raw.substr(1)) : raw;
    try {
        return ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(field, e.what());
    }
}

void print_verdicts(const std::vector<Verdict>& verdicts) {
    for (const auto& v : verdicts) {
        std::cout << v.check << " " << to_string(v.status) << "\n";
    }
}

int run_command(const std::string& scenario, const std::string& out_dir, bool plot_data, bool json) {
    RunOptions opt;
    opt.seed_override = seed_from_env();
    opt.plot_data = plot_data;
    const auto report = run_scenario(scenario, out_dir, opt);
    if (json) {
        std::cout << dump_json(report.document);
    } else {
        const auto& t = report.document["trace"];
        std::cout << "trace " << t["length"].get<std::size_t>() << " points, stop " << t["stop_reason"].get<std::string>()
                  << ", final residual " << format_double(t["final_residual"].get<double>()) << "\n";
        print_verdicts(report.verdicts);
    }
    return report.any_fails() ? exit_check_failed : exit_ok;
}

struct CheckArgs {
    std::string trace;
    std::vector<std::string> checks;
    std::vector<std::string> probes;
    std::string limit;
    std::string op;
    std::string domain;
    std::vector<std::size_t> window;
    double tol_ar = Tolerances{}.ar;
    double tol_lambda = Tolerances{}.lambda;
    double tol_opial = Tolerances{}.opial;
    double margin = Tolerances{}.margin;
    std::uint64_t seed = 0;
};

int check_command(const CheckArgs& a) {
    CheckContext ctx;
    for (std::size_t i = 0; i < a.probes.size(); ++i) {
        const std::string field = "probe[" + std::to_string(i) + "]";
        ctx.probes.push_back(point_from_json(json_arg(a.probes[i], field), std::nullopt, field));
    }
    if (!a.limit.empty()) {
        ctx.declared_weak_limit = point_from_json(json_arg(a.limit, "limit"), std::nullopt, "limit");
    }
    if (!a.op.empty()) {
        ctx.op = make_operator(json_arg(a.op, "operator"));
    }
    if (!a.domain.empty()) {
        ctx.domain = domain_from_json(json_arg(a.domain, "domain"));
    }
    if (!a.window.empty()) {
        if (a.window.size() != 2) {
            throw ParseError("window", "expects BURN_IN WINDOW");
        }
        ctx.window = TailWindow{a.window[0], a.window[1]};
    }
    ctx.tolerances = {a.tol_ar, a.tol_lambda, a.tol_opial, a.margin};
    ctx.seed = seed_from_env().value_or(a.seed);

    std::vector<CheckRequest> checks;
    for (std::size_t i = 0; i < a.checks.size(); ++i) {
        const auto& raw = a.checks[i];
        const auto j = !raw.empty() && (raw[0] == '{' || raw[0] == '@') ? json_arg(raw, "checks")
                                                                          : ordered_json(raw);
        checks.push_back(detail::parse_check(j, "checks[" + std::to_string(i) + "]"));
    }
    const auto report = check_trace(a.trace, checks, ctx);
    std::cout << dump_json(report.document);
    return report.any_fails() ? exit_check_failed : exit_ok;
}

int suite_command(bool json) {
    const auto verdicts = run_suite();
    if (json) {
        ordered_json arr = ordered_json::array();
        for (const auto& v : verdicts) {
            arr.push_back(to_json(v));
        }
        std::cout << dump_json(arr);
    } else {
        print_verdicts(verdicts);
    }
    const bool all = std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.holds(); });
    return all ? exit_ok : exit_check_failed;
}

int zoo_command() {
    for (const auto& e : operator_catalog()) {
        std::cout << e.kind;
        if (*e.parameters) {
            std::cout << " (" << e.parameters << ")";
        }
        std::cout << ": " << e.summary << "\n";
    }
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fixed-point iteration schemes and asymptotic diagnostics"};
    app.require_subcommand(1);

    std::string scenario;
    std::string out_dir = ".";
    bool plot_data = false;
    bool run_json = false;
    auto* run = app.add_subcommand("run", "Run a scenario file");
    run->add_option("scenario", scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
    run->add_option("-o,--out", out_dir, "Output directory for the trace and report");
    run->add_flag("--plot-data", plot_data, "Also write per-check (step, series, value) CSV files");
    run->add_flag("--json", run_json, "Print the full report JSON");

    CheckArgs check_args;
    auto* check = app.add_subcommand("check", "Run diagnostics on an exported trace");
    check->add_option("trace", check_args.trace, "Trace file (CSV or JSON lines)")->required()->check(CLI::ExistingFile);
    check->add_option("--checks", check_args.checks, "Check names or JSON check objects")->required();
    check->add_option("--probe", check_args.probes, "Probe point (JSON or @file), repeatable");
    check->add_option("--limit", check_args.limit, "Declared weak limit (JSON)");
    check->add_option("--operator", check_args.op, "Operator spec (JSON or @file)");
    check->add_option("--domain", check_args.domain, "Domain spec (JSON or @file)");
    check->add_option("--window", check_args.window, "Tail window: BURN_IN WINDOW")->expected(2);
    check->add_option("--tol-ar", check_args.tol_ar, "Asymptotic regularity tolerance");
    check->add_option("--tol-lambda", check_args.tol_lambda, "Lambda membership tolerance");
    check->add_option("--tol-opial", check_args.tol_opial, "Opial margin");
    check->add_option("--margin", check_args.margin, "Margin for strict inequalities");
    check->add_option("--seed", check_args.seed, "Sampling seed");

    bool suite_json = false;
    auto* suite = app.add_subcommand("suite", "Replay the built-in reproduction cases");
    suite->add_flag("--json", suite_json, "Emit the verdicts as JSON");

    auto* zoo = app.add_subcommand("zoo", "List the operator catalog");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        if (run->parsed()) {
            return run_command(scenario, out_dir, plot_data, run_json);
        }
        if (check->parsed()) {
            return check_command(check_args);
        }
        if (suite->parsed()) {
            return suite_command(suite_json);
        }
        if (zoo->parsed()) {
            return zoo_command();
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const InsufficientData& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const LookupError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "engine error: " << e.what() << "\n";
        return exit_engine;
    }
    return exit_usage;
}
