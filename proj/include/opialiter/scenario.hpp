#pragma once

#include <cstdint>
#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "opialiter/diagnostics.hpp"
#include "opialiter/domains.hpp"
#include "opialiter/engines.hpp"
#include "opialiter/errors.hpp"
#include "opialiter/io.hpp"
#include "opialiter/operators.hpp"
#include "opialiter/space.hpp"
#include "opialiter/verdict.hpp"

namespace opialiter {

using ordered_json = nlohmann::ordered_json;

struct Tolerances {
    double ar = 1e-8;      // asymptotic regularity and residual
    double lambda = 1e-8;  // Lambda membership spread, limit detection
    double opial = 1e-9;   // margin for the Opial / minimizer inequalities
    double margin = 1e-9;  // margin for the remaining strict inequalities
};

/// One requested diagnostic: a name plus its parameter object.
struct CheckRequest {
    std::string name;
    ordered_json params = ordered_json::object();
};

struct SchemeSpec {
    std::string kind = "picard";
    double tau = 0.5;
    EpsSchedule schedule{0.1, 0.5, 1};
    std::size_t inner_max = 1000;
    double inner_tol = 1e-12;
    std::optional<Point> z;
    std::optional<double> delta;
};

struct Scenario {
    ordered_json source;
    std::optional<std::size_t> dense_dim;
    ConvexDomain domain = ConvexDomain::whole_space_sparse(1.0);
    Operator op = Operator::identity();
    SchemeSpec scheme;
    Point x0;
    std::size_t max_iter = 1;
    double stop_tol = 0.0;
    std::vector<Point> probes;
    std::optional<Point> declared_weak_limit;
    std::optional<TailWindow> window;
    Tolerances tolerances;
    std::vector<CheckRequest> checks;
    std::uint64_t seed = 0;
};

/// Inputs for diagnostics that are not carried by the trace itself.
struct CheckContext {
    std::optional<Operator> op;
    std::optional<ConvexDomain> domain;
    std::vector<Point> probes;
    std::optional<Point> declared_weak_limit;
    std::optional<TailWindow> window;
    Tolerances tolerances;
    std::uint64_t seed = 0;
    std::optional<std::size_t> dense_dim;
};

inline const std::vector<std::string>& known_checks() {
    static const std::vector<std::string> names = {"ar",   "residual", "lambda", "psi",        "opial",
                                                   "fejer", "sharp",   "flat",   "weak_limit", "local_nonexpansiveness"};
    return names;
}

inline std::vector<CheckRequest> default_checks() { return {{"ar"}, {"residual"}, {"lambda"}, {"opial"}}; }

namespace detail {

inline CheckRequest parse_check(const ordered_json& j, const std::string& field) {
    CheckRequest c;
    if (j.is_string()) {
        c.name = j.get<std::string>();
    } else if (j.is_object()) {
        if (!j.contains("name") || !j["name"].is_string()) {
            throw ParseError(field + ".name", "missing or not a string");
        }
        c.name = j["name"].get<std::string>();
        for (const auto& [key, value] : j.items()) {
            if (key != "name") {
                c.params[key] = value;
            }
        }
    } else {
        throw ParseError(field, "a check is a name or an object with \"name\"");
    }
    const auto& names = known_checks();
    if (std::find(names.begin(), names.end(), c.name) == names.end()) {
        throw ParseError(field + ".name", "unknown check \"" + c.name + "\"");
    }
    static const std::map<std::string, std::vector<std::string>> allowed = {
        {"ar", {}},
        {"residual", {}},
        {"lambda", {"z"}},
        {"psi", {"z"}},
        {"opial", {"limit"}},
        {"fejer", {"y", "eta", "slack"}},
        {"sharp", {"y"}},
        {"flat", {"delta"}},
        {"weak_limit", {"limit", "norm_bound"}},
        {"local_nonexpansiveness", {"epsilon", "samples"}},
    };
    const auto& ok = allowed.at(c.name);
    for (const auto& [key, value] : c.params.items()) {
        if (std::find(ok.begin(), ok.end(), key) == ok.end()) {
            throw ParseError(field + "." + key, "unknown parameter for check \"" + c.name + "\"");
        }
    }
    return c;
}

inline TailWindow parse_window(const ordered_json& j, const std::string& field) {
    if (!j.is_object()) {
        throw ParseError(field, "expected {\"burn_in\", \"window\"}");
    }
    reject_unknown(j, {"burn_in", "window"}, field);
    TailWindow w;
    w.burn_in = require_count(j, "burn_in", field);
    w.window = require_count(j, "window", field);
    if (w.window < 2) {
        throw ValidationError(field + ".window", "must be at least 2");
    }
    return w;
}

inline Tolerances parse_tolerances(const ordered_json& j, const std::string& field) {
    if (!j.is_object()) {
        throw ParseError(field, "expected an object");
    }
    reject_unknown(j, {"ar", "lambda", "opial", "margin"}, field);
    Tolerances t;
    for (auto [key, slot] : {std::pair{"ar", &t.ar}, std::pair{"lambda", &t.lambda}, std::pair{"opial", &t.opial},
                             std::pair{"margin", &t.margin}}) {
        if (j.contains(key)) {
            *slot = require_number(j, key, field);
            if (!(*slot > 0.0)) {
                throw ValidationError(field + "." + key, "must be positive");
            }
        }
    }
    return t;
}

inline SchemeSpec parse_scheme(const ordered_json& j, std::optional<std::size_t> dim, const std::string& field) {
    if (!j.is_object()) {
        throw ParseError(field, "expected an object");
    }
    const auto& kind_j = require(j, "kind", field);
    if (!kind_j.is_string()) {
        throw ParseError(field + ".kind", "must be a string");
    }
    SchemeSpec s;
    s.kind = kind_j.get<std::string>();
    if (s.kind == "picard") {
        reject_unknown(j, {"kind"}, field);
    } else if (s.kind == "mann") {
        reject_unknown(j, {"kind", "tau"}, field);
        s.tau = require_number(j, "tau", field);
        if (!(s.tau > 0.0 && s.tau < 1.0)) {
            throw ValidationError(field + ".tau", "must lie in (0,1)");
        }
    } else if (s.kind == "regularized") {
        reject_unknown(j, {"kind", "eps0", "rho", "count", "inner_max", "inner_tol", "z", "delta"}, field);
        s.schedule = {require_number(j, "eps0", field), require_number(j, "rho", field), require_count(j, "count", field)};
        if (j.contains("inner_max")) {
            s.inner_max = require_count(j, "inner_max", field);
        }
        if (j.contains("inner_tol")) {
            s.inner_tol = require_number(j, "inner_tol", field);
        }
        if (j.contains("z")) {
            s.z = point_from_json(j["z"], dim, field + ".z");
        }
        if (j.contains("delta")) {
            s.delta = require_number(j, "delta", field);
        }
        with_field(field, [&] {
            s.schedule.validate(s.delta);
            return 0;
        });
    } else {
        throw ParseError(field + ".kind", "unknown scheme \"" + s.kind + "\"");
    }
    return s;
}

}  // namespace detail

/// Parses and validates a scenario document. Unknown fields are rejected.
inline Scenario parse_scenario(const ordered_json& j) {
    using namespace detail;
    if (!j.is_object()) {
        throw ParseError("scenario", "expected a JSON object");
    }
    reject_unknown(j,
                   {"mode", "domain", "operator", "scheme", "x0", "max_iter", "stop_tol", "probes",
                    "declared_weak_limit", "window", "tolerances", "checks", "seed"},
                   "scenario");
    for (const char* key : {"mode", "domain", "operator", "scheme", "x0", "max_iter"}) {
        if (!j.contains(key)) {
            throw ParseError(key, "missing required field");
        }
    }
    Scenario s;
    s.source = j;

    const auto& mode = j["mode"];
    if (mode.is_string() && mode.get<std::string>() == "sparse") {
        s.dense_dim.reset();
    } else if (mode.is_object()) {
        reject_unknown(mode, {"kind", "dim"}, "mode");
        const auto& kind = require(mode, "kind", "mode");
        if (kind == "dense") {
            s.dense_dim = require_count(mode, "dim", "mode");
            if (*s.dense_dim == 0) {
                throw ValidationError("mode.dim", "must be positive");
            }
        } else if (kind == "sparse") {
            if (mode.contains("dim")) {
                throw ParseError("mode.dim", "sparse mode has no dimension");
            }
        } else {
            throw ParseError("mode.kind", "must be \"dense\" or \"sparse\"");
        }
    } else {
        throw ParseError("mode", "expected {\"kind\": \"dense\", \"dim\": d} or {\"kind\": \"sparse\"}");
    }

    s.domain = domain_from_json(j["domain"], s.dense_dim, "domain");
    s.op = make_operator(j["operator"], s.dense_dim, "operator");
    s.scheme = parse_scheme(j["scheme"], s.dense_dim, "scheme");
    s.x0 = point_from_json(j["x0"], s.dense_dim, "x0");
    s.max_iter = require_count(j, "max_iter", "scenario");
    if (s.max_iter == 0) {
        throw ValidationError("max_iter", "must be at least 1");
    }
    if (j.contains("stop_tol")) {
        s.stop_tol = require_number(j, "stop_tol", "scenario");
        if (!(s.stop_tol >= 0.0)) {
            throw ValidationError("stop_tol", "must be non-negative");
        }
    }
    if (j.contains("probes")) {
        if (!j["probes"].is_array()) {
            throw ParseError("probes", "must be an array");
        }
        for (std::size_t i = 0; i < j["probes"].size(); ++i) {
            s.probes.push_back(point_from_json(j["probes"][i], s.dense_dim, "probes[" + std::to_string(i) + "]"));
        }
    }
    if (j.contains("declared_weak_limit") && !j["declared_weak_limit"].is_null()) {
        s.declared_weak_limit = point_from_json(j["declared_weak_limit"], s.dense_dim, "declared_weak_limit");
    }
    if (j.contains("window")) {
        s.window = parse_window(j["window"], "window");
    }
    if (j.contains("tolerances")) {
        s.tolerances = parse_tolerances(j["tolerances"], "tolerances");
    }
    if (j.contains("checks")) {
        if (!j["checks"].is_array()) {
            throw ParseError("checks", "must be an array");
        }
        for (std::size_t i = 0; i < j["checks"].size(); ++i) {
            s.checks.push_back(parse_check(j["checks"][i], "checks[" + std::to_string(i) + "]"));
        }
    } else {
        s.checks = default_checks();
    }
    if (j.contains("seed")) {
        s.seed = require_count(j, "seed", "scenario");
    }
    if (!contains(s.domain, s.x0, domain_escape_tolerance)) {
        throw ValidationError("x0", "must lie in the domain");
    }
    return s;
}

inline Scenario parse_scenario_text(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("scenario", e.what());
    }
    return parse_scenario(j);
}

namespace detail {

inline Point param_point(const CheckRequest& c, const char* key, const CheckContext& ctx) {
    return point_from_json(c.params[key], ctx.dense_dim, "checks." + c.name + "." + key);
}

inline double param_number(const CheckRequest& c, const char* key, double fallback) {
    if (!c.params.contains(key)) {
        return fallback;
    }
    if (!c.params[key].is_number()) {
        throw ParseError("checks." + c.name + "." + key, "must be a number");
    }
    return c.params[key].get<double>();
}

inline Verdict inconclusive(const std::string& check, const std::string& why) {
    Verdict v;
    v.check = check;
    v.status = Status::inconclusive;
    v.notes.push_back(why);
    return v;
}

/// The trace's limit: the declared weak limit, else a detected strong limit.
inline std::optional<Point> trace_limit(const Trace& t, const CheckContext& ctx, const TailWindow& w) {
    if (ctx.declared_weak_limit) {
        return ctx.declared_weak_limit;
    }
    return detect_limit(t.points, w, ctx.tolerances.lambda);
}

inline const Operator& require_operator(const CheckContext& ctx, const std::string& check) {
    if (!ctx.op) {
        throw ValidationError("operator", "check \"" + check + "\" needs an operator");
    }
    return *ctx.op;
}

}  // namespace detail

/// Tidy (step, series, value) rows behind a check, for external plotting.
struct PlotSeries {
    std::string check;
    std::vector<std::tuple<std::size_t, std::string, double>> rows;
};

/// Runs one check on a trace.
inline Verdict run_check(const Trace& t, const CheckRequest& c, const CheckContext& ctx,
                         PlotSeries* plot = nullptr) {
    using namespace detail;
    if (t.points.size() < 3) {
        throw InsufficientData("diagnostics need a trace with at least 3 points");
    }
    const TailWindow w = ctx.window.value_or(default_window(t.points.size() - 1));
    const auto& tol = ctx.tolerances;
    auto record = [&](const std::string& series, const std::vector<double>& values) {
        if (plot) {
            for (std::size_t n = 0; n < values.size(); ++n) {
                plot->rows.emplace_back(n, series, values[n]);
            }
        }
    };
    if (plot) {
        plot->check = c.name;
    }

    if (c.name == "ar") {
        record("step_norm", ar_profile(t));
        return ar_check(t.points, w, tol.ar);
    }
    if (c.name == "residual") {
        record("residual_norm", residual_profile(t));
        return residual_check(t, w, tol.ar);
    }
    if (c.name == "lambda" || c.name == "psi") {
        std::vector<Point> zs = c.params.contains("z") ? std::vector<Point>{param_point(c, "z", ctx)} : ctx.probes;
        if (zs.empty()) {
            return inconclusive(c.name, "no probe points given");
        }
        Verdict v;
        v.check = c.name;
        v.threshold = tol.lambda;
        v.window = w;
        std::vector<Status> parts;
        for (std::size_t i = 0; i < zs.size(); ++i) {
            const std::string tag = "z[" + std::to_string(i) + "]";
            record("dist_" + tag, distance_profile(t.points, zs[i]));
            const auto m = lambda_membership(t.points, zs[i], w, tol.lambda);
            if (c.name == "lambda") {
                v.witness("lo_" + tag, *m.find("lo")).witness("hi_" + tag, *m.find("hi"));
                parts.push_back(m.status);
            } else if (m.holds()) {
                v.witness("psi_" + tag, psi_estimate(t.points, zs[i], w, tol.lambda));
                parts.push_back(Status::holds);
            } else {
                v.notes.push_back(tag + " is not in Lambda; psi undefined");
                parts.push_back(Status::fails);
            }
        }
        v.status = all_of(parts);
        return v;
    }
    if (c.name == "opial") {
        const auto limit = c.params.contains("limit") ? std::optional<Point>(param_point(c, "limit", ctx))
                                                      : trace_limit(t, ctx, w);
        if (!limit) {
            return inconclusive("opial", "no declared weak limit and no limit detected");
        }
        if (ctx.probes.empty()) {
            auto v = inconclusive("opial", "no probe points given");
            v.status = Status::not_triggered;
            return v;
        }
        record("dist_limit", distance_profile(t.points, *limit));
        return opial_probe(t.points, *limit, ctx.probes, w, {tol.lambda, tol.opial});
    }
    if (c.name == "fejer") {
        Point y;
        if (c.params.contains("y")) {
            y = param_point(c, "y", ctx);
        } else if (ctx.op && !ctx.op->fixed_points().empty()) {
            y = ctx.op->fixed_points().front();
        } else {
            return inconclusive("fejer", "no reference point y and no known fixed point");
        }
        std::vector<double> eta;
        if (c.params.contains("eta")) {
            const auto& e = c.params["eta"];
            if (e.is_number()) {
                eta.assign(t.points.size() - 1, e.get<double>());
            } else if (e.is_array()) {
                for (const auto& x : e) {
                    if (!x.is_number()) {
                        throw ParseError("checks.fejer.eta", "entries must be numbers");
                    }
                    eta.push_back(x.get<double>());
                }
            } else {
                throw ParseError("checks.fejer.eta", "must be a number or an array");
            }
        }
        record("dist_y", distance_profile(t.points, y));
        return fejer_monitor(t.points, y, eta, param_number(c, "slack", 1e-12));
    }
    if (c.name == "sharp") {
        const auto& f = require_operator(ctx, "sharp");
        const auto y = c.params.contains("y") ? std::optional<Point>(param_point(c, "y", ctx)) : trace_limit(t, ctx, w);
        if (!y) {
            return inconclusive("sharp", "no weak limit to test against");
        }
        return sharp_check(f, t.points, *y, w, tol.margin);
    }
    if (c.name == "flat") {
        const auto& f = require_operator(ctx, "flat");
        if (!ctx.domain) {
            throw ValidationError("domain", "check \"flat\" needs the domain diameter");
        }
        if (!c.params.contains("delta")) {
            throw ParseError("checks.flat.delta", "missing");
        }
        return flat_check(f, t.points, param_number(c, "delta", 0.5), diameter(*ctx.domain), w, tol.margin);
    }
    if (c.name == "weak_limit") {
        const auto limit = c.params.contains("limit") ? std::optional<Point>(param_point(c, "limit", ctx))
                                                      : ctx.declared_weak_limit;
        if (!limit) {
            return inconclusive("weak_limit", "no declared weak limit");
        }
        std::set<std::size_t> coords;
        for (const auto& p : ctx.probes) {
            for (const auto& [i, value] : p.coords()) {
                coords.insert(i);
            }
        }
        double bound = param_number(c, "norm_bound", 0.0);
        if (bound <= 0.0) {
            bound = ctx.domain ? norm(ctx.domain->center()) + diameter(*ctx.domain) : INFINITY;
        }
        return weak_limit_check(t.points, *limit, coords, w, tol.lambda, bound);
    }
    if (c.name == "local_nonexpansiveness") {
        const auto& f = require_operator(ctx, c.name);
        if (!ctx.domain) {
            throw ValidationError("domain", "check \"local_nonexpansiveness\" needs a domain");
        }
        const double eps = param_number(c, "epsilon", 0.5);
        const double samples = param_number(c, "samples", 1000);
        if (!(samples >= 1.0)) {
            throw ValidationError("checks.local_nonexpansiveness.samples", "must be at least 1");
        }
        return local_nonexpansiveness_probe(f, *ctx.domain, EpsilonBand(eps), static_cast<std::size_t>(samples),
                                            ctx.seed);
    }
    throw ParseError("checks", "unknown check \"" + c.name + "\"");
}

struct RunReport {
    ordered_json document;
    std::vector<Verdict> verdicts;
    std::vector<std::filesystem::path> artifacts;

    bool any_fails() const {
        return std::any_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.status == Status::fails; });
    }
};

struct RunOptions {
    std::optional<std::uint64_t> seed_override;
    bool plot_data = false;
};

/// Runs the scheme a scenario names.
inline Trace run_engine(const Scenario& s, std::optional<Verdict>* regularized_verdict = nullptr) {
    if (s.scheme.kind == "picard") {
        return picard_run(s.op, s.x0, s.domain, s.max_iter, s.stop_tol);
    }
    if (s.scheme.kind == "mann") {
        return mann_run(s.op, s.scheme.tau, s.x0, s.domain, s.max_iter, s.stop_tol);
    }
    const Point z = s.scheme.z.value_or(s.domain.center());
    auto result = regularized_solve(s.op, z, s.domain, s.scheme.schedule, s.scheme.inner_max, s.scheme.inner_tol,
                                    s.scheme.delta);
    if (regularized_verdict) {
        *regularized_verdict = result.verdict;
    }
    return std::move(result.trace);
}

namespace detail {

inline std::string plot_csv(const PlotSeries& p) {
    std::string out = "step,series,value\n";
    for (const auto& [step, series, value] : p.rows) {
        out += std::to_string(step) + "," + series + "," + format_double(value) + "\n";
    }
    return out;
}

inline ordered_json trace_summary(const Trace& t) {
    ordered_json j;
    j["scheme"] = scheme_name(t.scheme);
    j["length"] = t.points.size();
    j["stop_reason"] = to_string(t.stop_reason);
    j["final_residual"] = distance(t.images.back(), t.points.back());
    j["final_point"] = to_json(t.points.back());
    return j;
}

inline std::vector<Verdict> run_checks(const Trace& t, const std::vector<CheckRequest>& checks,
                                       const CheckContext& ctx, std::vector<PlotSeries>* plots) {
    std::vector<Verdict> out;
    for (const auto& c : checks) {
        PlotSeries p;
        out.push_back(run_check(t, c, ctx, plots ? &p : nullptr));
        if (plots && !p.rows.empty()) {
            plots->push_back(std::move(p));
        }
    }
    return out;
}

inline void write_plots(const std::vector<PlotSeries>& plots, const std::filesystem::path& out_dir,
                        RunReport& report, ordered_json& artifacts) {
    ordered_json names = ordered_json::array();
    for (std::size_t i = 0; i < plots.size(); ++i) {
        const std::string name = "plot_" + std::to_string(i) + "_" + plots[i].check + ".csv";
        write_file_atomic(out_dir / name, plot_csv(plots[i]));
        report.artifacts.push_back(out_dir / name);
        names.push_back(name);
    }
    artifacts["plot_data"] = std::move(names);
}

}  // namespace detail

/// Executes a scenario, writes the trace and report.json into `out_dir`,
/// and returns the report. Deterministic for a given scenario and seed.
inline RunReport run_scenario(const Scenario& s, const std::filesystem::path& out_dir, const RunOptions& opt = {}) {
    std::filesystem::create_directories(out_dir);
    std::optional<Verdict> regularized;
    const Trace trace = run_engine(s, &regularized);

    CheckContext ctx;
    ctx.op = s.op;
    ctx.domain = s.domain;
    ctx.probes = s.probes;
    ctx.declared_weak_limit = s.declared_weak_limit;
    ctx.window = s.window;
    ctx.tolerances = s.tolerances;
    ctx.seed = opt.seed_override.value_or(s.seed);
    ctx.dense_dim = s.dense_dim;

    RunReport report;
    std::vector<PlotSeries> plots;
    if (regularized) {
        report.verdicts.push_back(*regularized);
    }
    for (auto& v : detail::run_checks(trace, s.checks, ctx, opt.plot_data ? &plots : nullptr)) {
        report.verdicts.push_back(std::move(v));
    }

    const std::string trace_name = trace_is_dense(trace) ? "trace.csv" : "trace.jsonl";
    write_file_atomic(out_dir / trace_name, export_trace(trace));
    report.artifacts.push_back(out_dir / trace_name);

    ordered_json artifacts;
    artifacts["trace"] = trace_name;
    artifacts["report"] = "report.json";
    if (opt.plot_data) {
        detail::write_plots(plots, out_dir, report, artifacts);
    }

    auto& doc = report.document;
    doc["scenario"] = s.source;
    doc["seed"] = ctx.seed;
    doc["trace"] = detail::trace_summary(trace);
    doc["verdicts"] = ordered_json::array();
    for (const auto& v : report.verdicts) {
        doc["verdicts"].push_back(to_json(v));
    }
    doc["artifacts"] = std::move(artifacts);
    write_file_atomic(out_dir / "report.json", dump_json(doc));
    report.artifacts.push_back(out_dir / "report.json");
    return report;
}

inline RunReport run_scenario(const std::filesystem::path& path, const std::filesystem::path& out_dir,
                              const RunOptions& opt = {}) {
    return run_scenario(parse_scenario_text(read_file(path)), out_dir, opt);
}

/// Runs diagnostics on an exported trace without re-running an engine.
inline RunReport check_trace(const std::filesystem::path& trace_path, const std::vector<CheckRequest>& checks,
                             const CheckContext& ctx) {
    const Trace trace = import_trace(read_file(trace_path));
    RunReport report;
    report.verdicts = detail::run_checks(trace, checks, ctx, nullptr);
    auto& doc = report.document;
    doc["trace_file"] = trace_path.filename().string();
    doc["trace"] = detail::trace_summary(trace);
    doc["verdicts"] = ordered_json::array();
    for (const auto& v : report.verdicts) {
        doc["verdicts"].push_back(to_json(v));
    }
    return report;
}

}  // namespace opialiter
