#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "opialiter/domains.hpp"
#include "opialiter/errors.hpp"
#include "opialiter/operators.hpp"
#include "opialiter/space.hpp"
#include "opialiter/verdict.hpp"

namespace opialiter {

/// Iterates may leave the domain by at most this much (round-off).
inline constexpr double domain_escape_tolerance = 1e-9;

/// eps_n = eps0 * rho^n for n = 0 .. count-1.
struct EpsSchedule {
    double eps0;
    double rho;
    std::size_t count;

    double at(std::size_t n) const { return eps0 * std::pow(rho, static_cast<double>(n)); }

    /// Throws unless eps0, rho in (0,1), count >= 1, and (when given) every
    /// eps_n < delta.
    void validate(std::optional<double> delta = std::nullopt) const {
        if (!(eps0 > 0.0 && eps0 < 1.0)) {
            throw ValidationError("eps0", "must lie in (0,1)");
        }
        if (!(rho > 0.0 && rho < 1.0)) {
            throw ValidationError("rho", "must lie in (0,1)");
        }
        if (count == 0) {
            throw ValidationError("count", "must be at least 1");
        }
        // The schedule is decreasing, so eps0 is the largest term.
        if (delta && !(eps0 < *delta)) {
            throw ValidationError("eps0", "must be below delta");
        }
    }
};

struct PicardScheme {};
struct MannScheme {
    double tau;
};
struct RegularizedScheme {
    EpsSchedule schedule;
};
/// A trace read back from disk; the producing scheme is not recorded.
struct ImportedScheme {};
using Scheme = std::variant<PicardScheme, MannScheme, RegularizedScheme, ImportedScheme>;

inline std::string scheme_name(const Scheme& s) {
    static constexpr const char* names[] = {"picard", "mann", "regularized", "imported"};
    return names[s.index()];
}

enum class StopReason { max_iter, tolerance, schedule_complete, imported };

inline const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::max_iter:
            return "max_iter";
        case StopReason::tolerance:
            return "tolerance";
        case StopReason::schedule_complete:
            return "schedule_complete";
        case StopReason::imported:
            return "imported";
    }
    return "imported";
}

/// A recorded orbit x_0 .. x_N together with f(x_0) .. f(x_N).
struct Trace {
    std::vector<Point> points;
    std::vector<Point> images;
    Scheme scheme = PicardScheme{};
    StopReason stop_reason = StopReason::max_iter;
    std::optional<Point> declared_weak_limit;
    std::optional<ConvexDomain> domain;

    std::size_t size() const noexcept { return points.size(); }
};

namespace detail {

inline double distance_to(const ConvexDomain& d, const Point& x) {
    return std::visit(
        [&](const auto& k) -> double {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, ConvexDomain::Ball>) {
                return std::max(0.0, distance(x, k.center) - k.radius);
            } else if constexpr (std::is_same_v<K, ConvexDomain::WholeSpaceSparse>) {
                return std::max(0.0, norm(x) - k.radius_bound);
            } else {
                if ((x.dim() && *x.dim() != k.dim) || x.support_end() > k.dim) {
                    throw DimensionMismatch("iterate does not live in R^" + std::to_string(k.dim));
                }
                return distance(project(d, x), x);
            }
        },
        d.kind());
}

inline void require_inside(const ConvexDomain& d, const Point& x, std::size_t step) {
    const double gap = distance_to(d, x);
    if (gap > domain_escape_tolerance) {
        throw DomainEscape(step, gap);
    }
}

template <class Step>
Trace run_scheme(const Operator& f, const Point& x0, const ConvexDomain& domain, std::size_t max_iter,
                 double stop_tol, Scheme scheme, Step&& step) {
    if (max_iter == 0) {
        throw ValidationError("max_iter", "must be at least 1");
    }
    if (!(stop_tol >= 0.0)) {
        throw ValidationError("stop_tol", "must be non-negative");
    }
    require_inside(domain, x0, 0);
    Trace t;
    t.scheme = std::move(scheme);
    t.domain = domain;
    t.points.reserve(max_iter + 1);
    t.images.reserve(max_iter + 1);
    t.points.push_back(x0);
    for (std::size_t n = 0; n < max_iter; ++n) {
        const Point& x = t.points.back();
        t.images.push_back(f(x));
        Point next = step(x, t.images.back());
        require_inside(domain, next, n + 1);
        const double moved = distance(next, x);
        t.points.push_back(std::move(next));
        if (stop_tol > 0.0 && moved <= stop_tol) {
            t.stop_reason = StopReason::tolerance;
            break;
        }
    }
    t.images.push_back(f(t.points.back()));
    return t;
}

}  // namespace detail

/// x_{n+1} = f(x_n). Stops after `max_iter` steps or once a step is no
/// longer than `stop_tol`; stop_tol = 0 disables the tolerance test.
inline Trace picard_run(const Operator& f, const Point& x0, const ConvexDomain& domain, std::size_t max_iter,
                        double stop_tol) {
    return detail::run_scheme(f, x0, domain, max_iter, stop_tol, PicardScheme{},
                              [](const Point&, const Point& fx) { return fx; });
}

/// x_{n+1} = tau x_n + (1 - tau) f(x_n). `images` keeps f(x_n), not the
/// relaxed value.
inline Trace mann_run(const Operator& f, double tau, const Point& x0, const ConvexDomain& domain,
                      std::size_t max_iter, double stop_tol) {
    if (!(tau > 0.0 && tau < 1.0)) {
        throw ValidationError("tau", "must lie in (0,1)");
    }
    return detail::run_scheme(f, x0, domain, max_iter, stop_tol, MannScheme{tau},
                              [tau](const Point& x, const Point& fx) { return combine(tau, x, 1.0 - tau, fx); });
}

struct RegularizedStep {
    double eps;
    Point xi;
    double residual;
    double bound;
    std::size_t inner_iterations;
    bool inner_converged;
};

struct RegularizedResult {
    std::vector<RegularizedStep> steps;
    Verdict verdict;
    /// The xi_n as a trace, with images f(xi_n).
    Trace trace;
};

/// For each eps_n, solves xi = (1 - eps_n) f(xi) + eps_n z by Picard
/// iteration warm-started from the previous xi (the first from z), and
/// checks ||f(xi_n) - xi_n|| <= eps_n d_M + 10 inner_tol.
///
/// The inner map is a (1 - eps_n)-contraction whenever f is nonexpansive;
/// in that case failing to meet `inner_tol` within `inner_max` steps throws
/// NonConvergence. For other maps the unconverged step is recorded and the
/// verdict notes it.
inline RegularizedResult regularized_solve(const Operator& f, const Point& z, const ConvexDomain& domain,
                                           const EpsSchedule& schedule, std::size_t inner_max, double inner_tol,
                                           std::optional<double> delta = std::nullopt) {
    schedule.validate(delta);
    if (inner_max == 0) {
        throw ValidationError("inner_max", "must be at least 1");
    }
    if (!(inner_tol > 0.0)) {
        throw ValidationError("inner_tol", "must be positive");
    }
    detail::require_inside(domain, z, 0);

    const double d_m = diameter(domain);
    RegularizedResult out;
    out.verdict.check = "regularized_bound";
    out.verdict.threshold = 10.0 * inner_tol;
    out.trace.scheme = RegularizedScheme{schedule};
    out.trace.stop_reason = StopReason::schedule_complete;
    out.trace.domain = domain;

    Point xi = z;
    bool all_within = true;
    double worst_excess = -d_m;
    for (std::size_t n = 0; n < schedule.count; ++n) {
        const double eps = schedule.at(n);
        std::size_t k = 0;
        bool converged = false;
        while (k < inner_max) {
            Point next = combine(1.0 - eps, f(xi), eps, z);
            ++k;
            detail::require_inside(domain, next, k);
            const double moved = distance(next, xi);
            xi = std::move(next);
            if (moved <= inner_tol) {
                converged = true;
                break;
            }
        }
        if (!converged) {
            if (f.nonexpansive()) {
                throw NonConvergence("inner solve for eps_" + std::to_string(n) + " = " + std::to_string(eps) +
                                     " missed tolerance " + std::to_string(inner_tol) + " after " +
                                     std::to_string(inner_max) + " steps");
            }
            out.verdict.notes.push_back("inner solve " + std::to_string(n) + " hit inner_max");
        }
        const Point fxi = f(xi);
        const double residual = distance(fxi, xi);
        const double bound = eps * d_m + 10.0 * inner_tol;
        all_within = all_within && residual <= bound;
        worst_excess = std::max(worst_excess, residual - bound);
        out.steps.push_back({eps, xi, residual, bound, k, converged});
        out.trace.points.push_back(xi);
        out.trace.images.push_back(fxi);
        out.verdict.witness("residual[" + std::to_string(n) + "]", residual);
    }
    out.verdict.witness("max_excess_over_bound", worst_excess);
    out.verdict.witness("diameter", d_m);
    out.verdict.notes.push_back("inner solves are warm-started from the previous xi");
    out.verdict.status = all_within ? Status::holds : Status::fails;
    return out;
}

}  // namespace opialiter
