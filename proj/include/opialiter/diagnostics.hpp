#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "opialiter/engines.hpp"
#include "opialiter/errors.hpp"
#include "opialiter/operators.hpp"
#include "opialiter/space.hpp"
#include "opialiter/verdict.hpp"

// Tail-window estimators and checkers for the asymptotic conditions.
//
// Every lim inf / lim sup is replaced by the min / max over the last
// `window` entries of the relevant sequence; verdicts are statements about
// the supplied run, not certificates for the operator.

namespace opialiter {

struct TailBounds {
    double lo;
    double hi;
};

inline void require_window(std::size_t length, const TailWindow& w) {
    if (w.window < 2) {
        throw ValidationError("window", "must be at least 2");
    }
    if (w.burn_in + w.window > length) {
        throw InsufficientData("sequence of length " + std::to_string(length) + " is shorter than burn_in " +
                               std::to_string(w.burn_in) + " + window " + std::to_string(w.window));
    }
}

inline std::span<const double> tail(std::span<const double> seq, const TailWindow& w) {
    require_window(seq.size(), w);
    return seq.subspan(seq.size() - w.window);
}

inline TailBounds tail_bounds(std::span<const double> seq, const TailWindow& w) {
    const auto t = tail(seq, w);
    const auto [lo, hi] = std::minmax_element(t.begin(), t.end());
    return {*lo, *hi};
}

inline double tail_mean(std::span<const double> seq, const TailWindow& w) {
    const auto t = tail(seq, w);
    const auto [lo, hi] = std::minmax_element(t.begin(), t.end());
    // Rounding in the sum can push the mean an ulp outside [lo, hi].
    return std::clamp(std::accumulate(t.begin(), t.end(), 0.0) / static_cast<double>(t.size()), *lo, *hi);
}

/// ||x_n - z|| for every n.
inline std::vector<double> distance_profile(std::span<const Point> points, const Point& z) {
    std::vector<double> out;
    out.reserve(points.size());
    for (const auto& x : points) {
        out.push_back(distance(x, z));
    }
    return out;
}

/// ||x_{n+1} - x_n||.
inline std::vector<double> ar_profile(std::span<const Point> points) {
    if (points.size() < 2) {
        throw InsufficientData("asymptotic regularity needs at least two points");
    }
    std::vector<double> out;
    out.reserve(points.size() - 1);
    for (std::size_t n = 0; n + 1 < points.size(); ++n) {
        out.push_back(distance(points[n + 1], points[n]));
    }
    return out;
}

inline std::vector<double> ar_profile(const Trace& t) { return ar_profile(std::span<const Point>(t.points)); }

/// Asymptotic regularity: holds iff the tail max of the step norms is <= tol.
inline Verdict ar_check(std::span<const Point> points, const TailWindow& w, double tol) {
    const auto steps = ar_profile(points);
    const auto b = tail_bounds(steps, w);
    Verdict v;
    v.check = "ar";
    v.threshold = tol;
    v.window = w;
    v.witness("step_lo", b.lo).witness("step_hi", b.hi);
    v.status = b.hi <= tol ? Status::holds : Status::fails;
    return v;
}

/// ||f(x_n) - x_n||, read from the cached images.
inline std::vector<double> residual_profile(const Trace& t) {
    std::vector<double> out;
    out.reserve(t.points.size());
    for (std::size_t n = 0; n < t.points.size() && n < t.images.size(); ++n) {
        out.push_back(distance(t.images[n], t.points[n]));
    }
    return out;
}

/// Holds iff the tail max of the residuals is <= tol.
inline Verdict residual_check(const Trace& t, const TailWindow& w, double tol) {
    const auto r = residual_profile(t);
    const auto b = tail_bounds(r, w);
    Verdict v;
    v.check = "residual";
    v.threshold = tol;
    v.window = w;
    v.witness("residual_lo", b.lo).witness("residual_hi", b.hi).witness("final_residual", r.back());
    v.status = b.hi <= tol ? Status::holds : Status::fails;
    return v;
}

/// z is in Lambda (lim ||x_n - z|| exists) iff the tail spread of
/// ||x_n - z|| is at most tol.
inline Verdict lambda_membership(std::span<const Point> points, const Point& z, const TailWindow& w, double tol) {
    const auto a = distance_profile(points, z);
    const auto b = tail_bounds(a, w);
    Verdict v;
    v.check = "lambda";
    v.threshold = tol;
    v.window = w;
    v.witness("lo", b.lo).witness("hi", b.hi);
    v.status = b.hi - b.lo <= tol ? Status::holds : Status::fails;
    return v;
}

/// Tail mean of ||x_n - z||; z must pass lambda_membership at `tol`.
inline double psi_estimate(std::span<const Point> points, const Point& z, const TailWindow& w, double tol) {
    if (!lambda_membership(points, z, w, tol).holds()) {
        throw NotInLambda("lim ||x_n - z|| does not settle within " + std::to_string(tol) + " over the tail");
    }
    return tail_mean(distance_profile(points, z), w);
}

struct OpialOptions {
    double lambda_tol = 1e-8;
    double margin = 1e-9;
};

/// For each probe z != w: lim inf ||x_n - w|| < lim inf ||x_n - z|| with a
/// positive margin; for probes that are in Lambda (and w too), also
/// psi(w) < psi(z).
inline Verdict opial_probe(std::span<const Point> points, const Point& limit, std::span<const Point> probes,
                           const TailWindow& w, const OpialOptions& opt = {}) {
    Verdict v;
    v.check = "opial";
    v.threshold = opt.margin;
    v.window = w;
    const double at_limit = tail_bounds(distance_profile(points, limit), w).lo;
    v.witness("liminf_dist_to_limit", at_limit);
    const bool limit_in_lambda = lambda_membership(points, limit, w, opt.lambda_tol).holds();
    std::optional<double> psi_limit;
    if (limit_in_lambda) {
        psi_limit = tail_mean(distance_profile(points, limit), w);
        v.witness("psi_limit", *psi_limit);
    }
    std::vector<Status> parts;
    for (std::size_t i = 0; i < probes.size(); ++i) {
        const auto& z = probes[i];
        const std::string tag = "probe[" + std::to_string(i) + "]";
        if (z == limit) {
            v.notes.push_back(tag + " equals the limit; skipped");
            continue;
        }
        const double at_probe = tail_bounds(distance_profile(points, z), w).lo;
        v.witness("liminf_dist_" + tag, at_probe);
        parts.push_back(strict_less(at_limit, at_probe, opt.margin));
        if (psi_limit && lambda_membership(points, z, w, opt.lambda_tol).holds()) {
            const double psi_z = tail_mean(distance_profile(points, z), w);
            v.witness("psi_" + tag, psi_z);
            parts.push_back(strict_less(*psi_limit, psi_z, opt.margin));
        }
    }
    if (parts.empty()) {
        v.status = Status::not_triggered;
        v.notes.push_back("no probe distinct from the limit");
        return v;
    }
    v.status = all_of(parts);
    return v;
}

/// Condition (sharp) along one declared weakly convergent sequence:
/// lim inf ||f(y_n) - f(y)|| <= lim inf ||y_n - y|| + tol.
inline Verdict sharp_check(const Operator& f, std::span<const Point> y_seq, const Point& y, const TailWindow& w,
                           double tol) {
    std::vector<double> image_gap;
    image_gap.reserve(y_seq.size());
    const Point fy = f(y);
    for (const auto& yn : y_seq) {
        image_gap.push_back(distance(f(yn), fy));
    }
    const double lhs = tail_bounds(image_gap, w).lo;
    const double rhs = tail_bounds(distance_profile(y_seq, y), w).lo;
    Verdict v;
    v.check = "sharp";
    v.threshold = tol;
    v.window = w;
    v.witness("liminf_image_gap", lhs).witness("liminf_gap", rhs);
    v.status = lhs <= rhs + tol ? Status::holds : Status::fails;
    return v;
}

/// Condition (flat) along one trace. With A = lim sup ||y_{n+1} - y_n||,
/// B = lim sup ||f(y_{n+1}) - f(y_n)|| and C = lim sup ||y_{n+1} - f(y_n)||:
/// not_triggered unless 0 < A < B (each by more than `margin`); otherwise
/// holds iff C > delta d_M.
inline Verdict flat_check(const Operator& f, std::span<const Point> points, double delta, double d_m,
                          const TailWindow& w, double margin = 1e-9) {
    if (!(delta > 0.0 && delta < 1.0)) {
        throw ValidationError("delta", "must lie in (0,1)");
    }
    if (points.size() < 2) {
        throw InsufficientData("flat check needs at least two points");
    }
    std::vector<Point> images;
    images.reserve(points.size());
    for (const auto& y : points) {
        images.push_back(f(y));
    }
    std::vector<double> a, b, c;
    for (std::size_t n = 0; n + 1 < points.size(); ++n) {
        a.push_back(distance(points[n + 1], points[n]));
        b.push_back(distance(images[n + 1], images[n]));
        c.push_back(distance(points[n + 1], images[n]));
    }
    const double big_a = tail_bounds(a, w).hi;
    const double big_b = tail_bounds(b, w).hi;
    const double big_c = tail_bounds(c, w).hi;
    Verdict v;
    v.check = "flat";
    v.threshold = delta * d_m;
    v.window = w;
    v.witness("A", big_a).witness("B", big_b).witness("C", big_c);
    const bool expanding = big_a > margin && big_b - big_a > margin;
    if (!expanding) {
        v.status = Status::not_triggered;
        v.notes.push_back("premise 0 < A < B fails on this trace");
        return v;
    }
    // C > delta d_M is the claim; it holds when C clears the threshold.
    v.status = strict_less(v.threshold, big_c, margin);
    return v;
}

/// Quasi-Fejer monotonicity: ||x_{n+1} - y|| <= ||x_n - y|| + eta_n + slack
/// for every n. Missing eta entries count as 0.
inline Verdict fejer_monitor(std::span<const Point> points, const Point& y, std::span<const double> eta,
                             double slack = 1e-12) {
    for (std::size_t i = 0; i < eta.size(); ++i) {
        if (!(eta[i] >= 0.0)) {
            throw ValidationError("eta[" + std::to_string(i) + "]", "must be non-negative");
        }
    }
    Verdict v;
    v.check = "fejer";
    v.threshold = slack;
    const auto d = distance_profile(points, y);
    std::optional<std::size_t> first;
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n + 1 < d.size(); ++n) {
        const double e = n < eta.size() ? eta[n] : 0.0;
        const double excess = d[n + 1] - d[n] - e;
        worst = std::max(worst, excess);
        if (!first && excess > slack) {
            first = n;
        }
    }
    v.witness("eta_sum", std::accumulate(eta.begin(), eta.end(), 0.0));
    if (d.size() > 1) {
        v.witness("max_excess", worst);
    }
    if (first) {
        v.witness("first_violation", static_cast<double>(*first));
        v.status = Status::fails;
    } else {
        v.status = Status::holds;
    }
    return v;
}

inline Verdict fejer_monitor(std::span<const Point> points, const Point& y, double slack = 1e-12) {
    return fejer_monitor(points, y, std::span<const double>{}, slack);
}

/// Necessary conditions for a declared weak limit: the tail norms are
/// bounded by `norm_bound`, and on every coordinate in `coords` (plus the
/// support of the limit) the tail entries lie within tol of the limit's.
inline Verdict weak_limit_check(std::span<const Point> points, const Point& limit, std::set<std::size_t> coords,
                                const TailWindow& w, double tol, double norm_bound) {
    Verdict v;
    v.check = "weak_limit";
    v.threshold = tol;
    v.window = w;
    require_window(points.size(), w);
    const auto t = points.subspan(points.size() - w.window);
    double max_norm = 0.0;
    for (const auto& x : t) {
        max_norm = std::max(max_norm, norm(x));
    }
    for (const auto& [i, value] : limit.coords()) {
        coords.insert(i);
    }
    double worst = 0.0;
    for (auto i : coords) {
        for (const auto& x : t) {
            worst = std::max(worst, std::abs(x[i] - limit[i]));
        }
    }
    v.witness("tail_max_norm", max_norm).witness("max_coordinate_gap", worst);
    v.witness("coordinates_checked", static_cast<double>(coords.size()));
    v.status = (max_norm <= norm_bound && worst <= tol) ? Status::holds : Status::fails;
    return v;
}

/// In dense mode weak and strong limits coincide: returns the last point
/// when every tail point lies within tol of it.
inline std::optional<Point> detect_limit(std::span<const Point> points, const TailWindow& w, double tol) {
    require_window(points.size(), w);
    const Point& last = points.back();
    for (std::size_t n = points.size() - w.window; n < points.size(); ++n) {
        if (distance(points[n], last) > tol) {
            return std::nullopt;
        }
    }
    return last;
}

}  // namespace opialiter
