#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "opialiter/diagnostics.hpp"
#include "opialiter/domains.hpp"
#include "opialiter/engines.hpp"
#include "opialiter/errors.hpp"
#include "opialiter/operators.hpp"
#include "opialiter/space.hpp"
#include "opialiter/verdict.hpp"

namespace opialiter {

struct Expectation {
    std::string quantity;
    double value;
    double tolerance;
};

/// What a case computes: measured quantities, plus sub-verdicts paired
/// with the status each is expected to have.
struct CaseMeasurement {
    std::vector<Witness> measured;
    std::vector<std::pair<Verdict, Status>> checks;

    void measure(std::string name, double value) { measured.push_back({std::move(name), value}); }
    void expect(Verdict v, Status s) { checks.emplace_back(std::move(v), s); }
};

struct NamedCase {
    std::string key;
    std::string description;
    std::vector<Expectation> expected;
    std::function<CaseMeasurement()> run;
};

/// Length of the explicit l2 sequences.
inline constexpr std::size_t suite_sequence_length = 200;

namespace detail {

/// x_n for n = 1..N built by `term`.
template <class Term>
std::vector<Point> sequence(Term&& term, std::size_t count = suite_sequence_length) {
    std::vector<Point> xs;
    xs.reserve(count);
    for (std::size_t n = 1; n <= count; ++n) {
        xs.push_back(term(n));
    }
    return xs;
}

inline double max_abs_deviation(const std::vector<double>& values, double target) {
    double worst = 0.0;
    for (double v : values) {
        worst = std::max(worst, std::abs(v - target));
    }
    return worst;
}

inline CaseMeasurement lambda_empty_case() {
    CaseMeasurement m;
    const auto xs = sequence([](std::size_t n) { return Point::basis(n, n % 2 == 0 ? 1.0 : 2.0); });
    const TailWindow w = default_window(xs.size());
    const Point z = Point::basis(1) + Point::basis(2);

    std::size_t off_values = 0;
    double norm_lo = INFINITY;
    double norm_hi = 0.0;
    double identity_residual = 0.0;
    for (const auto& x : xs) {
        const double r = norm(x);
        off_values += (r == 1.0 || r == 2.0) ? 0 : 1;
        norm_lo = std::min(norm_lo, r);
        norm_hi = std::max(norm_hi, r);
        const double lhs = std::pow(distance(x, z), 2);
        const double rhs = r * r - 2.0 * inner_product(x, z) + std::pow(norm(z), 2);
        identity_residual = std::max(identity_residual, std::abs(lhs - rhs));
    }
    m.measure("norms_outside_{1,2}", static_cast<double>(off_values));
    m.measure("norm_min", norm_lo);
    m.measure("norm_max", norm_hi);
    m.measure("polarization_residual", identity_residual);
    for (const auto& probe : {Point::zero(), Point::basis(1), z}) {
        m.expect(lambda_membership(xs, probe, w, 1e-9), Status::fails);
    }
    m.expect(weak_limit_check(xs, Point::zero(), {1, 2}, w, 1e-12, 2.0), Status::holds);
    return m;
}

inline CaseMeasurement two_accumulation_points_case() {
    CaseMeasurement m;
    const auto xs = sequence([](std::size_t n) { return n % 2 == 0 ? Point::basis(n) : Point::basis(1); });
    const TailWindow w = default_window(xs.size());
    const Point e1 = Point::basis(1);

    std::vector<double> even;
    std::vector<double> odd;
    for (std::size_t n = 1; n <= xs.size(); ++n) {
        (n % 2 == 0 ? even : odd).push_back(distance(e1, xs[n - 1]));
    }
    m.measure("even_dist_deviation_from_sqrt2", max_abs_deviation(even, std::numbers::sqrt2));
    m.measure("odd_dist_max", max_abs_deviation(odd, 0.0));
    m.measure("norm_deviation_from_1", max_abs_deviation(distance_profile(xs, Point::zero()), 1.0));
    m.measure("psi_at_0", psi_estimate(xs, Point::zero(), w, 1e-9));
    const auto b = tail_bounds(distance_profile(xs, e1), w);
    m.measure("liminf_dist_e1", b.lo);
    m.measure("limsup_dist_e1", b.hi);
    m.expect(lambda_membership(xs, Point::zero(), w, 1e-9), Status::holds);
    m.expect(lambda_membership(xs, e1, w, 1e-9), Status::fails);
    return m;
}

inline CaseMeasurement sharp_discontinuous_case() {
    CaseMeasurement m;
    const Operator f = Operator::half_radial();
    const auto ys = sequence([](std::size_t n) { return Point::basis(n); });
    const TailWindow w = default_window(ys.size());
    m.measure("image_gap_e5", distance(f(Point::basis(5)), f(Point::zero())));
    // Points arbitrarily close to 0 still map to the sphere of radius 1/2.
    m.measure("image_norm_near_0", norm(f(Point::basis(1, 1e-300))));
    const auto v = sharp_check(f, ys, Point::zero(), w, 1e-12);
    m.measure("liminf_image_gap", v.find("liminf_image_gap").value_or(NAN));
    m.measure("liminf_gap", v.find("liminf_gap").value_or(NAN));
    m.expect(v, Status::holds);
    return m;
}

inline CaseMeasurement rotation_picard_vs_mann_case() {
    CaseMeasurement m;
    const Operator f = Operator::rotation(std::numbers::pi / 2.0);
    const auto domain = ConvexDomain::ball(Point::zero(2), 1.0);
    const Point x0 = Point::dense({1.0, 0.0});
    const std::size_t steps = 200;

    const Trace picard = picard_run(f, x0, domain, steps, 0.0);
    const TailWindow w = default_window(picard.size() - 1);
    m.measure("picard_step_deviation_from_sqrt2", max_abs_deviation(ar_profile(picard), std::numbers::sqrt2));
    m.expect(ar_check(picard.points, w, 1e-8), Status::fails);

    const Trace mann = mann_run(f, 0.5, x0, domain, steps, 0.0);
    m.measure("mann_limit_norm", norm(mann.points.back()));
    m.measure("mann_final_residual", residual_profile(mann).back());
    m.expect(ar_check(mann.points, w, 1e-8), Status::holds);
    m.expect(fejer_monitor(mann.points, Point::zero()), Status::holds);
    return m;
}

inline CaseMeasurement opial_orthonormal_case() {
    CaseMeasurement m;
    const auto xs = sequence([](std::size_t n) { return Point::basis(n); });
    const TailWindow w = default_window(xs.size());
    const std::vector<Point> probes = {Point::basis(1), Point::basis(1) + Point::basis(2), Point::zero()};
    const auto v = opial_probe(xs, Point::zero(), probes, w);
    m.measure("liminf_dist_to_limit", v.find("liminf_dist_to_limit").value_or(NAN));
    m.measure("liminf_dist_e1", v.find("liminf_dist_probe[0]").value_or(NAN));
    m.expect(v, Status::holds);
    m.expect(weak_limit_check(xs, Point::zero(), {1, 2}, w, 1e-12, 1.0), Status::holds);
    return m;
}

inline CaseMeasurement flat_nonexpansive_case() {
    CaseMeasurement m;
    const auto ball = ConvexDomain::ball(Point::zero(2), 1.0);
    const double d_m = diameter(ball);
    const Operator rotation = Operator::rotation(std::numbers::pi / 2.0);
    const Trace picard = picard_run(rotation, Point::dense({1.0, 0.0}), ball, 200, 0.0);
    const TailWindow w = default_window(picard.size() - 1);
    m.expect(flat_check(rotation, picard.points, 0.5, d_m, w), Status::not_triggered);

    // Synthetic trace alternating +-e_1/2 fed through x -> 2x: A = 1, B = 2, C = 3/2.
    const Operator doubling = Operator::scaling(2.0);
    std::vector<Point> alternating;
    for (std::size_t n = 0; n < 200; ++n) {
        alternating.push_back(Point::dense({n % 2 == 0 ? 0.5 : -0.5, 0.0}));
    }
    const auto loose = flat_check(doubling, alternating, 0.5, d_m, w);
    m.measure("A", loose.find("A").value_or(NAN));
    m.measure("B", loose.find("B").value_or(NAN));
    m.measure("C", loose.find("C").value_or(NAN));
    m.expect(loose, Status::holds);
    m.expect(flat_check(doubling, alternating, 0.9, d_m, w), Status::fails);
    return m;
}

}  // namespace detail

inline const std::vector<NamedCase>& case_catalog() {
    static const std::vector<NamedCase> cases = {
        {"lambda-empty",
         "x_n = e_n (n even), 2 e_n (n odd) in l2: norms alternate 1, 2 so no z has a limiting distance",
         {{"norms_outside_{1,2}", 0.0, 0.5},
          {"norm_min", 1.0, 1e-12},
          {"norm_max", 2.0, 1e-12},
          {"polarization_residual", 0.0, 1e-12}},
         detail::lambda_empty_case},
        {"two-accumulation-points",
         "x_n = e_n (n even), e_1 (n odd): 0 is in Lambda, the second accumulation point e_1 is not",
         {{"even_dist_deviation_from_sqrt2", 0.0, 1e-12},
          {"odd_dist_max", 0.0, 1e-12},
          {"norm_deviation_from_1", 0.0, 1e-12},
          {"psi_at_0", 1.0, 1e-9},
          {"liminf_dist_e1", 0.0, 1e-9},
          {"limsup_dist_e1", std::numbers::sqrt2, 1e-9}},
         detail::two_accumulation_points_case},
        {"sharp-discontinuous",
         "half_radial along y_n = e_n -> 0: liminf image gap 1/2 against liminf gap 1",
         {{"image_gap_e5", 0.5, 1e-12},
          {"image_norm_near_0", 0.5, 1e-12},
          {"liminf_image_gap", 0.5, 1e-9},
          {"liminf_gap", 1.0, 1e-9}},
         detail::sharp_discontinuous_case},
        {"rotation-picard-vs-mann",
         "quarter-turn rotation: Picard steps stay at sqrt(2), Mann with tau = 1/2 converges to 0",
         {{"picard_step_deviation_from_sqrt2", 0.0, 1e-12},
          {"mann_limit_norm", 0.0, 1e-8},
          {"mann_final_residual", 0.0, 1e-8}},
         detail::rotation_picard_vs_mann_case},
        {"opial-orthonormal",
         "x_n = e_n with weak limit 0: liminf distance 1 to the limit, sqrt(2) to e_1",
         {{"liminf_dist_to_limit", 1.0, 1e-12}, {"liminf_dist_e1", std::numbers::sqrt2, 1e-12}},
         detail::opial_orthonormal_case},
        {"flat-nonexpansive",
         "(flat) premise never fires for a nonexpansive trace; x -> 2x on +-e_1/2 triggers it",
         {{"A", 1.0, 1e-12}, {"B", 2.0, 1e-12}, {"C", 1.5, 1e-12}},
         detail::flat_nonexpansive_case},
    };
    return cases;
}

inline const NamedCase& find_case(const std::string& key) {
    const auto& cases = case_catalog();
    const auto it = std::find_if(cases.begin(), cases.end(), [&](const NamedCase& c) { return c.key == key; });
    if (it == cases.end()) {
        std::string keys;
        for (const auto& c : cases) {
            keys += (keys.empty() ? "" : ", ") + c.key;
        }
        throw LookupError("unknown case \"" + key + "\"; available: " + keys);
    }
    return *it;
}

/// Runs one case and compares every measured quantity and sub-verdict with
/// its expectation. Witnesses carry the measured values.
inline Verdict run_case(const NamedCase& c) {
    const CaseMeasurement m = c.run();
    Verdict v;
    v.check = c.key;
    v.threshold = 0.0;
    bool ok = true;
    for (const auto& e : c.expected) {
        v.threshold = std::max(v.threshold, e.tolerance);
        const auto it = std::find_if(m.measured.begin(), m.measured.end(),
                                     [&](const Witness& w) { return w.name == e.quantity; });
        if (it == m.measured.end()) {
            ok = false;
            v.notes.push_back(e.quantity + " was not measured");
            continue;
        }
        v.witness(e.quantity, it->value);
        if (!(std::abs(it->value - e.value) <= e.tolerance)) {
            ok = false;
            v.notes.push_back(e.quantity + " expected " + std::to_string(e.value));
        }
    }
    for (const auto& [sub, expected] : m.checks) {
        if (sub.status != expected) {
            ok = false;
            v.notes.push_back(sub.check + " was " + to_string(sub.status) + ", expected " + to_string(expected));
        }
    }
    v.status = ok ? Status::holds : Status::fails;
    return v;
}

inline Verdict run_case(const std::string& key) { return run_case(find_case(key)); }

inline std::vector<Verdict> run_suite() {
    std::vector<Verdict> out;
    for (const auto& c : case_catalog()) {
        out.push_back(run_case(c));
    }
    return out;
}

}  // namespace opialiter
