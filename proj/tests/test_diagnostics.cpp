#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "generators.hpp"
#include "opialiter/diagnostics.hpp"
#include "oracles.hpp"

using namespace opialiter;

namespace {

const double quarter_turn = std::numbers::pi / 2.0;
const double sqrt2 = std::numbers::sqrt2;

ConvexDomain unit_ball() { return ConvexDomain::ball(Point::zero(2), 1.0); }

template <class Term>
std::vector<Point> points(std::size_t count, Term term) {
    std::vector<Point> out;
    for (std::size_t n = 1; n <= count; ++n) {
        out.push_back(term(n));
    }
    return out;
}

std::vector<Point> halving_to_zero(std::size_t count) {
    return points(count, [](std::size_t n) { return Point::dense({std::ldexp(1.0, -static_cast<int>(n)), 0.0}); });
}

std::vector<Point> orthonormal(std::size_t count) {
    return points(count, [](std::size_t n) { return Point::basis(n); });
}

Trace mann_rotation(std::size_t steps) {
    return mann_run(Operator::rotation(quarter_turn), 0.5, Point::dense({1.0, 0.0}), unit_ball(), steps, 0.0);
}

const TailWindow last_ten{0, 10};

}  // namespace

TEST(TailBounds, Examples) {
    std::vector<double> osc, constant, decay;
    for (int n = 0; n < 60; ++n) {
        osc.push_back(1.0 + (n % 2 ? -0.5 : 0.5));
        constant.push_back(3.0);
        decay.push_back(std::ldexp(1.0, -n));
    }
    const auto b = tail_bounds(osc, last_ten);
    EXPECT_EQ(b.lo, 0.5);
    EXPECT_EQ(b.hi, 1.5);
    const auto c = tail_bounds(constant, last_ten);
    EXPECT_EQ(c.lo, 3.0);
    EXPECT_EQ(c.hi, 3.0);
    const std::vector<double> first30(decay.begin(), decay.begin() + 30);
    EXPECT_LE(tail_bounds(first30, {20, 10}).hi, std::ldexp(1.0, -20));
}

TEST(TailBounds, InsufficientDataAndBadWindow) {
    const std::vector<double> seq(5, 1.0);
    EXPECT_THROW(tail_bounds(seq, {0, 6}), InsufficientData);
    EXPECT_THROW(tail_bounds(seq, {4, 2}), InsufficientData);
    EXPECT_THROW(tail_bounds(seq, {0, 1}), ValidationError);
    EXPECT_NO_THROW(tail_bounds(seq, {3, 2}));
}

TEST(TailWindow, DefaultShape) {
    EXPECT_EQ(default_window(1000).window, 100u);
    EXPECT_EQ(default_window(1000).burn_in, 500u);
    EXPECT_EQ(default_window(200).window, 50u);
    EXPECT_GE(default_window(4).window, 2u);
}

TEST(ArProfile, PicardRotationIsConstantSqrt2) {
    const auto t = picard_run(Operator::rotation(quarter_turn), Point::dense({1.0, 0.0}), unit_ball(), 100, 0.0);
    for (double s : ar_profile(t)) {
        EXPECT_NEAR(s, sqrt2, 1e-12);
    }
    const auto v = ar_check(t.points, default_window(t.size() - 1), 1e-8);
    EXPECT_EQ(v.status, Status::fails);
    EXPECT_NEAR(*v.find("step_hi"), sqrt2, 1e-12);
}

TEST(ArProfile, MannRotationDecaysLikeClosedForm) {
    const auto t = mann_rotation(200);
    const auto steps = ar_profile(t);
    for (std::size_t n = 0; n < 40; ++n) {
        const double expected = std::pow(2.0, -0.5 * static_cast<double>(n)) * sqrt2 / 2.0;
        EXPECT_NEAR(steps[n], expected, 1e-15);
    }
    EXPECT_EQ(ar_check(t.points, default_window(steps.size()), 1e-8).status, Status::holds);
}

TEST(ArProfile, IdentityIsZero) {
    const auto t = picard_run(Operator::identity(), Point::dense({0.1, 0.2}), unit_ball(), 20, 0.0);
    for (double s : ar_profile(t)) {
        EXPECT_EQ(s, 0.0);
    }
    EXPECT_THROW(ar_profile(std::vector<Point>{Point::zero()}), InsufficientData);
}

TEST(ResidualProfile, Examples) {
    const auto line = ConvexDomain::box(Point::dense({-2.0}), Point::dense({2.0}));
    const auto halve = Operator::scaling(0.5);
    const auto t = picard_run(halve, Point::dense({1.0}), line, 30, 0.0);
    const auto r = residual_profile(t);
    for (std::size_t n = 0; n < r.size(); ++n) {
        EXPECT_EQ(r[n], std::ldexp(1.0, -static_cast<int>(n) - 1));
    }
    for (double v : residual_profile(picard_run(Operator::identity(), Point::dense({0.5}), line, 10, 0.0))) {
        EXPECT_EQ(v, 0.0);
    }
    const auto rot = picard_run(Operator::rotation(quarter_turn), Point::dense({0.0, 1.0}), unit_ball(), 20, 0.0);
    for (double v : residual_profile(rot)) {
        EXPECT_NEAR(v, sqrt2, 1e-12);
    }
}

TEST(LambdaMembership, OscillatingNormsFail) {
    const auto seq = points(200, [](std::size_t n) { return Point::basis(n, n % 2 ? 2.0 : 1.0); });
    const auto v = lambda_membership(seq, Point::zero(), default_window(seq.size()), 1e-8);
    EXPECT_EQ(v.status, Status::fails);
    EXPECT_EQ(*v.find("lo"), 1.0);
    EXPECT_EQ(*v.find("hi"), 2.0);
}

TEST(LambdaMembership, ConvergentDistanceHolds) {
    const auto seq = halving_to_zero(200);
    EXPECT_EQ(lambda_membership(seq, Point::dense({5.0, 0.0}), default_window(seq.size()), 1e-8).status,
              Status::holds);
}

TEST(LambdaMembership, TwoAccumulationPoints) {
    const auto seq = points(200, [](std::size_t n) { return n % 2 ? Point::basis(1) : Point::basis(n); });
    const auto v = lambda_membership(seq, Point::basis(1), default_window(seq.size()), 1e-8);
    EXPECT_EQ(v.status, Status::fails);
    EXPECT_EQ(*v.find("lo"), 0.0);
    EXPECT_EQ(*v.find("hi"), sqrt2);
    EXPECT_EQ(lambda_membership(seq, Point::zero(), default_window(seq.size()), 1e-8).status, Status::holds);
}

TEST(PsiEstimate, Examples) {
    const auto seq = halving_to_zero(200);
    const auto w = default_window(seq.size());
    EXPECT_NEAR(psi_estimate(seq, Point::dense({5.0, 0.0}), w, 1e-8), 5.0, 1e-6);

    const auto t = picard_run(Operator::affine_contraction(0.5, Point::dense({0.5, 0.0})), Point::dense({0.0, 0.0}),
                              ConvexDomain::ball(Point::dense({1.0, 0.0}), 2.0), 200, 0.0);
    EXPECT_NEAR(psi_estimate(t.points, Point::dense({1.0, 0.0}), default_window(t.size()), 1e-8), 0.0, 1e-12);

    const auto m = mann_rotation(200);
    EXPECT_NEAR(psi_estimate(m.points, Point::dense({1.0, 0.0}), default_window(m.size()), 1e-8), 1.0, 1e-12);
}

TEST(PsiEstimate, RequiresLambdaMembership) {
    const auto seq = points(200, [](std::size_t n) { return Point::basis(n, n % 2 ? 2.0 : 1.0); });
    EXPECT_THROW(psi_estimate(seq, Point::zero(), default_window(seq.size()), 1e-8), NotInLambda);
}

TEST(OpialProbe, ConvergentSequence) {
    const auto seq = halving_to_zero(200);
    const std::vector<Point> probes = {Point::dense({1.0, 0.0})};
    const auto v = opial_probe(seq, Point::zero(2), probes, default_window(seq.size()));
    EXPECT_EQ(v.status, Status::holds);
    EXPECT_NEAR(*v.find("liminf_dist_probe[0]"), 1.0, 1e-12);
}

TEST(OpialProbe, OrthonormalSequence) {
    const auto seq = orthonormal(200);
    const std::vector<Point> probes = {Point::basis(1)};
    const auto v = opial_probe(seq, Point::zero(), probes, default_window(seq.size()));
    EXPECT_EQ(v.status, Status::holds);
    EXPECT_EQ(*v.find("liminf_dist_to_limit"), 1.0);
    EXPECT_EQ(*v.find("liminf_dist_probe[0]"), sqrt2);
}

TEST(OpialProbe, ProbeAtTheLimitIsSkipped) {
    const auto seq = orthonormal(200);
    const std::vector<Point> probes = {Point::zero()};
    const auto v = opial_probe(seq, Point::zero(), probes, default_window(seq.size()));
    EXPECT_EQ(v.status, Status::not_triggered);
    EXPECT_FALSE(v.notes.empty());
    EXPECT_FALSE(v.find("liminf_dist_probe[0]"));
}

TEST(OpialProbe, TieIsInconclusive) {
    const std::vector<Point> seq(50, Point::zero(2));
    const std::vector<Point> probes = {Point::dense({-1.0, 0.0})};
    const auto v = opial_probe(seq, Point::dense({1.0, 0.0}), probes, default_window(seq.size()));
    EXPECT_EQ(v.status, Status::inconclusive);
}

TEST(OpialProbe, WrongLimitFails) {
    const auto seq = halving_to_zero(200);
    const std::vector<Point> probes = {Point::zero(2)};
    EXPECT_EQ(opial_probe(seq, Point::dense({1.0, 0.0}), probes, default_window(seq.size())).status, Status::fails);
}

TEST(SharpCheck, Examples) {
    const auto seq = orthonormal(200);
    const auto w = default_window(seq.size());
    const auto v = sharp_check(Operator::half_radial(), seq, Point::zero(), w, 1e-9);
    EXPECT_EQ(v.status, Status::holds);
    EXPECT_EQ(*v.find("liminf_image_gap"), 0.5);
    EXPECT_EQ(*v.find("liminf_gap"), 1.0);

    const auto conv = halving_to_zero(200);
    EXPECT_EQ(sharp_check(Operator::identity(), conv, Point::zero(2), w, 1e-12).status, Status::holds);

    const auto f = sharp_check(Operator::scaling(2.0), seq, Point::zero(), w, 1e-9);
    EXPECT_EQ(f.status, Status::fails);
    EXPECT_EQ(*f.find("liminf_image_gap"), 2.0);
}

TEST(FlatCheck, NonexpansiveIsNotTriggered) {
    const auto t = picard_run(Operator::rotation(quarter_turn), Point::dense({1.0, 0.0}), unit_ball(), 100, 0.0);
    EXPECT_EQ(flat_check(Operator::rotation(quarter_turn), t.points, 0.5, 2.0, default_window(t.size() - 1)).status,
              Status::not_triggered);
    const std::vector<Point> constant(20, Point::dense({0.3, 0.3}));
    const auto v = flat_check(Operator::identity(), constant, 0.5, 2.0, default_window(19));
    EXPECT_EQ(v.status, Status::not_triggered);
    EXPECT_EQ(*v.find("A"), 0.0);
}

TEST(FlatCheck, DoublingOnAlternatingTraceAgreesWithEnumeration) {
    std::vector<double> y;
    std::vector<Point> seq;
    for (int n = 0; n < 40; ++n) {
        y.push_back(n % 2 ? -0.5 : 0.5);
        seq.push_back(Point::dense({y.back()}));
    }
    const TailWindow w = default_window(seq.size() - 1);
    const auto q = oracle::flat_enumerate(y, 2.0, w.window);
    const auto holds = flat_check(Operator::scaling(2.0), seq, 0.5, 2.0, w);
    EXPECT_EQ(*holds.find("A"), q.a);
    EXPECT_EQ(*holds.find("B"), q.b);
    EXPECT_EQ(*holds.find("C"), q.c);
    EXPECT_EQ(holds.status, Status::holds);  // C = 1.5 > 0.5 * 2
    EXPECT_EQ(flat_check(Operator::scaling(2.0), seq, 0.9, 2.0, w).status, Status::fails);  // 1.5 < 1.8
    EXPECT_EQ(flat_check(Operator::scaling(2.0), seq, 0.75, 2.0, w).status, Status::inconclusive);
    EXPECT_THROW(flat_check(Operator::scaling(2.0), seq, 1.0, 2.0, w), ValidationError);
}

TEST(FejerMonitor, Examples) {
    const auto m = mann_rotation(200);
    const auto v = fejer_monitor(m.points, Point::zero(2));
    EXPECT_EQ(v.status, Status::holds);
    EXPECT_EQ(*v.find("eta_sum"), 0.0);

    const auto line = ConvexDomain::ball(Point::zero(2), 100.0);
    const auto t = picard_run(Operator::scaling(2.0), Point::dense({1.0, 0.0}), line, 5, 0.0);
    const auto f = fejer_monitor(t.points, Point::zero(2));
    EXPECT_EQ(f.status, Status::fails);
    EXPECT_EQ(*f.find("first_violation"), 0.0);

    const std::vector<Point> constant(10, Point::dense({0.2, 0.1}));
    EXPECT_EQ(fejer_monitor(constant, Point::dense({7.0, -3.0})).status, Status::holds);
}

TEST(FejerMonitor, EtaAllowsBoundedGrowth) {
    const auto line = ConvexDomain::ball(Point::zero(2), 100.0);
    const auto t = picard_run(Operator::scaling(2.0), Point::dense({1.0, 0.0}), line, 4, 0.0);
    const std::vector<double> eta = {1.0, 2.0, 4.0, 8.0};
    const auto v = fejer_monitor(t.points, Point::zero(2), eta);
    EXPECT_EQ(v.status, Status::holds);
    EXPECT_EQ(*v.find("eta_sum"), 15.0);
    const std::vector<double> bad = {1.0, -1.0};
    EXPECT_THROW(fejer_monitor(t.points, Point::zero(2), bad), ValidationError);
}

TEST(WeakLimit, DeclaredLimitNecessaryConditions) {
    const auto seq = orthonormal(200);
    const auto w = default_window(seq.size());
    EXPECT_EQ(weak_limit_check(seq, Point::zero(), {1, 2, 3}, w, 1e-12, 1.0).status, Status::holds);
    EXPECT_EQ(weak_limit_check(seq, Point::basis(1), {}, w, 1e-12, 1.0).status, Status::fails);
    EXPECT_EQ(weak_limit_check(seq, Point::zero(), {}, w, 1e-12, 0.5).status, Status::fails);
}

TEST(DetectLimit, DenseConvergentAndDivergent) {
    const auto seq = halving_to_zero(200);
    EXPECT_TRUE(detect_limit(seq, default_window(seq.size()), 1e-8).has_value());
    const auto rot = picard_run(Operator::rotation(quarter_turn), Point::dense({1.0, 0.0}), unit_ball(), 100, 0.0);
    EXPECT_FALSE(detect_limit(rot.points, default_window(rot.size()), 1e-8).has_value());
}

// Invariants.

TEST(DiagnosticsInvariants, EnlargingTheWindowWidensTheBounds) {
    gen::Source src(31);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> seq;
        for (int i = 0; i < 100; ++i) {
            seq.push_back(src.real());
        }
        for (std::size_t w = 2; w < 100; ++w) {
            const auto small = tail_bounds(seq, {0, w});
            const auto large = tail_bounds(seq, {0, w + 1});
            ASSERT_LE(large.lo, small.lo);
            ASSERT_GE(large.hi, small.hi);
        }
    }
}

TEST(DiagnosticsInvariants, PsiLiesWithinTailBounds) {
    gen::Source src(32);
    const auto m = mann_rotation(400);
    const auto w = default_window(m.size());
    for (int i = 0; i < 100; ++i) {
        const Point z = src.dense(2);
        const double psi = psi_estimate(m.points, z, w, 1e-8);
        const auto b = tail_bounds(distance_profile(m.points, z), w);
        EXPECT_GE(psi, b.lo);
        EXPECT_LE(psi, b.hi);
    }
}

TEST(DiagnosticsInvariants, LimitMinimizesPsi) {
    gen::Source src(33);
    const std::vector<Trace> traces = {
        mann_rotation(400),
        picard_run(Operator::projection(ConvexDomain::ball(Point::dense({0.5, 0.0}), 0.25)), Point::dense({-0.5, 0.5}),
                   unit_ball(), 100, 0.0),
        mann_run(Operator::averaged(Operator::rotation(2.0), 0.5), 0.3, Point::dense({0.0, -0.9}), unit_ball(), 400,
                 0.0),
    };
    for (const auto& t : traces) {
        const auto w = default_window(t.size());
        const auto limit = detect_limit(t.points, w, 1e-8);
        ASSERT_TRUE(limit.has_value());
        const double psi_w = psi_estimate(t.points, *limit, w, 1e-8);
        for (int i = 0; i < 20; ++i) {
            const Point z = src.dense(2);
            if (distance(z, *limit) <= 1e-6 || !lambda_membership(t.points, z, w, 1e-8).holds()) {
                continue;
            }
            EXPECT_LT(psi_w + 1e-9, psi_estimate(t.points, z, w, 1e-8));
        }
    }
}

TEST(DiagnosticsInvariants, FejerImpliesLambdaMembership) {
    gen::Source src(34);
    const std::vector<Operator> maps = {Operator::rotation(1.2), Operator::projection(ConvexDomain::box(
                                                                     Point::dense({0.0, 0.0}), Point::dense({0.5, 0.5}))),
                                        Operator::averaged(Operator::rotation(quarter_turn), 0.5)};
    for (const auto& f : maps) {
        const Point x0 = project(unit_ball(), src.dense(2));
        const auto t = mann_run(f, 0.5, x0, unit_ball(), 2000, 0.0);
        for (const auto& y : f.fixed_points()) {
            ASSERT_EQ(fejer_monitor(t.points, y).status, Status::holds);
            EXPECT_EQ(lambda_membership(t.points, y, default_window(t.size()), 1e-8).status, Status::holds);
        }
    }
}

TEST(DiagnosticsInvariants, PicardLimitsOfAsymptoticallyRegularTracesAreFixed) {
    gen::Source src(35);
    const double stop_tol = 1e-12;
    const std::vector<Operator> maps = {
        Operator::identity(),
        Operator::projection(ConvexDomain::ball(Point::dense({0.3, 0.0}), 0.4)),
        Operator::averaged(Operator::rotation(quarter_turn), 0.5),
        Operator::affine_contraction(0.5, Point::dense({0.25, 0.0})),
        Operator::rotation(quarter_turn),
    };
    for (const auto& f : maps) {
        const Point x0 = project(unit_ball(), src.dense(2));
        const auto t = picard_run(f, x0, unit_ball(), 5000, stop_tol);
        if (ar_profile(t).back() > 1e-8) {
            EXPECT_EQ(f.kind_name(), "rotation");
            continue;
        }
        const Point& w = t.points.back();
        EXPECT_LE(distance(f(w), w), 10.0 * stop_tol) << f.kind_name();
    }
}

TEST(DiagnosticsInvariants, MannTracesOfNonexpansiveMapsReachFixedPoints) {
    gen::Source src(36);
    const std::vector<Operator> maps = {
        Operator::rotation(quarter_turn),
        Operator::rotation(3.0),
        Operator::projection(ConvexDomain::ball(Point::dense({0.3, 0.0}), 0.4)),
        Operator::scaling(-1.0),
    };
    for (const auto& f : maps) {
        for (double tau : {0.25, 0.5, 0.75}) {
            const Point x0 = project(unit_ball(), src.dense(2));
            const auto t = mann_run(f, tau, x0, unit_ball(), 4000, 0.0);
            const auto w = default_window(t.size() - 1);
            EXPECT_EQ(ar_check(t.points, w, 1e-8).status, Status::holds) << f.kind_name();
            const Point& limit = t.points.back();
            EXPECT_LE(distance(f(limit), limit), 1e-8) << f.kind_name();
        }
    }
}
