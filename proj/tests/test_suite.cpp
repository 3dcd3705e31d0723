#include <cmath>
#include <numbers>
#include <set>

#include <gtest/gtest.h>

#include "opialiter/suite.hpp"

using namespace opialiter;

TEST(Suite, EveryCaseHolds) {
    for (const auto& v : run_suite()) {
        EXPECT_EQ(v.status, Status::holds) << v.check;
        EXPECT_TRUE(v.notes.empty()) << v.check << ": " << (v.notes.empty() ? "" : v.notes.front());
    }
}

TEST(Suite, KeysAreUniqueAndTolerancesPositive) {
    std::set<std::string> keys;
    for (const auto& c : case_catalog()) {
        EXPECT_TRUE(keys.insert(c.key).second) << c.key;
        EXPECT_FALSE(c.expected.empty());
        for (const auto& e : c.expected) {
            EXPECT_GT(e.tolerance, 0.0) << c.key << " " << e.quantity;
        }
    }
    for (const char* key : {"lambda-empty", "two-accumulation-points", "sharp-discontinuous",
                            "rotation-picard-vs-mann"}) {
        EXPECT_TRUE(keys.count(key)) << key;
    }
}

TEST(Suite, UnknownKeyListsTheCatalog) {
    try {
        run_case("no-such-case");
        FAIL() << "expected a lookup error";
    } catch (const LookupError& e) {
        const std::string what = e.what();
        for (const auto& c : case_catalog()) {
            EXPECT_NE(what.find(c.key), std::string::npos) << c.key;
        }
    }
}

TEST(Suite, CorruptedExpectationFails) {
    NamedCase corrupted = find_case("sharp-discontinuous");
    corrupted.expected.front().value = 0.75;
    const auto v = run_case(corrupted);
    EXPECT_EQ(v.status, Status::fails);
    EXPECT_FALSE(v.notes.empty());
}

TEST(Suite, UnmeasuredQuantityFails) {
    NamedCase corrupted = find_case("opial-orthonormal");
    corrupted.expected.push_back({"never_measured", 0.0, 1.0});
    EXPECT_EQ(run_case(corrupted).status, Status::fails);
}

TEST(Suite, WrongSubVerdictFails) {
    NamedCase corrupted = find_case("two-accumulation-points");
    const auto original = corrupted.run;
    corrupted.run = [original] {
        auto m = original();
        m.checks.front().second = Status::fails;
        return m;
    };
    EXPECT_EQ(run_case(corrupted).status, Status::fails);
}

TEST(SuiteValues, LambdaEmptyNorms) {
    const auto v = run_case("lambda-empty");
    EXPECT_EQ(*v.find("norm_min"), 1.0);
    EXPECT_EQ(*v.find("norm_max"), 2.0);
    EXPECT_EQ(*v.find("norms_outside_{1,2}"), 0.0);
    EXPECT_LE(*v.find("polarization_residual"), 1e-12);
}

TEST(SuiteValues, TwoAccumulationPoints) {
    const auto v = run_case("two-accumulation-points");
    EXPECT_LE(*v.find("even_dist_deviation_from_sqrt2"), 1e-12);
    EXPECT_LE(*v.find("odd_dist_max"), 1e-12);
    EXPECT_NEAR(*v.find("psi_at_0"), 1.0, 1e-12);
    EXPECT_NEAR(*v.find("limsup_dist_e1"), std::numbers::sqrt2, 1e-12);
}

TEST(SuiteValues, SharpDiscontinuous) {
    const auto v = run_case("sharp-discontinuous");
    EXPECT_NEAR(*v.find("image_gap_e5"), 0.5, 1e-12);
    EXPECT_NEAR(*v.find("liminf_image_gap"), 0.5, 1e-12);
    EXPECT_NEAR(*v.find("liminf_gap"), 1.0, 1e-12);
}

TEST(SuiteValues, RunsAreDeterministic) {
    const auto a = run_suite();
    const auto b = run_suite();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(to_json(a[i]).dump(), to_json(b[i]).dump());
    }
}
