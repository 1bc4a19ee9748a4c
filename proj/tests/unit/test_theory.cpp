#include "aal/errors.hpp"
#include "aal/theory.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace aal::theory;

TEST(Theory, EqualMarginalsGiveMinusLog4) {
    const DiscreteJoint j = make_joint({0.2, 0.3, 0.5}, {0.2, 0.3, 0.5});
    const OptimumValue v = value_at_optimum(j);
    EXPECT_NEAR(v.direct, -std::log(4.0), 1e-14);
    EXPECT_NEAR(v.jsd_form, -std::log(4.0), 1e-14);
    for (const auto& d : optimal_d(j).d) EXPECT_DOUBLE_EQ(*d, 0.5);
}

TEST(Theory, DisjointSupportsGiveZero) {
    const DiscreteJoint j = make_joint({0.5, 0.5, 0.0, 0.0}, {0.0, 0.0, 0.4, 0.6});
    const OptimumValue v = value_at_optimum(j);
    EXPECT_NEAR(v.direct, 0.0, 1e-14);
    EXPECT_NEAR(v.jsd, std::log(2.0), 1e-14);
    EXPECT_NEAR(v.jsd_form, 0.0, 1e-14);
}

TEST(Theory, OptimalDMaximizesValueAgainstPerturbations) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    for (bool weighted : {false, true}) {
        for (int t = 0; t < 20; ++t) {
            const DiscreteJoint j = random_joint(6, weighted, rng);
            std::vector<double> d;
            for (const auto& x : optimal_d(j).d) d.push_back(*x);
            const double best = value(j, d);
            for (int k = 0; k < 10; ++k) {
                std::vector<double> e = d;
                for (double& x : e) x = std::clamp(x + u(rng), 1e-6, 1.0 - 1e-6);
                EXPECT_LE(value(j, e), best + 1e-15);
            }
        }
    }
}

TEST(Theory, ClosedFormAgainstBruteForceGrid) {
    // A two-point joint: search D on a fine grid per point.
    DiscreteJoint j = make_joint({0.7, 0.3}, {0.2, 0.8});
    j.w = {1.6, 0.85};
    const auto d = optimal_d(j);
    for (std::size_t i = 0; i < 2; ++i) {
        double best = -INFINITY;
        double arg = 0.0;
        for (int k = 1; k < 100000; ++k) {
            const double x = k / 100000.0;
            const double v = j.mass_s[i] * std::log(x) + j.w[i] * j.mass_t[i] * std::log(1.0 - x);
            if (v > best) {
                best = v;
                arg = x;
            }
        }
        EXPECT_NEAR(*d.d[i], arg, 1e-5);
    }
}

TEST(Theory, GapIsLog2TimesExcessMass) {
    DiscreteJoint j = make_joint({0.1, 0.6, 0.3}, {0.5, 0.25, 0.25});
    j.w = {0.4, 2.0, 1.1};
    const OptimumValue v = value_at_optimum(j);
    EXPECT_NEAR(v.gap, std::log(2.0) * (1.0 - j.weighted_target_mass()), 1e-13);
    EXPECT_NEAR(v.direct - v.jsd_form, v.gap, 1e-15);
}

TEST(Theory, NormalizedWeightsCloseTheGap) {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 50; ++t) {
        const DiscreteJoint j = random_joint(5, true, rng);
        EXPECT_NEAR(j.weighted_target_mass(), 1.0, 1e-12);
        const OptimumValue v = value_at_optimum(j);
        EXPECT_NEAR(v.direct, v.jsd_form, 1e-10);
    }
}

TEST(Theory, WeightsFromUnknownProbabilities) {
    const std::vector<double> t{0.5, 0.5};
    const auto w = weights_from_unknown_probs(std::vector<double>{0.2, 0.6}, t);
    // 1 − w^u = {0.8, 0.4}, average under t is 0.6.
    EXPECT_NEAR(w[0], 0.8 / 0.6, 1e-15);
    EXPECT_NEAR(w[1], 0.4 / 0.6, 1e-15);
    const auto fallback = weights_from_unknown_probs(std::vector<double>{1.0, 1.0}, t);
    EXPECT_EQ(fallback, (std::vector<double>{1.0, 1.0}));
}

TEST(Theory, KlAndJsdConventions) {
    const std::vector<double> p{0.5, 0.5, 0.0};
    const std::vector<double> q{0.25, 0.25, 0.5};
    EXPECT_NEAR(kl(p, q), std::log(2.0), 1e-15);
    EXPECT_EQ(kl(p, p), 0.0);
    EXPECT_NEAR(jsd(p, q), jsd(q, p), 1e-15);
    EXPECT_GE(jsd(p, q), 0.0);
    EXPECT_LE(jsd(p, q), std::log(2.0));
}

TEST(Theory, InvalidJointRejected) {
    EXPECT_THROW(make_joint({0.5, 0.6}, {0.5, 0.5}).validate(), aal::ContractError);
    EXPECT_THROW(make_joint({1.0}, {0.5, 0.5}).validate(), aal::ContractError);
}

TEST(Theory, NumericAscentReachesClosedForm) {
    std::mt19937_64 rng(8);
    const DiscreteJoint j = random_joint(5, true, rng);
    const NumericOptimumReport r = verify_optimum_numerically(j, 20000, 1.0);
    EXPECT_FALSE(r.diverged);
    EXPECT_LT(r.max_abs_d_deviation, 1e-3);
    EXPECT_LT(r.abs_value_deviation, 1e-6);
}
