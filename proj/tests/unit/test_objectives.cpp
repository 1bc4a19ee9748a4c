#include "aal/errors.hpp"
#include "aal/objectives.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace aal;

namespace {

ad::Value log_probs(ad::Tape& tape, const Matrix& probs) {
    Matrix l = probs;
    for (double& v : l.data) v = std::log(v);
    return tape.variable(l);
}

} // namespace

TEST(Alpha, CaseTable) {
    const std::vector<int> pred{0, 2, 3, 1};
    EXPECT_EQ(compute_alpha(pred, 2, 3), (std::vector<double>{1, 1, 1, 0}));
}

TEST(Alpha, AllTargetsKnown) {
    const std::vector<int> pred{3, 3, 0, 1, 2};
    EXPECT_EQ(compute_alpha(pred, 2, 3), (std::vector<double>{1, 1, 0, 0, 0}));
}

TEST(Alpha, AllTargetsUnknown) {
    const std::vector<int> pred{0, 1, 3, 3};
    EXPECT_EQ(compute_alpha(pred, 2, 3), (std::vector<double>(4, 1.0)));
}

TEST(Alpha, LabelOutOfRangeThrows) {
    const std::vector<int> pred{0, 5};
    EXPECT_THROW(compute_alpha(pred, 1, 3), ContractError);
}

TEST(Alpha, ArgmaxScaleInvariance) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int t = 0; t < 100; ++t) {
        Matrix logits(6, 4);
        for (double& v : logits.data) v = n(rng);
        Matrix scaled = logits;
        for (double& v : scaled.data) v *= 3.7;
        EXPECT_EQ(compute_alpha(argmax_rows(logits), 3, 3), compute_alpha(argmax_rows(scaled), 3, 3));
    }
}

TEST(WeightW, ElementwiseOneMinusUnknown) {
    const std::vector<double> wu{0.1, 0.5, 0.9, 0.0, 1.0};
    const TargetWeights w = compute_w(wu);
    ASSERT_EQ(w.w_known.size(), wu.size());
    EXPECT_FALSE(w.fallback_applied);
    for (std::size_t j = 0; j < wu.size(); ++j) EXPECT_DOUBLE_EQ(w.w_known[j], 1.0 - wu[j]);
}

TEST(WeightW, FallbackWhenAllUnknown) {
    const std::vector<double> wu{1.0, 1.0, 1.0};
    const TargetWeights w = compute_w(wu);
    EXPECT_TRUE(w.fallback_applied);
    EXPECT_EQ(w.w_known, (std::vector<double>{1, 1, 1}));
}

TEST(WeightW, FallbackThresholdBoundary) {
    const TargetWeights above = compute_w(std::vector<double>{1.0 - 1e-9, 1.0});
    EXPECT_FALSE(above.fallback_applied);
    const TargetWeights tiny = compute_w(std::vector<double>{1.0, 1.0 - 1e-13});
    EXPECT_TRUE(tiny.fallback_applied);
}

TEST(WeightW, AdversarialValueFiniteUnderFallback) {
    ad::Tape tape;
    const TargetWeights w = compute_w(std::vector<double>{1.0, 1.0});
    ad::Value ds = tape.variable(Matrix::from_rows({{0.6}, {0.7}}));
    ad::Value dt = tape.variable(Matrix::from_rows({{0.2}, {0.4}}));
    ad::Value v = adversarial_value(ds, dt, w.w_known);
    EXPECT_TRUE(std::isfinite(v.item()));
    const double expected = 0.5 * (std::log(0.6) + std::log(0.7)) + 0.5 * (std::log(0.8) + std::log(0.6));
    EXPECT_NEAR(v.item(), expected, 1e-14);
    tape.backward(v);
    for (double g : dt.grad().data) EXPECT_TRUE(std::isfinite(g));
}

TEST(AdversarialValue, AllZeroWeightsRejected) {
    ad::Tape tape;
    ad::Value ds = tape.variable(Matrix::from_rows({{0.6}}));
    ad::Value dt = tape.variable(Matrix::from_rows({{0.2}}));
    EXPECT_THROW(adversarial_value(ds, dt, std::vector<double>{0.0}), ContractError);
}

TEST(AdversarialValue, PerfectDiscriminatorIsZeroAndChanceIsMinusLog4) {
    ad::Tape tape;
    const std::vector<double> w{1.0, 1.0};
    ad::Value perfect =
        adversarial_value(tape.constant(Matrix::from_rows({{1.0}, {1.0}})), tape.constant(Matrix::from_rows({{0.0}, {0.0}})), w);
    EXPECT_EQ(perfect.item(), 0.0);
    ad::Value chance =
        adversarial_value(tape.constant(Matrix::from_rows({{0.5}, {0.5}})), tape.constant(Matrix::from_rows({{0.5}, {0.5}})), w);
    EXPECT_NEAR(chance.item(), -std::log(4.0), 1e-15);
}

TEST(AdversarialValue, WeightsNormalizedBySum) {
    ad::Tape tape;
    ad::Value ds = tape.constant(Matrix::from_rows({{0.5}}));
    ad::Value dt = tape.constant(Matrix::from_rows({{0.1}, {0.3}}));
    const double a = adversarial_value(ds, dt, std::vector<double>{0.2, 0.6}).item();
    const double b = adversarial_value(ds, dt, std::vector<double>{1.0, 3.0}).item();
    EXPECT_NEAR(a, b, 1e-15);
    EXPECT_NEAR(a, std::log(0.5) + 0.25 * std::log(0.9) + 0.75 * std::log(0.7), 1e-15);
}

TEST(AdversarialValue, RequiresColumnVectors) {
    ad::Tape tape;
    EXPECT_THROW(adversarial_value(tape.constant(Matrix(1, 2, 0.5)), tape.constant(Matrix(1, 1, 0.5)),
                                   std::vector<double>{1.0}),
                 DimensionError);
}

TEST(LossDynamic, ArithmeticExample) {
    ad::Tape tape;
    // NLL of log2 and log8
    Matrix p = Matrix::from_rows({{0.5, 0.25, 0.25}, {0.125, 0.5, 0.375}});
    ad::Value l = loss_dynamic(log_probs(tape, p), std::vector<int>{0, 0}, std::vector<double>{1, 1});
    EXPECT_NEAR(l.item(), 2.0 * std::log(2.0), 1e-14);
}

TEST(LossDynamic, MaskedSampleDoesNotMatter) {
    ad::Tape tape;
    Matrix p = Matrix::from_rows({{0.5, 0.5}, {std::exp(-100.0), 1.0 - std::exp(-100.0)}});
    ad::Value masked = loss_dynamic(log_probs(tape, p), std::vector<int>{0, 0}, std::vector<double>{1, 0});
    EXPECT_NEAR(masked.item(), std::log(2.0), 1e-14);
}

TEST(LossDynamic, PerfectPredictionsGiveZero) {
    ad::Tape tape;
    Matrix p = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}});
    ad::Value l = loss_dynamic(ad::log_clamped(tape.constant(p)), std::vector<int>{0, 1}, std::vector<double>{1, 0});
    EXPECT_EQ(l.item(), 0.0);
}

TEST(LossDynamic, AllOnesEqualsMeanCrossEntropy) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    for (int t = 0; t < 20; ++t) {
        ad::Tape tape;
        Matrix p(5, 4);
        for (std::size_t r = 0; r < 5; ++r) {
            double s = 0.0;
            for (double& v : p.row(r)) s += (v = u(rng));
            for (double& v : p.row(r)) v /= s;
        }
        std::vector<int> y{0, 3, 2, 1, 3};
        const double l = loss_dynamic(log_probs(tape, p), y, std::vector<double>(5, 1.0)).item();
        double ce = 0.0;
        for (std::size_t r = 0; r < 5; ++r) ce -= std::log(p(r, y[r]));
        EXPECT_NEAR(l, ce / 5.0, 1e-12);
        const double ls = loss_source(log_probs(tape, p), y).item();
        EXPECT_NEAR(ls, ce / 5.0, 1e-12);
    }
}

TEST(LossDynamic, EmptyBatchThrows) {
    ad::Tape tape;
    EXPECT_THROW(loss_dynamic(tape.constant(Matrix(0, 3)), {}, {}), ContractError);
}

TEST(StepLosses, SignsOfRoots) {
    ad::Tape tape;
    ad::Value lf = tape.variable(Matrix(1, 1, 0.3));
    ad::Value lfs = tape.variable(Matrix(1, 1, 0.2));
    ad::Value v = tape.variable(Matrix(1, 1, -1.1));
    StepLosses s = integrated_step_losses(lf, lfs, v);
    EXPECT_NEAR(s.generator_side.item(), 0.3 + 0.2 - 1.1, 1e-15);
    EXPECT_NEAR(s.discriminator_side.item(), 1.1, 1e-15);
    EXPECT_NEAR(s.backward_root.item(), 0.3 + 0.2 + 1.1, 1e-15);
    tape.backward(s.backward_root);
    EXPECT_EQ(v.grad()(0, 0), -1.0);
    EXPECT_EQ(lf.grad()(0, 0), 1.0);
}
