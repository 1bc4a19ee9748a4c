#include "aal/autodiff.hpp"
#include "aal/errors.hpp"
#include "aal/gradcheck.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

using namespace aal;
using namespace aal::ad;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -2.0, double hi = 2.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    Matrix m(r, c);
    for (double& v : m.data) v = d(rng);
    return m;
}

} // namespace

TEST(Autodiff, MatmulForwardAndBackward) {
    Tape tape;
    Value a = tape.variable(Matrix::from_rows({{1, 2}, {3, 4}}));
    Value b = tape.variable(Matrix::from_rows({{5, 6}, {7, 8}}));
    Value y = matmul(a, b);
    EXPECT_EQ(y.data(), Matrix::from_rows({{19, 22}, {43, 50}}));
    tape.backward(sum(y));
    // d sum(AB) / dA = 1·Bᵀ, d/dB = Aᵀ·1
    EXPECT_EQ(a.grad(), Matrix::from_rows({{11, 15}, {11, 15}}));
    EXPECT_EQ(b.grad(), Matrix::from_rows({{4, 4}, {6, 6}}));
}

TEST(Autodiff, MatmulShapeMismatchThrows) {
    Tape tape;
    Value a = tape.variable(Matrix(2, 3));
    Value b = tape.variable(Matrix(2, 3));
    EXPECT_THROW(matmul(a, b), DimensionError);
    EXPECT_THROW(add(a, tape.variable(Matrix(3, 2))), DimensionError);
}

TEST(Autodiff, SoftmaxRowsSumToOne) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        Tape tape;
        Matrix x = random_matrix(6, 5, rng, -50.0, 50.0);
        Value p = softmax_rows(tape.constant(x));
        for (std::size_t r = 0; r < p.rows(); ++r) {
            double total = 0.0;
            for (double v : p.data().row(r)) {
                EXPECT_GE(v, 0.0);
                total += v;
            }
            EXPECT_NEAR(total, 1.0, 1e-12);
        }
    }
}

TEST(Autodiff, SoftmaxLargeLogitsStayFinite) {
    Tape tape;
    Value p = softmax_rows(tape.constant(Matrix::from_rows({{1000.0, 0.0, -1000.0}})));
    EXPECT_DOUBLE_EQ(p.data()(0, 0), 1.0);
    EXPECT_TRUE(std::isfinite(p.data()(0, 2)));
}

TEST(Autodiff, SoftmaxNonFiniteThrows) {
    Tape tape;
    EXPECT_THROW(softmax_rows(tape.constant(Matrix::from_rows({{NAN, 0.0}}))), NumericError);
}

TEST(Autodiff, GradReverseIsBitwiseIdentityForward) {
    std::mt19937_64 rng(5);
    Tape tape;
    Matrix x = random_matrix(4, 3, rng);
    Value y = grad_reverse(tape.variable(x), 0.7);
    EXPECT_EQ(std::memcmp(x.data.data(), y.data().data.data(), x.size() * sizeof(double)), 0);
}

TEST(Autodiff, GradReverseNegatesAndScalesGradient) {
    Tape tape;
    Value x = tape.variable(Matrix::from_rows({{1.0, -2.0}}));
    std::vector<double> w{3.0, 5.0};
    tape.backward(weighted_sum(grad_reverse(x, 0.5), w));
    EXPECT_EQ(x.grad(), Matrix::from_rows({{-1.5, -2.5}}));
}

TEST(Autodiff, GradReverseRejectsNegativeLambda) {
    Tape tape;
    EXPECT_THROW(grad_reverse(tape.variable(Matrix(1, 1)), -1.0), ContractError);
}

TEST(Autodiff, DetachBlocksGradient) {
    Tape tape;
    Value x = tape.variable(Matrix::from_rows({{2.0}}));
    Value y = mul(x, detach(x));
    tape.backward(sum(y));
    EXPECT_DOUBLE_EQ(x.grad()(0, 0), 2.0);
}

TEST(Autodiff, FanOutAccumulates) {
    Tape tape;
    Value x = tape.variable(Matrix::from_rows({{3.0}}));
    tape.backward(sum(add(mul(x, x), x)));
    EXPECT_DOUBLE_EQ(x.grad()(0, 0), 7.0);
}

TEST(Autodiff, LogClampedFloorsAndZeroesGradient) {
    Tape tape;
    Value x = tape.variable(Matrix::from_rows({{0.0, 1e-20, 0.5}}));
    Value y = log_clamped(x);
    EXPECT_DOUBLE_EQ(y.data()(0, 0), std::log(1e-12));
    EXPECT_DOUBLE_EQ(y.data()(0, 1), std::log(1e-12));
    EXPECT_DOUBLE_EQ(y.data()(0, 2), std::log(0.5));
    tape.backward(sum(y));
    EXPECT_EQ(x.grad()(0, 0), 0.0);
    EXPECT_EQ(x.grad()(0, 1), 0.0);
    EXPECT_DOUBLE_EQ(x.grad()(0, 2), 2.0);
}

TEST(Autodiff, SigmoidExtremesAreFinite) {
    Tape tape;
    Value s = sigmoid(tape.constant(Matrix::from_rows({{-800.0, 0.0, 800.0}})));
    EXPECT_EQ(s.data()(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(s.data()(0, 1), 0.5);
    EXPECT_EQ(s.data()(0, 2), 1.0);
}

TEST(Autodiff, OuterFlattenLayout) {
    Tape tape;
    Value f = tape.constant(Matrix::from_rows({{1, 2}}));
    Value p = tape.constant(Matrix::from_rows({{10, 20, 30}}));
    Value y = outer_flatten(f, p);
    EXPECT_EQ(y.data(), Matrix::from_rows({{10, 20, 20, 40, 30, 60}}));
}

TEST(Autodiff, DropoutIsSeededAndInverted) {
    Tape tape;
    Matrix ones(50, 40, 1.0);
    Value a = dropout(tape.constant(ones), 0.5, 11);
    Value b = dropout(tape.constant(ones), 0.5, 11);
    EXPECT_EQ(a.data(), b.data());
    std::size_t kept = 0;
    for (double v : a.data().data) {
        EXPECT_TRUE(v == 0.0 || v == 2.0);
        kept += v != 0.0;
    }
    EXPECT_NEAR(static_cast<double>(kept) / 2000.0, 0.5, 0.05);
    Value none = dropout(tape.constant(ones), 0.0, 11);
    EXPECT_EQ(none.data(), ones);
}

TEST(Autodiff, WeightedNllRejectsAllZeroWeights) {
    Tape tape;
    Value logp = tape.variable(Matrix::from_rows({{std::log(0.5), std::log(0.5)}}));
    std::vector<int> labels{0};
    std::vector<double> w{0.0};
    EXPECT_THROW(weighted_nll(logp, labels, w), ContractError);
}

TEST(Autodiff, BackwardRequiresScalarRoot) {
    Tape tape;
    Value x = tape.variable(Matrix(2, 2, 1.0));
    EXPECT_THROW(tape.backward(x), ContractError);
}

TEST(Autodiff, StaleHandleThrowsAfterReset) {
    Tape tape;
    Value x = tape.variable(Matrix(1, 1, 1.0));
    tape.reset();
    EXPECT_THROW(x.data(), ContractError);
    EXPECT_EQ(tape.size(), 0u);
}

TEST(Autodiff, MixingTapesThrows) {
    Tape t1;
    Tape t2;
    EXPECT_THROW(add(t1.variable(Matrix(1, 1)), t2.variable(Matrix(1, 1))), ContractError);
}

TEST(Autodiff, ConstantsReceiveNoGradient) {
    Tape tape;
    Value c = tape.constant(Matrix(1, 1, 2.0));
    Value x = tape.variable(Matrix(1, 1, 3.0));
    tape.backward(sum(mul(c, x)));
    EXPECT_FALSE(c.requires_grad());
    EXPECT_DOUBLE_EQ(x.grad()(0, 0), 2.0);
}

TEST(FiniteDifference, DetectsWrongGradient) {
    // A custom node whose backward rule is deliberately off by a factor of two.
    GraphBuilder builder = [](Tape& tape, std::span<const Value> p) {
        Value x = p[0];
        Matrix out = x.data();
        for (double& v : out.data) v = v * v;
        Value sq = tape.record("bad_square", {x}, out, [](Tape& t, std::size_t self) {
            const std::size_t in = t.inputs(self)[0];
            if (Matrix* g = t.grad_sink(in)) {
                for (std::size_t k = 0; k < g->size(); ++k) g->data[k] += t.grad(self).data[k] * t.value(in).data[k];
            }
        });
        return sum(sq);
    };
    FdReport rep = finite_diff_check(builder, {{"x", Matrix::from_rows({{1.5, -0.5}})}}, 1e-5, 1e-4);
    EXPECT_FALSE(rep.pass);
    ASSERT_EQ(rep.failing().size(), 1u);
    EXPECT_EQ(rep.failing()[0], "x");
}

TEST(FiniteDifference, EmptyParameterListPasses) {
    GraphBuilder builder = [](Tape& tape, std::span<const Value>) { return sum(tape.constant(Matrix(1, 1, 1.0))); };
    EXPECT_TRUE(finite_diff_check(builder, {}, 1e-5, 1e-4).pass);
}

TEST(FiniteDifference, NondeterministicBuilderThrows) {
    int calls = 0;
    GraphBuilder builder = [&calls](Tape&, std::span<const Value> p) {
        ++calls;
        return sum(scale(p[0], static_cast<double>(calls)));
    };
    EXPECT_THROW(finite_diff_check(builder, {{"x", Matrix(1, 1, 1.0)}}, 1e-5, 1e-4), ContractError);
}

TEST(GradCheckSuite, EveryCasePasses) {
    for (std::uint64_t seed : {0ULL, 1ULL, 2ULL}) {
        GradCheckSettings s;
        s.seed = seed;
        for (const auto& c : run_gradcheck_suite(s)) {
            EXPECT_TRUE(c.report.pass) << c.name << " seed " << seed << " error " << c.report.max_rel_error;
            EXPECT_LT(c.report.max_rel_error, 1e-4) << c.name;
        }
    }
}

TEST(GradCheckSuite, CoversOperatorsAndLosses) {
    std::vector<std::string> names;
    for (const auto& c : run_gradcheck_suite()) names.push_back(c.name);
    for (const char* expected : {"matmul", "softmax_rows", "log_clamped", "grad_reverse", "outer_flatten", "dropout",
                                 "loss_dynamic", "loss_source", "adversarial_value", "composite.generator",
                                 "composite.discriminator"}) {
        EXPECT_NE(std::find(names.begin(), names.end(), expected), names.end()) << expected;
    }
}
