#include "aal/errors.hpp"
#include "aal/networks.hpp"
#include "aal/objectives.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <unistd.h>

using namespace aal;

namespace {

Architecture small_arch() {
    Architecture a;
    a.d_in = 2;
    a.c = 3;
    a.g_hidden = {6, 5};
    a.d_b = 4;
    a.h_d = 7;
    return a;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("aal_net_" + std::to_string(::getpid()) + "_" + name);
}

} // namespace

TEST(Networks, GlorotBoundsAndZeroBiases) {
    std::mt19937_64 rng(1);
    const ModelBundle m = init_bundle(small_arch(), rng);
    for (const auto& p : m.parameters()) {
        if (p.name.ends_with("bias")) {
            for (double v : p.value->data) EXPECT_EQ(v, 0.0) << p.name;
        } else {
            const double bound = glorot_bound(p.value->rows, p.value->cols);
            for (double v : p.value->data) EXPECT_LE(std::abs(v), bound) << p.name;
        }
    }
    EXPECT_DOUBLE_EQ(glorot_bound(4, 2), 1.0);
}

TEST(Networks, ParameterOrderAndShapes) {
    std::mt19937_64 rng(2);
    ModelBundle m = init_bundle(small_arch(), rng);
    const auto params = m.parameters();
    ASSERT_EQ(params.size(), 2 * (m.g.size() + 5));
    EXPECT_EQ(params[0].value, &m.g[0].weight);
    EXPECT_EQ(params[1].value, &m.g[0].bias);
    EXPECT_EQ(params.back().value, &m.d[2].bias);
    EXPECT_EQ(m.f_star.out(), 3u);
    EXPECT_EQ(m.f_dyn.out(), 4u);
    EXPECT_EQ(m.d[0].in(), 4u * 3u);
    EXPECT_EQ(m.d[2].out(), 1u);
    EXPECT_NO_THROW(m.validate());
    m.f_dyn.bias = Matrix(1, 3);
    EXPECT_THROW(m.validate(), ContractError);
}

TEST(Networks, InitIsSeedDeterministic) {
    std::mt19937_64 a(5);
    std::mt19937_64 b(5);
    std::mt19937_64 c(6);
    const ModelBundle ma = init_bundle(small_arch(), a);
    EXPECT_EQ(ma, init_bundle(small_arch(), b));
    EXPECT_FALSE(ma == init_bundle(small_arch(), c));
}

TEST(Networks, BindLeavesMatchesBind) {
    std::mt19937_64 rng(3);
    const ModelBundle m = init_bundle(small_arch(), rng);
    ad::Tape tape;
    const BoundModel bm = bind(tape, m, true);
    const BoundModel again = bind_leaves(m, bm.leaves());
    const ad::Value x = tape.constant(Matrix::from_rows({{0.3, -1.2}, {2.0, 0.1}}));
    const Matrix first = classify_open(bm, extract_features(bm, x)).data();
    const Matrix second = classify_open(again, extract_features(again, x)).data();
    EXPECT_EQ(first, second);
    std::vector<ad::Value> short_list = bm.leaves();
    short_list.pop_back();
    EXPECT_THROW(bind_leaves(m, short_list), ContractError);
}

TEST(Networks, ClassifierOutputsAreDistributions) {
    std::mt19937_64 rng(4);
    const ModelBundle m = init_bundle(small_arch(), rng);
    ad::Tape tape;
    const BoundModel bm = bind(tape, m, false);
    const ad::Value f = extract_features(bm, tape.constant(Matrix::from_rows({{1, 2}, {-3, 0.5}, {0, 0}})));
    EXPECT_EQ(f.cols(), 4u);
    for (const ad::Value& p : {classify_known(bm, f), classify_open(bm, f)}) {
        for (std::size_t r = 0; r < p.rows(); ++r) {
            double s = 0.0;
            for (double v : p.data().row(r)) s += v;
            EXPECT_NEAR(s, 1.0, 1e-12);
        }
    }
    const ad::Value d = discriminate(bm, f, classify_known(bm, f), 1.0, std::nullopt);
    EXPECT_EQ(d.cols(), 1u);
    for (double v : d.data().data) {
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
    }
}

TEST(Networks, ReversalSendsOppositeGradientIntoFeatures) {
    // Backbone gradients from V through the reversal equal −λ times those
    // obtained without it.
    std::mt19937_64 rng(7);
    const ModelBundle m = init_bundle(small_arch(), rng);
    const Matrix x = Matrix::from_rows({{0.5, -0.4}, {1.1, 0.9}, {-0.7, 0.2}, {0.3, 1.5}});
    const std::vector<double> w{0.6, 0.8};
    auto feature_grad = [&](double lambda) {
        ad::Tape tape;
        const BoundModel bm = bind(tape, m, true);
        const ad::Value f = extract_features(bm, tape.constant(x));
        const ad::Value d = discriminate(bm, f, classify_known(bm, f), lambda, std::nullopt);
        tape.backward(adversarial_value(ad::slice_rows(d, 0, 2), ad::slice_rows(d, 2, 4), w));
        return bm.g[0].weight.grad();
    };
    const Matrix g1 = feature_grad(1.0);
    const Matrix g2 = feature_grad(0.25);
    for (std::size_t k = 0; k < g1.size(); ++k) EXPECT_NEAR(g2.data[k], 0.25 * g1.data[k], 1e-14);
}

TEST(Networks, GrlCoefficient) {
    EXPECT_EQ(grl_coefficient(0.7, false, 0.3), 0.7);
    EXPECT_NEAR(grl_coefficient(1.0, true, 0.0), 0.0, 1e-15);
    EXPECT_NEAR(grl_coefficient(2.0, true, 1.0), 2.0 * (2.0 / (1.0 + std::exp(-10.0)) - 1.0), 1e-15);
}

TEST(Checkpoint, RoundTripIsBitExact) {
    std::mt19937_64 rng(8);
    ModelBundle m = init_bundle(small_arch(), rng);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& p : m.parameters()) {
        for (double& v : p.value->data) v = u(rng) / 3.0;
    }
    const auto path = temp_file("ckpt.txt");
    save_checkpoint(path, m, 0x1234abcdULL);
    const Checkpoint c = load_checkpoint(path);
    EXPECT_EQ(c.config_hash, 0x1234abcdULL);
    EXPECT_EQ(c.model, m);
    EXPECT_EQ(c.model.arch.g_hidden, m.arch.g_hidden);
    std::filesystem::remove(path);
}

TEST(Checkpoint, TruncatedFileReportsLine) {
    std::mt19937_64 rng(9);
    const ModelBundle m = init_bundle(small_arch(), rng);
    const auto path = temp_file("trunc.txt");
    save_checkpoint(path, m, 1);
    std::ifstream in(path);
    std::string text;
    std::string line;
    for (int i = 0; i < 5 && std::getline(in, line); ++i) text += line + "\n";
    in.close();
    std::ofstream(path) << text;
    try {
        load_checkpoint(path);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_GT(e.line(), 0u);
    }
    std::filesystem::remove(path);
    EXPECT_THROW(load_checkpoint(path), ParseError);
}
