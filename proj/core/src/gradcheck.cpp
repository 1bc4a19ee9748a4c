#include "aal/gradcheck.hpp"

#include "aal/networks.hpp"
#include "aal/objectives.hpp"

#include <random>

namespace aal {

namespace {

using ad::FdParam;
using ad::Tape;
using ad::Value;

Matrix uniform(std::size_t rows, std::size_t cols, double lo, double hi, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Matrix m(rows, cols);
    for (double& v : m.data) v = dist(rng);
    return m;
}

// Reduces a matrix-valued node to a scalar with fixed, non-uniform weights so
// that every output entry contributes a distinct coefficient.
Value reduce(const Value& v) {
    std::vector<double> w(v.rows() * v.cols());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.3 + 0.17 * static_cast<double>(i % 7);
    return ad::weighted_sum(v, w);
}

// D on a tape without the reversal node, so its derivative is the true one.
Value discriminate_plain(const BoundModel& m, const Value& f, const Value& p_star) {
    Value h = ad::outer_flatten(f, ad::detach(p_star));
    h = ad::relu(linear(m.d[0], h));
    h = ad::relu(linear(m.d[1], h));
    return ad::sigmoid(linear(m.d[2], h));
}

} // namespace

std::vector<GradCheckCase> run_gradcheck_suite(const GradCheckSettings& s) {
    std::mt19937_64 rng(s.seed);
    std::vector<GradCheckCase> out;
    auto run = [&](std::string name, const ad::GraphBuilder& b, std::vector<FdParam> params) {
        out.push_back({std::move(name), ad::finite_diff_check(b, std::move(params), s.h, s.tol)});
    };
    auto u = [&](std::size_t r, std::size_t c) { return uniform(r, c, -2.0, 2.0, rng); };

    run("matmul", [](Tape&, std::span<const Value> p) { return reduce(ad::matmul(p[0], p[1])); },
        {{"a", u(3, 4)}, {"b", u(4, 2)}});
    run("add", [](Tape&, std::span<const Value> p) { return reduce(ad::add(p[0], p[1])); },
        {{"a", u(3, 2)}, {"b", u(3, 2)}});
    run("sub", [](Tape&, std::span<const Value> p) { return reduce(ad::sub(p[0], p[1])); },
        {{"a", u(3, 2)}, {"b", u(3, 2)}});
    run("add_row", [](Tape&, std::span<const Value> p) { return reduce(ad::add_row(p[0], p[1])); },
        {{"x", u(4, 3)}, {"row", u(1, 3)}});
    run("mul", [](Tape&, std::span<const Value> p) { return reduce(ad::mul(p[0], p[1])); },
        {{"a", u(3, 3)}, {"b", u(3, 3)}});
    run("scale", [](Tape&, std::span<const Value> p) { return reduce(ad::scale(p[0], -1.7)); },
        {{"x", u(2, 3)}});
    run("affine", [](Tape&, std::span<const Value> p) { return reduce(ad::affine(p[0], -1.0, 1.0)); },
        {{"x", u(2, 3)}});
    run("relu", [](Tape&, std::span<const Value> p) { return reduce(ad::relu(p[0])); }, {{"x", u(4, 4)}});
    run("sigmoid", [](Tape&, std::span<const Value> p) { return reduce(ad::sigmoid(p[0])); },
        {{"x", u(4, 3)}});
    run("softmax_rows", [](Tape&, std::span<const Value> p) { return reduce(ad::softmax_rows(p[0])); },
        {{"x", u(3, 4)}});
    run("log_clamped", [](Tape&, std::span<const Value> p) { return reduce(ad::log_clamped(p[0])); },
        {{"x", uniform(3, 3, 0.2, 2.0, rng)}});
    run("grad_reverse",
        [](Tape&, std::span<const Value> p) {
            return reduce(ad::grad_reverse(ad::grad_reverse(p[0], 0.5), 2.0));
        },
        {{"x", u(3, 2)}});
    run("dropout", [](Tape&, std::span<const Value> p) { return reduce(ad::dropout(p[0], 0.5, 17)); },
        {{"x", u(4, 5)}});
    run("outer_flatten", [](Tape&, std::span<const Value> p) { return reduce(ad::outer_flatten(p[0], p[1])); },
        {{"f", u(3, 4)}, {"p", u(3, 2)}});
    run("slice_rows", [](Tape&, std::span<const Value> p) { return reduce(ad::slice_rows(p[0], 1, 3)); },
        {{"x", u(4, 2)}});
    run("concat_rows", [](Tape&, std::span<const Value> p) { return reduce(ad::concat_rows(p[0], p[1])); },
        {{"a", u(2, 3)}, {"b", u(3, 3)}});
    run("sum", [](Tape&, std::span<const Value> p) { return ad::sum(ad::mul(p[0], p[0])); }, {{"x", u(3, 3)}});

    run("mlp",
        [](Tape&, std::span<const Value> p) {
            Value h = ad::relu(ad::add_row(ad::matmul(p[0], p[1]), p[2]));
            h = ad::relu(ad::add_row(ad::matmul(h, p[3]), p[4]));
            h = ad::add_row(ad::matmul(h, p[5]), p[6]);
            return reduce(ad::softmax_rows(h));
        },
        {{"x", u(4, 3)},
         {"w0", u(3, 5)},
         {"b0", u(1, 5)},
         {"w1", u(5, 4)},
         {"b1", u(1, 4)},
         {"w2", u(4, 3)},
         {"b2", u(1, 3)}});

    {
        const std::vector<int> labels{0, 2, 3, 3, 1};
        const std::vector<double> alpha{1, 1, 0, 1, 1};
        run("loss_dynamic",
            [&](Tape&, std::span<const Value> p) {
                return loss_dynamic(ad::log_clamped(ad::softmax_rows(p[0])), labels, alpha);
            },
            {{"logits", u(5, 4)}});
        const std::vector<int> src{2, 0, 1};
        run("loss_source",
            [&](Tape&, std::span<const Value> p) {
                return loss_source(ad::log_clamped(ad::softmax_rows(p[0])), src);
            },
            {{"logits", u(3, 3)}});
        const std::vector<double> w{0.2, 0.9, 0.5};
        run("adversarial_value",
            [&](Tape&, std::span<const Value> p) {
                return adversarial_value(ad::sigmoid(p[0]), ad::sigmoid(p[1]), w);
            },
            {{"d_src", u(2, 1)}, {"d_tgt", u(3, 1)}});
    }

    // Composite through G, F, F* and D on a joint batch of two source and two
    // target rows, c = 3. α and W are fixed constants.
    {
        Architecture arch;
        arch.d_in = 2;
        arch.c = 3;
        arch.g_hidden = {5, 4};
        arch.d_b = 3;
        arch.h_d = 4;
        ModelBundle model = init_bundle(arch, rng);
        for (auto& layer : model.g) layer.bias = uniform(1, layer.out(), -0.5, 0.5, rng);
        for (Linear* layer : {&model.f_star, &model.f_dyn, &model.d[0], &model.d[1], &model.d[2]}) {
            layer->bias = uniform(1, layer->out(), -0.5, 0.5, rng);
        }
        const Matrix x = u(4, 2);
        const std::vector<int> labels{1, 2, 3, 3};
        const std::vector<int> src_labels{1, 2};
        const std::vector<double> alpha{1, 1, 1, 0};
        const std::vector<double> w{0.7, 0.25};
        const double lambda = 0.6;

        std::vector<FdParam> all;
        for (const auto& p : model.parameters()) all.push_back({p.name, *p.value});
        const std::size_t n_gen = all.size() - 6;

        // p* enters D detached, so a finite difference must see it as a constant.
        Matrix p_star_fixed;
        {
            Tape tape;
            const BoundModel bm = bind(tape, model, false);
            p_star_fixed = classify_known(bm, extract_features(bm, tape.constant(x))).data();
        }

        // Everything except D: L_F + L_F* + λV with the true derivative of V.
        std::vector<FdParam> gen(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_gen));
        run("composite.generator",
            [&](Tape& tape, std::span<const Value> p) {
                std::vector<Value> leaves(p.begin(), p.end());
                for (std::size_t i = n_gen; i < all.size(); ++i) leaves.push_back(tape.constant(all[i].value));
                const BoundModel bm = bind_leaves(model, leaves);
                const Value f = extract_features(bm, tape.constant(x));
                const Value p_open = classify_open(bm, f);
                const Value p_star = classify_known(bm, f);
                const Value d = discriminate_plain(bm, f, tape.constant(p_star_fixed));
                const Value lf = loss_dynamic(ad::log_clamped(p_open), labels, alpha);
                const Value lfs =
                    loss_source(ad::log_clamped(ad::slice_rows(p_star, 0, 2)), src_labels);
                const Value v = adversarial_value(ad::slice_rows(d, 0, 2), ad::slice_rows(d, 2, 4), w);
                return ad::add(ad::add(lf, lfs), ad::scale(v, lambda));
            },
            gen);

        // D only, through the real reversal node: the backward root is −V plus terms constant in D.
        std::vector<FdParam> disc(all.begin() + static_cast<std::ptrdiff_t>(n_gen), all.end());
        run("composite.discriminator",
            [&](Tape& tape, std::span<const Value> p) {
                std::vector<Value> leaves;
                for (std::size_t i = 0; i < n_gen; ++i) leaves.push_back(tape.constant(all[i].value));
                leaves.insert(leaves.end(), p.begin(), p.end());
                const BoundModel bm = bind_leaves(model, leaves);
                const Value f = extract_features(bm, tape.constant(x));
                const Value p_open = classify_open(bm, f);
                const Value p_star = classify_known(bm, f);
                const Value d = discriminate(bm, f, tape.constant(p_star_fixed), lambda, std::nullopt);
                const Value lf = loss_dynamic(ad::log_clamped(p_open), labels, alpha);
                const Value lfs =
                    loss_source(ad::log_clamped(ad::slice_rows(p_star, 0, 2)), src_labels);
                const Value v = adversarial_value(ad::slice_rows(d, 0, 2), ad::slice_rows(d, 2, 4), w);
                return integrated_step_losses(lf, lfs, v).backward_root;
            },
            disc);
    }
    return out;
}

} // namespace aal
