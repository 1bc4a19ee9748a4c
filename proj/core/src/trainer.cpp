#include "aal/trainer.hpp"

#include "aal/errors.hpp"
#include "aal/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace aal {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Independent generator streams derived from the single run seed.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(id)};
    return std::mt19937_64(seq);
}

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kBatchStream = 2;
constexpr std::uint64_t kDropoutStream = 3;

} // namespace

void TrainConfig::validate() const {
    auto fail = [](const std::string& what) { throw ContractError("invalid train config: " + what); };
    if (batch_size < 2) fail("batch_size must be >= 2");
    for (auto [name, v] : {std::pair{"base_lr_f", base_lr_f}, std::pair{"base_lr_fstar", base_lr_fstar},
                           std::pair{"base_lr_adv", base_lr_adv}}) {
        if (!(v > 0.0) || !std::isfinite(v)) fail(std::string(name) + " must be positive");
    }
    if (!(gamma >= 0.0)) fail("gamma must be >= 0");
    if (gamma_f && !(*gamma_f >= 0.0)) fail("gamma_f must be >= 0");
    if (!(power > 0.0)) fail("power must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must lie in [0,1)");
    if (!(lambda_grl >= 0.0)) fail("lambda_grl must be >= 0");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail("dropout_rate must lie in [0,1)");
    if (!(lr_scale_backbone >= 0.0 && lr_scale_backbone <= 1.0)) fail("lr_scale_backbone must lie in [0,1]");
    if (eval_every == 0) fail("eval_every must be positive");
    if (d_b == 0 || h_d == 0) fail("d_b and h_d must be positive");
    for (std::size_t w : g_widths) {
        if (w == 0) fail("g_widths entries must be positive");
    }
}

std::vector<std::pair<std::string, std::string>> describe(const TrainConfig& cfg) {
    std::string widths;
    for (std::size_t i = 0; i < cfg.g_widths.size(); ++i) {
        widths += (i ? "," : "") + std::to_string(cfg.g_widths[i]);
    }
    auto b = [](bool v) { return std::string(v ? "true" : "false"); };
    return {
        {"max_iter", std::to_string(cfg.max_iter)},
        {"batch_size", std::to_string(cfg.batch_size)},
        {"base_lr_f", fmt_double(cfg.base_lr_f)},
        {"base_lr_fstar", fmt_double(cfg.base_lr_fstar)},
        {"base_lr_adv", fmt_double(cfg.base_lr_adv)},
        {"lr_scale_backbone", fmt_double(cfg.lr_scale_backbone)},
        {"gamma", fmt_double(cfg.gamma)},
        {"gamma_f", cfg.gamma_f ? fmt_double(*cfg.gamma_f) : std::string("auto")},
        {"power", fmt_double(cfg.power)},
        {"momentum", fmt_double(cfg.momentum)},
        {"lambda_grl", fmt_double(cfg.lambda_grl)},
        {"lambda_ramp", b(cfg.lambda_ramp)},
        {"use_w", b(cfg.use_w)},
        {"use_alpha", b(cfg.use_alpha)},
        {"dropout_rate", fmt_double(cfg.dropout_rate)},
        {"seed", std::to_string(cfg.seed)},
        {"eval_every", std::to_string(cfg.eval_every)},
        {"checkpoint_every", std::to_string(cfg.checkpoint_every)},
        {"g_widths", widths},
        {"d_b", std::to_string(cfg.d_b)},
        {"h_d", std::to_string(cfg.h_d)},
    };
}

std::uint64_t config_hash(const TrainConfig& cfg) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const std::string& s) {
        for (unsigned char ch : s) {
            h ^= ch;
            h *= 1099511628211ULL;
        }
        h ^= 0xff;
        h *= 1099511628211ULL;
    };
    for (const auto& [k, v] : describe(cfg)) {
        mix(k);
        mix(v);
    }
    return h;
}

void prime_unknown_head(ModelBundle& model, const Matrix& x_tgt, double margin) {
    const std::size_t c = model.arch.c;
    ad::Tape tape;
    const BoundModel bm = bind(tape, model, false);
    const ad::Value logits = linear(bm.f_dyn, extract_features(bm, tape.constant(x_tgt)));
    double lift = 0.0;
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const auto row = logits.data().row(r);
        double best_known = row[0];
        for (std::size_t k = 1; k < c; ++k) best_known = std::max(best_known, row[k]);
        lift = std::max(lift, best_known - row[c] + margin);
    }
    model.f_dyn.bias(0, c) += lift;
}

Architecture architecture_for(const TrainConfig& cfg, std::size_t d_in, std::size_t c) {
    return Architecture{d_in, c, cfg.g_widths, cfg.d_b, cfg.h_d};
}

double lr_at(double base_lr, double gamma, std::size_t iter, double power) {
    return base_lr * std::pow(1.0 + gamma * static_cast<double>(iter), -power);
}

OptimizerState make_optimizer_state(const ModelBundle& model) {
    OptimizerState s;
    for (const auto& p : model.parameters()) s.velocity.emplace_back(p.value->rows, p.value->cols, 0.0);
    return s;
}

void sgd_step(std::span<Matrix* const> params, std::span<const Matrix> grads, OptimizerState& state,
              std::span<const double> lrs, double momentum) {
    if (params.size() != grads.size() || params.size() != lrs.size()) {
        throw ContractError("sgd_step: parameter, gradient and learning-rate counts differ");
    }
    if (state.velocity.empty()) {
        for (const Matrix* p : params) state.velocity.emplace_back(p->rows, p->cols, 0.0);
    }
    if (state.velocity.size() != params.size()) throw ContractError("sgd_step: optimizer state size mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        Matrix& p = *params[i];
        Matrix& v = state.velocity[i];
        const Matrix& g = grads[i];
        if (!p.same_shape(g) || !p.same_shape(v)) {
            throw ContractError("sgd_step: shape mismatch for parameter " + std::to_string(i) + ": " +
                                p.shape_string() + " vs grad " + g.shape_string());
        }
        for (std::size_t k = 0; k < p.size(); ++k) {
            v.data[k] = momentum * v.data[k] + g.data[k];
            p.data[k] -= lrs[i] * v.data[k];
        }
    }
    ++state.iter;
}

void sgd_step(std::span<Matrix* const> params, std::span<const Matrix> grads, OptimizerState& state,
              double lr, double momentum) {
    const std::vector<double> lrs(params.size(), lr);
    sgd_step(params, grads, state, lrs, momentum);
}

Batch sample_batch(const TrainingView& view, const TrainConfig& cfg, std::mt19937_64& rng) {
    if (view.x_src == nullptr || view.x_tgt == nullptr || view.x_src->rows == 0 || view.x_tgt->rows == 0) {
        throw ContractError("sample_batch: both domains must be nonempty");
    }
    const std::size_t n_src = cfg.batch_size / 2;
    const std::size_t n_tgt = cfg.batch_size - n_src;
    std::uniform_int_distribution<std::size_t> pick_src(0, view.x_src->rows - 1);
    std::uniform_int_distribution<std::size_t> pick_tgt(0, view.x_tgt->rows - 1);
    std::vector<std::size_t> si(n_src);
    std::vector<std::size_t> ti(n_tgt);
    for (auto& i : si) i = pick_src(rng);
    for (auto& i : ti) i = pick_tgt(rng);
    Batch b;
    b.x_src = gather_rows(*view.x_src, si);
    b.y_src.reserve(n_src);
    for (std::size_t i : si) b.y_src.push_back(view.y_src[i]);
    b.x_tgt = gather_rows(*view.x_tgt, ti);
    return b;
}

StepGradients compute_gradients(const ModelBundle& model, const Batch& batch, const TrainConfig& cfg,
                                double lambda, const std::optional<DropoutPlan>& dropout) {
    const std::size_t c = model.arch.c;
    const std::size_t n_s = batch.x_src.rows;
    const std::size_t n_t = batch.x_tgt.rows;
    const std::size_t m = n_s + n_t;

    ad::Tape tape;
    BoundModel bm = bind(tape, model, true);
    ad::Value x = ad::concat_rows(tape.constant(batch.x_src), tape.constant(batch.x_tgt));
    ad::Value f = extract_features(bm, x);
    ad::Value p_open = classify_open(bm, f);
    ad::Value p_star = classify_known(bm, f);
    ad::Value d = discriminate(bm, f, p_star, lambda, dropout);

    const std::vector<int> predicted = argmax_rows(p_open.data());
    std::vector<double> alpha(m, 1.0);
    if (cfg.use_alpha) alpha = compute_alpha(predicted, n_s, c);

    std::vector<double> w_unknown(n_t);
    for (std::size_t j = 0; j < n_t; ++j) w_unknown[j] = p_open.data()(n_s + j, c);
    TargetWeights w{std::vector<double>(n_t, 1.0), false};
    if (cfg.use_w) w = compute_w(w_unknown);

    std::vector<int> labels(batch.y_src);
    labels.resize(m, static_cast<int>(c));

    ad::Value loss_f = loss_dynamic(ad::log_clamped(p_open), labels, alpha);
    ad::Value loss_fstar = loss_source(ad::log_clamped(ad::slice_rows(p_star, 0, n_s)), batch.y_src);
    ad::Value value = adversarial_value(ad::slice_rows(d, 0, n_s), ad::slice_rows(d, n_s, m), w.w_known);
    StepLosses losses = integrated_step_losses(loss_f, loss_fstar, value);

    StepGradients out;
    out.diag.loss_f = loss_f.item();
    out.diag.loss_fstar = loss_fstar.item();
    out.diag.value = value.item();
    out.diag.lambda = lambda;
    out.diag.fallback_applied = w.fallback_applied;
    for (std::size_t j = n_s; j < m; ++j) {
        if (static_cast<std::size_t>(predicted[j]) == c) ++out.diag.targets_predicted_unknown;
    }
    if (!std::isfinite(out.diag.loss_f) || !std::isfinite(out.diag.loss_fstar) || !std::isfinite(out.diag.value)) {
        std::ostringstream msg;
        msg << "non-finite loss: L_F=" << out.diag.loss_f << " L_F*=" << out.diag.loss_fstar
            << " V=" << out.diag.value;
        throw NumericError(msg.str());
    }

    tape.backward(losses.backward_root);
    for (const ad::Value& leaf : bm.leaves()) out.grads.push_back(leaf.grad());
    return out;
}

std::vector<double> group_learning_rates(const ModelBundle& model, const TrainConfig& cfg, std::size_t step) {
    const double gamma_f = cfg.gamma_f.value_or(cfg.gamma);
    const double lr_f = lr_at(cfg.base_lr_f, gamma_f, step, cfg.power);
    const double lr_fstar = lr_at(cfg.base_lr_fstar, cfg.gamma, step, cfg.power);
    const double lr_adv = lr_at(cfg.base_lr_adv, cfg.gamma, step, cfg.power);
    std::vector<double> lrs;
    for (const auto& p : model.parameters()) {
        switch (p.group) {
        case ParamGroup::backbone: lrs.push_back(cfg.lr_scale_backbone * lr_adv); break;
        case ParamGroup::bottleneck: lrs.push_back(lr_adv); break;
        case ParamGroup::classifier_known: lrs.push_back(lr_fstar); break;
        case ParamGroup::classifier_open: lrs.push_back(lr_f); break;
        case ParamGroup::discriminator: lrs.push_back(lr_adv); break;
        }
    }
    return lrs;
}

namespace {

std::vector<Matrix*> param_pointers(ModelBundle& model) {
    std::vector<Matrix*> out;
    for (auto& p : model.parameters()) out.push_back(p.value);
    return out;
}

void maybe_checkpoint(const TrainHooks& hooks, const TrainConfig& cfg, std::size_t iter, const ModelBundle& m) {
    if (hooks.on_checkpoint && cfg.checkpoint_every > 0 && iter % cfg.checkpoint_every == 0) {
        hooks.on_checkpoint(iter, m);
    }
}

} // namespace

TrainResult train(const TrainingView& view, const TrainConfig& cfg, const Evaluator& evaluator,
                  const TrainHooks& hooks) {
    cfg.validate();
    if (view.x_src == nullptr || view.x_tgt == nullptr) throw ContractError("train: incomplete training view");
    auto init_rng = stream(cfg.seed, kInitStream);
    auto batch_rng = stream(cfg.seed, kBatchStream);
    auto dropout_rng = stream(cfg.seed, kDropoutStream);

    TrainResult result;
    result.model = init_bundle(architecture_for(cfg, view.x_src->cols, view.c), init_rng);
    prime_unknown_head(result.model, *view.x_tgt);
    OptimizerState state = make_optimizer_state(result.model);
    const std::vector<Matrix*> params = param_pointers(result.model);

    for (std::size_t iter = 1; iter <= cfg.max_iter; ++iter) {
        const std::size_t step = iter - 1;
        const Batch batch = sample_batch(view, cfg, batch_rng);
        const double progress = static_cast<double>(step) / static_cast<double>(cfg.max_iter);
        const double lambda = grl_coefficient(cfg.lambda_grl, cfg.lambda_ramp, progress);
        const DropoutPlan plan{cfg.dropout_rate, dropout_rng()};

        StepGradients sg;
        try {
            sg = compute_gradients(result.model, batch, cfg, lambda, plan);
        } catch (const NumericError& e) {
            throw NumericError("iteration " + std::to_string(iter) + ": " + e.what());
        }
        sg.diag.iter = iter;
        sgd_step(params, sg.grads, state, group_learning_rates(result.model, cfg, step), cfg.momentum);

        if (hooks.on_step) hooks.on_step(sg.diag);
        if (evaluator && iter % cfg.eval_every == 0) {
            CurvePoint pt{evaluator(result.model), sg.diag.loss_f, sg.diag.loss_fstar, sg.diag.value};
            pt.metrics.iter = iter;
            result.curve.push_back(std::move(pt));
        }
        maybe_checkpoint(hooks, cfg, iter, result.model);
    }
    return result;
}

TrainResult train(const OsdaDataset& dataset, const TrainConfig& cfg, const TrainHooks& hooks) {
    dataset.validate();
    return train(dataset.training_view(), cfg,
                 [&dataset](const ModelBundle& m) { return evaluate(m, dataset); }, hooks);
}

TrainResult train_source_only(const OsdaDataset& dataset, const TrainConfig& cfg, const TrainHooks& hooks) {
    cfg.validate();
    dataset.validate();
    const TrainingView view = dataset.training_view();
    auto init_rng = stream(cfg.seed, kInitStream);
    auto batch_rng = stream(cfg.seed, kBatchStream);

    TrainResult result;
    result.model = init_bundle(architecture_for(cfg, dataset.d_in(), dataset.c), init_rng);
    OptimizerState state = make_optimizer_state(result.model);
    const std::vector<Matrix*> params = param_pointers(result.model);
    const std::vector<int> truth = dataset.evaluation_labels();

    for (std::size_t iter = 1; iter <= cfg.max_iter; ++iter) {
        const std::size_t step = iter - 1;
        const Batch batch = sample_batch(view, cfg, batch_rng);

        ad::Tape tape;
        BoundModel bm = bind(tape, result.model, true);
        ad::Value f = extract_features(bm, tape.constant(batch.x_src));
        ad::Value loss = loss_source(ad::log_clamped(classify_known(bm, f)), batch.y_src);
        StepDiagnostics diag;
        diag.iter = iter;
        diag.loss_fstar = loss.item();
        diag.loss_f = std::nan("");
        diag.value = std::nan("");
        if (!std::isfinite(diag.loss_fstar)) {
            throw NumericError("iteration " + std::to_string(iter) + ": non-finite source loss");
        }
        tape.backward(loss);

        // Only G and F* receive gradients; the other heads stay at their initial values.
        std::vector<Matrix> grads;
        for (const ad::Value& leaf : bm.leaves()) grads.push_back(leaf.grad());
        sgd_step(params, grads, state, group_learning_rates(result.model, cfg, step), cfg.momentum);

        if (hooks.on_step) hooks.on_step(diag);
        if (iter % cfg.eval_every == 0) {
            CurvePoint pt{evaluate_predictions(truth, predict_known(result.model, dataset.x_tgt), dataset.c),
                          diag.loss_f, diag.loss_fstar, diag.value};
            pt.metrics.iter = iter;
            result.curve.push_back(std::move(pt));
        }
        maybe_checkpoint(hooks, cfg, iter, result.model);
    }
    return result;
}

} // namespace aal
