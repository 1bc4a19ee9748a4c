#pragma once

#include "aal/data.hpp"
#include "aal/metrics.hpp"
#include "aal/networks.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace aal {

struct TrainConfig {
    std::size_t max_iter = 2000;
    std::size_t batch_size = 64;

    // Base learning rates per optimizer group.
    double base_lr_f = 0.01;     // F
    double base_lr_fstar = 0.01; // F*
    double base_lr_adv = 0.01;   // bottleneck and D; the backbone uses lr_scale_backbone × this
    double lr_scale_backbone = 1.0;

    // lr = base_lr · (1 + gamma·iter)^(−power)
    double gamma = 0.001;
    std::optional<double> gamma_f; // schedule of the F group; falls back to gamma
    double power = 0.75;
    double momentum = 0.9;

    double lambda_grl = 1.0;
    bool lambda_ramp = false;

    bool use_w = true;
    bool use_alpha = true;
    double dropout_rate = 0.5;

    std::uint64_t seed = 0;
    std::size_t eval_every = 50;
    std::size_t checkpoint_every = 0; // 0 disables

    std::vector<std::size_t> g_widths{64, 32};
    std::size_t d_b = 32;
    std::size_t h_d = 128;

    /// Throws ContractError describing the first invalid field.
    void validate() const;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Canonical key/value listing of every field, in declaration order.
std::vector<std::pair<std::string, std::string>> describe(const TrainConfig& cfg);
/// FNV-1a over describe(cfg).
std::uint64_t config_hash(const TrainConfig& cfg);

/// Raises F's unknown-category bias until every row of x_tgt is predicted
/// unknown with a logit margin of at least `margin`, so training starts with
/// all target samples labeled unknown.
void prime_unknown_head(ModelBundle& model, const Matrix& x_tgt, double margin = 1.0);

Architecture architecture_for(const TrainConfig& cfg, std::size_t d_in, std::size_t c);

/// base_lr · (1 + gamma·iter)^(−power)
double lr_at(double base_lr, double gamma, std::size_t iter, double power);

struct OptimizerState {
    std::vector<Matrix> velocity;
    std::size_t iter = 0;
};

OptimizerState make_optimizer_state(const ModelBundle& model);

/// Classical momentum: v ← momentum·v + g; p ← p − lr·v. One learning rate per parameter.
void sgd_step(std::span<Matrix* const> params, std::span<const Matrix> grads, OptimizerState& state,
              std::span<const double> lrs, double momentum);
void sgd_step(std::span<Matrix* const> params, std::span<const Matrix> grads, OptimizerState& state,
              double lr, double momentum);

struct Batch {
    Matrix x_src;
    std::vector<int> y_src;
    Matrix x_tgt;
};

/// batch_size/2 labeled source rows and the rest unlabeled target rows, drawn
/// uniformly with replacement.
Batch sample_batch(const TrainingView& view, const TrainConfig& cfg, std::mt19937_64& rng);

struct StepDiagnostics {
    std::size_t iter = 0;
    double loss_f = 0.0;
    double loss_fstar = 0.0;
    double value = 0.0;
    double lambda = 0.0;
    bool fallback_applied = false;
    std::size_t targets_predicted_unknown = 0;
};

struct StepGradients {
    std::vector<Matrix> grads; // ModelBundle::parameters() order
    StepDiagnostics diag;
};

/// One forward/backward pass of the full objective on a batch.
/// Throws NumericError when a loss component is not finite.
StepGradients compute_gradients(const ModelBundle& model, const Batch& batch, const TrainConfig& cfg,
                                double lambda, const std::optional<DropoutPlan>& dropout);

/// Effective learning rate of each parameter at a 0-based step count.
std::vector<double> group_learning_rates(const ModelBundle& model, const TrainConfig& cfg, std::size_t step);

struct CurvePoint {
    MetricsRecord metrics;
    double loss_f = 0.0;
    double loss_fstar = 0.0;
    double value = 0.0;
};

struct TrainHooks {
    std::function<void(const StepDiagnostics&)> on_step;
    std::function<void(std::size_t iter, const ModelBundle&)> on_checkpoint;
};

using Evaluator = std::function<MetricsRecord(const ModelBundle&)>;

struct TrainResult {
    ModelBundle model;
    std::vector<CurvePoint> curve;
};

/// Runs max_iter iterations over the training view. The evaluator, when
/// given, is called every eval_every iterations; it is the only component that
/// may consult hidden target labels.
TrainResult train(const TrainingView& view, const TrainConfig& cfg, const Evaluator& evaluator,
                  const TrainHooks& hooks = {});

/// Convenience wrapper that evaluates F on the dataset's target domain.
TrainResult train(const OsdaDataset& dataset, const TrainConfig& cfg, const TrainHooks& hooks = {});

/// Baseline: G and F* trained on source only; predictions are F*'s argmax over
/// the known categories, so the unknown category is never predicted.
TrainResult train_source_only(const OsdaDataset& dataset, const TrainConfig& cfg, const TrainHooks& hooks = {});

} // namespace aal
