#pragma once

// Losses and per-sample weights of the against-adversarial objective.
//
// Batches are joint: source rows first, then target rows. Category indices are
// zero-based, so the unknown category is index c.

#include "aal/autodiff.hpp"

#include <span>
#include <vector>

namespace aal {

/// Threshold below which Σ(1 − w^u) counts as zero.
inline constexpr double kWeightSumFloor = 1e-12;

struct BatchWeights {
    std::vector<double> alpha;   // one per joint-batch row, in {0,1}
    std::vector<double> w_known; // one per target row
    bool fallback_applied = false;
};

/// α for the dynamic classifier: 1 for source rows, 1 for target rows predicted
/// unknown (index c), 0 for target rows predicted as a known category.
/// `predicted` covers the whole joint batch; source entries are not inspected.
std::vector<double> compute_alpha(std::span<const int> predicted, std::size_t n_src, std::size_t c);

struct TargetWeights {
    std::vector<double> w_known;
    bool fallback_applied = false;
};

/// W_j = 1 − w^u_j, or all ones when Σ(1 − w^u_j) ≤ kWeightSumFloor.
TargetWeights compute_w(std::span<const double> w_unknown);

/// Dynamic classifier loss: −Σ α_i log p_{i,y_i} / Σ α_i over the joint batch.
ad::Value loss_dynamic(const ad::Value& logp_open, std::span<const int> labels,
                       std::span<const double> alpha);

/// Source classifier loss: mean negative log-likelihood over source rows.
ad::Value loss_source(const ad::Value& logp_known, std::span<const int> labels);

/// V(G,D) = (1/n_s) Σ log d_s + Σ_j (W_j / Σ W) log(1 − d_t,j), logs floored at 1e-12.
ad::Value adversarial_value(const ad::Value& d_src, const ad::Value& d_tgt,
                            std::span<const double> w_known);

struct StepLosses {
    ad::Value loss_f;
    ad::Value loss_fstar;
    ad::Value value;           // V(G,D)
    ad::Value generator_side;  // L_F + L_F* + V, minimized by G, F, F*
    ad::Value discriminator_side; // −V, minimized by D
    /// L_F + L_F* − V. With the reversal node between G and D, one descent step
    /// on this root moves D up V and moves G down L_F + L_F* + λV.
    ad::Value backward_root;
};

StepLosses integrated_step_losses(const ad::Value& loss_f, const ad::Value& loss_fstar,
                                  const ad::Value& value);

} // namespace aal
