#include "aal/objectives.hpp"

#include "aal/errors.hpp"

#include <string>

namespace aal {

std::vector<double> compute_alpha(std::span<const int> predicted, std::size_t n_src, std::size_t c) {
    if (n_src > predicted.size()) {
        throw ContractError("compute_alpha: n_src exceeds batch size");
    }
    std::vector<double> alpha(predicted.size(), 1.0);
    for (std::size_t i = n_src; i < predicted.size(); ++i) {
        const int y = predicted[i];
        if (y < 0 || static_cast<std::size_t>(y) > c) {
            throw ContractError("compute_alpha: predicted label " + std::to_string(y) +
                                " outside [0," + std::to_string(c) + "]");
        }
        alpha[i] = static_cast<std::size_t>(y) == c ? 1.0 : 0.0;
    }
    return alpha;
}

TargetWeights compute_w(std::span<const double> w_unknown) {
    TargetWeights out;
    out.w_known.reserve(w_unknown.size());
    double total = 0.0;
    for (double wu : w_unknown) {
        out.w_known.push_back(1.0 - wu);
        total += 1.0 - wu;
    }
    if (total <= kWeightSumFloor) {
        std::fill(out.w_known.begin(), out.w_known.end(), 1.0);
        out.fallback_applied = true;
    }
    return out;
}

ad::Value loss_dynamic(const ad::Value& logp_open, std::span<const int> labels,
                       std::span<const double> alpha) {
    if (logp_open.rows() == 0) throw ContractError("loss_dynamic: empty batch");
    return ad::weighted_nll(logp_open, labels, alpha);
}

ad::Value loss_source(const ad::Value& logp_known, std::span<const int> labels) {
    if (logp_known.rows() == 0) throw ContractError("loss_source: empty source batch");
    const std::vector<double> uniform(labels.size(), 1.0);
    return ad::weighted_nll(logp_known, labels, uniform);
}

ad::Value adversarial_value(const ad::Value& d_src, const ad::Value& d_tgt,
                            std::span<const double> w_known) {
    const std::size_t n_s = d_src.rows();
    const std::size_t n_t = d_tgt.rows();
    if (n_s == 0 || n_t == 0) {
        throw ContractError("adversarial_value: empty source or target slice");
    }
    if (d_src.cols() != 1 || d_tgt.cols() != 1) {
        throw DimensionError("adversarial_value: discriminator outputs must be column vectors");
    }
    if (w_known.size() != n_t) {
        throw DimensionError("adversarial_value: " + std::to_string(w_known.size()) +
                             " weights for " + std::to_string(n_t) + " target rows");
    }
    double wsum = 0.0;
    for (double w : w_known) wsum += w;
    if (!(wsum > 0.0)) {
        throw ContractError("adversarial_value: target weights sum to zero (apply compute_w first)");
    }
    const std::vector<double> src_coeff(n_s, 1.0 / static_cast<double>(n_s));
    std::vector<double> tgt_coeff(w_known.begin(), w_known.end());
    for (double& w : tgt_coeff) w /= wsum;

    ad::Value src_term = ad::weighted_sum(ad::log_clamped(d_src), src_coeff);
    ad::Value tgt_term = ad::weighted_sum(ad::log_clamped(ad::affine(d_tgt, -1.0, 1.0)), tgt_coeff);
    return ad::add(src_term, tgt_term);
}

StepLosses integrated_step_losses(const ad::Value& loss_f, const ad::Value& loss_fstar,
                                  const ad::Value& value) {
    StepLosses s;
    s.loss_f = loss_f;
    s.loss_fstar = loss_fstar;
    s.value = value;
    ad::Value classifiers = ad::add(loss_f, loss_fstar);
    s.generator_side = ad::add(classifiers, value);
    s.discriminator_side = ad::scale(value, -1.0);
    s.backward_root = ad::sub(classifiers, value);
    return s;
}

} // namespace aal
