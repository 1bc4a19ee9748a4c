#pragma once

// Closed-form optimal discriminators for the (weighted) conditional adversarial
// value function on a finite support, and the Jensen-Shannon form of its value.
//
// On a support of points x, with source mass s(x), target mass t(x) and
// weight W(x):
//   V(D)  = Σ s log D + Σ W t log(1 − D)
//   D*    = s / (s + W t)
//   V(D*) = −log 4 + 2·JSD(s ‖ W t)   when Σ W t = 1.
// For a general weight measure the two sides differ by log 2 · (1 − Σ W t);
// value_at_optimum() reports both and the gap.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace aal::theory {

struct DiscreteJoint {
    /// Stand-ins for the (feature, probability) pairs; may be left empty.
    std::vector<std::vector<double>> support;
    std::vector<double> mass_s;
    std::vector<double> mass_t;
    std::vector<double> w;

    std::size_t size() const noexcept { return mass_s.size(); }
    /// Throws ContractError if masses are negative, unnormalized (±1e-12) or misaligned.
    void validate() const;
    /// Σ W·t, the total mass of the weighted target measure.
    double weighted_target_mass() const;
};

/// Unweighted joint (W ≡ 1).
DiscreteJoint make_joint(std::vector<double> mass_s, std::vector<double> mass_t);

/// Weights from per-point unknown probabilities: W = 1 − w^u (all ones when
/// Σ(1 − w^u) vanishes), then divided by their target-mass average so that
/// Σ W t = 1, the per-sample weighting W_j / Σ W of the batch objective.
std::vector<double> weights_from_unknown_probs(std::span<const double> w_unknown, std::span<const double> mass_t);

struct OptimalD {
    /// D* per point; empty where s + W t = 0 (undefined).
    std::vector<std::optional<double>> d;
    std::vector<std::size_t> undefined_points;
};

OptimalD optimal_d(const DiscreteJoint& j);

/// Σ s log D + Σ W t log(1 − D) with 0·log 0 = 0. D must have one entry per point.
double value(const DiscreteJoint& j, std::span<const double> d);

/// KL(p ‖ q) = Σ p log(p/q) for nonnegative measures, 0·log 0 = 0.
double kl(std::span<const double> p, std::span<const double> q);

/// ½KL(p ‖ m) + ½KL(q ‖ m), m = (p + q)/2, with q taken as-is (possibly unnormalized).
double jsd(std::span<const double> p, std::span<const double> q);

struct OptimumValue {
    double direct = 0.0;   // V(D*) evaluated from the definition
    double jsd_form = 0.0; // −log 4 + 2·JSD(s ‖ W t)
    double jsd = 0.0;
    /// direct − jsd_form; equals log 2 · (1 − Σ W t).
    double gap = 0.0;
};

/// Requires D* to be defined on every point.
OptimumValue value_at_optimum(const DiscreteJoint& j);

struct NumericOptimumReport {
    std::vector<double> d_learned;
    double max_abs_d_deviation = 0.0;
    double value_learned = 0.0;
    double value_optimal = 0.0;
    double abs_value_deviation = 0.0;
    bool diverged = false;
    std::string message;
};

/// Gradient ascent on V over one free logit per support point, starting at D = 1/2.
NumericOptimumReport verify_optimum_numerically(const DiscreteJoint& j, std::size_t steps, double lr);

/// Random joint on n points. Masses are uniform in [mass_floor, 1] before
/// normalization. With weighted = true, W comes from uniform random w^u
/// through weights_from_unknown_probs; otherwise W ≡ 1.
DiscreteJoint random_joint(std::size_t n, bool weighted, std::mt19937_64& rng, double mass_floor = 0.05);

struct TrialRecord {
    std::size_t trial = 0;
    bool weighted = false;
    double max_abs_d_deviation = 0.0;
    double abs_value_deviation = 0.0;
    double value_direct = 0.0;
    double value_jsd_form = 0.0;
    double identity_error = 0.0; // |direct − jsd_form|
    double jsd = 0.0;
    bool jsd_negative = false;   // reported, not asserted
    bool diverged = false;
};

struct TrialSettings {
    std::size_t trials = 100;
    std::size_t points = 5;
    std::size_t steps = 20000;
    double lr = 1.0;
    bool weighted = false;
    std::uint64_t seed = 0;
};

std::vector<TrialRecord> run_trials(const TrialSettings& settings);

} // namespace aal::theory
