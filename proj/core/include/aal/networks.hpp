#pragma once

#include "aal/autodiff.hpp"
#include "aal/matrix.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace aal {

struct Linear {
    Matrix weight; // in × out
    Matrix bias;   // 1 × out

    std::size_t in() const noexcept { return weight.rows; }
    std::size_t out() const noexcept { return weight.cols; }

    friend bool operator==(const Linear&, const Linear&) = default;
};

/// Widths of the four networks. G is d_in → hidden... → d_b, F* is d_b → c,
/// F is d_b → c+1, D is d_b·c → h_d → h_d → 1.
struct Architecture {
    std::size_t d_in = 2;
    std::size_t c = 3;
    std::vector<std::size_t> g_hidden{64, 32};
    std::size_t d_b = 32;
    std::size_t h_d = 128;
};

/// Optimizer groups. Each group follows its own learning-rate schedule.
enum class ParamGroup { backbone, bottleneck, classifier_known, classifier_open, discriminator };

const char* to_string(ParamGroup g);

struct ParamRef {
    std::string name;
    Matrix* value;
    ParamGroup group;
};

struct ConstParamRef {
    std::string name;
    const Matrix* value;
    ParamGroup group;
};

/// Parameters of G, F*, F and D.
struct ModelBundle {
    Architecture arch;
    std::vector<Linear> g;       // last layer is the bottleneck
    Linear f_star;               // c-way source classifier
    Linear f_dyn;                // (c+1)-way dynamic classifier
    std::array<Linear, 3> d;     // discriminator

    /// Every parameter array in a fixed order (G layers, F*, F, D), weight before bias.
    std::vector<ParamRef> parameters();
    std::vector<ConstParamRef> parameters() const;

    /// Throws ContractError when layer widths disagree with arch.
    void validate() const;

    friend bool operator==(const ModelBundle& a, const ModelBundle& b) {
        return a.g == b.g && a.f_star == b.f_star && a.f_dyn == b.f_dyn && a.d == b.d;
    }
};

/// Glorot-uniform weights in ±sqrt(6/(fan_in+fan_out)), zero biases.
ModelBundle init_bundle(const Architecture& arch, std::mt19937_64& rng);

double glorot_bound(std::size_t fan_in, std::size_t fan_out);

// ---------------------------------------------------------------------------
// Forward passes on a tape.

struct BoundLinear {
    ad::Value weight;
    ad::Value bias;
};

/// A ModelBundle whose arrays have been placed on a tape as leaves.
struct BoundModel {
    const ModelBundle* model = nullptr;
    std::vector<BoundLinear> g;
    BoundLinear f_star;
    BoundLinear f_dyn;
    std::array<BoundLinear, 3> d;

    /// Leaves in ModelBundle::parameters() order.
    std::vector<ad::Value> leaves() const;
};

BoundModel bind(ad::Tape& tape, const ModelBundle& model, bool trainable);
/// Reassembles a BoundModel from leaves given in ModelBundle::parameters() order.
BoundModel bind_leaves(const ModelBundle& model, std::span<const ad::Value> leaves);

ad::Value linear(const BoundLinear& layer, const ad::Value& x);

/// Dropout settings for a training forward pass; evaluation passes omit them.
struct DropoutPlan {
    double rate = 0.5;
    std::uint64_t seed = 0;
};

/// G: ReLU between layers, linear bottleneck output.
ad::Value extract_features(const BoundModel& m, const ad::Value& x);
/// F*: softmax over c known categories.
ad::Value classify_known(const BoundModel& m, const ad::Value& features);
/// F: softmax over c+1 categories; column c is the unknown probability.
ad::Value classify_open(const BoundModel& m, const ad::Value& features);
/// D(reverse(f ⊗ detach(p*))) with dropout after both hidden layers when a plan is given.
/// Output is the probability of source-domain membership.
ad::Value discriminate(const BoundModel& m, const ad::Value& features, const ad::Value& p_star,
                       double lambda, const std::optional<DropoutPlan>& dropout);

/// Gradient-reversal coefficient: `constant` when ramp is off, else
/// constant·(2/(1+exp(−10·progress)) − 1).
double grl_coefficient(double constant, bool ramp, double progress);

// ---------------------------------------------------------------------------
// Checkpoints
//
// Text format, one record per line:
//   aal-checkpoint 1
//   config_hash <16 hex digits>
//   arch <d_in> <c> <d_b> <h_d> <n_hidden> <hidden widths...>
//   param <name> <rows> <cols>
//   <rows×cols hexfloat values, one row per line>
//   ...
//   end
// Hexfloat encoding makes the round trip bit-exact.

void save_checkpoint(const std::filesystem::path& path, const ModelBundle& model,
                     std::uint64_t config_hash);

struct Checkpoint {
    ModelBundle model;
    std::uint64_t config_hash = 0;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace aal
