#pragma once

#include "aal/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace aal {

/// What the trainer is allowed to see: labeled source, unlabeled target.
struct TrainingView {
    const Matrix* x_src = nullptr;
    std::span<const int> y_src;
    const Matrix* x_tgt = nullptr;
    std::size_t c = 0;
};

/// Open-set adaptation data. Known categories are 0..c−1; target-only
/// categories are c..c_total−1 and are collapsed into index c for evaluation.
struct OsdaDataset {
    Matrix x_src;
    std::vector<int> y_src;
    Matrix x_tgt;
    std::vector<int> y_tgt_hidden; // evaluation only
    std::size_t c = 0;
    std::size_t c_total = 0;

    std::size_t d_in() const noexcept { return x_src.cols; }
    TrainingView training_view() const { return {&x_src, y_src, &x_tgt, c}; }
    /// Hidden labels with every target-only category mapped to c.
    std::vector<int> evaluation_labels() const;

    /// Throws ContractError when a dataset invariant does not hold.
    void validate() const;

    friend bool operator==(const OsdaDataset&, const OsdaDataset&) = default;
};

/// Target-domain transformation: rotation about the origin followed by a
/// translation given in units of the blob noise deviation.
struct ShiftSpec {
    double translate_x = 0.75;
    double translate_y = -1.299038105676658;
    double rotation_deg = 20.0;
};

struct GaussianSpec {
    std::size_t c = 3;
    std::size_t n_unknown_cats = 1;
    std::size_t n_per_cat = 200;
    double radius = 3.0;
    double noise = 1.0;
    /// Unknown blobs of the first ring sit at unknown_scale·radius.
    double unknown_scale = 2.0;
    ShiftSpec shift{};
};

/// c isotropic blobs on a circle. Target blobs are the source blobs under the
/// shift; unknown blobs sit midway (in angle) between neighbouring source
/// means at unknown_scale·radius, one ring further out once those slots are used.
OsdaDataset gen_gaussian_osda(const GaussianSpec& spec, std::uint64_t seed);

struct TwoMoonsSpec {
    std::size_t n_per_cat = 200;
    double noise = 0.1;
    double rotation_deg = 30.0;
    double unknown_radius = 3.0;
    double unknown_noise = 0.1;
};

/// Two interleaved half moons as the known categories; target moons rotated
/// about the moons' centre; a ring around everything as the unknown category.
OsdaDataset gen_twomoons_osda(const TwoMoonsSpec& spec, std::uint64_t seed);

/// Centre of the two-moons layout (rotation pivot and ring centre).
inline constexpr double kMoonsCenterX = 0.5;
inline constexpr double kMoonsCenterY = 0.25;

struct CsvLoadOptions {
    /// Known-category count; inferred as max(source label)+1 when empty.
    std::optional<std::size_t> c;
    /// Standardize columns with source mean/std (std floored at 1e-8).
    bool standardize = true;
};

/// Reads `feat_0,...,feat_{d-1},label` (source) and `...,hidden_label`
/// (target). An optional header line starting with a non-numeric cell is skipped.
OsdaDataset load_csv(const std::filesystem::path& src, const std::filesystem::path& tgt,
                     const CsvLoadOptions& options = {});

/// Writes both files with a header row and round-trippable numbers.
void save_csv(const OsdaDataset& dataset, const std::filesystem::path& src,
              const std::filesystem::path& tgt);

inline constexpr double kStdFloor = 1e-8;

/// Standardizes both domains in place with the source column statistics.
void standardize_with_source_stats(OsdaDataset& dataset);

} // namespace aal
