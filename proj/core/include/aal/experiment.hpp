#pragma once

#include "aal/data.hpp"
#include "aal/metrics.hpp"
#include "aal/theory.hpp"
#include "aal/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace aal {

enum class DatasetKind { gaussian, twomoons, csv };

const char* to_string(DatasetKind k);

struct DatasetSource {
    DatasetKind kind = DatasetKind::gaussian;
    GaussianSpec gaussian{};
    TwoMoonsSpec twomoons{};
    std::filesystem::path source_csv;
    std::filesystem::path target_csv;
    CsvLoadOptions csv{};
};

enum class Baseline { source_only, unweighted_adversarial };

const char* to_string(Baseline b);

struct ExperimentSpec {
    std::string name = "aal";
    DatasetSource dataset{};
    TrainConfig train{};
    std::size_t repeats = 1;
    std::vector<Baseline> baselines;
    std::filesystem::path out_dir = "runs";

    /// Throws ContractError on an invalid field.
    void validate() const;
};

/// Sections [experiment], [dataset] and [train] of `key = value` lines; `#`
/// starts a comment. Missing keys keep their defaults. Unknown keys, bad
/// values and unknown sections raise ParseError carrying the line number.
ExperimentSpec parse_config(const std::filesystem::path& path);
ExperimentSpec parse_config_text(std::string_view text);

/// Applies one `key = value` override, as if it appeared in `section`.
void apply_setting(ExperimentSpec& spec, std::string_view section, std::string_view key,
                   std::string_view value);

/// Generated from the spec seed, or loaded from CSV.
OsdaDataset load_dataset(const DatasetSource& source, std::uint64_t seed);

struct RunRecord {
    std::string method;
    std::size_t repeat = 0;
    std::uint64_t seed = 0;
    MetricsRecord final_metrics;
    std::vector<CurvePoint> curve;
};

struct MethodSummary {
    std::string method;
    std::size_t repeats = 0;
    double os = 0.0;
    std::optional<double> os_star; // mean over repeats where defined
    std::optional<double> un;
};

struct ExperimentSummary {
    std::vector<MethodSummary> methods;
    std::vector<RunRecord> runs;
};

/// Runs AAL and the requested baselines `repeats` times with seeds seed+k and
/// writes, under out_dir:
///   <method>/run_<k>/{curves.csv, result.csv, checkpoint.txt, embeddings.csv}
///   summary.csv
ExperimentSummary run_experiment(const ExperimentSpec& spec);

struct AblationCell {
    bool use_w = true;
    bool use_alpha = true;
    MethodSummary summary;
};

/// The 2×2 grid over (use_w, use_alpha) in the order (off,off), (off,on), (on,off), (on,on).
/// Writes ablation.csv and per-cell run directories under out_dir/ablation.
std::vector<AblationCell> run_ablation_grid(const ExperimentSpec& spec);

/// Throws std::runtime_error unless `dir` can be created and written to.
void ensure_writable_dir(const std::filesystem::path& dir);

// CSV writers. Numbers use %.17g; undefined metrics are written as "nan".

std::string format_number(double v);
std::string format_number(const std::optional<double>& v);

void write_curves_csv(const std::filesystem::path& path, const std::vector<CurvePoint>& curve);
void write_result_csv(const std::filesystem::path& path, const MetricsRecord& m);
void write_embeddings_csv(const std::filesystem::path& path, const Matrix& features,
                          std::span<const int> hidden_labels);
void write_summary_csv(const std::filesystem::path& path, const std::vector<MethodSummary>& methods);
void write_ablation_csv(const std::filesystem::path& path, const std::vector<AblationCell>& cells);
void write_theory_report(const std::filesystem::path& path, const std::vector<theory::TrialRecord>& trials);

MethodSummary summarize(const std::string& method, const std::vector<MetricsRecord>& results);

} // namespace aal
