#pragma once

#include "aal/data.hpp"
#include "aal/matrix.hpp"
#include "aal/networks.hpp"

#include <optional>
#include <span>
#include <vector>

namespace aal {

/// Square count matrix over c+1 categories; rows are ground truth, columns predictions.
struct ConfusionMatrix {
    std::size_t classes = 0;
    std::vector<std::size_t> counts;

    explicit ConfusionMatrix(std::size_t n = 0) : classes(n), counts(n * n, 0) {}

    std::size_t& at(std::size_t truth, std::size_t pred) { return counts[truth * classes + pred]; }
    std::size_t at(std::size_t truth, std::size_t pred) const { return counts[truth * classes + pred]; }
    std::size_t row_sum(std::size_t truth) const;
    std::size_t col_sum(std::size_t pred) const;

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Counts (truth, prediction) pairs. Indices must lie in [0, c].
ConfusionMatrix confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred, std::size_t c);

struct MetricsRecord {
    std::size_t iter = 0;
    ConfusionMatrix confusion;
    /// Recall per category; empty when the row has no members.
    std::vector<std::optional<double>> per_cat_recall;
    /// Categories left out of OS and OS*: no predictions, or no members.
    std::vector<int> excluded_cats;
    double os = 0.0;
    /// Undefined when every known category is excluded.
    std::optional<double> os_star;
    /// Recall of the unknown category; undefined when it has no members.
    std::optional<double> un;
};

/// OS over non-excluded categories among all c+1, OS* over non-excluded known
/// ones, UN as the unknown recall. A category is excluded when nothing was
/// predicted as it or it has no ground-truth members.
/// Throws MetricsUndefinedError when every category is excluded.
MetricsRecord compute_os_metrics(const ConfusionMatrix& confusion, std::size_t c);

/// Argmax of F over c+1 categories (dropout off), ties to the lowest index.
std::vector<int> predict_open(const ModelBundle& model, const Matrix& x);
/// Argmax of F* over the c known categories; never predicts unknown.
std::vector<int> predict_known(const ModelBundle& model, const Matrix& x);
/// Bottleneck features of G (dropout off).
Matrix embed(const ModelBundle& model, const Matrix& x);

/// Tests F on all target samples against the hidden labels.
MetricsRecord evaluate(const ModelBundle& model, const OsdaDataset& dataset);

MetricsRecord evaluate_predictions(std::span<const int> y_true, std::span<const int> y_pred, std::size_t c);

} // namespace aal
