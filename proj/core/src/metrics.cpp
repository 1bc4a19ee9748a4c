#include "aal/metrics.hpp"

#include "aal/errors.hpp"

#include <string>

namespace aal {

std::size_t ConfusionMatrix::row_sum(std::size_t truth) const {
    std::size_t s = 0;
    for (std::size_t p = 0; p < classes; ++p) s += at(truth, p);
    return s;
}

std::size_t ConfusionMatrix::col_sum(std::size_t pred) const {
    std::size_t s = 0;
    for (std::size_t t = 0; t < classes; ++t) s += at(t, pred);
    return s;
}

ConfusionMatrix confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred, std::size_t c) {
    if (y_true.size() != y_pred.size()) {
        throw ContractError("confusion_matrix: " + std::to_string(y_true.size()) + " labels vs " +
                            std::to_string(y_pred.size()) + " predictions");
    }
    ConfusionMatrix cm(c + 1);
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const int t = y_true[i];
        const int p = y_pred[i];
        if (t < 0 || p < 0 || static_cast<std::size_t>(t) > c || static_cast<std::size_t>(p) > c) {
            throw ContractError("confusion_matrix: index pair (" + std::to_string(t) + "," +
                                std::to_string(p) + ") outside [0," + std::to_string(c) + "]");
        }
        ++cm.at(static_cast<std::size_t>(t), static_cast<std::size_t>(p));
    }
    return cm;
}

MetricsRecord compute_os_metrics(const ConfusionMatrix& confusion, std::size_t c) {
    if (confusion.classes != c + 1) {
        throw DimensionError("compute_os_metrics: confusion has " + std::to_string(confusion.classes) +
                             " categories, expected " + std::to_string(c + 1));
    }
    MetricsRecord rec;
    rec.confusion = confusion;
    rec.per_cat_recall.resize(c + 1);

    double os_sum = 0.0;
    std::size_t os_n = 0;
    double known_sum = 0.0;
    std::size_t known_n = 0;
    for (std::size_t k = 0; k <= c; ++k) {
        const std::size_t members = confusion.row_sum(k);
        if (members > 0) {
            rec.per_cat_recall[k] = static_cast<double>(confusion.at(k, k)) / static_cast<double>(members);
        }
        if (members == 0 || confusion.col_sum(k) == 0) {
            rec.excluded_cats.push_back(static_cast<int>(k));
            continue;
        }
        os_sum += *rec.per_cat_recall[k];
        ++os_n;
        if (k < c) {
            known_sum += *rec.per_cat_recall[k];
            ++known_n;
        }
    }
    if (os_n == 0) {
        throw MetricsUndefinedError("compute_os_metrics: every category is excluded");
    }
    rec.os = os_sum / static_cast<double>(os_n);
    if (known_n > 0) rec.os_star = known_sum / static_cast<double>(known_n);
    rec.un = rec.per_cat_recall[c];
    return rec;
}

namespace {

enum class Head { features, open, known };

Matrix forward_eval(const ModelBundle& model, const Matrix& x, Head head) {
    ad::Tape tape;
    BoundModel bm = bind(tape, model, false);
    ad::Value f = extract_features(bm, tape.constant(x));
    switch (head) {
    case Head::features: return f.data();
    case Head::open: return classify_open(bm, f).data();
    case Head::known: return classify_known(bm, f).data();
    }
    return {};
}

} // namespace

std::vector<int> predict_open(const ModelBundle& model, const Matrix& x) {
    return argmax_rows(forward_eval(model, x, Head::open));
}

std::vector<int> predict_known(const ModelBundle& model, const Matrix& x) {
    return argmax_rows(forward_eval(model, x, Head::known));
}

Matrix embed(const ModelBundle& model, const Matrix& x) { return forward_eval(model, x, Head::features); }

MetricsRecord evaluate_predictions(std::span<const int> y_true, std::span<const int> y_pred, std::size_t c) {
    return compute_os_metrics(confusion_matrix(y_true, y_pred, c), c);
}

MetricsRecord evaluate(const ModelBundle& model, const OsdaDataset& dataset) {
    if (model.arch.c != dataset.c) {
        throw ContractError("evaluate: model has " + std::to_string(model.arch.c) +
                            " known categories, dataset has " + std::to_string(dataset.c));
    }
    const std::vector<int> truth = dataset.evaluation_labels();
    const std::vector<int> pred = predict_open(model, dataset.x_tgt);
    return evaluate_predictions(truth, pred, dataset.c);
}

} // namespace aal
