#include "milgrade/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "milgrade/errors.hpp"

namespace milgrade {

std::int64_t ConfusionMatrix::total() const {
    std::int64_t t = 0;
    for (std::int64_t c : counts) t += c;
    return t;
}

std::int64_t ConfusionMatrix::row_sum(std::size_t truth) const {
    std::int64_t t = 0;
    for (std::size_t p = 0; p < k; ++p) t += at(truth, p);
    return t;
}

std::int64_t ConfusionMatrix::col_sum(std::size_t pred) const {
    std::int64_t t = 0;
    for (std::size_t r = 0; r < k; ++r) t += at(r, pred);
    return t;
}

ConfusionMatrix confusion(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                          std::size_t k) {
    if (y_true.empty() || y_true.size() != y_pred.size()) {
        throw ContractError("confusion: label lists must be non-empty and equal length");
    }
    ConfusionMatrix cm(k);
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const int t = y_true[i];
        const int p = y_pred[i];
        if (t < 0 || static_cast<std::size_t>(t) >= k || p < 0 ||
            static_cast<std::size_t>(p) >= k) {
            throw ContractError("confusion: label pair (" + std::to_string(t) + "," +
                                std::to_string(p) + ") out of range at index " +
                                std::to_string(i));
        }
        ++cm.at(static_cast<std::size_t>(t), static_cast<std::size_t>(p));
    }
    return cm;
}

std::vector<double> per_class_f1(const ConfusionMatrix& cm) {
    std::vector<double> f1(cm.k);
    for (std::size_t c = 0; c < cm.k; ++c) {
        const std::int64_t tp = cm.at(c, c);
        const std::int64_t support = cm.row_sum(c);
        const std::int64_t fn = support - tp;
        const std::int64_t fp = cm.col_sum(c) - tp;
        if (support == 0) {
            f1[c] = std::numeric_limits<double>::quiet_NaN();
        } else if (2 * tp + fp + fn == 0) {
            f1[c] = 0.0;
        } else {
            f1[c] = 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
        }
    }
    return f1;
}

double weighted_f1(const ConfusionMatrix& cm) {
    const std::int64_t total = cm.total();
    if (total <= 0) throw ContractError("weighted_f1: empty confusion matrix");
    const std::vector<double> f1 = per_class_f1(cm);
    double out = 0.0;
    for (std::size_t c = 0; c < cm.k; ++c) {
        const std::int64_t support = cm.row_sum(c);
        if (support == 0) continue; // zero weight, skip the undefined F1
        out += static_cast<double>(support) / static_cast<double>(total) * f1[c];
    }
    return out;
}

double cohen_kappa(const ConfusionMatrix& cm) {
    const std::int64_t total = cm.total();
    if (total <= 0) throw ContractError("cohen_kappa: empty confusion matrix");
    const double n = static_cast<double>(total);
    double po = 0.0;
    double pe = 0.0;
    for (std::size_t c = 0; c < cm.k; ++c) {
        po += static_cast<double>(cm.at(c, c)) / n;
        pe += (static_cast<double>(cm.row_sum(c)) / n) * (static_cast<double>(cm.col_sum(c)) / n);
    }
    if (pe >= 1.0) return 1.0; // single-cell matrix: po = pe = 1
    return (po - pe) / (1.0 - pe);
}

Summary fold_summary(const std::vector<double>& values) {
    if (values.size() < 2) {
        throw ContractError("fold_summary: need at least 2 values, got " +
                            std::to_string(values.size()));
    }
    Summary s;
    for (double v : values) s.mean += v;
    s.mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    return s;
}

} // namespace milgrade
