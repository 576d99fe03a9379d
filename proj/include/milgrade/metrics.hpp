#pragma once

#include <cstdint>
#include <vector>

namespace milgrade {

// K x K integer counts, rows = true class, cols = predicted.
struct ConfusionMatrix {
    std::size_t k = 0;
    std::vector<std::int64_t> counts;

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::size_t k_) : k(k_), counts(k_ * k_, 0) {}

    std::int64_t& at(std::size_t truth, std::size_t pred) { return counts[truth * k + pred]; }
    std::int64_t at(std::size_t truth, std::size_t pred) const { return counts[truth * k + pred]; }

    std::int64_t total() const;
    std::int64_t row_sum(std::size_t truth) const; // class support
    std::int64_t col_sum(std::size_t pred) const;
};

ConfusionMatrix confusion(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                          std::size_t k);

// F1_c = 2TP / (2TP + FP + FN); 0 when the denominator is 0 with support > 0,
// NaN (undefined) when support = 0.
std::vector<double> per_class_f1(const ConfusionMatrix& cm);

// Support-weighted mean of per-class F1; absent classes carry zero weight.
double weighted_f1(const ConfusionMatrix& cm);

// Unweighted Cohen's kappa; 1 exactly for the degenerate single-cell matrix.
double cohen_kappa(const ConfusionMatrix& cm);

struct Summary {
    double mean = 0.0;
    double stddev = 0.0; // sample std, n-1 denominator
};

Summary fold_summary(const std::vector<double>& values);

} // namespace milgrade
