#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "milgrade/metrics.hpp"
#include "milgrade/probe.hpp"
#include "milgrade/train.hpp"

namespace milgrade {

struct EvalResult {
    ConfusionMatrix cm;
    double weighted_f1 = 0.0;
    double kappa = 0.0;
    std::vector<double> per_class_f1; // NaN for absent classes
};

struct FoldMetrics {
    int fold = 0;
    EvalResult eval;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
};

struct CvResult {
    FoldPlan plan;
    std::vector<FoldMetrics> folds;
    Summary weighted_f1;
    Summary kappa;
};

EvalResult evaluate_predictions(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                                std::size_t k);

EvalResult evaluate_mil(const MilModel& model, const std::vector<Bag>& bags);

// Majority-vote arm: per-patch probe predictions aggregated per slide.
EvalResult evaluate_vote(const ProbeParams& probe, const std::vector<Bag>& bags);

// Patient-stratified k-fold cross-validation of the MIL head. Folds are
// independent; n_threads caps the workers (0 = auto). Results are identical
// for any thread count.
CvResult cross_validate(const std::vector<Bag>& bags, int k, const MilConfig& config,
                        const TrainConfig& tcfg, int n_threads = 0);

// As above, but each fold's test slides are scored by majority voting with a
// fixed probe; no training happens (the probe is trained elsewhere).
std::vector<EvalResult> cross_validate_vote(const std::vector<Bag>& bags, const FoldPlan& plan,
                                            const ProbeParams& probe);

void write_cv_report_csv(const CvResult& result, const std::filesystem::path& path);
void write_eval_report_csv(const EvalResult& result, const std::filesystem::path& path);

// Table 2 style "mean±std" block, 3 decimals.
std::string format_cv_table(const CvResult& result);
std::string format_eval_table(const EvalResult& result);

} // namespace milgrade
