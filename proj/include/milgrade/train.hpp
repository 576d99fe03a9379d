#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "milgrade/dataset.hpp"
#include "milgrade/mil.hpp"
#include "milgrade/sampling.hpp"
#include "milgrade/train_config.hpp"

namespace milgrade {

struct FoldSplit {
    std::vector<std::string> train_ids;
    std::vector<std::string> val_ids;
    std::vector<std::string> test_ids;
};

// Patient-level stratified assignment of slides to k folds, with an inner
// validation split carved out of each fold's remainder.
struct FoldPlan {
    int k = 0;
    std::map<std::string, int> assignments; // slide_id -> test fold index
    std::vector<FoldSplit> folds;
};

// Patients (with all their slides) are dealt per class in seeded-shuffled
// order round-robin across folds, so per-class fold counts differ by <= 1
// where slide multiplicity allows.
FoldPlan stratified_patient_folds(const std::vector<SlideRecord>& records, int k,
                                  std::uint64_t seed, double val_fraction = 0.25);

std::string fold_plan_json(const FoldPlan& plan);

// Single patient-level stratified train/val split (no test fold); used by
// the standalone training commands.
std::pair<std::vector<std::string>, std::vector<std::string>> stratified_val_split(
    const std::vector<SlideRecord>& records, std::uint64_t seed, double val_fraction);

// One epoch = one weighted-sampled pass over the training bags with one Adam
// step per bag; early stopping on mean validation loss; returns the best
// checkpoint and the per-epoch log.
std::pair<MilModel, std::vector<EpochLog>> train_mil(const std::vector<const Bag*>& train,
                                                     const std::vector<const Bag*>& val,
                                                     const MilConfig& config,
                                                     const TrainConfig& tcfg);

std::pair<MilModel, std::vector<EpochLog>> train_mil(const std::vector<Bag>& train,
                                                     const std::vector<Bag>& val,
                                                     const MilConfig& config,
                                                     const TrainConfig& tcfg);

} // namespace milgrade
