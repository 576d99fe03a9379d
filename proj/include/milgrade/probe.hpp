#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "milgrade/matrix.hpp"
#include "milgrade/mil.hpp"
#include "milgrade/train_config.hpp"

namespace milgrade {

// Patch-level classes: background plus the five growth patterns. Patch class
// c >= 1 corresponds to slide class c - 1.
inline constexpr int kPatchClasses = 6;

inline constexpr std::array<const char*, kPatchClasses> kPatchClassNames = {
    "background", "lepidic", "acinar", "papillary", "micropapillary", "solid"};

// Softmax-regression weights over embeddings; the desk-scale stand-in for a
// fine-tuned patch encoder.
struct ProbeParams {
    Matrix w; // K_p x D
    Matrix b; // K_p x 1
};

struct PatchPrediction {
    Coord coord;
    std::vector<double> probs; // K_p simplex vector
    int pred = 0;              // argmax, lowest index on ties
};

struct LabeledPatchSet {
    Matrix embeddings;       // M x D
    std::vector<int> labels; // patch classes 0..5

    void validate() const;
};

ProbeParams init_probe(std::size_t dim);

PatchPrediction probe_forward(const ProbeParams& params, std::span<const double> embedding,
                              Coord coord = {});

// Per-patch predictions over one bag, in bag order.
std::vector<PatchPrediction> probe_predict_bag(const ProbeParams& params, const Bag& bag);

// Minibatch Adam with class-weighted sampling and early stopping on
// validation loss; returns the best-validation checkpoint.
std::pair<ProbeParams, std::vector<EpochLog>> train_probe(const LabeledPatchSet& train,
                                                          const LabeledPatchSet& val,
                                                          const TrainConfig& cfg);

// Slide label from patch predictions. Background predictions are excluded;
// ties go to the larger summed probability, then the lowest class index; if
// every patch says background, falls back to summed non-background
// probability.
int majority_vote(const std::vector<PatchPrediction>& preds);

// Seeded per-class split of a pooled patch set into train/val parts.
std::pair<LabeledPatchSet, LabeledPatchSet> split_patch_set(const LabeledPatchSet& set,
                                                            double val_fraction,
                                                            std::uint64_t seed);

// Checkpoint: magic "PRB1", u32 version, u32 K_p, u32 D, then W and b as
// little-endian f64.
void save_probe_checkpoint(const ProbeParams& params, const std::filesystem::path& path);
ProbeParams load_probe_checkpoint(const std::filesystem::path& path);

} // namespace milgrade
