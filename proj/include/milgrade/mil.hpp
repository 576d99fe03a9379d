#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "milgrade/matrix.hpp"

namespace milgrade {

inline constexpr int kSlideClasses = 5;

// Slide-level class order used everywhere: index 0..4.
inline constexpr std::array<const char*, kSlideClasses> kClassNames = {
    "lepidic", "acinar", "papillary", "micropapillary", "solid"};

enum class Activation : std::uint8_t { linear = 0, rectified = 1 };

struct MilConfig {
    std::size_t input_dim = 0;   // encoder embedding width D
    std::size_t proj_dim = 512;  // projected tile embedding width
    std::size_t attn_dim = 256;  // tanh/gate branch width L
    std::size_t n_classes = kSlideClasses;
    Activation proj_activation = Activation::rectified;

    void validate() const;
};

// All weights of the projection, gated-attention, and per-class classifier
// layers. Biases are stored as single-column matrices.
struct MilParams {
    Matrix w_proj; // proj_dim x D
    Matrix b_proj; // proj_dim x 1
    Matrix v_tanh; // attn_dim x proj_dim, tanh branch
    Matrix u_gate; // attn_dim x proj_dim, sigmoid gate branch
    Matrix w_attn; // K x attn_dim, per-class attention score vectors
    Matrix w_clf;  // K x proj_dim, per-class bag classifiers
    Matrix b_clf;  // K x 1
};

struct MilModel {
    MilConfig config;
    MilParams params;
};

struct Coord {
    std::int32_t x = 0;
    std::int32_t y = 0;
    bool operator==(const Coord&) const = default;
};

// One slide's patch embeddings plus coordinates; the MIL unit.
struct Bag {
    std::string slide_id;
    std::string patient_id;
    Matrix embeddings; // N x D
    std::vector<Coord> coords;
    int patch_size = 448;
    std::optional<int> label; // absent at inference

    void validate() const;
};

struct MilOutput {
    std::vector<double> logits; // K
    Matrix attention;           // N x K, column c sums to 1
    Matrix bag_reps;            // K x proj_dim
};

struct MilPrediction {
    int cls = 0;
    std::vector<double> logits;
    Matrix attention;
};

// Xavier-uniform weights (+-sqrt(6/(fan_in+fan_out)) per block), zero biases,
// deterministic per seed.
MilParams init_params(const MilConfig& config, std::uint64_t seed);
MilModel init_model(const MilConfig& config, std::uint64_t seed);

// Column-wise softmax over instance scores; exposed for the shift-invariance
// property and reused by the forward pass.
Matrix attention_from_scores(const Matrix& scores);

MilOutput mil_forward(const MilModel& model, const Bag& bag);

// Cross-entropy loss against bag.label with exact analytic gradients for all
// parameter blocks (same shapes as MilParams).
std::pair<double, MilParams> mil_loss_and_grad(const MilModel& model, const Bag& bag);

// argmax of the logits; exact ties resolved to the lowest class index.
MilPrediction predict(const MilModel& model, const Bag& bag);

// Flat parameter vector in checkpoint block order; used by the gradient
// checker and tests.
std::vector<double> flatten_params(const MilParams& p);
void unflatten_params(const std::vector<double>& flat, MilParams& p);

// Checkpoint: magic "MILP", u32 version, config as u32 fields + u8 activation
// tag, then each block as little-endian f64 row-major.
void save_mil_checkpoint(const MilModel& model, const std::filesystem::path& path);
MilModel load_mil_checkpoint(const std::filesystem::path& path);

} // namespace milgrade
