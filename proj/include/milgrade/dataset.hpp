#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "milgrade/mil.hpp"
#include "milgrade/probe.hpp"

namespace milgrade {

// One manifest entry; embedding/coord paths are relative to the dataset root.
struct SlideRecord {
    std::string slide_id;
    std::string patient_id;
    std::optional<int> label; // slide class 0..4, absent at inference
    std::size_t n_patches = 0;
    std::size_t dim = 0;
    int patch_size = kDefaultPatchSizeForRecord;
    std::string embedding_path;
    std::string coord_path;

    static constexpr int kDefaultPatchSizeForRecord = 448;

    void validate() const;
};

// Binary blocks. All integers little-endian u32 unless noted.
//   FEMB: magic "FEMB", version=1, n, dim, then n*dim f32 row-major.
//   FCOO: magic "FCOO", version=1, n, then n pairs of i32 (x, y).
//   FLAB: magic "FLAB", version=1, n, then n i32 patch labels.
void write_embedding_block(const std::filesystem::path& path, const Matrix& embeddings);
Matrix read_embedding_block(const std::filesystem::path& path); // widened to f64

void write_coord_block(const std::filesystem::path& path, const std::vector<Coord>& coords);
std::vector<Coord> read_coord_block(const std::filesystem::path& path);

void write_bag(const SlideRecord& record, const Matrix& embeddings,
               const std::vector<Coord>& coords, const std::filesystem::path& root);
Bag read_bag(const SlideRecord& record, const std::filesystem::path& root);

// manifest.jsonl: one UTF-8 JSON object per line with the SlideRecord fields;
// label omitted when absent.
void write_manifest(const std::vector<SlideRecord>& records,
                    const std::filesystem::path& path);
std::vector<SlideRecord> read_manifest(const std::filesystem::path& path);

SlideRecord record_from_bag(const Bag& bag);

// Reads manifest.jsonl under dir and every referenced bag.
std::vector<Bag> load_bags(const std::filesystem::path& dir);

// Pooled patch-level set as FEMB + FLAB pair.
void write_patch_set(const LabeledPatchSet& set, const std::filesystem::path& femb_path,
                     const std::filesystem::path& flab_path);
LabeledPatchSet read_patch_set(const std::filesystem::path& femb_path,
                               const std::filesystem::path& flab_path);

// How non-predominant patches are drawn: a uniform mix over the other
// classes and background, or one shared confuser component that never
// appears in the pooled patch set (impure tissue has no pure patch label).
enum class RemainderMode : std::uint8_t { class_mix = 0, confuser = 1 };

struct SyntheticSpec {
    std::size_t n_slides = 0;
    std::size_t dim = 0;
    std::size_t patches_min = 1;
    std::size_t patches_max = 1;
    double frac_min = 0.5; // predominant fraction range, inclusive, in (0,1]
    double frac_max = 0.8;
    double class_separation = 6.0; // mean offset along the class direction
    double noise_sigma = 1.0;
    std::optional<std::array<double, kSlideClasses>> class_weights;
    std::uint64_t seed = 0;
    RemainderMode remainder = RemainderMode::class_mix;
    int patch_size = 448;

    void validate() const;
};

struct SyntheticCohort {
    std::vector<Bag> bags;
    LabeledPatchSet patches; // pooled patch-level set for probe training
};

// Deterministic per seed, bit-identical across runs.
SyntheticCohort synth_generate(const SyntheticSpec& spec);

// Unit mean direction of one synthetic patch component (patch class 0..5);
// exposed for the nearest-mean oracle in tests.
std::vector<double> synth_component_mean(int patch_class, std::size_t dim,
                                         double class_separation);

// Writes manifest + per-slide blocks + pooled patches.{femb,flab} under dir.
void write_cohort(const SyntheticCohort& cohort, const std::filesystem::path& dir);

} // namespace milgrade
