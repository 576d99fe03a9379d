#include "milgrade/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"

#include "milgrade/binio.hpp"
#include "milgrade/errors.hpp"
#include "milgrade/rng.hpp"

namespace milgrade {

void SlideRecord::validate() const {
    if (slide_id.empty() || patient_id.empty()) {
        throw ContractError("SlideRecord: empty slide_id or patient_id");
    }
    if (n_patches < 1) {
        throw ContractError("SlideRecord " + slide_id + ": n_patches must be >= 1");
    }
    if (label && (*label < 0 || *label >= kSlideClasses)) {
        throw ContractError("SlideRecord " + slide_id + ": label " + std::to_string(*label) +
                            " out of range");
    }
}

namespace {

constexpr char kEmbMagic[4] = {'F', 'E', 'M', 'B'};
constexpr char kCooMagic[4] = {'F', 'C', 'O', 'O'};
constexpr char kLabMagic[4] = {'F', 'L', 'A', 'B'};
constexpr std::uint32_t kBlockVersion = 1;

} // namespace

void write_embedding_block(const std::filesystem::path& path, const Matrix& embeddings) {
    if (embeddings.rows == 0) {
        throw ContractError("write_embedding_block: n = 0");
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("embedding block " + path.string() + ": cannot open");
    write_magic(os, kEmbMagic);
    write_u32le(os, kBlockVersion);
    write_u32le(os, static_cast<std::uint32_t>(embeddings.rows));
    write_u32le(os, static_cast<std::uint32_t>(embeddings.cols));
    for (double v : embeddings.data) write_f32le(os, static_cast<float>(v));
    if (!os) throw FormatError("embedding block " + path.string() + ": write failed");
}

Matrix read_embedding_block(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    const std::string what = "embedding block " + path.string();
    if (!is) throw FormatError(what + ": cannot open");
    expect_magic(is, kEmbMagic, what);
    expect_version(is, kBlockVersion, what);
    const std::uint32_t n = read_u32le(is, what);
    const std::uint32_t dim = read_u32le(is, what);
    if (n == 0) throw ContractError(what + ": n = 0");
    if (dim == 0) throw FormatError(what + ": dim = 0");
    Matrix m(n, dim);
    for (double& v : m.data) {
        const float f = read_f32le(is, what);
        if (!std::isfinite(f)) throw FormatError(what + ": non-finite embedding value");
        v = static_cast<double>(f);
    }
    return m;
}

void write_coord_block(const std::filesystem::path& path, const std::vector<Coord>& coords) {
    if (coords.empty()) throw ContractError("write_coord_block: n = 0");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("coord block " + path.string() + ": cannot open");
    write_magic(os, kCooMagic);
    write_u32le(os, kBlockVersion);
    write_u32le(os, static_cast<std::uint32_t>(coords.size()));
    for (const Coord& c : coords) {
        write_i32le(os, c.x);
        write_i32le(os, c.y);
    }
    if (!os) throw FormatError("coord block " + path.string() + ": write failed");
}

std::vector<Coord> read_coord_block(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    const std::string what = "coord block " + path.string();
    if (!is) throw FormatError(what + ": cannot open");
    expect_magic(is, kCooMagic, what);
    expect_version(is, kBlockVersion, what);
    const std::uint32_t n = read_u32le(is, what);
    if (n == 0) throw ContractError(what + ": n = 0");
    std::vector<Coord> coords(n);
    for (Coord& c : coords) {
        c.x = read_i32le(is, what);
        c.y = read_i32le(is, what);
    }
    return coords;
}

void write_bag(const SlideRecord& record, const Matrix& embeddings,
               const std::vector<Coord>& coords, const std::filesystem::path& root) {
    record.validate();
    if (embeddings.rows != record.n_patches || embeddings.cols != record.dim) {
        throw ContractError("write_bag " + record.slide_id + ": embeddings " +
                            shape_string(embeddings) + " do not match record (" +
                            std::to_string(record.n_patches) + "x" +
                            std::to_string(record.dim) + ")");
    }
    if (coords.size() != record.n_patches) {
        throw ContractError("write_bag " + record.slide_id + ": " +
                            std::to_string(coords.size()) + " coords for " +
                            std::to_string(record.n_patches) + " patches");
    }
    write_embedding_block(root / record.embedding_path, embeddings);
    write_coord_block(root / record.coord_path, coords);
}

Bag read_bag(const SlideRecord& record, const std::filesystem::path& root) {
    record.validate();
    Bag bag;
    bag.slide_id = record.slide_id;
    bag.patient_id = record.patient_id;
    bag.label = record.label;
    bag.patch_size = record.patch_size;
    bag.embeddings = read_embedding_block(root / record.embedding_path);
    bag.coords = read_coord_block(root / record.coord_path);
    if (bag.embeddings.rows != record.n_patches || bag.embeddings.cols != record.dim) {
        throw FormatError("read_bag " + record.slide_id + ": block is " +
                          shape_string(bag.embeddings) + ", manifest says " +
                          std::to_string(record.n_patches) + "x" + std::to_string(record.dim));
    }
    if (bag.coords.size() != record.n_patches) {
        throw FormatError("read_bag " + record.slide_id + ": coord block has " +
                          std::to_string(bag.coords.size()) + " entries, manifest says " +
                          std::to_string(record.n_patches));
    }
    bag.validate();
    return bag;
}

void write_manifest(const std::vector<SlideRecord>& records,
                    const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("manifest " + path.string() + ": cannot open");
    for (const SlideRecord& r : records) {
        nlohmann::json j;
        j["slide_id"] = r.slide_id;
        j["patient_id"] = r.patient_id;
        if (r.label) j["label"] = *r.label;
        j["n_patches"] = r.n_patches;
        j["dim"] = r.dim;
        j["patch_size"] = r.patch_size;
        j["embedding_path"] = r.embedding_path;
        j["coord_path"] = r.coord_path;
        os << j.dump() << "\n";
    }
    if (!os) throw FormatError("manifest " + path.string() + ": write failed");
}

std::vector<SlideRecord> read_manifest(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("manifest " + path.string() + ": cannot open");
    std::vector<SlideRecord> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            SlideRecord r;
            r.slide_id = j.at("slide_id").get<std::string>();
            r.patient_id = j.at("patient_id").get<std::string>();
            if (j.contains("label")) r.label = j.at("label").get<int>();
            r.n_patches = j.at("n_patches").get<std::size_t>();
            r.dim = j.at("dim").get<std::size_t>();
            r.patch_size = j.at("patch_size").get<int>();
            r.embedding_path = j.at("embedding_path").get<std::string>();
            r.coord_path = j.at("coord_path").get<std::string>();
            records.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("manifest " + path.string() + " line " + std::to_string(lineno) +
                              ": " + e.what());
        }
        records.back().validate();
    }
    return records;
}

SlideRecord record_from_bag(const Bag& bag) {
    SlideRecord r;
    r.slide_id = bag.slide_id;
    r.patient_id = bag.patient_id;
    r.label = bag.label;
    r.n_patches = bag.embeddings.rows;
    r.dim = bag.embeddings.cols;
    r.patch_size = bag.patch_size;
    r.embedding_path = bag.slide_id + ".femb";
    r.coord_path = bag.slide_id + ".fcoo";
    return r;
}

std::vector<Bag> load_bags(const std::filesystem::path& dir) {
    const std::vector<SlideRecord> records = read_manifest(dir / "manifest.jsonl");
    std::vector<Bag> bags;
    bags.reserve(records.size());
    for (const SlideRecord& r : records) bags.push_back(read_bag(r, dir));
    return bags;
}

void write_patch_set(const LabeledPatchSet& set, const std::filesystem::path& femb_path,
                     const std::filesystem::path& flab_path) {
    set.validate();
    write_embedding_block(femb_path, set.embeddings);
    std::ofstream os(flab_path, std::ios::binary);
    if (!os) throw FormatError("label block " + flab_path.string() + ": cannot open");
    write_magic(os, kLabMagic);
    write_u32le(os, kBlockVersion);
    write_u32le(os, static_cast<std::uint32_t>(set.labels.size()));
    for (int l : set.labels) write_i32le(os, l);
    if (!os) throw FormatError("label block " + flab_path.string() + ": write failed");
}

LabeledPatchSet read_patch_set(const std::filesystem::path& femb_path,
                               const std::filesystem::path& flab_path) {
    LabeledPatchSet set;
    set.embeddings = read_embedding_block(femb_path);
    std::ifstream is(flab_path, std::ios::binary);
    const std::string what = "label block " + flab_path.string();
    if (!is) throw FormatError(what + ": cannot open");
    expect_magic(is, kLabMagic, what);
    expect_version(is, kBlockVersion, what);
    const std::uint32_t n = read_u32le(is, what);
    if (n != set.embeddings.rows) {
        throw FormatError(what + ": " + std::to_string(n) + " labels for " +
                          std::to_string(set.embeddings.rows) + " embeddings");
    }
    set.labels.resize(n);
    for (int& l : set.labels) l = read_i32le(is, what);
    set.validate();
    return set;
}

void SyntheticSpec::validate() const {
    if (n_slides < 1) throw ContractError("SyntheticSpec: n_slides must be >= 1");
    if (dim < 5) throw ContractError("SyntheticSpec: dim must be >= 5 for class directions");
    if (patches_min < 1 || patches_min > patches_max) {
        throw ContractError("SyntheticSpec: bad patches_per_slide range");
    }
    if (!(frac_min > 0.0) || frac_min > frac_max || frac_max > 1.0) {
        throw ContractError("SyntheticSpec: predominant_fraction range must be within (0,1]");
    }
    if (!(class_separation > 0.0)) throw ContractError("SyntheticSpec: separation must be > 0");
    if (!(noise_sigma > 0.0)) throw ContractError("SyntheticSpec: noise_sigma must be > 0");
    if (class_weights) {
        double total = 0.0;
        for (double w : *class_weights) {
            if (w < 0.0) throw ContractError("SyntheticSpec: negative class weight");
            total += w;
        }
        if (!(total > 0.0)) throw ContractError("SyntheticSpec: class weights sum to zero");
    }
    if (patch_size < 1) throw ContractError("SyntheticSpec: patch_size must be >= 1");
}

namespace {

// Internal component ids: 0..5 are the patch classes, 6 is the confuser.
constexpr int kConfuserComponent = 6;

std::vector<double> component_mean(int component, std::size_t dim, double separation) {
    std::vector<double> mean(dim, 0.0);
    if (component >= 1 && component <= kSlideClasses) {
        mean[static_cast<std::size_t>(component - 1)] = separation;
    } else if (component == kConfuserComponent) {
        // Shared confuser: between the micropapillary and solid directions,
        // unit length, so it crowds those two classes at any separation.
        const double v = separation / std::sqrt(2.0);
        mean[3] = v;
        mean[4] = v;
    }
    return mean;
}

} // namespace

std::vector<double> synth_component_mean(int patch_class, std::size_t dim,
                                         double class_separation) {
    if (patch_class < 0 || patch_class >= kPatchClasses) {
        throw DomainError("synth_component_mean: patch class out of range");
    }
    return component_mean(patch_class, dim, class_separation);
}

SyntheticCohort synth_generate(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    SyntheticCohort cohort;
    cohort.bags.reserve(spec.n_slides);

    std::vector<std::vector<double>> pooled_rows;
    std::vector<int> pooled_labels;

    std::vector<double> weights;
    if (spec.class_weights) {
        weights.assign(spec.class_weights->begin(), spec.class_weights->end());
    }

    for (std::size_t s = 0; s < spec.n_slides; ++s) {
        const int label = spec.class_weights
                              ? static_cast<int>(rng.discrete(weights))
                              : static_cast<int>(rng.uniform_int(0, kSlideClasses - 1));
        const std::size_t n = static_cast<std::size_t>(rng.uniform_int(
            static_cast<std::int64_t>(spec.patches_min),
            static_cast<std::int64_t>(spec.patches_max)));
        const double rho = rng.uniform(spec.frac_min, spec.frac_max);

        // Keep the realized predominant fraction inside the requested range.
        const double nd = static_cast<double>(n);
        std::int64_t n_info = std::llround(rho * nd);
        const std::int64_t lo = static_cast<std::int64_t>(std::ceil(spec.frac_min * nd));
        const std::int64_t hi = static_cast<std::int64_t>(std::floor(spec.frac_max * nd));
        if (lo <= hi) n_info = std::clamp(n_info, lo, hi);
        n_info = std::clamp<std::int64_t>(n_info, 1, static_cast<std::int64_t>(n));

        std::vector<int> components(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (i < static_cast<std::size_t>(n_info)) {
                components[i] = label + 1;
            } else if (spec.remainder == RemainderMode::confuser) {
                components[i] = kConfuserComponent;
            } else {
                // Uniform over background and the four other classes.
                const int pick = static_cast<int>(rng.uniform_int(0, kSlideClasses - 1));
                if (pick == 0) {
                    components[i] = 0;
                } else {
                    int cls = 0;
                    int seen = 0;
                    for (int c = 0; c < kSlideClasses; ++c) {
                        if (c == label) continue;
                        if (++seen == pick) {
                            cls = c;
                            break;
                        }
                    }
                    components[i] = cls + 1;
                }
            }
        }
        rng.shuffle(components);

        Bag bag;
        char idbuf[16];
        std::snprintf(idbuf, sizeof(idbuf), "S%04zu", s);
        bag.slide_id = idbuf;
        std::snprintf(idbuf, sizeof(idbuf), "P%04zu", s);
        bag.patient_id = idbuf;
        bag.label = label;
        bag.patch_size = spec.patch_size;
        bag.embeddings = Matrix(n, spec.dim);
        bag.coords.resize(n);

        const std::size_t grid_w =
            static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
        for (std::size_t i = 0; i < n; ++i) {
            const std::vector<double> mean =
                component_mean(components[i], spec.dim, spec.class_separation);
            double* row = bag.embeddings.row(i);
            for (std::size_t j = 0; j < spec.dim; ++j) {
                row[j] = mean[j] + spec.noise_sigma * rng.normal();
            }
            bag.coords[i] = {static_cast<std::int32_t>((i % grid_w) * spec.patch_size),
                             static_cast<std::int32_t>((i / grid_w) * spec.patch_size)};
            if (components[i] != kConfuserComponent) {
                pooled_rows.emplace_back(row, row + spec.dim);
                pooled_labels.push_back(components[i]);
            }
        }
        bag.validate();
        cohort.bags.push_back(std::move(bag));
    }

    cohort.patches.embeddings = Matrix(pooled_rows.size(), spec.dim);
    for (std::size_t i = 0; i < pooled_rows.size(); ++i) {
        std::copy(pooled_rows[i].begin(), pooled_rows[i].end(),
                  cohort.patches.embeddings.row(i));
    }
    cohort.patches.labels = std::move(pooled_labels);
    return cohort;
}

void write_cohort(const SyntheticCohort& cohort, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<SlideRecord> records;
    records.reserve(cohort.bags.size());
    for (const Bag& bag : cohort.bags) {
        SlideRecord r = record_from_bag(bag);
        write_bag(r, bag.embeddings, bag.coords, dir);
        records.push_back(std::move(r));
    }
    write_manifest(records, dir / "manifest.jsonl");
    if (cohort.patches.embeddings.rows > 0) {
        write_patch_set(cohort.patches, dir / "patches.femb", dir / "patches.flab");
    }
}

} // namespace milgrade
