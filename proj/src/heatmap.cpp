#include "milgrade/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "milgrade/errors.hpp"
#include "milgrade/numerics.hpp"

namespace milgrade {

void HeatmapSpec::validate() const {
    if (cell < 1) throw ContractError("HeatmapSpec: cell must be >= 1");
    if (clip_lo < 0.0 || clip_hi > 100.0 || clip_lo > clip_hi) {
        throw ContractError("HeatmapSpec: percentiles must be ordered within [0,100]");
    }
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw DomainError("percentile: empty input");
    std::sort(values.begin(), values.end());
    const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return values[lo] + (values[hi] - values[lo]) * frac;
}

namespace {

std::int32_t floor_div(std::int32_t a, std::int32_t b) {
    std::int32_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

} // namespace

Heatmap render_attention_map(const MilModel& model, const Bag& bag, const HeatmapSpec& spec) {
    spec.validate();
    if (spec.target_class >= 0 &&
        static_cast<std::size_t>(spec.target_class) >= model.config.n_classes) {
        throw UsageError("render_attention_map: class " + std::to_string(spec.target_class) +
                         " out of range for " + std::to_string(model.config.n_classes) +
                         " classes");
    }

    const MilOutput out = mil_forward(model, bag);
    const std::size_t n = bag.embeddings.rows;

    Heatmap map;
    map.rendered_class = spec.target_class >= 0 ? spec.target_class : argmax_lowest(out.logits);

    map.rows.resize(n);
    std::vector<double> column(n);
    for (std::size_t i = 0; i < n; ++i) {
        map.rows[i].coord = bag.coords[i];
        map.rows[i].attention.resize(model.config.n_classes);
        for (std::size_t c = 0; c < model.config.n_classes; ++c) {
            map.rows[i].attention[c] = out.attention(i, c);
        }
        column[i] = out.attention(i, static_cast<std::size_t>(map.rendered_class));
    }

    // Bounding grid of the patch coordinates.
    std::int32_t gx_min = 0, gx_max = 0, gy_min = 0, gy_max = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::int32_t gx = floor_div(bag.coords[i].x, bag.patch_size);
        const std::int32_t gy = floor_div(bag.coords[i].y, bag.patch_size);
        if (i == 0) {
            gx_min = gx_max = gx;
            gy_min = gy_max = gy;
        } else {
            gx_min = std::min(gx_min, gx);
            gx_max = std::max(gx_max, gx);
            gy_min = std::min(gy_min, gy);
            gy_max = std::max(gy_max, gy);
        }
    }
    const int grid_w = gx_max - gx_min + 1;
    const int grid_h = gy_max - gy_min + 1;
    map.raster = ImageGray(grid_w * spec.cell, grid_h * spec.cell, 0);

    const double lo = percentile(column, spec.clip_lo);
    const double hi = percentile(column, spec.clip_hi);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint8_t gray = 255; // constant column: no localization, all bright
        if (hi > lo) {
            const double v = std::clamp(column[i], lo, hi);
            gray = static_cast<std::uint8_t>(std::lround((v - lo) / (hi - lo) * 255.0));
        }
        const std::int32_t gx = floor_div(bag.coords[i].x, bag.patch_size) - gx_min;
        const std::int32_t gy = floor_div(bag.coords[i].y, bag.patch_size) - gy_min;
        for (int dy = 0; dy < spec.cell; ++dy) {
            for (int dx = 0; dx < spec.cell; ++dx) {
                map.raster.set(gx * spec.cell + dx, gy * spec.cell + dy, gray);
            }
        }
    }
    return map;
}

void write_heatmap_csv(const Heatmap& map, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("heatmap csv " + path.string() + ": cannot open");
    os << "x,y";
    const std::size_t k = map.rows.empty() ? 0 : map.rows[0].attention.size();
    for (std::size_t c = 0; c < k; ++c) os << ",a_class" << c;
    os << "\n";
    char buf[32];
    for (const HeatmapRow& row : map.rows) {
        os << row.coord.x << "," << row.coord.y;
        for (double a : row.attention) {
            std::snprintf(buf, sizeof(buf), "%.9g", a);
            os << "," << buf;
        }
        os << "\n";
    }
    if (!os) throw FormatError("heatmap csv " + path.string() + ": write failed");
}

} // namespace milgrade
