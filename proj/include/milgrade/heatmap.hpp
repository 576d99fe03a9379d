#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "milgrade/image.hpp"
#include "milgrade/mil.hpp"

namespace milgrade {

// Rendering recipe for one slide's attention map.
struct HeatmapSpec {
    int target_class = -1;  // slide class index, or -1 = predicted class
    int cell = 8;           // output pixels per patch
    double clip_lo = 1.0;   // percentile pair for contrast clipping
    double clip_hi = 99.0;

    void validate() const;
};

struct HeatmapRow {
    Coord coord;
    std::vector<double> attention; // one weight per class, columns sum to 1
};

struct Heatmap {
    ImageGray raster;
    std::vector<HeatmapRow> rows; // one per patch, bag order
    int rendered_class = 0;
};

// Runs the forward pass, clips the target class's attention column at the
// [lo, hi] percentiles, min-max scales to [0,255], and paints one cell block
// per patch on the bounding grid. A constant column renders all-bright.
Heatmap render_attention_map(const MilModel& model, const Bag& bag, const HeatmapSpec& spec);

// Rows of (x, y, a_class0..a_classK-1).
void write_heatmap_csv(const Heatmap& map, const std::filesystem::path& path);

// Linear-interpolation percentile on a copy of the values; p in [0,100].
double percentile(std::vector<double> values, double p);

} // namespace milgrade
