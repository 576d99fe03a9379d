#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"

#include "milgrade/errors.hpp"
#include "milgrade/heatmap.hpp"
#include "milgrade/mil.hpp"
#include "milgrade/rng.hpp"

using namespace milgrade;

namespace {

MilConfig tiny_config(std::size_t dim = 6) {
    MilConfig cfg;
    cfg.input_dim = dim;
    cfg.proj_dim = 8;
    cfg.attn_dim = 4;
    return cfg;
}

Bag grid_bag(std::size_t n, std::size_t dim, Rng& rng, int patch_size = 448) {
    Bag bag;
    bag.slide_id = "S_map";
    bag.patient_id = "P_map";
    bag.patch_size = patch_size;
    bag.embeddings = Matrix(n, dim);
    for (double& v : bag.embeddings.data) v = rng.uniform(-1.0, 1.0);
    bag.coords.resize(n);
    const std::size_t gw = 4;
    for (std::size_t i = 0; i < n; ++i) {
        bag.coords[i] = {static_cast<std::int32_t>((i % gw) * patch_size),
                         static_cast<std::int32_t>((i / gw) * patch_size)};
    }
    return bag;
}

} // namespace

TEST_CASE("percentile interpolation") {
    CHECK(percentile({1.0, 2.0, 3.0, 4.0}, 0.0) == 1.0);
    CHECK(percentile({1.0, 2.0, 3.0, 4.0}, 100.0) == 4.0);
    CHECK(percentile({1.0, 2.0, 3.0, 4.0}, 50.0) == doctest::Approx(2.5));
    CHECK(percentile({5.0}, 37.0) == 5.0);
    CHECK_THROWS_AS(percentile({}, 50.0), DomainError);
}

TEST_CASE("uniform attention renders all-bright cells") {
    Rng rng(3);
    const MilConfig cfg = tiny_config();
    MilModel model = init_model(cfg, 8);
    model.params.v_tanh = Matrix(cfg.attn_dim, cfg.proj_dim);
    model.params.u_gate = Matrix(cfg.attn_dim, cfg.proj_dim);
    model.params.w_attn = Matrix(cfg.n_classes, cfg.attn_dim);

    const Bag bag = grid_bag(8, cfg.input_dim, rng);
    HeatmapSpec spec;
    spec.target_class = 0;
    spec.cell = 4;
    const Heatmap map = render_attention_map(model, bag, spec);

    // 4x2 grid of 4-pixel cells.
    CHECK(map.raster.width == 16);
    CHECK(map.raster.height == 8);
    for (std::uint8_t v : map.raster.data) CHECK(v == 255);
    CHECK(map.rows.size() == 8);
}

TEST_CASE("a dominant patch is the only bright cell") {
    Rng rng(5);
    const MilConfig cfg = tiny_config();
    MilModel model = init_model(cfg, 11);
    Bag bag = grid_bag(12, cfg.input_dim, rng);
    // Blow up patch 5 so its gated score dominates every class column.
    for (std::size_t j = 0; j < cfg.input_dim; ++j) bag.embeddings(5, j) = 40.0;

    HeatmapSpec spec;
    spec.target_class = 1;
    spec.cell = 2;
    const Heatmap map = render_attention_map(model, bag, spec);

    const MilOutput out = mil_forward(model, bag);
    if (out.attention(5, 1) > 0.99) {
        const std::int32_t gx = bag.coords[5].x / bag.patch_size;
        const std::int32_t gy = bag.coords[5].y / bag.patch_size;
        CHECK(map.raster.at(gx * 2, gy * 2) == 255);
        std::size_t bright = 0;
        for (std::uint8_t v : map.raster.data) {
            if (v == 255) ++bright;
        }
        CHECK(bright == 4); // exactly one 2x2 cell
    }
}

TEST_CASE("heatmap csv has one row per patch with class columns that sum to 1") {
    Rng rng(7);
    const MilConfig cfg = tiny_config();
    const MilModel model = init_model(cfg, 21);
    const Bag bag = grid_bag(10, cfg.input_dim, rng);
    HeatmapSpec spec; // predicted class
    const Heatmap map = render_attention_map(model, bag, spec);
    REQUIRE(map.rows.size() == 10);

    for (std::size_t c = 0; c < cfg.n_classes; ++c) {
        double sum = 0.0;
        for (const HeatmapRow& row : map.rows) sum += row.attention[c];
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }

    const auto path = std::filesystem::temp_directory_path() / "milgrade_test_map.csv";
    write_heatmap_csv(map, path);
    std::ifstream is(path);
    std::string line;
    std::getline(is, line);
    CHECK(line == "x,y,a_class0,a_class1,a_class2,a_class3,a_class4");
    std::size_t rows = 0;
    while (std::getline(is, line)) {
        if (!line.empty()) ++rows;
    }
    CHECK(rows == 10);
    std::filesystem::remove(path);
}

TEST_CASE("heatmap rejects out-of-range classes and bad specs") {
    Rng rng(9);
    const MilConfig cfg = tiny_config();
    const MilModel model = init_model(cfg, 2);
    const Bag bag = grid_bag(4, cfg.input_dim, rng);
    HeatmapSpec spec;
    spec.target_class = 9;
    CHECK_THROWS_AS(render_attention_map(model, bag, spec), UsageError);
    spec.target_class = 0;
    spec.clip_lo = 80.0;
    spec.clip_hi = 20.0;
    CHECK_THROWS_AS(render_attention_map(model, bag, spec), ContractError);
    spec.clip_lo = 1.0;
    spec.clip_hi = 99.0;
    spec.cell = 0;
    CHECK_THROWS_AS(render_attention_map(model, bag, spec), ContractError);
}
