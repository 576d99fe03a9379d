#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace milgrade {

// Plain binary PPM (P6) image, 8-bit channels.
struct ImageRGB {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data; // 3 * width * height, interleaved

    ImageRGB() = default;
    ImageRGB(int w, int h, std::uint8_t r = 0, std::uint8_t g = 0, std::uint8_t b = 0);

    const std::uint8_t* pixel(int x, int y) const {
        return data.data() + 3 * (static_cast<std::size_t>(y) * width + x);
    }
    std::uint8_t* pixel(int x, int y) {
        return data.data() + 3 * (static_cast<std::size_t>(y) * width + x);
    }
    void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);
};

// Plain binary PGM (P5), 8-bit; masks store the class id per pixel.
struct ImageGray {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    ImageGray() = default;
    ImageGray(int w, int h, std::uint8_t fill = 0);

    std::uint8_t at(int x, int y) const {
        return data[static_cast<std::size_t>(y) * width + x];
    }
    void set(int x, int y, std::uint8_t v) {
        data[static_cast<std::size_t>(y) * width + x] = v;
    }
};

ImageRGB read_ppm(const std::filesystem::path& path);
void write_ppm(const ImageRGB& img, const std::filesystem::path& path);

ImageGray read_pgm(const std::filesystem::path& path);
void write_pgm(const ImageGray& img, const std::filesystem::path& path);

} // namespace milgrade
