#include "milgrade/image.hpp"

#include <fstream>
#include <string>

#include "milgrade/errors.hpp"

namespace milgrade {

ImageRGB::ImageRGB(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b)
    : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3) {
    for (std::size_t i = 0; i < data.size(); i += 3) {
        data[i] = r;
        data[i + 1] = g;
        data[i + 2] = b;
    }
}

void ImageRGB::set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    std::uint8_t* p = pixel(x, y);
    p[0] = r;
    p[1] = g;
    p[2] = b;
}

ImageGray::ImageGray(int w, int h, std::uint8_t fill)
    : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

namespace {

// Reads the next whitespace/comment-delimited header token of a PNM file.
std::string next_token(std::istream& is, const std::string& what) {
    std::string tok;
    int c = is.get();
    while (c != std::char_traits<char>::eof()) {
        if (c == '#') {
            while (c != '\n' && c != std::char_traits<char>::eof()) c = is.get();
        } else if (std::isspace(c)) {
            if (!tok.empty()) break;
        } else {
            tok.push_back(static_cast<char>(c));
            const int peek = is.peek();
            if (std::isspace(peek) || peek == '#' || peek == std::char_traits<char>::eof()) {
                is.get();
                break;
            }
        }
        c = is.get();
    }
    if (tok.empty()) throw FormatError(what + ": truncated header");
    return tok;
}

int parse_dim(const std::string& tok, const std::string& what) {
    try {
        const int v = std::stoi(tok);
        if (v <= 0) throw FormatError(what + ": non-positive dimension " + tok);
        return v;
    } catch (const FormatError&) {
        throw;
    } catch (const std::exception&) {
        throw FormatError(what + ": bad header token \"" + tok + "\"");
    }
}

void read_pnm_header(std::istream& is, const char* magic, int& w, int& h,
                     const std::string& what) {
    const std::string m = next_token(is, what);
    if (m != magic) {
        throw FormatError(what + ": bad magic \"" + m + "\", expected \"" + magic + "\"");
    }
    w = parse_dim(next_token(is, what), what);
    h = parse_dim(next_token(is, what), what);
    const int maxval = parse_dim(next_token(is, what), what);
    if (maxval != 255) {
        throw FormatError(what + ": unsupported maxval " + std::to_string(maxval));
    }
    // next_token already consumed the single whitespace before the payload
}

} // namespace

ImageRGB read_ppm(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    const std::string what = "ppm " + path.string();
    if (!is) throw FormatError(what + ": cannot open");
    ImageRGB img;
    read_pnm_header(is, "P6", img.width, img.height, what);
    img.data.resize(static_cast<std::size_t>(img.width) * img.height * 3);
    if (!is.read(reinterpret_cast<char*>(img.data.data()),
                 static_cast<std::streamsize>(img.data.size()))) {
        throw FormatError(what + ": truncated pixel data");
    }
    return img;
}

void write_ppm(const ImageRGB& img, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("ppm " + path.string() + ": cannot open for writing");
    os << "P6\n" << img.width << " " << img.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(img.data.data()),
             static_cast<std::streamsize>(img.data.size()));
    if (!os) throw FormatError("ppm " + path.string() + ": write failed");
}

ImageGray read_pgm(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    const std::string what = "pgm " + path.string();
    if (!is) throw FormatError(what + ": cannot open");
    ImageGray img;
    read_pnm_header(is, "P5", img.width, img.height, what);
    img.data.resize(static_cast<std::size_t>(img.width) * img.height);
    if (!is.read(reinterpret_cast<char*>(img.data.data()),
                 static_cast<std::streamsize>(img.data.size()))) {
        throw FormatError(what + ": truncated pixel data");
    }
    return img;
}

void write_pgm(const ImageGray& img, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("pgm " + path.string() + ": cannot open for writing");
    os << "P5\n" << img.width << " " << img.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(img.data.data()),
             static_cast<std::streamsize>(img.data.size()));
    if (!os) throw FormatError("pgm " + path.string() + ": write failed");
}

} // namespace milgrade
