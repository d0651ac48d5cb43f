#include "lgmc/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "lgmc/tensor_io.hpp"

namespace lgmc {

namespace {

class HeaderReader {
public:
    explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t number() {
        skip_space_and_comments();
        std::size_t value = 0;
        std::size_t digits = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            value = value * 10 + (bytes_[pos_++] - '0');
            if (++digits > 9) throw FormatError("PNM header value too large");
        }
        if (digits == 0) throw FormatError("malformed PNM header");
        return value;
    }

    // Exactly one whitespace byte separates the header from the raster.
    std::size_t raster_offset() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) throw FormatError("malformed PNM header");
        return pos_ + 1;
    }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 2;
};

}  // namespace

Tensor decode_pnm(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
        throw FormatError("not a binary PGM/PPM file");
    }
    const std::size_t channels = bytes[1] == '5' ? 1 : 3;
    HeaderReader header(bytes);
    const std::size_t width = header.number();
    const std::size_t height = header.number();
    const std::size_t maxval = header.number();
    if (width == 0 || height == 0) throw FormatError("PNM dimensions must be positive");
    if (maxval != 255) throw FormatError("only 8-bit PNM (maxval 255) is supported");
    const std::size_t offset = header.raster_offset();
    const std::size_t n = channels * width * height;
    if (bytes.size() < offset + n) throw FormatError("truncated PNM raster");

    Tensor image(Shape{channels, height, width});
    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x)
            for (std::size_t c = 0; c < channels; ++c)
                image(c, y, x) = static_cast<float>(bytes[offset + (y * width + x) * channels + c]) / 255.0f;
    return image;
}

std::vector<std::uint8_t> encode_pnm(const Tensor& image) {
    require_rank(image, 3, "encode_pnm");
    const std::size_t channels = image.dim(0), height = image.dim(1), width = image.dim(2);
    if (channels != 1 && channels != 3) {
        throw ShapeError("encode_pnm: need 1 or 3 channels, got " + shape_string(image.dims()));
    }
    const std::string header = std::string(channels == 1 ? "P5" : "P6") + "\n" + std::to_string(width) + " " +
                               std::to_string(height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(header.size() + channels * width * height);
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            for (std::size_t c = 0; c < channels; ++c) {
                const float v = std::clamp(image(c, y, x), 0.0f, 1.0f);
                out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0f)));
            }
        }
    }
    return out;
}

Tensor load_pnm(const std::filesystem::path& path) { return decode_pnm(read_file(path)); }

void save_pnm(const std::filesystem::path& path, const Tensor& image) { write_file(path, encode_pnm(image)); }

Tensor pad_to_multiple(const Tensor& map, std::size_t multiple) {
    require_rank(map, 3, "pad_to_multiple");
    const std::size_t C = map.dim(0), H = map.dim(1), W = map.dim(2);
    const std::size_t Hp = (H + multiple - 1) / multiple * multiple;
    const std::size_t Wp = (W + multiple - 1) / multiple * multiple;
    if (Hp == H && Wp == W) return map;
    Tensor out(Shape{C, Hp, Wp});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t y = 0; y < Hp; ++y)
            for (std::size_t x = 0; x < Wp; ++x) out(c, y, x) = map(c, std::min(y, H - 1), std::min(x, W - 1));
    return out;
}

Tensor crop(const Tensor& map, std::size_t height, std::size_t width) {
    require_rank(map, 3, "crop");
    if (height > map.dim(1) || width > map.dim(2) || height == 0 || width == 0) {
        throw ShapeError("crop: " + std::to_string(height) + "x" + std::to_string(width) + " outside " +
                         shape_string(map.dims()));
    }
    Tensor out(Shape{map.dim(0), height, width});
    for (std::size_t c = 0; c < map.dim(0); ++c)
        for (std::size_t y = 0; y < height; ++y)
            for (std::size_t x = 0; x < width; ++x) out(c, y, x) = map(c, y, x);
    return out;
}

}  // namespace lgmc
