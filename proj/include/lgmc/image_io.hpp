#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lgmc/tensor.hpp"

namespace lgmc {

// Binary PGM (P5) / PPM (P6), 8-bit, maxval 255. Pixels map to [0, 1] as
// value / 255; a 1×H×W tensor is written as P5, a 3×H×W tensor as P6.
Tensor decode_pnm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pnm(const Tensor& image);

Tensor load_pnm(const std::filesystem::path& path);
void save_pnm(const std::filesystem::path& path, const Tensor& image);

// Replicates the last row/column so both extents become multiples of `multiple`.
Tensor pad_to_multiple(const Tensor& map, std::size_t multiple);
Tensor crop(const Tensor& map, std::size_t height, std::size_t width);

}  // namespace lgmc
