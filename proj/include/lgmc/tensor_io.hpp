#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "lgmc/tensor.hpp"

namespace lgmc {

// Container layout: "LGMC", version byte 0x01, dtype byte (0x01 f32, 0x02 f64),
// rank byte, rank × u32 LE extents, row-major LE payload.
enum class DType : std::uint8_t { f32 = 0x01, f64 = 0x02 };

using AnyTensor = std::variant<Tensor, Tensor64>;

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
std::vector<std::uint8_t> encode_tensor(const Tensor64& t);
AnyTensor decode_tensor(std::span<const std::uint8_t> bytes);

// Decodes and converts to 32-bit if the payload is 64-bit.
Tensor decode_tensor_f32(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

Tensor load_tensor(const std::filesystem::path& path);
void save_tensor(const std::filesystem::path& path, const Tensor& t);

}  // namespace lgmc
