#include "lgmc/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace lgmc {

namespace {

constexpr std::uint8_t kMagic[4] = {'L', 'G', 'M', 'C'};
constexpr std::uint8_t kVersion = 0x01;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class U>
void put_le(std::vector<std::uint8_t>& out, U value) {
    std::uint8_t buf[sizeof(U)];
    std::memcpy(buf, &value, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(U));
    out.insert(out.end(), buf, buf + sizeof(U));
}

template <class U>
U get_le(const std::uint8_t* p) {
    std::uint8_t buf[sizeof(U)];
    std::memcpy(buf, p, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(U));
    U value;
    std::memcpy(&value, buf, sizeof(U));
    return value;
}

template <class T>
std::vector<std::uint8_t> encode_impl(const BasicTensor<T>& t, DType dtype) {
    if (t.rank() > 255) throw FormatError("tensor rank exceeds container limit");
    std::vector<std::uint8_t> out;
    out.reserve(7 + 4 * t.rank() + sizeof(T) * t.size());
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    out.push_back(kVersion);
    out.push_back(static_cast<std::uint8_t>(dtype));
    out.push_back(static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.dims()) {
        if (d > 0xFFFFFFFFu) throw FormatError("tensor extent exceeds u32");
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    }
    for (T v : t.values()) put_le<T>(out, v);
    return out;
}

template <class T>
BasicTensor<T> decode_payload(const Shape& dims, const std::uint8_t* p) {
    BasicTensor<T> t(dims);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = get_le<T>(p + i * sizeof(T));
    if (!t.all_finite()) throw FormatError("tensor payload contains non-finite values");
    return t;
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t) { return encode_impl(t, DType::f32); }

std::vector<std::uint8_t> encode_tensor(const Tensor64& t) { return encode_impl(t, DType::f64); }

AnyTensor decode_tensor(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 7 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
        throw FormatError("not an LGMC tensor container (bad magic)");
    }
    if (bytes[4] != kVersion) {
        throw FormatError("unsupported tensor container version " + std::to_string(bytes[4]));
    }
    const std::uint8_t dtype = bytes[5];
    const std::size_t elem = dtype == 0x01 ? 4 : dtype == 0x02 ? 8 : 0;
    if (elem == 0) throw FormatError("unknown tensor dtype " + std::to_string(dtype));
    const std::size_t rank = bytes[6];
    if (rank == 0) throw FormatError("tensor rank must be at least 1");
    if (bytes.size() < 7 + 4 * rank) throw FormatError("truncated tensor header");
    Shape dims(rank);
    std::size_t volume = 1;
    for (std::size_t i = 0; i < rank; ++i) {
        dims[i] = get_le<std::uint32_t>(bytes.data() + 7 + 4 * i);
        if (dims[i] == 0) throw FormatError("tensor extents must be positive");
        volume *= dims[i];
    }
    const std::size_t header = 7 + 4 * rank;
    if (bytes.size() - header != volume * elem) {
        throw FormatError("tensor payload is " + std::to_string(bytes.size() - header) +
                          " bytes, expected " + std::to_string(volume * elem));
    }
    if (dtype == 0x01) return decode_payload<float>(dims, bytes.data() + header);
    return decode_payload<double>(dims, bytes.data() + header);
}

Tensor decode_tensor_f32(std::span<const std::uint8_t> bytes) {
    auto any = decode_tensor(bytes);
    if (auto* t = std::get_if<Tensor>(&any)) return std::move(*t);
    return std::get<Tensor64>(any).cast<float>();
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed for " + path.string());
}

Tensor load_tensor(const std::filesystem::path& path) { return decode_tensor_f32(read_file(path)); }

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
    write_file(path, encode_tensor(t));
}

}  // namespace lgmc
