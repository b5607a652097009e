#include "nompcfar/tensor_io.hpp"

#include "nompcfar/errors.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace nompcfar {

namespace {

constexpr std::array<char, 4> kMagic{'L', 'S', 'E', 'T'};

std::uint32_t read_u32(std::istream& in) {
    std::array<unsigned char, 4> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 4))
        throw InvalidArgument("tensor file: truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_u32(std::ostream& out, std::uint32_t v) {
    const std::array<unsigned char, 4> b{static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                         static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b.data()), 4);
}

float read_f32(std::istream& in) {
    return std::bit_cast<float>(read_u32(in));
}

void write_f32(std::ostream& out, float v) {
    write_u32(out, std::bit_cast<std::uint32_t>(v));
}

} // namespace

ComplexTensor read_tensor(std::istream& in) {
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), 4) || magic != kMagic)
        throw InvalidArgument("tensor file: bad magic (expected LSET)");
    const std::uint32_t version = read_u32(in);
    if (version != kTensorFileVersion)
        throw InvalidArgument("tensor file: unsupported version " + std::to_string(version));
    const std::uint32_t rank = read_u32(in);
    if (rank == 0 || rank > 16)
        throw InvalidArgument("tensor file: invalid rank " + std::to_string(rank));
    Dims dims(rank);
    for (auto& n : dims)
        n = read_u32(in);
    const std::size_t total = element_count(dims);
    CVector data(total);
    for (auto& v : data) {
        const float re = read_f32(in);
        const float im = read_f32(in);
        v = Complex(re, im);
    }
    return ComplexTensor(std::move(dims), std::move(data));
}

void write_tensor(std::ostream& out, const ComplexTensor& tensor) {
    out.write(kMagic.data(), 4);
    write_u32(out, kTensorFileVersion);
    write_u32(out, static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t n : tensor.dims())
        write_u32(out, static_cast<std::uint32_t>(n));
    for (const Complex& v : tensor.data()) {
        write_f32(out, static_cast<float>(v.real()));
        write_f32(out, static_cast<float>(v.imag()));
    }
}

ComplexTensor read_tensor_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InvalidArgument("cannot open tensor file " + path.string());
    return read_tensor(in);
}

void write_tensor_file(const std::filesystem::path& path, const ComplexTensor& tensor) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw InvalidArgument("cannot create tensor file " + path.string());
    write_tensor(out, tensor);
    if (!out)
        throw InvalidArgument("write failed for " + path.string());
}

} // namespace nompcfar
