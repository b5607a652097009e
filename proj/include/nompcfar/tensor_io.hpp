#pragma once

#include "nompcfar/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>

namespace nompcfar {

// Binary cube layout, all little-endian:
//   "LSET" | u32 version (=1) | u32 D | u32 dims[D] | N x (f32 re, f32 im)
// with samples in first-dimension-fastest order.

inline constexpr std::uint32_t kTensorFileVersion = 1;

ComplexTensor read_tensor(std::istream& in);
void write_tensor(std::ostream& out, const ComplexTensor& tensor);

ComplexTensor read_tensor_file(const std::filesystem::path& path);
void write_tensor_file(const std::filesystem::path& path, const ComplexTensor& tensor);

} // namespace nompcfar
