// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tokmerge/types.hpp"

namespace tokmerge::npy {

enum class DType { f4, f8 };

/// Contents of a version-1.0 .npy file, always held as 32-bit floats.
struct Array {
    std::vector<std::size_t> shape;
    std::vector<float> data;
    /// Element type found on disk; f8 payloads are narrowed to float on read.
    DType source_dtype = DType::f4;

    std::size_t rank() const { return shape.size(); }
};

/// Throws DataError on malformed header, unsupported dtype or truncated payload.
Array read(std::istream& in, const std::string& origin = "<stream>");
Array read(const std::filesystem::path& path);

/// Writes little-endian '<f4' data; shape product must equal data size.
void write(std::ostream& out, std::span<const std::size_t> shape, std::span<const float> data);
void write(const std::filesystem::path& path, std::span<const std::size_t> shape, std::span<const float> data);

std::string shape_string(std::span<const std::size_t> shape);

}  // namespace tokmerge::npy
