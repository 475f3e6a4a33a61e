// SPDX-License-Identifier: Apache-2.0

#include "tokmerge/npy.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace tokmerge::npy {

static_assert(std::endian::native == std::endian::little, "npy I/O assumes a little-endian host");

namespace {

constexpr std::array<char, 6> kMagic = {'\x93', 'N', 'U', 'M', 'P', 'Y'};

// Returns the text following `'key':` in a numpy header dict, up to the next top-level ',' or '}'.
std::string header_value(const std::string& header, const std::string& key, const std::string& origin) {
    const std::string quoted = "'" + key + "'";
    auto pos = header.find(quoted);
    if (pos == std::string::npos) {
        throw DataError(origin + ": npy header has no '" + key + "' entry");
    }
    pos = header.find(':', pos + quoted.size());
    if (pos == std::string::npos) {
        throw DataError(origin + ": npy header entry '" + key + "' is malformed");
    }
    ++pos;
    int depth = 0;
    std::size_t end = pos;
    for (; end < header.size(); ++end) {
        const char c = header[end];
        if (c == '(') {
            ++depth;
        } else if (c == ')') {
            --depth;
        } else if ((c == ',' || c == '}') && depth == 0) {
            break;
        }
    }
    auto value = header.substr(pos, end - pos);
    const auto first = value.find_first_not_of(" \t");
    const auto last = value.find_last_not_of(" \t");
    return first == std::string::npos ? std::string{} : value.substr(first, last - first + 1);
}

std::vector<std::size_t> parse_shape(const std::string& text, const std::string& origin) {
    if (text.size() < 2 || text.front() != '(' || text.back() != ')') {
        throw DataError(origin + ": npy shape '" + text + "' is not a tuple");
    }
    std::vector<std::size_t> shape;
    std::string body = text.substr(1, text.size() - 2);
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto first = item.find_first_not_of(" \t");
        if (first == std::string::npos) {
            continue;
        }
        const auto last = item.find_last_not_of(" \t");
        item = item.substr(first, last - first + 1);
        std::size_t consumed = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(item, &consumed);
        } catch (const std::exception&) {
            throw DataError(origin + ": npy shape entry '" + item + "' is not a non-negative integer");
        }
        if (consumed != item.size()) {
            throw DataError(origin + ": npy shape entry '" + item + "' is not a non-negative integer");
        }
        shape.push_back(static_cast<std::size_t>(v));
    }
    return shape;
}

}  // namespace

std::string shape_string(std::span<const std::size_t> shape) {
    std::string out = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        out += std::to_string(shape[i]);
        if (shape.size() == 1 || i + 1 < shape.size()) {
            out += shape.size() == 1 ? "," : ", ";
        }
    }
    return out + ")";
}

Array read(std::istream& in, const std::string& origin) {
    std::array<char, 6> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) {
        throw DataError(origin + ": not an npy file (bad magic)");
    }
    unsigned char version[2] = {0, 0};
    in.read(reinterpret_cast<char*>(version), 2);
    if (!in) {
        throw DataError(origin + ": truncated npy header");
    }
    std::size_t header_len = 0;
    if (version[0] == 1) {
        unsigned char len[2];
        in.read(reinterpret_cast<char*>(len), 2);
        header_len = static_cast<std::size_t>(len[0]) | (static_cast<std::size_t>(len[1]) << 8);
    } else if (version[0] == 2) {
        unsigned char len[4];
        in.read(reinterpret_cast<char*>(len), 4);
        header_len = static_cast<std::size_t>(len[0]) | (static_cast<std::size_t>(len[1]) << 8) |
                     (static_cast<std::size_t>(len[2]) << 16) | (static_cast<std::size_t>(len[3]) << 24);
    } else {
        throw DataError(origin + ": unsupported npy version " + std::to_string(version[0]) + "." +
                        std::to_string(version[1]));
    }
    if (!in) {
        throw DataError(origin + ": truncated npy header");
    }
    std::string header(header_len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(header_len));
    if (!in) {
        throw DataError(origin + ": truncated npy header");
    }

    const auto descr = header_value(header, "descr", origin);
    const auto fortran = header_value(header, "fortran_order", origin);
    Array array;
    array.shape = parse_shape(header_value(header, "shape", origin), origin);

    std::size_t elem_size = 0;
    if (descr == "'<f4'") {
        array.source_dtype = DType::f4;
        elem_size = 4;
    } else if (descr == "'<f8'") {
        array.source_dtype = DType::f8;
        elem_size = 8;
    } else {
        throw DataError(origin + ": unsupported npy dtype " + descr + " (expected '<f4' or '<f8')");
    }
    if (fortran != "False") {
        throw DataError(origin + ": fortran_order arrays are not supported");
    }

    std::size_t count = 1;
    for (auto dim : array.shape) {
        if (dim != 0 && count > std::numeric_limits<std::size_t>::max() / dim) {
            throw DataError(origin + ": npy shape overflows");
        }
        count *= dim;
    }

    array.data.resize(count);
    if (elem_size == 4) {
        in.read(reinterpret_cast<char*>(array.data.data()), static_cast<std::streamsize>(count * 4));
    } else {
        std::vector<double> wide(count);
        in.read(reinterpret_cast<char*>(wide.data()), static_cast<std::streamsize>(count * 8));
        for (std::size_t i = 0; i < count; ++i) {
            array.data[i] = static_cast<float>(wide[i]);
        }
    }
    if (count > 0 && !in) {
        throw DataError(origin + ": npy payload truncated, expected " + std::to_string(count) + " elements");
    }
    return array;
}

Array read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    return read(in, path.string());
}

void write(std::ostream& out, std::span<const std::size_t> shape, std::span<const float> data) {
    std::size_t count = 1;
    for (auto dim : shape) {
        count *= dim;
    }
    if (count != data.size()) {
        throw DataError("npy write: shape " + shape_string(shape) + " does not match " +
                        std::to_string(data.size()) + " elements");
    }
    std::string header = "{'descr': '<f4', 'fortran_order': False, 'shape': " + shape_string(shape) + ", }";
    // magic(6) + version(2) + length(2) + header + '\n' padded to a multiple of 64
    const std::size_t unpadded = 10 + header.size() + 1;
    header.append((64 - unpadded % 64) % 64, ' ');
    header.push_back('\n');

    out.write(kMagic.data(), kMagic.size());
    const char version[2] = {1, 0};
    out.write(version, 2);
    const auto len = static_cast<std::uint16_t>(header.size());
    const char len_bytes[2] = {static_cast<char>(len & 0xff), static_cast<char>(len >> 8)};
    out.write(len_bytes, 2);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)));
}

void write(const std::filesystem::path& path, std::span<const std::size_t> shape, std::span<const float> data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot open " + path.string() + " for writing");
    }
    write(out, shape, data);
    out.flush();
    if (!out) {
        throw DataError("failed writing " + path.string());
    }
}

}  // namespace tokmerge::npy
