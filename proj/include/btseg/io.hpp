#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "btseg/tensor.hpp"

namespace btseg::io {

/// Binary PPM (P6). Values quantized round-to-nearest from [0,1] to uint8.
void write_ppm(const std::filesystem::path& path, const Tensor& image);
/// Returns a (3,h,w) tensor with values in [0,1] (v / 255).
Tensor read_ppm(const std::filesystem::path& path);

/// Binary PGM (P5), one byte per label.
void write_pgm(const std::filesystem::path& path, const IntTensor& labels);
IntTensor read_pgm(const std::filesystem::path& path);

/// Raw little-endian float32 planes with a 16-byte header (magic + dims).
void write_f32_planes(const std::filesystem::path& path, const Tensor& planes);
Tensor read_f32_planes(const std::filesystem::path& path);

std::uint64_t fnv1a64(const void* data, std::size_t size);
std::uint64_t fnv1a64(const std::string& s);

/// FNV-1a of a file's bytes, rendered as 16 hex digits.
std::string file_checksum(const std::filesystem::path& path);

std::vector<char> read_file_bytes(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace btseg::io
