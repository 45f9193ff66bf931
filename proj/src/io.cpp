#include "btseg/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "btseg/errors.hpp"

namespace btseg::io {

static_assert(std::endian::native == std::endian::little,
              "raw plane format assumes a little-endian host");

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    return in;
}

/// Reads one whitespace-delimited token, skipping PNM comments.
std::string pnm_token(std::istream& in) {
    std::string tok;
    char c;
    while (in.get(c)) {
        if (c == '#') {
            while (in.get(c) && c != '\n') {
            }
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok += c;
    }
    return tok;
}

std::uint8_t quantize(double v) {
    const double scaled = std::nearbyint(std::clamp(v, 0.0, 1.0) * 255.0);
    return static_cast<std::uint8_t>(scaled);
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const Tensor& image) {
    check(image.rank() == 3 && image.dim(0) == 3, "write_ppm: image must be (3,h,w)");
    const std::size_t h = image.dim(1), w = image.dim(2);
    auto out = open_out(path);
    out << "P6\n" << w << " " << h << "\n255\n";
    std::vector<std::uint8_t> row(w * 3);
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j)
            for (std::size_t c = 0; c < 3; ++c) row[j * 3 + c] = quantize(image.at(c, i, j));
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw IoError("write failed: " + path.string());
}

Tensor read_ppm(const std::filesystem::path& path) {
    auto in = open_in(path);
    if (pnm_token(in) != "P6") throw IoError("not a P6 PPM: " + path.string());
    const std::size_t w = std::stoul(pnm_token(in));
    const std::size_t h = std::stoul(pnm_token(in));
    if (pnm_token(in) != "255") throw IoError("unsupported PPM maxval: " + path.string());
    Tensor image({3, h, w});
    std::vector<std::uint8_t> row(w * 3);
    for (std::size_t i = 0; i < h; ++i) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
        if (!in) throw IoError("truncated PPM: " + path.string());
        for (std::size_t j = 0; j < w; ++j)
            for (std::size_t c = 0; c < 3; ++c)
                image.at(c, i, j) = static_cast<double>(row[j * 3 + c]) / 255.0;
    }
    return image;
}

void write_pgm(const std::filesystem::path& path, const IntTensor& labels) {
    check(labels.rank() == 2, "write_pgm: labels must be (h,w)");
    const std::size_t h = labels.dim(0), w = labels.dim(1);
    auto out = open_out(path);
    out << "P5\n" << w << " " << h << "\n255\n";
    std::vector<std::uint8_t> row(w);
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            const auto v = labels.at(i, j);
            check(v >= 0 && v <= 255, "write_pgm: label out of byte range: " + std::to_string(v));
            row[j] = static_cast<std::uint8_t>(v);
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw IoError("write failed: " + path.string());
}

IntTensor read_pgm(const std::filesystem::path& path) {
    auto in = open_in(path);
    if (pnm_token(in) != "P5") throw IoError("not a P5 PGM: " + path.string());
    const std::size_t w = std::stoul(pnm_token(in));
    const std::size_t h = std::stoul(pnm_token(in));
    if (pnm_token(in) != "255") throw IoError("unsupported PGM maxval: " + path.string());
    IntTensor labels({h, w});
    std::vector<std::uint8_t> row(w);
    for (std::size_t i = 0; i < h; ++i) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
        if (!in) throw IoError("truncated PGM: " + path.string());
        for (std::size_t j = 0; j < w; ++j) labels.at(i, j) = row[j];
    }
    return labels;
}

void write_f32_planes(const std::filesystem::path& path, const Tensor& planes) {
    check(planes.rank() == 2 || planes.rank() == 3, "write_f32_planes: rank must be 2 or 3");
    const std::uint32_t d0 = static_cast<std::uint32_t>(planes.dim(0));
    const std::uint32_t d1 = static_cast<std::uint32_t>(planes.dim(1));
    const std::uint32_t d2 =
        planes.rank() == 3 ? static_cast<std::uint32_t>(planes.dim(2)) : 0;
    auto out = open_out(path);
    out.write("BTSGF32\0", 8);
    out.write(reinterpret_cast<const char*>(&d0), 4);
    out.write(reinterpret_cast<const char*>(&d1), 4);
    out.write(reinterpret_cast<const char*>(&d2), 4);
    std::vector<float> buf(planes.numel());
    for (std::size_t i = 0; i < planes.numel(); ++i) buf[i] = static_cast<float>(planes[i]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!out) throw IoError("write failed: " + path.string());
}

Tensor read_f32_planes(const std::filesystem::path& path) {
    auto in = open_in(path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, "BTSGF32\0", 8) != 0)
        throw IoError("not a raw f32 plane file: " + path.string());
    std::uint32_t d0 = 0, d1 = 0, d2 = 0;
    in.read(reinterpret_cast<char*>(&d0), 4);
    in.read(reinterpret_cast<char*>(&d1), 4);
    in.read(reinterpret_cast<char*>(&d2), 4);
    std::vector<std::size_t> shape = d2 == 0 ? std::vector<std::size_t>{d0, d1}
                                             : std::vector<std::size_t>{d0, d1, d2};
    Tensor planes(shape);
    std::vector<float> buf(planes.numel());
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!in) throw IoError("truncated f32 plane file: " + path.string());
    for (std::size_t i = 0; i < planes.numel(); ++i) planes[i] = static_cast<double>(buf[i]);
    return planes;
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

std::string file_checksum(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes.data(), bytes.size())));
    return buf;
}

std::vector<char> read_file_bytes(const std::filesystem::path& path) {
    auto in = open_in(path);
    in.seekg(0, std::ios::end);
    const auto size = in.tellg();
    in.seekg(0, std::ios::beg);
    std::vector<char> bytes(static_cast<std::size_t>(size));
    in.read(bytes.data(), size);
    if (!in) throw IoError("read failed: " + path.string());
    return bytes;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    auto out = open_out(path);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return std::string(bytes.begin(), bytes.end());
}

}  // namespace btseg::io
