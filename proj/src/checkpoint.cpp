#include "btseg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "btseg/errors.hpp"

namespace btseg {

static_assert(std::endian::native == std::endian::little,
              "archive format assumes a little-endian host");

namespace {
constexpr char kMagic[8] = {'B', 'T', 'S', 'E', 'G', 'A', 'R', '1'};
}

const Tensor& Archive::get(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return t;
    throw ValueError("archive: missing tensor " + name);
}

bool Archive::has(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return true;
    return false;
}

void Archive::save(const std::filesystem::path& path) const {
    nlohmann::json header = meta;
    nlohmann::json index = nlohmann::json::array();
    for (const auto& [name, t] : tensors) {
        nlohmann::json entry;
        entry["name"] = name;
        entry["shape"] = t.shape();
        index.push_back(entry);
    }
    header["tensors"] = index;
    const std::string hs = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("archive: cannot open for writing: " + path.string());
    out.write(kMagic, sizeof(kMagic));
    const std::uint64_t len = hs.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& [name, t] : tensors)
        out.write(reinterpret_cast<const char*>(t.data()),
                  static_cast<std::streamsize>(t.numel() * sizeof(double)));
    out.flush();
    if (!out) throw IoError("archive: write failed: " + path.string());
}

Archive Archive::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("archive: cannot open for reading: " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw IoError("archive: bad magic in " + path.string());
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string hs(len, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(len));
    if (!in) throw IoError("archive: truncated header in " + path.string());

    nlohmann::json header = nlohmann::json::parse(hs, nullptr, false);
    if (header.is_discarded()) throw IoError("archive: corrupt header in " + path.string());

    Archive ar;
    for (const auto& entry : header.at("tensors")) {
        const std::string name = entry.at("name").get<std::string>();
        const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
        Tensor t(shape);
        in.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.numel() * sizeof(double)));
        if (!in) throw IoError("archive: truncated payload for " + name + " in " + path.string());
        ar.tensors.emplace_back(name, std::move(t));
    }
    header.erase("tensors");
    ar.meta = std::move(header);
    return ar;
}

}  // namespace btseg
