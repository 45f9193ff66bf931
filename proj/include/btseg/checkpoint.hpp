#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "btseg/tensor.hpp"

namespace btseg {

/// Single-file archive: a JSON header (metadata plus a tensor index) followed
/// by raw little-endian float64 payloads. Doubles round-trip bit-exactly.
struct Archive {
    nlohmann::json meta;
    std::vector<std::pair<std::string, Tensor>> tensors;

    void add(const std::string& name, const Tensor& t) { tensors.emplace_back(name, t); }
    const Tensor& get(const std::string& name) const;
    bool has(const std::string& name) const;

    void save(const std::filesystem::path& path) const;
    static Archive load(const std::filesystem::path& path);
};

}  // namespace btseg
