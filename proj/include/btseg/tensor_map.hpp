#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "btseg/errors.hpp"
#include "btseg/tensor.hpp"

namespace btseg {

/// Name-addressed tensor collection with deterministic (insertion) order.
/// Used for model parameters, gradients, and optimizer state.
class TensorMap {
public:
    Tensor& add(const std::string& name, std::vector<std::size_t> shape) {
        check(index_.find(name) == index_.end(), "TensorMap: duplicate name " + name);
        index_[name] = items_.size();
        items_.emplace_back(name, Tensor(std::move(shape)));
        return items_.back().second;
    }

    Tensor& at(const std::string& name) {
        auto it = index_.find(name);
        check(it != index_.end(), "TensorMap: unknown name " + name);
        return items_[it->second].second;
    }

    const Tensor& at(const std::string& name) const {
        auto it = index_.find(name);
        check(it != index_.end(), "TensorMap: unknown name " + name);
        return items_[it->second].second;
    }

    bool has(const std::string& name) const { return index_.count(name) > 0; }

    std::size_t size() const { return items_.size(); }

    auto begin() { return items_.begin(); }
    auto end() { return items_.end(); }
    auto begin() const { return items_.begin(); }
    auto end() const { return items_.end(); }

    /// Zero-filled copy with the same names and shapes.
    TensorMap zeros_like() const {
        TensorMap out;
        for (const auto& [name, t] : items_) out.add(name, t.shape());
        return out;
    }

    void zero() {
        for (auto& [name, t] : items_) t.fill(0.0);
    }

    /// this += scale * other, matched by name; both maps must agree exactly.
    void accumulate(const TensorMap& other, double scale = 1.0) {
        check(items_.size() == other.items_.size(), "TensorMap: accumulate size mismatch");
        for (std::size_t i = 0; i < items_.size(); ++i) {
            check(items_[i].first == other.items_[i].first,
                  "TensorMap: accumulate name mismatch at " + items_[i].first);
            auto& dst = items_[i].second;
            const auto& src = other.items_[i].second;
            check(dst.same_shape(src), "TensorMap: accumulate shape mismatch at " + items_[i].first);
            for (std::size_t k = 0; k < dst.numel(); ++k) dst[k] += scale * src[k];
        }
    }

    std::size_t total_elements() const {
        std::size_t n = 0;
        for (const auto& [name, t] : items_) n += t.numel();
        return n;
    }

private:
    std::vector<std::pair<std::string, Tensor>> items_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace btseg
