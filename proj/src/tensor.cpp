#include "btseg/tensor.hpp"

#include <cmath>

namespace btseg {

bool all_finite(const Tensor& t) {
    for (double v : t.vec())
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace btseg
