#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "btseg/reference.hpp"

namespace btseg::selfcheck {

struct CheckResult {
    std::string name;
    bool pass = false;
    double max_rel_err = 0.0;
    std::string detail;
};

/// Exact BT gradient (w.r.t. both raw embedding matrices) against central
/// finite differences on a seeded (b, p) instance.
ref::FdReport bt_gradient_check(std::uint64_t seed, std::size_t b, std::size_t p);

/// Gradient of one weighted pooling variant w.r.t. the feature map.
ref::FdReport pool_gradient_check(std::uint64_t seed, int variant);

/// Combined-objective gradient w.r.t. every parameter on the canonical tiny
/// instance (batch 4, 16x16 inputs, 16 fused channels, 8-dim embeddings,
/// 4 classes). Returns one report per parameter group (encoder, decoder,
/// projector).
std::vector<std::pair<std::string, ref::FdReport>> end_to_end_gradient_check(std::uint64_t seed);

std::vector<CheckResult> run_gradient_checks();
std::vector<CheckResult> run_oracle_checks();

bool all_pass(const std::vector<CheckResult>& results);
std::string format_results(const std::vector<CheckResult>& results);

}  // namespace btseg::selfcheck
