#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "vipaint/types.hpp"

namespace vipaint {

/// Derives an independent 64-bit seed for a named substream, e.g. ("mc-chain", step, chain).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view name, std::uint64_t a = 0, std::uint64_t b = 0);

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    Rng(std::uint64_t seed, std::string_view stream, std::uint64_t a = 0, std::uint64_t b = 0)
        : engine_(derive_seed(seed, stream, a, b)) {}

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    Vec normal_vec(Eigen::Index n);
    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n);

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

} // namespace vipaint
