#pragma once

// Portable seeded randomness.
//
// Engine: std::mt19937_64, whose output sequence is fixed by the C++ standard.
// The standard distributions are implementation-defined, so the conversions
// below are spelled out:
//   uniform()  = (next() >> 11) * 2^-53, in [0, 1)
//   normal()   = Box-Muller on u1 = 1 - uniform(), u2 = uniform(); the cosine
//                branch is returned first and the sine branch cached
//   below(n)   = rejection sampling on next() against the largest multiple of n
//   shuffle    = Fisher-Yates from the back, swapping i with below(i + 1)
//
// Substreams: derive_seed(parent, tag) = splitmix64(parent ^ splitmix64(tag)),
// chained for multiple tags. String identifiers enter through FNV-1a 64.

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace mdwm {

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view text);
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag);

template <typename... Tags>
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag, Tags... rest) {
    return derive_seed(derive_seed(parent, tag), static_cast<std::uint64_t>(rest)...);
}

class Random {
public:
    explicit Random(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    double uniform();
    double normal();
    std::uint64_t below(std::uint64_t bound);

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    // Symmetric matrix with N(0, scale^2) diagonal and N(0, scale^2 / 2)
    // off-diagonal entries, i.e. scale * (G + G^T) / 2 for iid standard G.
    // Entries are drawn row-major over the upper triangle.
    Eigen::MatrixXd symmetric_gaussian(Eigen::Index dim, double scale);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace mdwm
