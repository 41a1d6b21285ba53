#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace kiml {

/// Deterministic random source used everywhere in the library.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The distribution code below is our own rather than <random>'s
/// distributions, whose algorithms differ between standard libraries:
///   - uniform(): top 53 bits of one draw, scaled by 2^-53, in [0, 1).
///   - normal(): Box-Muller on two uniforms; the cosine branch is returned
///     first and the sine branch is cached for the next call.
///   - uniform_index(n): rejection sampling on the raw 64-bit draw.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }
    std::size_t uniform_index(std::size_t n);

    template <typename T>
    void shuffle(std::span<T> values) {
        for (std::size_t k = values.size(); k > 1; --k) {
            std::swap(values[k - 1], values[uniform_index(k)]);
        }
    }

    std::vector<std::size_t> permutation(std::size_t n);

private:
    std::mt19937_64 engine_;
    bool has_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Child seed for an independent stream: mix64(master ^ mix64(stream + 1)).
/// Streams are addressed by integer id or by a label (FNV-1a hashed), so
/// adding a new stream never perturbs existing ones.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);

}  // namespace kiml
