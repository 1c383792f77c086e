#pragma once

#include <cstdint>
#include <vector>

#include "caty/common.hpp"

namespace caty {

// Counter-based splittable generator built on SplitMix64. Every consumer of
// randomness derives its own stream from (root seed, stream id), so episode i
// draws the same numbers no matter how many workers run in parallel.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(mix(seed ^ 0x9e3779b97f4a7c15ull)) {}

    static Rng derive(std::uint64_t root, std::uint64_t stream) {
        return Rng(mix(root + 0x9e3779b97f4a7c15ull * (stream + 1)));
    }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n)); }

    // Standard normal via Box-Muller (one value per call, no caching so the
    // stream stays counter-deterministic).
    double next_gaussian() {
        double u1 = 0.0;
        do { u1 = next_double(); } while (u1 <= 0.0);
        double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Samples an index from an unnormalized nonnegative weight vector by
    // inverse-CDF scan. Deterministic given the engine state.
    int categorical(const double* w, int n) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) total += w[i];
        double u = next_double() * total;
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            acc += w[i];
            if (u < acc) return i;
        }
        return n - 1;  // u == total after rounding
    }

    int categorical(const std::vector<double>& w) {
        return categorical(w.data(), static_cast<int>(w.size()));
    }

    // Dirichlet(1) row: normalized i.i.d. exponentials.
    std::vector<double> dirichlet_uniform(int n) {
        std::vector<double> row(n);
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            double u = 0.0;
            do { u = next_double(); } while (u <= 0.0);
            row[i] = -std::log(u);
            sum += row[i];
        }
        for (int i = 0; i < n; ++i) row[i] /= sum;
        return row;
    }

  private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

}  // namespace caty
