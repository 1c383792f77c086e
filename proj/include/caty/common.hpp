#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace caty {

inline constexpr const char* kVersion = "0.1.0";

// Thrown when tensor shapes disagree with the MDP they are paired with.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Thrown when a value violates a domain constraint (probability rows,
// reward bounds, generator parameters).
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Thrown on malformed experiment configs and unreadable files.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Default tolerance for exact dynamic-programming identities.
inline constexpr double kProbTol = 1e-9;
// Occupancy mass below which a (state, stage) pair is treated as unvisited.
inline constexpr double kSupportEps = 1e-12;

struct Dims {
    int num_states = 0;
    int num_actions = 0;
    int horizon = 0;

    bool operator==(const Dims&) const = default;

    [[nodiscard]] std::size_t sa() const {
        return static_cast<std::size_t>(num_states) * num_actions;
    }
    [[nodiscard]] std::size_t hsa() const { return sa() * horizon; }
    [[nodiscard]] std::size_t hs() const {
        return static_cast<std::size_t>(num_states) * horizon;
    }

    // Flat index of (h, s, a).
    [[nodiscard]] std::size_t idx(int h, int s, int a) const {
        return (static_cast<std::size_t>(h) * num_states + s) * num_actions + a;
    }
    [[nodiscard]] std::size_t idx(int h, int s) const {
        return static_cast<std::size_t>(h) * num_states + s;
    }

    void validate() const {
        if (num_states < 1 || num_actions < 1 || horizon < 1)
            throw ValidationError("Dims: S, A and H must all be >= 1");
    }
};

inline bool is_probability_vector(const double* p, int n, double tol = kProbTol) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        if (p[i] < -tol || !std::isfinite(p[i])) return false;
        sum += p[i];
    }
    return std::abs(sum - 1.0) <= tol;
}

inline bool is_probability_vector(const std::vector<double>& p, double tol = kProbTol) {
    return is_probability_vector(p.data(), static_cast<int>(p.size()), tol);
}

inline void require_probability_vector(const std::vector<double>& p, const std::string& what,
                                       double tol = kProbTol) {
    if (!is_probability_vector(p, tol))
        throw ValidationError(what + " is not a probability vector");
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double l2_norm(const std::vector<double>& v) {
    return std::sqrt(dot(v, v));
}

inline double l1_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s;
}

// FNV-1a, used for config provenance hashes.
inline std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace caty
