#pragma once

#include <vector>

#include "caty/common.hpp"

namespace caty {

// Known d-dimensional feature map phi(s, a). Rows are required to satisfy
// ||phi(s,a)||_2 <= 1.
class FeatureMap {
  public:
    FeatureMap() = default;

    FeatureMap(int num_states, int num_actions, int dim, std::vector<double> phi)
        : num_states_(num_states), num_actions_(num_actions), dim_(dim), phi_(std::move(phi)) {
        if (num_states_ < 1 || num_actions_ < 1 || dim_ < 1)
            throw ValidationError("FeatureMap: dimensions must be >= 1");
        if (phi_.size() != static_cast<std::size_t>(num_states_) * num_actions_ * dim_)
            throw DimensionError("FeatureMap: phi table has wrong size");
        for (int s = 0; s < num_states_; ++s)
            for (int a = 0; a < num_actions_; ++a) {
                double sq = 0.0;
                const double* row = at(s, a);
                for (int k = 0; k < dim_; ++k) sq += row[k] * row[k];
                if (sq > 1.0 + 1e-9)
                    throw ValidationError("FeatureMap: ||phi(s,a)||_2 exceeds 1 at s=" +
                                          std::to_string(s) + " a=" + std::to_string(a));
            }
    }

    [[nodiscard]] int num_states() const { return num_states_; }
    [[nodiscard]] int num_actions() const { return num_actions_; }
    [[nodiscard]] int dim() const { return dim_; }

    [[nodiscard]] const double* at(int s, int a) const {
        return phi_.data() + (static_cast<std::size_t>(s) * num_actions_ + a) * dim_;
    }

    [[nodiscard]] std::vector<double> vec(int s, int a) const {
        const double* row = at(s, a);
        return std::vector<double>(row, row + dim_);
    }

    [[nodiscard]] const std::vector<double>& raw() const { return phi_; }

    // phi(s,a)' theta
    [[nodiscard]] double apply(int s, int a, const std::vector<double>& theta) const {
        const double* row = at(s, a);
        double v = 0.0;
        for (int k = 0; k < dim_; ++k) v += row[k] * theta[k];
        return v;
    }

    // Tabular-as-linear embedding: one-hot features of size S*A.
    static FeatureMap one_hot(int num_states, int num_actions) {
        int d = num_states * num_actions;
        std::vector<double> phi(static_cast<std::size_t>(d) * d, 0.0);
        for (int i = 0; i < d; ++i) phi[static_cast<std::size_t>(i) * d + i] = 1.0;
        return FeatureMap(num_states, num_actions, d, std::move(phi));
    }

  private:
    int num_states_ = 0;
    int num_actions_ = 0;
    int dim_ = 0;
    std::vector<double> phi_;
};

}  // namespace caty
