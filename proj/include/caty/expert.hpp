#pragma once

#include <variant>
#include <vector>

#include "caty/common.hpp"
#include "caty/datasets.hpp"
#include "caty/features.hpp"
#include "caty/mdp.hpp"
#include "caty/rng.hpp"

namespace caty {

// ---------------------------------------------------------------------------
// Demonstration sampling
// ---------------------------------------------------------------------------

/**
 * Draws tau_e i.i.d. expert trajectories from (d0, p, pi_E). Episode i uses
 * the stream derived from (seed, i), so the dataset is reproducible under any
 * parallel schedule.
 */
inline ExpertDataset sample_expert_dataset(const TabularMdp& mdp, const Policy& expert,
                                           std::int64_t tau_e, std::uint64_t seed) {
    if (expert.dims() != mdp.dims()) throw DimensionError("expert policy does not match MDP dims");
    if (tau_e < 0) throw ValidationError("tau_e must be >= 0");
    const Dims& d = mdp.dims();
    ExpertDataset ds{d, {}};
    ds.episodes.reserve(static_cast<std::size_t>(tau_e));
    for (std::int64_t i = 0; i < tau_e; ++i) {
        Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(i));
        Episode e;
        e.states.reserve(d.horizon + 1);
        e.actions.reserve(d.horizon);
        int s = rng.categorical(mdp.initial_dist());
        e.states.push_back(s);
        for (int h = 0; h < d.horizon; ++h) {
            int a = rng.categorical(expert.row(h, s), d.num_actions);
            e.actions.push_back(a);
            s = rng.categorical(mdp.row(h, s, a), d.num_states);
            e.states.push_back(s);
        }
        ds.episodes.push_back(std::move(e));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Classification-phase estimators
// ---------------------------------------------------------------------------

/// Empirical expert occupancy, joint form: d_hat_h(s,a) = (1/tau) sum_i 1{...}.
struct OccupancyEstimate {
    Dims dims;
    std::vector<double> d_hat;  // (h, s, a)
};

/// Per-stage empirical feature expectations psi_hat_h.
struct FeatureExpectationEstimate {
    int horizon = 0;
    std::vector<std::vector<double>> psi_hat;
};

using ExpertEstimate = std::variant<OccupancyEstimate, FeatureExpectationEstimate>;

inline OccupancyEstimate empirical_occupancy(const ExpertDataset& dataset) {
    if (dataset.episodes.empty())
        throw ValidationError("empirical_occupancy: estimate undefined on an empty dataset");
    const Dims& d = dataset.dims;
    OccupancyEstimate est{d, std::vector<double>(d.hsa(), 0.0)};
    const double w = 1.0 / static_cast<double>(dataset.episodes.size());
    for (const Episode& e : dataset.episodes)
        for (int h = 0; h < d.horizon; ++h) est.d_hat[d.idx(h, e.states[h], e.actions[h])] += w;
    return est;
}

inline FeatureExpectationEstimate empirical_feature_expectation(const ExpertDataset& dataset,
                                                                const FeatureMap& features) {
    if (dataset.episodes.empty())
        throw ValidationError("empirical_feature_expectation: estimate undefined on an empty dataset");
    if (features.num_states() != dataset.dims.num_states ||
        features.num_actions() != dataset.dims.num_actions)
        throw DimensionError("empirical_feature_expectation: features do not match dataset");
    const Dims& d = dataset.dims;
    FeatureExpectationEstimate est;
    est.horizon = d.horizon;
    est.psi_hat.assign(d.horizon, std::vector<double>(features.dim(), 0.0));
    const double w = 1.0 / static_cast<double>(dataset.episodes.size());
    for (const Episode& e : dataset.episodes)
        for (int h = 0; h < d.horizon; ++h) {
            const double* phi = features.at(e.states[h], e.actions[h]);
            for (int k = 0; k < features.dim(); ++k) est.psi_hat[h][k] += w * phi[k];
        }
    return est;
}

/**
 * Conditional policy estimate pi_hat_E from visit ratios, uniform over A at
 * unvisited (s, h).
 */
inline Policy estimate_expert_policy(const ExpertDataset& dataset) {
    if (dataset.episodes.empty())
        throw ValidationError("estimate_expert_policy: undefined on an empty dataset");
    const Dims& d = dataset.dims;
    std::vector<double> sa(d.hsa(), 0.0);
    std::vector<double> s_only(d.hs(), 0.0);
    for (const Episode& e : dataset.episodes)
        for (int h = 0; h < d.horizon; ++h) {
            sa[d.idx(h, e.states[h], e.actions[h])] += 1.0;
            s_only[d.idx(h, e.states[h])] += 1.0;
        }
    std::vector<double> probs(d.hsa());
    for (int h = 0; h < d.horizon; ++h)
        for (int s = 0; s < d.num_states; ++s) {
            double n = s_only[d.idx(h, s)];
            for (int a = 0; a < d.num_actions; ++a)
                probs[d.idx(h, s, a)] = n > 0.0 ? sa[d.idx(h, s, a)] / n : 1.0 / d.num_actions;
        }
    return Policy(d, std::move(probs));
}

/**
 * J_hat^E(r): bilinear contraction of an expert estimate with a reward.
 * Occupancy pairs with dense (or resolvable linear) rewards; feature
 * expectations pair with linear rewards only.
 */
inline double estimate_expert_return(const ExpertEstimate& estimate, const RewardSpec& reward,
                                     const FeatureMap* features = nullptr) {
    if (const auto* occ = std::get_if<OccupancyEstimate>(&estimate)) {
        std::vector<double> table = reward.to_table(occ->dims, features);
        return dot(occ->d_hat, table);
    }
    const auto& fe = std::get<FeatureExpectationEstimate>(estimate);
    if (!reward.is_linear())
        throw ValidationError("estimate_expert_return: feature-expectation estimates require linear rewards");
    const auto& theta = reward.as_linear().theta;
    if (static_cast<int>(theta.size()) != fe.horizon)
        throw DimensionError("estimate_expert_return: theta stage count mismatch");
    double j = 0.0;
    for (int h = 0; h < fe.horizon; ++h) {
        if (theta[h].size() != fe.psi_hat[h].size())
            throw DimensionError("estimate_expert_return: theta dimension mismatch");
        j += dot(fe.psi_hat[h], theta[h]);
    }
    return j;
}

}  // namespace caty
