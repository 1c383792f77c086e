#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "caty/common.hpp"
#include "caty/datasets.hpp"
#include "caty/expert.hpp"
#include "caty/explore.hpp"
#include "caty/linear.hpp"
#include "caty/mdp.hpp"

namespace caty {

// ---------------------------------------------------------------------------
// Planning estimates J_hat*(r)
// ---------------------------------------------------------------------------

enum class PlanMode { Plain, Optimistic };

namespace detail {

inline double planning_log_term(const Dims& d, std::int64_t tau, double delta) {
    return std::log(2.0 * d.num_states * d.num_actions * d.horizon *
                    static_cast<double>(std::max<std::int64_t>(1, tau)) / delta);
}

}  // namespace detail

/**
 * J_hat*(r) from an exploration dataset. Plain mode runs value iteration on
 * the empirical transition model; optimistic mode adds a Hoeffding bonus to
 * the reward and clips Q to the per-stage value range, so unvisited regions
 * contribute maximal optimism.
 */
inline double plan_tabular(const ExplorationDataset& dataset, const std::vector<double>& reward,
                           const std::vector<double>& initial_dist, PlanMode mode, double delta,
                           double bonus_constant = 1.0) {
    const Dims& d = dataset.dims();
    if (reward.size() != d.hsa()) throw DimensionError("plan_tabular: reward/dataset mismatch");
    if (initial_dist.size() != static_cast<std::size_t>(d.num_states))
        throw DimensionError("plan_tabular: d0/dataset mismatch");
    const double hh = static_cast<double>(d.horizon);
    const double log_term = detail::planning_log_term(d, dataset.tau(), delta);
    const bool optimistic = mode == PlanMode::Optimistic;
    std::vector<double> v(d.num_states, 0.0), next_v(d.num_states, 0.0);
    std::vector<double> p_row(d.num_states);
    for (int h = d.horizon - 1; h >= 0; --h) {
        double cap = hh - h;
        for (int s = 0; s < d.num_states; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < d.num_actions; ++a) {
                double q = reward[d.idx(h, s, a)];
                if (optimistic)
                    q += detail::hoeffding_bonus(bonus_constant * hh, log_term,
                                                 dataset.count(h, s, a));
                dataset.empirical_row(h, s, a, p_row.data());
                for (int sn = 0; sn < d.num_states; ++sn) q += p_row[sn] * next_v[sn];
                if (optimistic) q = std::clamp(q, -cap, cap);
                best = std::max(best, q);
            }
            v[s] = best;
        }
        std::swap(v, next_v);
    }
    double j = 0.0;
    for (int s = 0; s < d.num_states; ++s) j += initial_dist[s] * next_v[s];
    return j;
}

/// Optimistic/pessimistic pair of planning estimates; their midpoint is the
/// J_hat* used after per-reward BPI exploration.
struct PlanInterval {
    double upper = 0.0;
    double lower = 0.0;
    [[nodiscard]] double midpoint() const { return 0.5 * (upper + lower); }
    [[nodiscard]] double width() const { return upper - lower; }
};

inline PlanInterval plan_tabular_bounds(const ExplorationDataset& dataset,
                                        const std::vector<double>& reward,
                                        const std::vector<double>& initial_dist, double delta,
                                        double bonus_constant = 1.0) {
    const Dims& d = dataset.dims();
    if (reward.size() != d.hsa()) throw DimensionError("plan_tabular_bounds: reward/dataset mismatch");
    const double hh = static_cast<double>(d.horizon);
    const double log_term = detail::planning_log_term(d, dataset.tau(), delta);
    std::vector<double> v_up(d.num_states, 0.0), v_lo(d.num_states, 0.0);
    std::vector<double> next_up(d.num_states, 0.0), next_lo(d.num_states, 0.0);
    std::vector<double> p_row(d.num_states);
    for (int h = d.horizon - 1; h >= 0; --h) {
        double cap = hh - h;
        for (int s = 0; s < d.num_states; ++s) {
            double best_up = -std::numeric_limits<double>::infinity();
            double best_lo = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < d.num_actions; ++a) {
                double bonus = detail::hoeffding_bonus(bonus_constant * hh, log_term,
                                                       dataset.count(h, s, a));
                double mean_up = 0.0, mean_lo = 0.0;
                dataset.empirical_row(h, s, a, p_row.data());
                for (int sn = 0; sn < d.num_states; ++sn) {
                    mean_up += p_row[sn] * next_up[sn];
                    mean_lo += p_row[sn] * next_lo[sn];
                }
                double r = reward[d.idx(h, s, a)];
                best_up = std::max(best_up, std::clamp(r + bonus + mean_up, -cap, cap));
                best_lo = std::max(best_lo, std::clamp(r - bonus + mean_lo, -cap, cap));
            }
            v_up[s] = best_up;
            v_lo[s] = best_lo;
        }
        std::swap(v_up, next_up);
        std::swap(v_lo, next_lo);
    }
    PlanInterval interval;
    for (int s = 0; s < d.num_states; ++s) {
        interval.upper += initial_dist[s] * next_up[s];
        interval.lower += initial_dist[s] * next_lo[s];
    }
    return interval;
}

/**
 * Backward LSVI planning for linear rewards:
 * Q_h(s,a) = <phi, theta_h> + <phi, mu_hat_h V_{h+1}> (+ u_h when optimistic),
 * with V clipped to [-H, H]; returns sum_s d0(s) max_a Q_1(s,a).
 */
inline double plan_linear(const LsviEstimate& estimate, const FeatureMap& features,
                          const std::vector<std::vector<double>>& reward_theta,
                          const std::vector<double>& initial_dist, double beta, PlanMode mode) {
    if (beta < 0.0) throw ValidationError("plan_linear: beta must be >= 0");
    if (static_cast<int>(reward_theta.size()) != estimate.horizon)
        throw DimensionError("plan_linear: theta stage count mismatch");
    if (features.dim() != estimate.dim || features.num_states() != estimate.num_states)
        throw DimensionError("plan_linear: features do not match estimate");
    if (initial_dist.size() != static_cast<std::size_t>(estimate.num_states))
        throw DimensionError("plan_linear: d0 size mismatch");
    const Dims d{estimate.num_states, features.num_actions(), estimate.horizon};
    const int dim = estimate.dim;
    const double hh = static_cast<double>(d.horizon);
    const bool optimistic = mode == PlanMode::Optimistic;

    std::vector<double> v(d.num_states, 0.0);
    std::vector<double> root(d.num_states, 0.0);
    std::vector<double> q(static_cast<std::size_t>(d.num_states) * d.num_actions);
    std::vector<double> w(dim);
    std::vector<Cholesky> chols;
    if (optimistic) {
        chols.reserve(d.horizon);
        for (int h = 0; h < d.horizon; ++h) chols.emplace_back(estimate.gram_matrix(h), dim);
    }
    for (int h = d.horizon - 1; h >= 0; --h) {
        if (reward_theta[h].size() != static_cast<std::size_t>(dim))
            throw DimensionError("plan_linear: theta dimension mismatch");
        for (int k = 0; k < dim; ++k) {
            double acc = 0.0;
            const double* mk = estimate.mu_hat_row(h, k);
            for (int sn = 0; sn < d.num_states; ++sn) acc += mk[sn] * v[sn];
            w[k] = acc;
        }
        for (int s = 0; s < d.num_states; ++s)
            for (int a = 0; a < d.num_actions; ++a) {
                const double* phi = features.at(s, a);
                double val = 0.0;
                for (int k = 0; k < dim; ++k) val += phi[k] * (reward_theta[h][k] + w[k]);
                if (optimistic) {
                    double quad = chols[h].inv_quad(features.vec(s, a));
                    val += std::min(beta * std::sqrt(quad), hh);
                }
                q[static_cast<std::size_t>(s) * d.num_actions + a] = val;
            }
        for (int s = 0; s < d.num_states; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < d.num_actions; ++a)
                best = std::max(best, q[static_cast<std::size_t>(s) * d.num_actions + a]);
            if (h == 0) root[s] = best;  // root value stays unclipped
            v[s] = std::clamp(best, -hh, hh);
        }
    }
    double j = 0.0;
    for (int s = 0; s < d.num_states; ++s) j += initial_dist[s] * root[s];
    return j;
}

/// Threshold rule: True iff C_hat(r) <= Delta (boundary inclusive; Delta may
/// be negative).
inline bool classify(double c_hat, double delta_threshold) { return c_hat <= delta_threshold; }

// ---------------------------------------------------------------------------
// End-to-end pipeline
// ---------------------------------------------------------------------------

enum class ProblemStructure { Tabular, LinearRewards, LinearMdp };

inline const char* to_string(ProblemStructure s) {
    switch (s) {
        case ProblemStructure::Tabular: return "tabular";
        case ProblemStructure::LinearRewards: return "linear-rewards";
        case ProblemStructure::LinearMdp: return "linear-mdp";
    }
    return "?";
}

struct CatyOptions {
    ProblemStructure structure = ProblemStructure::Tabular;
    double epsilon = 0.1;
    double delta = 0.1;
    double threshold = 0.0;  // Delta; may be negative
    std::int64_t max_episodes = 10000;
    double bonus_constant = 1.0;   // tabular Hoeffding scale
    double beta_constant = 1.0;    // linear beta scale
    double stop_fraction = 0.5;    // linear stopping: J*(u) <= eps * stop_fraction
    int small_reward_set_limit = -1;  // -1: max(1, floor(S / ln A))
    PlanMode rfe_plan_mode = PlanMode::Plain;
    std::uint64_t exploration_seed = 0;
    bool oracle = false;
};

struct CompatibilityReport {
    int reward_id = 0;
    double j_star_hat = 0.0;
    double j_expert_hat = 0.0;
    double c_hat = 0.0;
    double delta_threshold = 0.0;
    bool label = false;
    std::optional<double> exact_c;
    int bpi_segment = -1;  // index into ClassificationSweep::bpi_segments
};

struct BpiSegment {
    int reward_id = 0;
    std::int64_t first_episode = 0;
    std::int64_t episode_count = 0;
};

struct ClassificationSweep {
    std::vector<CompatibilityReport> reports;
    double epsilon = 0.0;
    double threshold = 0.0;
    std::vector<int> inner;     // c_hat <= Delta - eps
    std::vector<int> outer;     // c_hat <= Delta + eps
    std::vector<int> mid_true;  // exact C <= Delta (oracle mode)
    bool oracle = false;
    std::string exploration_algorithm;
    std::int64_t exploration_episodes = 0;
    bool budget_exhausted = false;
    std::vector<BpiSegment> bpi_segments;
};

inline int small_reward_set_limit(const CatyOptions& opts, int num_states, int num_actions) {
    if (opts.small_reward_set_limit >= 0) return opts.small_reward_set_limit;
    if (num_actions < 2) return 1;
    return std::max(1, static_cast<int>(std::floor(num_states / std::log(num_actions))));
}

/**
 * Full CATY run: exploration (per-reward BPI when the reward set is a small
 * constant, reward-free otherwise; elliptical-bonus exploration for Linear
 * MDPs), then classification of every reward with the matching planner. The
 * expert dataset never influences exploration. With oracle enabled, exact
 * noncompatibilities from the true instance are attached and the mid_true
 * sandwich layer is filled.
 */
inline ClassificationSweep run_caty(const TabularMdp& env, const FeatureMap* features,
                                    const ExpertDataset& expert_data,
                                    const std::vector<RewardSpec>& rewards, const CatyOptions& opts,
                                    const Policy* oracle_expert = nullptr) {
    const Dims& d = env.dims();
    const bool linear_structure = opts.structure != ProblemStructure::Tabular;
    if (linear_structure && features == nullptr)
        throw ValidationError("run_caty: linear structures require a feature map");
    if (expert_data.dims != d) throw DimensionError("run_caty: expert dataset dims mismatch");
    if (opts.oracle && oracle_expert == nullptr)
        throw ValidationError("run_caty: oracle mode requires the expert policy");

    // Expert-side estimate (tabular: occupancy; linear: feature expectations).
    ExpertEstimate expert_estimate =
        linear_structure ? ExpertEstimate(empirical_feature_expectation(expert_data, *features))
                         : ExpertEstimate(empirical_occupancy(expert_data));

    ClassificationSweep sweep;
    sweep.epsilon = opts.epsilon;
    sweep.threshold = opts.threshold;
    sweep.oracle = opts.oracle;

    ForwardSampler sampler(env, opts.exploration_seed);

    // Resolved dense tables for tabular planning and oracle columns.
    std::vector<std::vector<double>> tables;
    tables.reserve(rewards.size());
    for (const RewardSpec& r : rewards) tables.push_back(r.to_table(d, features));

    ExplorationDataset data(d);
    LsviEstimate estimate;
    bool use_bpi = false;

    if (opts.structure == ProblemStructure::LinearMdp) {
        LinearExplorationResult res = explore_linear(sampler, *features, opts.epsilon, opts.delta,
                                                     opts.max_episodes, opts.beta_constant,
                                                     opts.stop_fraction);
        data = std::move(res.dataset);
        estimate = std::move(res.estimate);
        sweep.exploration_algorithm = "elliptical-bonus";
        sweep.exploration_episodes = data.tau();
        sweep.budget_exhausted = res.budget_exhausted;
    } else {
        use_bpi = static_cast<int>(rewards.size()) <= small_reward_set_limit(opts, d.num_states,
                                                                             d.num_actions);
        if (use_bpi) {
            sweep.exploration_algorithm = "per-reward-bpi";
            for (std::size_t i = 0; i < rewards.size(); ++i) {
                std::int64_t first = data.tau();
                ExplorationResult res =
                    explore_bpi_tabular(sampler, tables[i], opts.epsilon, opts.delta,
                                        opts.max_episodes, opts.bonus_constant);
                data.merge(res.dataset);
                sweep.budget_exhausted = sweep.budget_exhausted || res.budget_exhausted;
                sweep.bpi_segments.push_back(
                    {static_cast<int>(i), first, data.tau() - first});
            }
            sweep.exploration_episodes = data.tau();
        } else {
            ExplorationResult res = explore_reward_free_tabular(
                sampler, opts.epsilon, opts.delta, opts.max_episodes, opts.bonus_constant);
            data = std::move(res.dataset);
            sweep.exploration_algorithm = "reward-free";
            sweep.exploration_episodes = data.tau();
            sweep.budget_exhausted = res.budget_exhausted;
        }
    }

    double beta = 0.0;
    if (opts.structure == ProblemStructure::LinearMdp)
        beta = default_beta(features->dim(), d.horizon, data.tau(), opts.delta, opts.beta_constant);

    for (std::size_t i = 0; i < rewards.size(); ++i) {
        CompatibilityReport rep;
        rep.reward_id = static_cast<int>(i);
        rep.delta_threshold = opts.threshold;
        rep.j_expert_hat = estimate_expert_return(expert_estimate, rewards[i], features);
        if (opts.structure == ProblemStructure::LinearMdp) {
            rep.j_star_hat = plan_linear(estimate, *features, rewards[i].as_linear().theta,
                                         env.initial_dist(), beta, opts.rfe_plan_mode);
        } else if (use_bpi) {
            rep.j_star_hat =
                plan_tabular_bounds(data, tables[i], env.initial_dist(), opts.delta,
                                    opts.bonus_constant)
                    .midpoint();
            rep.bpi_segment = static_cast<int>(i);
        } else {
            rep.j_star_hat = plan_tabular(data, tables[i], env.initial_dist(), opts.rfe_plan_mode,
                                          opts.delta, opts.bonus_constant);
        }
        rep.c_hat = rep.j_star_hat - rep.j_expert_hat;
        rep.label = classify(rep.c_hat, opts.threshold);
        if (opts.oracle) rep.exact_c = exact_noncompatibility(env, *oracle_expert, tables[i]);
        if (rep.c_hat <= opts.threshold - opts.epsilon) sweep.inner.push_back(rep.reward_id);
        if (rep.c_hat <= opts.threshold + opts.epsilon) sweep.outer.push_back(rep.reward_id);
        if (rep.exact_c && *rep.exact_c <= opts.threshold) sweep.mid_true.push_back(rep.reward_id);
        sweep.reports.push_back(std::move(rep));
    }
    return sweep;
}

}  // namespace caty
