#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <variant>
#include <vector>

#include "caty/common.hpp"
#include "caty/features.hpp"

namespace caty {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/**
 * Finite-horizon MDP without reward: <S, A, H, d0, p>. Stages are 0-based
 * internally (h = 0..H-1); the transition tensor maps (h, s, a) to a
 * probability vector over next states. Immutable after construction.
 */
class TabularMdp {
  public:
    TabularMdp(Dims dims, std::vector<double> initial_dist, std::vector<double> transitions)
        : dims_(dims), d0_(std::move(initial_dist)), p_(std::move(transitions)) {
        dims_.validate();
        if (d0_.size() != static_cast<std::size_t>(dims_.num_states))
            throw DimensionError("TabularMdp: d0 size does not match S");
        require_probability_vector(d0_, "TabularMdp: d0");
        if (p_.size() != dims_.hsa() * dims_.num_states)
            throw DimensionError("TabularMdp: transition tensor has wrong size");
        for (int h = 0; h < dims_.horizon; ++h)
            for (int s = 0; s < dims_.num_states; ++s)
                for (int a = 0; a < dims_.num_actions; ++a)
                    if (!is_probability_vector(row(h, s, a), dims_.num_states))
                        throw ValidationError("TabularMdp: p[" + std::to_string(h) + "," +
                                              std::to_string(s) + "," + std::to_string(a) +
                                              "] is not a probability vector");
    }

    [[nodiscard]] const Dims& dims() const { return dims_; }
    [[nodiscard]] int num_states() const { return dims_.num_states; }
    [[nodiscard]] int num_actions() const { return dims_.num_actions; }
    [[nodiscard]] int horizon() const { return dims_.horizon; }
    [[nodiscard]] const std::vector<double>& initial_dist() const { return d0_; }
    [[nodiscard]] const std::vector<double>& transitions() const { return p_; }

    // Probability vector p_h(.|s,a), length S.
    [[nodiscard]] const double* row(int h, int s, int a) const {
        return p_.data() + dims_.idx(h, s, a) * dims_.num_states;
    }

  private:
    Dims dims_;
    std::vector<double> d0_;
    std::vector<double> p_;
};

/// Dense reward table r_h(s,a) with entries in [-1, 1], flat (h, s, a).
struct DenseReward {
    std::vector<double> table;
};

/// Linear reward parameters, one theta vector per stage.
struct LinearReward {
    std::vector<std::vector<double>> theta;
};

/**
 * A reward is either a dense table or per-stage linear parameters. Linear
 * rewards resolve to tables only when paired with a FeatureMap; resolved
 * entries may leave [-1, 1] unless strict_bounds is requested.
 */
class RewardSpec {
  public:
    static RewardSpec dense(std::vector<double> table, const Dims& dims) {
        if (table.size() != dims.hsa())
            throw DimensionError("RewardSpec: dense table size does not match (H,S,A)");
        for (double r : table)
            if (!(r >= -1.0 - 1e-12 && r <= 1.0 + 1e-12))
                throw ValidationError("RewardSpec: dense entries must lie in [-1, 1]");
        RewardSpec spec;
        spec.value_ = DenseReward{std::move(table)};
        return spec;
    }

    static RewardSpec linear(std::vector<std::vector<double>> theta) {
        if (theta.empty()) throw DimensionError("RewardSpec: linear theta must have H stages");
        std::size_t d = theta.front().size();
        if (d == 0) throw DimensionError("RewardSpec: theta vectors must be nonempty");
        for (const auto& t : theta)
            if (t.size() != d) throw DimensionError("RewardSpec: theta stages differ in dimension");
        RewardSpec spec;
        spec.value_ = LinearReward{std::move(theta)};
        return spec;
    }

    [[nodiscard]] bool is_linear() const { return std::holds_alternative<LinearReward>(value_); }
    [[nodiscard]] const DenseReward& as_dense() const { return std::get<DenseReward>(value_); }
    [[nodiscard]] const LinearReward& as_linear() const { return std::get<LinearReward>(value_); }

    /// Resolves to a dense table; Linear variants need the feature map.
    [[nodiscard]] std::vector<double> to_table(const Dims& dims, const FeatureMap* features = nullptr,
                                               bool strict_bounds = false) const {
        if (const auto* d = std::get_if<DenseReward>(&value_)) {
            if (d->table.size() != dims.hsa())
                throw DimensionError("RewardSpec: dense table does not match MDP dims");
            return d->table;
        }
        const auto& lin = std::get<LinearReward>(value_);
        if (features == nullptr)
            throw ValidationError("RewardSpec: linear reward requires a FeatureMap");
        if (static_cast<int>(lin.theta.size()) != dims.horizon)
            throw DimensionError("RewardSpec: theta stage count does not match H");
        if (static_cast<int>(lin.theta.front().size()) != features->dim())
            throw DimensionError("RewardSpec: theta dimension does not match features");
        std::vector<double> table(dims.hsa());
        for (int h = 0; h < dims.horizon; ++h)
            for (int s = 0; s < dims.num_states; ++s)
                for (int a = 0; a < dims.num_actions; ++a) {
                    double r = features->apply(s, a, lin.theta[h]);
                    if (strict_bounds && (r < -1.0 - 1e-12 || r > 1.0 + 1e-12))
                        throw ValidationError("RewardSpec: induced reward leaves [-1,1] under strict bounds");
                    table[dims.idx(h, s, a)] = r;
                }
        return table;
    }

  private:
    std::variant<DenseReward, LinearReward> value_;
};

/// Stagewise state-to-action-distribution map.
class Policy {
  public:
    Policy(Dims dims, std::vector<double> probs) : dims_(dims), probs_(std::move(probs)) {
        dims_.validate();
        if (probs_.size() != dims_.hsa())
            throw DimensionError("Policy: probability tensor has wrong size");
        for (int h = 0; h < dims_.horizon; ++h)
            for (int s = 0; s < dims_.num_states; ++s)
                if (!is_probability_vector(row(h, s), dims_.num_actions))
                    throw ValidationError("Policy: pi[" + std::to_string(h) + "," +
                                          std::to_string(s) + "] is not a probability vector");
    }

    static Policy uniform(const Dims& dims) {
        std::vector<double> probs(dims.hsa(), 1.0 / dims.num_actions);
        return Policy(dims, std::move(probs));
    }

    // One action index per (h, s), flat h*S + s.
    static Policy deterministic(const Dims& dims, const std::vector<int>& actions) {
        if (actions.size() != dims.hs())
            throw DimensionError("Policy: action table has wrong size");
        std::vector<double> probs(dims.hsa(), 0.0);
        for (int h = 0; h < dims.horizon; ++h)
            for (int s = 0; s < dims.num_states; ++s) {
                int a = actions[dims.idx(h, s)];
                if (a < 0 || a >= dims.num_actions) throw ValidationError("Policy: action out of range");
                probs[dims.idx(h, s, a)] = 1.0;
            }
        return Policy(dims, std::move(probs));
    }

    // Same action everywhere.
    static Policy constant(const Dims& dims, int action) {
        return deterministic(dims, std::vector<int>(dims.hs(), action));
    }

    [[nodiscard]] const Dims& dims() const { return dims_; }
    [[nodiscard]] const std::vector<double>& probs() const { return probs_; }
    [[nodiscard]] const double* row(int h, int s) const {
        return probs_.data() + dims_.idx(h, s) * dims_.num_actions;
    }
    [[nodiscard]] double prob(int h, int s, int a) const { return probs_[dims_.idx(h, s, a)]; }

    [[nodiscard]] bool is_deterministic() const {
        for (int h = 0; h < dims_.horizon; ++h)
            for (int s = 0; s < dims_.num_states; ++s) {
                const double* r = row(h, s);
                for (int a = 0; a < dims_.num_actions; ++a)
                    if (r[a] != 0.0 && r[a] != 1.0) return false;
            }
        return true;
    }

  private:
    Dims dims_;
    std::vector<double> probs_;
};

/// Q/V tensors plus the scalar start value J.
struct ValueSolution {
    std::vector<double> q;  // (h, s, a)
    std::vector<double> v;  // (h, s)
    double j = 0.0;
};

/// A (state, stage) pair, used for expert support sets.
struct StageState {
    int state = 0;
    int stage = 0;
    bool operator==(const StageState&) const = default;
};

// ---------------------------------------------------------------------------
// Exact dynamic programming
// ---------------------------------------------------------------------------

namespace detail {

inline void check_reward_dims(const TabularMdp& mdp, const std::vector<double>& table) {
    if (table.size() != mdp.dims().hsa())
        throw DimensionError("reward table does not match MDP dims");
}

}  // namespace detail

/**
 * Backward induction for the optimal values: Q*_h = r_h + p_h V*_{h+1},
 * V*_h = max_a Q*_h, with terminal V*_{H} = 0. Exact up to rounding.
 */
inline ValueSolution value_iteration(const TabularMdp& mdp, const std::vector<double>& reward) {
    detail::check_reward_dims(mdp, reward);
    const Dims& d = mdp.dims();
    ValueSolution sol;
    sol.q.assign(d.hsa(), 0.0);
    sol.v.assign(d.hs(), 0.0);
    std::vector<double> next_v(d.num_states, 0.0);
    for (int h = d.horizon - 1; h >= 0; --h) {
        for (int s = 0; s < d.num_states; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < d.num_actions; ++a) {
                const double* p = mdp.row(h, s, a);
                double q = reward[d.idx(h, s, a)];
                for (int sn = 0; sn < d.num_states; ++sn) q += p[sn] * next_v[sn];
                sol.q[d.idx(h, s, a)] = q;
                if (q > best) best = q;
            }
            sol.v[d.idx(h, s)] = best;
        }
        for (int s = 0; s < d.num_states; ++s) next_v[s] = sol.v[d.idx(h, s)];
    }
    sol.j = 0.0;
    for (int s = 0; s < d.num_states; ++s) sol.j += mdp.initial_dist()[s] * sol.v[d.idx(0, s)];
    return sol;
}

inline ValueSolution value_iteration(const TabularMdp& mdp, const RewardSpec& reward,
                                     const FeatureMap* features = nullptr) {
    return value_iteration(mdp, reward.to_table(mdp.dims(), features));
}

/// Exact policy values: Q^pi_h = r_h + p_h V^pi_{h+1}, V^pi_h = E_{a~pi} Q^pi_h.
inline ValueSolution policy_evaluation(const TabularMdp& mdp, const std::vector<double>& reward,
                                       const Policy& policy) {
    detail::check_reward_dims(mdp, reward);
    if (policy.dims() != mdp.dims()) throw DimensionError("policy does not match MDP dims");
    const Dims& d = mdp.dims();
    ValueSolution sol;
    sol.q.assign(d.hsa(), 0.0);
    sol.v.assign(d.hs(), 0.0);
    std::vector<double> next_v(d.num_states, 0.0);
    for (int h = d.horizon - 1; h >= 0; --h) {
        for (int s = 0; s < d.num_states; ++s) {
            const double* pi = policy.row(h, s);
            double val = 0.0;
            for (int a = 0; a < d.num_actions; ++a) {
                const double* p = mdp.row(h, s, a);
                double q = reward[d.idx(h, s, a)];
                for (int sn = 0; sn < d.num_states; ++sn) q += p[sn] * next_v[sn];
                sol.q[d.idx(h, s, a)] = q;
                val += pi[a] * q;
            }
            sol.v[d.idx(h, s)] = val;
        }
        for (int s = 0; s < d.num_states; ++s) next_v[s] = sol.v[d.idx(h, s)];
    }
    sol.j = 0.0;
    for (int s = 0; s < d.num_states; ++s) sol.j += mdp.initial_dist()[s] * sol.v[d.idx(0, s)];
    return sol;
}

inline ValueSolution policy_evaluation(const TabularMdp& mdp, const RewardSpec& reward,
                                       const Policy& policy, const FeatureMap* features = nullptr) {
    return policy_evaluation(mdp, reward.to_table(mdp.dims(), features), policy);
}

/// Greedy policy of a Q tensor; ties break toward the lowest action index.
inline Policy greedy_policy(const Dims& dims, const std::vector<double>& q) {
    if (q.size() != dims.hsa()) throw DimensionError("greedy_policy: q has wrong size");
    std::vector<int> actions(dims.hs(), 0);
    for (int h = 0; h < dims.horizon; ++h)
        for (int s = 0; s < dims.num_states; ++s) {
            int best_a = 0;
            double best = q[dims.idx(h, s, 0)];
            for (int a = 1; a < dims.num_actions; ++a) {
                double val = q[dims.idx(h, s, a)];
                if (val > best) {
                    best = val;
                    best_a = a;
                }
            }
            actions[dims.idx(h, s)] = best_a;
        }
    return Policy::deterministic(dims, actions);
}

/**
 * Stagewise state-action occupancy d^{p,pi}: forward recursion
 * d_0(s,a) = d0(s) pi_0(a|s), d_{h+1}(s',a') = pi_{h+1}(a'|s') sum_{s,a} d_h(s,a) p_h(s'|s,a).
 * Each stage slice sums to 1.
 */
inline std::vector<double> occupancy_measure(const TabularMdp& mdp, const Policy& policy) {
    if (policy.dims() != mdp.dims()) throw DimensionError("policy does not match MDP dims");
    const Dims& d = mdp.dims();
    std::vector<double> occ(d.hsa(), 0.0);
    std::vector<double> state_dist = mdp.initial_dist();
    std::vector<double> next_dist(d.num_states, 0.0);
    for (int h = 0; h < d.horizon; ++h) {
        std::fill(next_dist.begin(), next_dist.end(), 0.0);
        for (int s = 0; s < d.num_states; ++s) {
            if (state_dist[s] == 0.0) continue;
            const double* pi = policy.row(h, s);
            for (int a = 0; a < d.num_actions; ++a) {
                double mass = state_dist[s] * pi[a];
                if (mass == 0.0) continue;
                occ[d.idx(h, s, a)] = mass;
                const double* p = mdp.row(h, s, a);
                for (int sn = 0; sn < d.num_states; ++sn) next_dist[sn] += mass * p[sn];
            }
        }
        std::swap(state_dist, next_dist);
    }
    return occ;
}

/**
 * (Non)compatibility of a reward with the expert:
 * C(r) = J*(r;p) - J^{pi_E}(r;p), always >= 0 up to rounding.
 */
inline double exact_noncompatibility(const TabularMdp& mdp, const Policy& expert,
                                     const std::vector<double>& reward) {
    return value_iteration(mdp, reward).j - policy_evaluation(mdp, reward, expert).j;
}

inline double exact_noncompatibility(const TabularMdp& mdp, const Policy& expert,
                                     const RewardSpec& reward, const FeatureMap* features = nullptr) {
    return exact_noncompatibility(mdp, expert, reward.to_table(mdp.dims(), features));
}

/**
 * Multiplicative compatibility F(r) = J^{pi_E}(r)/J*(r) for nonnegative
 * rewards, with F = 0 when the optimal value is zero. Scale invariant:
 * F(alpha r) = F(r) for alpha > 0.
 */
inline double multiplicative_compatibility(const TabularMdp& mdp, const Policy& expert,
                                           const std::vector<double>& reward) {
    detail::check_reward_dims(mdp, reward);
    for (double r : reward)
        if (r < 0.0) throw ValidationError("multiplicative_compatibility: rewards must be >= 0");
    double j_star = value_iteration(mdp, reward).j;
    if (j_star <= 0.0) return 0.0;
    double f = policy_evaluation(mdp, reward, expert).j / j_star;
    return std::clamp(f, 0.0, 1.0);
}

inline double multiplicative_compatibility(const TabularMdp& mdp, const Policy& expert,
                                           const RewardSpec& reward,
                                           const FeatureMap* features = nullptr) {
    return multiplicative_compatibility(mdp, expert, reward.to_table(mdp.dims(), features));
}

/// (s, h) pairs carrying occupancy mass above eps under the expert.
inline std::vector<StageState> expert_support(const TabularMdp& mdp, const Policy& expert,
                                              double eps = kSupportEps) {
    const Dims& d = mdp.dims();
    std::vector<double> occ = occupancy_measure(mdp, expert);
    std::vector<StageState> support;
    for (int h = 0; h < d.horizon; ++h)
        for (int s = 0; s < d.num_states; ++s) {
            double mass = 0.0;
            for (int a = 0; a < d.num_actions; ++a) mass += occ[d.idx(h, s, a)];
            if (mass > eps) support.push_back({s, h});
        }
    return support;
}

/**
 * Membership test for the feasible set: r is feasible iff at every supported
 * (s, h) and every action a, E_{a'~pi_E(.|s)} Q*_h(s,a') >= Q*_h(s,a) - tol.
 */
inline bool feasible_membership(const TabularMdp& mdp, const Policy& expert,
                                const std::vector<StageState>& support,
                                const std::vector<double>& reward, double tol) {
    detail::check_reward_dims(mdp, reward);
    if (expert.dims() != mdp.dims()) throw DimensionError("expert policy does not match MDP dims");
    if (tol < 0.0) throw ValidationError("feasible_membership: tol must be >= 0");
    const Dims& d = mdp.dims();
    ValueSolution sol = value_iteration(mdp, reward);
    for (const StageState& sh : support) {
        if (sh.state < 0 || sh.state >= d.num_states || sh.stage < 0 || sh.stage >= d.horizon)
            throw DimensionError("feasible_membership: support entry out of range");
        const double* pi = expert.row(sh.stage, sh.state);
        double expert_q = 0.0;
        for (int a = 0; a < d.num_actions; ++a)
            expert_q += pi[a] * sol.q[d.idx(sh.stage, sh.state, a)];
        for (int a = 0; a < d.num_actions; ++a)
            if (expert_q < sol.q[d.idx(sh.stage, sh.state, a)] - tol) return false;
    }
    return true;
}

inline bool feasible_membership(const TabularMdp& mdp, const Policy& expert,
                                const std::vector<StageState>& support, const RewardSpec& reward,
                                double tol, const FeatureMap* features = nullptr) {
    return feasible_membership(mdp, expert, support, reward.to_table(mdp.dims(), features), tol);
}

}  // namespace caty
