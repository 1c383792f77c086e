#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "caty/common.hpp"
#include "caty/datasets.hpp"
#include "caty/linear.hpp"
#include "caty/mdp.hpp"
#include "caty/rng.hpp"

namespace caty {

// ---------------------------------------------------------------------------
// Environment samplers
// ---------------------------------------------------------------------------

/**
 * Forward model: episodes start from d0 and advance one stage at a time; the
 * interface deliberately exposes no arbitrary (s,a,h) queries. Episode i draws
 * from the stream derived from (seed, i).
 */
class ForwardSampler {
  public:
    ForwardSampler(const TabularMdp& mdp, std::uint64_t seed)
        : mdp_(&mdp), seed_(seed), rng_(Rng::derive(seed, 0)) {}

    [[nodiscard]] const TabularMdp& mdp() const { return *mdp_; }
    [[nodiscard]] const Dims& dims() const { return mdp_->dims(); }
    [[nodiscard]] std::int64_t episodes_started() const { return episode_counter_; }

    /// Starts a new episode and returns s_1 ~ d0.
    int reset() {
        rng_ = Rng::derive(seed_, static_cast<std::uint64_t>(episode_counter_));
        ++episode_counter_;
        stage_ = 0;
        state_ = rng_.categorical(mdp_->initial_dist());
        return state_;
    }

    /// Advances the current episode with action a and returns s_{h+1}.
    int step(int a) {
        if (stage_ >= mdp_->horizon())
            throw ValidationError("ForwardSampler: episode already finished; call reset()");
        state_ = rng_.categorical(mdp_->row(stage_, state_, a), mdp_->num_states());
        ++stage_;
        return state_;
    }

    [[nodiscard]] int stage() const { return stage_; }
    [[nodiscard]] int state() const { return state_; }

  private:
    const TabularMdp* mdp_;
    std::uint64_t seed_;
    Rng rng_;
    std::int64_t episode_counter_ = 0;
    int stage_ = 0;
    int state_ = 0;
};

/// Generative model: arbitrary (h, s, a) queries, for oracle experiments only.
class GenerativeSampler {
  public:
    GenerativeSampler(const TabularMdp& mdp, std::uint64_t seed)
        : mdp_(&mdp), rng_(Rng::derive(seed, 0x67656e)) {}

    int query(int h, int s, int a) {
        ++queries_;
        return rng_.categorical(mdp_->row(h, s, a), mdp_->num_states());
    }

    [[nodiscard]] std::int64_t queries() const { return queries_; }

  private:
    const TabularMdp* mdp_;
    Rng rng_;
    std::int64_t queries_ = 0;
};

// ---------------------------------------------------------------------------
// Exploration phase
// ---------------------------------------------------------------------------

/// Dataset plus the stopping report of an exploration run.
struct ExplorationResult {
    ExplorationDataset dataset;
    bool budget_exhausted = false;
    std::int64_t episodes = 0;
    // Final value of the run's stopping statistic: root uncertainty for
    // reward-free runs, root confidence-interval width for BPI runs.
    double final_uncertainty = 0.0;
};

namespace detail {

inline double hoeffding_bonus(double scale, double log_term, std::int64_t n) {
    return scale * std::sqrt(2.0 * log_term / static_cast<double>(std::max<std::int64_t>(1, n)));
}

}  // namespace detail

/// Log factor shared by the reward-free and BPI bonuses:
/// ln(2 S A H t_max / delta).
inline double exploration_log_term(const Dims& d, std::int64_t t_max, double delta) {
    return std::log(2.0 * d.num_states * d.num_actions * d.horizon *
                    static_cast<double>(std::max<std::int64_t>(1, t_max)) / delta);
}

/**
 * Reward-free uncertainty table over (h, s, a):
 *   U_h(s,a) = min(H, b(n_h(s,a)) + p_hat_h' max_a' U_{h+1}(.,a'))
 * with b(n) = c H sqrt(2 log_term / max(1, n)). Pure function of the counts,
 * so it can be re-evaluated on dataset prefixes.
 */
inline std::vector<double> reward_free_uncertainty(const ExplorationDataset& dataset,
                                                   double log_term, double bonus_constant = 1.0) {
    const Dims& d = dataset.dims();
    const double hh = static_cast<double>(d.horizon);
    std::vector<double> u(d.hsa(), hh);
    std::vector<double> next_max(d.num_states, 0.0);
    std::vector<double> p_row(d.num_states);
    for (int h = d.horizon - 1; h >= 0; --h) {
        for (int s = 0; s < d.num_states; ++s)
            for (int a = 0; a < d.num_actions; ++a) {
                double val = detail::hoeffding_bonus(bonus_constant * hh, log_term,
                                                     dataset.count(h, s, a));
                if (h + 1 < d.horizon) {
                    dataset.empirical_row(h, s, a, p_row.data());
                    for (int sn = 0; sn < d.num_states; ++sn) val += p_row[sn] * next_max[sn];
                }
                u[d.idx(h, s, a)] = std::min(hh, val);
            }
        for (int s = 0; s < d.num_states; ++s) {
            double best = 0.0;
            for (int a = 0; a < d.num_actions; ++a) best = std::max(best, u[d.idx(h, s, a)]);
            next_max[s] = best;
        }
    }
    return u;
}

/**
 * Reward-free exploration. Maintains the uncertainty recursion
 *   U_h(s,a) = min(H, b(n_h(s,a)) + p_hat_h' max_a' U_{h+1}(.,a')),
 * with Hoeffding bonus b(n) = c H sqrt(2 ln(2SAH t_max / delta) / max(1,n)),
 * acts greedily w.r.t. U, and stops once sum_s d0(s) max_a U_1(s,a) <= eps/2.
 * Budget exhaustion is a flagged outcome, not an error.
 */
inline ExplorationResult explore_reward_free_tabular(ForwardSampler& sampler, double epsilon,
                                                     double delta, std::int64_t max_episodes,
                                                     double bonus_constant = 1.0) {
    if (epsilon <= 0.0 || epsilon >= 1.0) throw ValidationError("epsilon must lie in (0,1)");
    if (delta <= 0.0 || delta >= 1.0) throw ValidationError("delta must lie in (0,1)");
    if (max_episodes < 1) throw ValidationError("max_episodes must be >= 1");
    const Dims d = sampler.dims();
    const double log_term = exploration_log_term(d, max_episodes, delta);

    ExplorationResult out;
    out.dataset = ExplorationDataset(d);
    std::vector<double> u;

    auto recompute_u = [&]() {
        u = reward_free_uncertainty(out.dataset, log_term, bonus_constant);
    };

    auto root_uncertainty = [&]() {
        double v = 0.0;
        for (int s = 0; s < d.num_states; ++s) {
            double best = 0.0;
            for (int a = 0; a < d.num_actions; ++a) best = std::max(best, u[d.idx(0, s, a)]);
            v += sampler.mdp().initial_dist()[s] * best;
        }
        return v;
    };

    for (std::int64_t t = 0; t < max_episodes; ++t) {
        recompute_u();
        out.final_uncertainty = root_uncertainty();
        if (out.final_uncertainty <= epsilon / 2.0) {
            out.episodes = t;
            return out;
        }
        Episode e;
        e.states.push_back(sampler.reset());
        for (int h = 0; h < d.horizon; ++h) {
            int s = e.states.back();
            int best_a = 0;
            double best = u[d.idx(h, s, 0)];
            for (int a = 1; a < d.num_actions; ++a)
                if (u[d.idx(h, s, a)] > best) {
                    best = u[d.idx(h, s, a)];
                    best_a = a;
                }
            e.actions.push_back(best_a);
            e.states.push_back(sampler.step(best_a));
        }
        out.dataset.add_episode(std::move(e));
    }
    recompute_u();
    out.final_uncertainty = root_uncertainty();
    out.episodes = max_episodes;
    out.budget_exhausted = out.final_uncertainty > epsilon / 2.0;
    return out;
}

/**
 * Best-policy-identification exploration for a single fixed reward: optimistic
 * and pessimistic value iteration with the same Hoeffding bonus, acting greedy
 * w.r.t. the upper estimate, stopping once the root interval width drops to
 * eps/2. Q estimates are clipped to the remaining-reward envelopes, so a
 * constant reward stops right after the warm-up episode.
 */
inline ExplorationResult explore_bpi_tabular(ForwardSampler& sampler, const std::vector<double>& reward,
                                             double epsilon, double delta, std::int64_t max_episodes,
                                             double bonus_constant = 1.0,
                                             std::int64_t min_episodes = 1) {
    if (epsilon <= 0.0 || epsilon >= 1.0) throw ValidationError("epsilon must lie in (0,1)");
    if (delta <= 0.0 || delta >= 1.0) throw ValidationError("delta must lie in (0,1)");
    if (max_episodes < 1) throw ValidationError("max_episodes must be >= 1");
    const Dims d = sampler.dims();
    if (reward.size() != d.hsa()) throw DimensionError("explore_bpi_tabular: reward/MDP mismatch");
    const double hh = static_cast<double>(d.horizon);
    const double log_term = exploration_log_term(d, max_episodes, delta);

    // Remaining-reward envelopes: any Q_h lies in [lo[h], hi[h]].
    std::vector<double> hi(d.horizon + 1, 0.0), lo(d.horizon + 1, 0.0);
    for (int h = d.horizon - 1; h >= 0; --h) {
        double mx = -1.0, mn = 1.0;
        for (int s = 0; s < d.num_states; ++s)
            for (int a = 0; a < d.num_actions; ++a) {
                mx = std::max(mx, reward[d.idx(h, s, a)]);
                mn = std::min(mn, reward[d.idx(h, s, a)]);
            }
        hi[h] = hi[h + 1] + mx;
        lo[h] = lo[h + 1] + mn;
    }

    ExplorationResult out;
    out.dataset = ExplorationDataset(d);
    std::vector<double> q_up(d.hsa()), v_up(d.num_states), v_lo(d.num_states);
    std::vector<double> next_up(d.num_states, 0.0), next_lo(d.num_states, 0.0);
    std::vector<double> p_row(d.num_states);

    auto replan = [&]() {
        std::fill(next_up.begin(), next_up.end(), 0.0);
        std::fill(next_lo.begin(), next_lo.end(), 0.0);
        for (int h = d.horizon - 1; h >= 0; --h) {
            for (int s = 0; s < d.num_states; ++s) {
                double best_up = -std::numeric_limits<double>::infinity();
                double best_lo = -std::numeric_limits<double>::infinity();
                for (int a = 0; a < d.num_actions; ++a) {
                    std::int64_t n = out.dataset.count(h, s, a);
                    double bonus = detail::hoeffding_bonus(bonus_constant * hh, log_term, n);
                    double mean_up = 0.0, mean_lo = 0.0;
                    if (h + 1 < d.horizon) {
                        out.dataset.empirical_row(h, s, a, p_row.data());
                        for (int sn = 0; sn < d.num_states; ++sn) {
                            mean_up += p_row[sn] * next_up[sn];
                            mean_lo += p_row[sn] * next_lo[sn];
                        }
                    }
                    double r = reward[d.idx(h, s, a)];
                    double qu = std::clamp(r + bonus + mean_up, lo[h], hi[h]);
                    double ql = std::clamp(r - bonus + mean_lo, lo[h], hi[h]);
                    q_up[d.idx(h, s, a)] = qu;
                    best_up = std::max(best_up, qu);
                    best_lo = std::max(best_lo, ql);
                }
                v_up[s] = best_up;
                v_lo[s] = best_lo;
            }
            next_up = v_up;
            next_lo = v_lo;
        }
    };

    auto root_gap = [&]() {
        double g = 0.0;
        for (int s = 0; s < d.num_states; ++s)
            g += sampler.mdp().initial_dist()[s] * (next_up[s] - next_lo[s]);
        return g;
    };

    for (std::int64_t t = 0; t < max_episodes; ++t) {
        replan();
        out.final_uncertainty = root_gap();
        if (t >= min_episodes && out.final_uncertainty <= epsilon / 2.0) {
            out.episodes = t;
            return out;
        }
        Episode e;
        e.states.push_back(sampler.reset());
        for (int h = 0; h < d.horizon; ++h) {
            int s = e.states.back();
            int best_a = 0;
            double best = q_up[d.idx(h, s, 0)];
            for (int a = 1; a < d.num_actions; ++a)
                if (q_up[d.idx(h, s, a)] > best) {
                    best = q_up[d.idx(h, s, a)];
                    best_a = a;
                }
            e.actions.push_back(best_a);
            e.states.push_back(sampler.step(best_a));
        }
        out.dataset.add_episode(std::move(e));
    }
    replan();
    out.final_uncertainty = root_gap();
    out.episodes = max_episodes;
    out.budget_exhausted = out.final_uncertainty > epsilon / 2.0;
    return out;
}

/// Exploration output for Linear MDPs: dataset plus fitted least-squares state.
struct LinearExplorationResult {
    ExplorationDataset dataset;
    LsviEstimate estimate;
    bool budget_exhausted = false;
    std::int64_t episodes = 0;
    double final_uncertainty = 0.0;  // estimated J*(u; p_hat) at stop
};

/**
 * Elliptical-bonus exploration for Linear MDPs. Keeps Lambda_h online, plans
 * each episode by optimistic LSVI on the normalized uncertainty reward u/H
 * (the bonus u enters the Q recursion again as optimism, so unexplored
 * feature directions stay attractive), executes the greedy policy, and stops
 * once the estimated J*(u; p_hat) falls to eps * stop_fraction or the budget
 * runs out.
 */
inline LinearExplorationResult explore_linear(ForwardSampler& sampler, const FeatureMap& features,
                                              double epsilon, double delta,
                                              std::int64_t max_episodes, double beta_constant = 1.0,
                                              double stop_fraction = 0.5) {
    if (epsilon <= 0.0 || epsilon >= 1.0) throw ValidationError("epsilon must lie in (0,1)");
    if (delta <= 0.0 || delta >= 1.0) throw ValidationError("delta must lie in (0,1)");
    if (max_episodes < 1) throw ValidationError("max_episodes must be >= 1");
    const Dims d = sampler.dims();
    if (features.num_states() != d.num_states || features.num_actions() != d.num_actions)
        throw DimensionError("explore_linear: features do not match MDP");
    const int dim = features.dim();
    const double hh = static_cast<double>(d.horizon);

    LinearExplorationResult out;
    out.dataset = ExplorationDataset(d);
    out.estimate = lsvi_empty(dim, d.num_states, d.horizon);
    // b[h]: running sum of phi * e_{s'}'.
    std::vector<double> b(static_cast<std::size_t>(d.horizon) * dim * d.num_states, 0.0);

    std::vector<double> u(d.hsa());
    std::vector<double> q(d.hsa());
    std::vector<double> v(d.num_states, 0.0);
    std::vector<double> w(dim);

    auto plan_uncertainty = [&]() -> double {
        // mu_hat and bonus under the current Gram matrices.
        double beta = default_beta(dim, d.horizon, out.dataset.tau(), delta, beta_constant);
        std::vector<Cholesky> chols;
        chols.reserve(d.horizon);
        for (int h = 0; h < d.horizon; ++h) chols.emplace_back(out.estimate.gram_matrix(h), dim);
        for (int h = 0; h < d.horizon; ++h)
            for (int s = 0; s < d.num_states; ++s)
                for (int a = 0; a < d.num_actions; ++a) {
                    double quad = chols[h].inv_quad(features.vec(s, a));
                    u[d.idx(h, s, a)] = std::min(beta * std::sqrt(quad), hh);
                }
        // Optimistic backward LSVI on reward u/H with mu_hat_h = Lambda_h^{-1} b_h:
        // Q_h = min(u/H + <phi, mu_hat V_{h+1}> + u, H), V in [0, H].
        std::fill(v.begin(), v.end(), 0.0);
        for (int h = d.horizon - 1; h >= 0; --h) {
            for (int k = 0; k < dim; ++k) {
                double acc = 0.0;
                const double* bk = b.data() + (static_cast<std::size_t>(h) * dim + k) * d.num_states;
                for (int sn = 0; sn < d.num_states; ++sn) acc += bk[sn] * v[sn];
                w[k] = acc;
            }
            chols[h].solve(w);  // w = mu_hat_h V_{h+1}
            for (int s = 0; s < d.num_states; ++s)
                for (int a = 0; a < d.num_actions; ++a) {
                    const double* phi = features.at(s, a);
                    double val = u[d.idx(h, s, a)] * (1.0 + hh) / hh;  // reward u/H plus bonus u
                    for (int k = 0; k < dim; ++k) val += phi[k] * w[k];
                    q[d.idx(h, s, a)] = std::min(val, hh);
                }
            for (int s = 0; s < d.num_states; ++s) {
                double best = -std::numeric_limits<double>::infinity();
                for (int a = 0; a < d.num_actions; ++a) best = std::max(best, q[d.idx(h, s, a)]);
                v[s] = std::clamp(best, 0.0, hh);
            }
        }
        double root = 0.0;
        for (int s = 0; s < d.num_states; ++s) root += sampler.mdp().initial_dist()[s] * v[s];
        return hh * root;  // estimated J*(u; p_hat)
    };

    for (std::int64_t t = 0; t < max_episodes; ++t) {
        out.final_uncertainty = plan_uncertainty();
        if (out.final_uncertainty <= epsilon * stop_fraction) {
            out.episodes = t;
            break;
        }
        Episode e;
        e.states.push_back(sampler.reset());
        for (int h = 0; h < d.horizon; ++h) {
            int s = e.states.back();
            // Q ties (saturated optimism) break toward the larger bonus, then
            // the lower action index.
            int best_a = 0;
            double best = q[d.idx(h, s, 0)];
            for (int a = 1; a < d.num_actions; ++a) {
                double qa = q[d.idx(h, s, a)];
                if (qa > best + 1e-12 ||
                    (qa > best - 1e-12 && u[d.idx(h, s, a)] > u[d.idx(h, s, best_a)] + 1e-12)) {
                    best = qa;
                    best_a = a;
                }
            }
            e.actions.push_back(best_a);
            int sn = sampler.step(best_a);
            e.states.push_back(sn);
            const double* phi = features.at(s, best_a);
            double* g = out.estimate.gram.data() + static_cast<std::size_t>(h) * dim * dim;
            for (int i = 0; i < dim; ++i) {
                if (phi[i] == 0.0) continue;
                for (int j = 0; j < dim; ++j) g[i * dim + j] += phi[i] * phi[j];
                b[(static_cast<std::size_t>(h) * dim + i) * d.num_states + sn] += phi[i];
            }
        }
        out.dataset.add_episode(std::move(e));
        if (t + 1 == max_episodes) {
            out.final_uncertainty = plan_uncertainty();
            out.episodes = max_episodes;
            out.budget_exhausted = out.final_uncertainty > epsilon * stop_fraction;
        }
    }
    // Finalize mu_hat from the accumulated sums.
    out.estimate.tau = out.dataset.tau();
    for (int h = 0; h < d.horizon; ++h) {
        Cholesky chol(out.estimate.gram_matrix(h), dim);
        std::vector<double> col(dim);
        for (int sn = 0; sn < d.num_states; ++sn) {
            for (int k = 0; k < dim; ++k)
                col[k] = b[(static_cast<std::size_t>(h) * dim + k) * d.num_states + sn];
            chol.solve(col);
            for (int k = 0; k < dim; ++k)
                out.estimate.mu_hat[(static_cast<std::size_t>(h) * dim + k) * d.num_states + sn] = col[k];
        }
    }
    return out;
}

}  // namespace caty
