#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "caty/common.hpp"
#include "caty/datasets.hpp"
#include "caty/features.hpp"
#include "caty/linalg.hpp"
#include "caty/mdp.hpp"

namespace caty {

// ---------------------------------------------------------------------------
// Linear MDP representation
// ---------------------------------------------------------------------------

/**
 * Linear MDP without reward: p_h(.|s,a) = <phi(s,a), mu_h(.)> with signed
 * measures mu_h stored as d x S matrices per stage. Construction verifies the
 * simplex and total-variation invariants.
 */
class LinearMdpSpec {
  public:
    LinearMdpSpec(FeatureMap features, std::vector<double> mu, std::vector<double> initial_dist,
                  int horizon)
        : features_(std::move(features)), mu_(std::move(mu)), d0_(std::move(initial_dist)),
          horizon_(horizon) {
        if (horizon_ < 1) throw ValidationError("LinearMdpSpec: H must be >= 1");
        const int S = features_.num_states();
        const int d = features_.dim();
        if (mu_.size() != static_cast<std::size_t>(horizon_) * d * S)
            throw DimensionError("LinearMdpSpec: mu has wrong size");
        if (d0_.size() != static_cast<std::size_t>(S))
            throw DimensionError("LinearMdpSpec: d0 size does not match S");
        require_probability_vector(d0_, "LinearMdpSpec: d0");
        for (int h = 0; h < horizon_; ++h) {
            double tv_sq = 0.0;
            for (int k = 0; k < d; ++k) {
                double tv = 0.0;
                const double* row = mu_row(h, k);
                for (int sn = 0; sn < S; ++sn) tv += std::abs(row[sn]);
                tv_sq += tv * tv;
            }
            if (tv_sq > static_cast<double>(d) + 1e-6)
                throw ValidationError("LinearMdpSpec: || |mu_h|(S) ||_2 exceeds sqrt(d) at h=" +
                                      std::to_string(h));
        }
        for (int h = 0; h < horizon_; ++h)
            for (int s = 0; s < S; ++s)
                for (int a = 0; a < features_.num_actions(); ++a) {
                    std::vector<double> row = transition_row(h, s, a);
                    if (!is_probability_vector(row))
                        throw ValidationError("LinearMdpSpec: <phi,mu> row is not a simplex point at h=" +
                                              std::to_string(h) + " s=" + std::to_string(s) +
                                              " a=" + std::to_string(a));
                }
    }

    [[nodiscard]] const FeatureMap& features() const { return features_; }
    [[nodiscard]] const std::vector<double>& mu() const { return mu_; }
    [[nodiscard]] const std::vector<double>& initial_dist() const { return d0_; }
    [[nodiscard]] int horizon() const { return horizon_; }
    [[nodiscard]] Dims dims() const {
        return Dims{features_.num_states(), features_.num_actions(), horizon_};
    }

    // Row of mu_h for feature coordinate k, length S.
    [[nodiscard]] const double* mu_row(int h, int k) const {
        return mu_.data() + (static_cast<std::size_t>(h) * features_.dim() + k) * features_.num_states();
    }

    [[nodiscard]] std::vector<double> transition_row(int h, int s, int a) const {
        const int S = features_.num_states();
        const int d = features_.dim();
        const double* phi = features_.at(s, a);
        std::vector<double> row(S, 0.0);
        for (int k = 0; k < d; ++k) {
            if (phi[k] == 0.0) continue;
            const double* mk = mu_row(h, k);
            for (int sn = 0; sn < S; ++sn) row[sn] += phi[k] * mk[sn];
        }
        return row;
    }

  private:
    FeatureMap features_;
    std::vector<double> mu_;  // (h, k, s')
    std::vector<double> d0_;
    int horizon_;
};

/**
 * Expands <phi, mu> into a dense transition tensor. Rows must pass simplex
 * validation within 1e-6 (anything worse is a construction error naming the
 * offending triple); residual rounding is then cleaned up so the result
 * satisfies the exact TabularMdp invariants.
 */
inline TabularMdp materialize(const LinearMdpSpec& spec) {
    const Dims d = spec.dims();
    std::vector<double> p(d.hsa() * d.num_states);
    for (int h = 0; h < d.horizon; ++h)
        for (int s = 0; s < d.num_states; ++s)
            for (int a = 0; a < d.num_actions; ++a) {
                std::vector<double> row = spec.transition_row(h, s, a);
                if (!is_probability_vector(row, 1e-6))
                    throw ValidationError("materialize: invalid transition row at h=" +
                                          std::to_string(h) + " s=" + std::to_string(s) +
                                          " a=" + std::to_string(a));
                double sum = 0.0;
                for (double& x : row) {
                    if (x < 0.0) x = 0.0;
                    sum += x;
                }
                double* out = p.data() + d.idx(h, s, a) * d.num_states;
                for (int sn = 0; sn < d.num_states; ++sn) out[sn] = row[sn] / sum;
            }
    return TabularMdp(d, spec.initial_dist(), std::move(p));
}

// ---------------------------------------------------------------------------
// Least-squares transition estimation
// ---------------------------------------------------------------------------

/**
 * Ridge least-squares state: Gram matrices Lambda_h = I + sum_k phi phi' and
 * measure estimates mu_hat_h = Lambda_h^{-1} sum_k phi(s_h^k, a_h^k) e_{s_{h+1}^k}'.
 * The induced p_hat may be a signed quasi-distribution; no projection is applied.
 */
struct LsviEstimate {
    int dim = 0;
    int num_states = 0;
    int horizon = 0;
    std::int64_t tau = 0;
    std::vector<double> gram;    // (h, i, j), d x d per stage
    std::vector<double> mu_hat;  // (h, k, s'), d x S per stage

    [[nodiscard]] const double* gram_at(int h) const {
        return gram.data() + static_cast<std::size_t>(h) * dim * dim;
    }
    [[nodiscard]] const double* mu_hat_row(int h, int k) const {
        return mu_hat.data() + (static_cast<std::size_t>(h) * dim + k) * num_states;
    }

    [[nodiscard]] std::vector<double> gram_matrix(int h) const {
        const double* g = gram_at(h);
        return std::vector<double>(g, g + static_cast<std::size_t>(dim) * dim);
    }

    /// Signed estimate p_hat_h(.|s,a) = <phi(s,a), mu_hat_h(.)>.
    [[nodiscard]] std::vector<double> estimated_row(const FeatureMap& features, int h, int s,
                                                    int a) const {
        const double* phi = features.at(s, a);
        std::vector<double> row(num_states, 0.0);
        for (int k = 0; k < dim; ++k) {
            if (phi[k] == 0.0) continue;
            const double* mk = mu_hat_row(h, k);
            for (int sn = 0; sn < num_states; ++sn) row[sn] += phi[k] * mk[sn];
        }
        return row;
    }

    /// Optional clip-and-renormalize of p_hat for simulation use; off the
    /// planning path by default.
    [[nodiscard]] std::vector<double> projected_row(const FeatureMap& features, int h, int s,
                                                    int a) const {
        std::vector<double> row = estimated_row(features, h, s, a);
        double sum = 0.0;
        for (double& x : row) {
            if (x < 0.0) x = 0.0;
            sum += x;
        }
        if (sum <= 0.0) {
            double u = 1.0 / num_states;
            for (double& x : row) x = u;
        } else {
            for (double& x : row) x /= sum;
        }
        return row;
    }
};

/// Identity-Gram estimate (tau = 0), the maximal-uncertainty state.
inline LsviEstimate lsvi_empty(int dim, int num_states, int horizon) {
    LsviEstimate est;
    est.dim = dim;
    est.num_states = num_states;
    est.horizon = horizon;
    est.tau = 0;
    est.gram.assign(static_cast<std::size_t>(horizon) * dim * dim, 0.0);
    est.mu_hat.assign(static_cast<std::size_t>(horizon) * dim * num_states, 0.0);
    for (int h = 0; h < horizon; ++h)
        for (int k = 0; k < dim; ++k) est.gram[(static_cast<std::size_t>(h) * dim + k) * dim + k] = 1.0;
    return est;
}

inline LsviEstimate lsvi_fit(const ExplorationDataset& dataset, const FeatureMap& features) {
    const Dims d = dataset.dims();
    if (features.num_states() != d.num_states || features.num_actions() != d.num_actions)
        throw DimensionError("lsvi_fit: features do not match dataset dims");
    const int dim = features.dim();
    LsviEstimate est = lsvi_empty(dim, d.num_states, d.horizon);
    est.tau = dataset.tau();
    // b[h] accumulates sum_k phi * e_{s'}', kept separate so mu_hat solves cleanly.
    std::vector<double> b(static_cast<std::size_t>(d.horizon) * dim * d.num_states, 0.0);
    for (const Episode& e : dataset.episodes()) {
        for (int h = 0; h < d.horizon; ++h) {
            const double* phi = features.at(e.states[h], e.actions[h]);
            double* g = est.gram.data() + static_cast<std::size_t>(h) * dim * dim;
            for (int i = 0; i < dim; ++i) {
                if (phi[i] == 0.0) continue;
                for (int j = 0; j < dim; ++j) g[i * dim + j] += phi[i] * phi[j];
                b[(static_cast<std::size_t>(h) * dim + i) * d.num_states + e.states[h + 1]] += phi[i];
            }
        }
    }
    for (int h = 0; h < d.horizon; ++h) {
        Cholesky chol(est.gram_matrix(h), dim);
        std::vector<double> col(dim);
        for (int sn = 0; sn < d.num_states; ++sn) {
            for (int k = 0; k < dim; ++k)
                col[k] = b[(static_cast<std::size_t>(h) * dim + k) * d.num_states + sn];
            chol.solve(col);
            for (int k = 0; k < dim; ++k)
                est.mu_hat[(static_cast<std::size_t>(h) * dim + k) * d.num_states + sn] = col[k];
        }
    }
    return est;
}

// ---------------------------------------------------------------------------
// Elliptical bonus
// ---------------------------------------------------------------------------

/// u_h(s,a) = min(beta ||phi(s,a)||_{Lambda_h^{-1}}, H); entrywise nonincreasing
/// as episodes accumulate.
inline std::vector<double> elliptical_bonus(const LsviEstimate& estimate, const FeatureMap& features,
                                            double beta) {
    if (beta < 0.0) throw ValidationError("elliptical_bonus: beta must be >= 0");
    if (features.dim() != estimate.dim || features.num_states() != estimate.num_states)
        throw DimensionError("elliptical_bonus: features do not match estimate");
    Dims d{estimate.num_states, features.num_actions(), estimate.horizon};
    std::vector<double> u(d.hsa(), 0.0);
    const double cap = static_cast<double>(estimate.horizon);
    for (int h = 0; h < d.horizon; ++h) {
        Cholesky chol(estimate.gram_matrix(h), estimate.dim);
        for (int s = 0; s < d.num_states; ++s)
            for (int a = 0; a < d.num_actions; ++a) {
                double q = chol.inv_quad(features.vec(s, a));
                u[d.idx(h, s, a)] = std::min(beta * std::sqrt(q), cap);
            }
    }
    return u;
}

/// beta = c H sqrt(d ln(1 + tau) + ln(H / delta)).
inline double default_beta(int dim, int horizon, std::int64_t tau, double delta, double c = 1.0) {
    if (delta <= 0.0 || delta >= 1.0) throw ValidationError("default_beta: delta must lie in (0,1)");
    if (tau < 0) throw ValidationError("default_beta: tau must be >= 0");
    return c * horizon *
           std::sqrt(dim * std::log1p(static_cast<double>(tau)) + std::log(horizon / delta));
}

// ---------------------------------------------------------------------------
// Feasible-set degeneracy certification
// ---------------------------------------------------------------------------

/// Per-stage outcome of the separating-hyperplane test.
struct SeparabilityReport {
    int stage = 0;
    bool separable = false;
    double margin = 0.0;
    std::optional<std::vector<double>> witness;  // unit L2 norm when separable
    std::vector<std::vector<double>> expert_features;
    std::vector<std::vector<double>> other_features;
};

struct DegeneracyReport {
    std::vector<SeparabilityReport> stages;

    /// True when no stage admits a separating hyperplane, which pins the
    /// linear feasible set to the zero reward.
    [[nodiscard]] bool degenerate() const {
        for (const auto& st : stages)
            if (st.separable) return false;
        return !stages.empty();
    }
};

namespace detail {

inline void push_unique(std::vector<std::vector<double>>& set, std::vector<double> v) {
    for (const auto& u : set) {
        double dist = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) dist = std::max(dist, std::abs(u[i] - v[i]));
        if (dist <= 1e-12) return;
    }
    set.push_back(std::move(v));
}

// Margin LP: maximize t subject to w'(phi_e - phi_o) >= t over all pairs and
// ||w||_inf <= 1. Encoded as w = p - q with p, q in [0,1]^d and t = t+ - t-.
inline SeparabilityReport separate_stage(int stage, std::vector<std::vector<double>> expert_feats,
                                         std::vector<std::vector<double>> other_feats) {
    SeparabilityReport rep;
    rep.stage = stage;
    rep.expert_features = std::move(expert_feats);
    rep.other_features = std::move(other_feats);
    const int d = rep.expert_features.empty()
                      ? (rep.other_features.empty() ? 0 : static_cast<int>(rep.other_features[0].size()))
                      : static_cast<int>(rep.expert_features[0].size());
    if (rep.other_features.empty()) {
        // Nothing to separate from; any direction works.
        rep.separable = true;
        rep.margin = std::numeric_limits<double>::infinity();
        std::vector<double> w(d, 0.0);
        if (d > 0) w[0] = 1.0;
        rep.witness = w;
        return rep;
    }

    const int n = 2 * d + 2;  // p, q, t+, t-
    std::vector<double> c(n, 0.0);
    c[2 * d] = 1.0;
    c[2 * d + 1] = -1.0;
    std::vector<std::vector<double>> a;
    std::vector<double> b;
    for (const auto& fe : rep.expert_features)
        for (const auto& fo : rep.other_features) {
            std::vector<double> row(n, 0.0);
            for (int k = 0; k < d; ++k) {
                double z = fe[k] - fo[k];
                row[k] = -z;      // -z'p
                row[d + k] = z;   // +z'q
            }
            row[2 * d] = 1.0;     // +t
            row[2 * d + 1] = -1.0;
            a.push_back(std::move(row));
            b.push_back(0.0);
        }
    for (int k = 0; k < 2 * d; ++k) {
        std::vector<double> row(n, 0.0);
        row[k] = 1.0;
        a.push_back(std::move(row));
        b.push_back(1.0);
    }
    LpResult lp = simplex_max(c, a, b);
    if (!lp.bounded) throw ValidationError("degeneracy_check: margin LP reported unbounded");
    rep.margin = lp.objective;
    rep.separable = lp.objective > 1e-9;
    if (rep.separable) {
        std::vector<double> w(d);
        for (int k = 0; k < d; ++k) w[k] = lp.x[k] - lp.x[d + k];
        double norm = l2_norm(w);
        if (norm > 0.0)
            for (double& x : w) x /= norm;
        rep.witness = std::move(w);
    }
    return rep;
}

}  // namespace detail

/**
 * Decides, per stage, whether the expert's feature set {phi(s, a_E)} and the
 * non-expert set {phi(s, a)} over supported states admit a separating
 * hyperplane. When no stage is separable the linear feasible set collapses to
 * the zero reward.
 */
inline DegeneracyReport degeneracy_check(const TabularMdp& mdp, const Policy& expert,
                                         const FeatureMap& features,
                                         double expert_action_eps = 1e-12) {
    if (expert.dims() != mdp.dims()) throw DimensionError("degeneracy_check: policy/MDP mismatch");
    if (features.num_states() != mdp.num_states() || features.num_actions() != mdp.num_actions())
        throw DimensionError("degeneracy_check: features do not match MDP");
    const Dims& d = mdp.dims();
    std::vector<double> occ = occupancy_measure(mdp, expert);
    DegeneracyReport report;
    for (int h = 0; h < d.horizon; ++h) {
        std::vector<std::vector<double>> expert_feats;
        std::vector<std::vector<double>> other_feats;
        for (int s = 0; s < d.num_states; ++s) {
            double mass = 0.0;
            for (int a = 0; a < d.num_actions; ++a) mass += occ[d.idx(h, s, a)];
            if (mass <= kSupportEps) continue;
            for (int a = 0; a < d.num_actions; ++a) {
                if (expert.prob(h, s, a) > expert_action_eps)
                    detail::push_unique(expert_feats, features.vec(s, a));
                else
                    detail::push_unique(other_feats, features.vec(s, a));
            }
        }
        report.stages.push_back(detail::separate_stage(h, std::move(expert_feats), std::move(other_feats)));
    }
    return report;
}

}  // namespace caty
