#pragma once

#include <cstdint>
#include <vector>

#include "caty/common.hpp"

namespace caty {

/**
 * One trajectory: states s_1..s_H (optionally s_{H+1} when the terminal next
 * state was observed) and actions a_1..a_H.
 */
struct Episode {
    std::vector<int> states;
    std::vector<int> actions;

    [[nodiscard]] int length() const { return static_cast<int>(actions.size()); }
    [[nodiscard]] bool has_terminal_state() const { return states.size() == actions.size() + 1; }
};

inline void validate_episode(const Episode& e, const Dims& dims, bool require_terminal) {
    if (e.length() != dims.horizon)
        throw DimensionError("episode length does not match horizon");
    if (e.states.size() != e.actions.size() && e.states.size() != e.actions.size() + 1)
        throw DimensionError("episode must carry H or H+1 states");
    if (require_terminal && !e.has_terminal_state())
        throw DimensionError("episode is missing the terminal next state");
    for (int s : e.states)
        if (s < 0 || s >= dims.num_states) throw ValidationError("episode state out of range");
    for (int a : e.actions)
        if (a < 0 || a >= dims.num_actions) throw ValidationError("episode action out of range");
}

/// Batch of expert demonstrations D^E.
struct ExpertDataset {
    Dims dims;
    std::vector<Episode> episodes;

    [[nodiscard]] std::int64_t count() const { return static_cast<std::int64_t>(episodes.size()); }

    void add(Episode e) {
        validate_episode(e, dims, /*require_terminal=*/false);
        episodes.push_back(std::move(e));
    }
};

/**
 * Exploration dataset D: episode log plus visit counts n_h(s,a) and
 * n_h(s,a,s'). Counts always satisfy sum_{s'} n_h(s,a,s') = n_h(s,a) and
 * sum_{s,a} n_h(s,a) = tau for every stage.
 */
class ExplorationDataset {
  public:
    ExplorationDataset() = default;

    explicit ExplorationDataset(Dims dims)
        : dims_(dims),
          counts_sa_(dims.hsa(), 0),
          counts_sas_(dims.hsa() * dims.num_states, 0) {
        dims_.validate();
    }

    void add_episode(Episode e) {
        validate_episode(e, dims_, /*require_terminal=*/true);
        for (int h = 0; h < dims_.horizon; ++h) {
            std::size_t i = dims_.idx(h, e.states[h], e.actions[h]);
            ++counts_sa_[i];
            ++counts_sas_[i * dims_.num_states + e.states[h + 1]];
        }
        episodes_.push_back(std::move(e));
        ++tau_;
    }

    // Merges by count addition; associative and commutative.
    void merge(const ExplorationDataset& other) {
        if (other.dims_ != dims_) throw DimensionError("cannot merge datasets with different dims");
        for (std::size_t i = 0; i < counts_sa_.size(); ++i) counts_sa_[i] += other.counts_sa_[i];
        for (std::size_t i = 0; i < counts_sas_.size(); ++i) counts_sas_[i] += other.counts_sas_[i];
        episodes_.insert(episodes_.end(), other.episodes_.begin(), other.episodes_.end());
        tau_ += other.tau_;
    }

    [[nodiscard]] const Dims& dims() const { return dims_; }
    [[nodiscard]] std::int64_t tau() const { return tau_; }
    [[nodiscard]] const std::vector<Episode>& episodes() const { return episodes_; }

    [[nodiscard]] std::int64_t count(int h, int s, int a) const {
        return counts_sa_[dims_.idx(h, s, a)];
    }
    [[nodiscard]] std::int64_t count(int h, int s, int a, int sn) const {
        return counts_sas_[dims_.idx(h, s, a) * dims_.num_states + sn];
    }
    [[nodiscard]] const std::vector<std::int64_t>& counts_sa() const { return counts_sa_; }
    [[nodiscard]] const std::vector<std::int64_t>& counts_sas() const { return counts_sas_; }

    /// Empirical transition row with a uniform fallback at unvisited (h,s,a).
    void empirical_row(int h, int s, int a, double* out) const {
        std::int64_t n = count(h, s, a);
        if (n == 0) {
            double u = 1.0 / dims_.num_states;
            for (int sn = 0; sn < dims_.num_states; ++sn) out[sn] = u;
            return;
        }
        const std::int64_t* row = counts_sas_.data() + dims_.idx(h, s, a) * dims_.num_states;
        for (int sn = 0; sn < dims_.num_states; ++sn)
            out[sn] = static_cast<double>(row[sn]) / static_cast<double>(n);
    }

    [[nodiscard]] std::vector<double> empirical_transitions() const {
        std::vector<double> p(dims_.hsa() * dims_.num_states);
        for (int h = 0; h < dims_.horizon; ++h)
            for (int s = 0; s < dims_.num_states; ++s)
                for (int a = 0; a < dims_.num_actions; ++a)
                    empirical_row(h, s, a, p.data() + dims_.idx(h, s, a) * dims_.num_states);
        return p;
    }

    [[nodiscard]] bool counts_consistent() const {
        for (int h = 0; h < dims_.horizon; ++h) {
            std::int64_t stage_total = 0;
            for (int s = 0; s < dims_.num_states; ++s)
                for (int a = 0; a < dims_.num_actions; ++a) {
                    std::size_t i = dims_.idx(h, s, a);
                    std::int64_t nsas = 0;
                    for (int sn = 0; sn < dims_.num_states; ++sn)
                        nsas += counts_sas_[i * dims_.num_states + sn];
                    if (nsas != counts_sa_[i]) return false;
                    stage_total += counts_sa_[i];
                }
            if (stage_total != tau_) return false;
        }
        return true;
    }

  private:
    Dims dims_;
    std::vector<Episode> episodes_;
    std::vector<std::int64_t> counts_sa_;
    std::vector<std::int64_t> counts_sas_;
    std::int64_t tau_ = 0;
};

}  // namespace caty
