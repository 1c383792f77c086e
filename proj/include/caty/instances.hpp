#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "caty/common.hpp"
#include "caty/features.hpp"
#include "caty/linear.hpp"
#include "caty/mdp.hpp"
#include "caty/rng.hpp"

namespace caty {

// ---------------------------------------------------------------------------
// Worked micro-examples
// ---------------------------------------------------------------------------

struct NamedExample {
    TabularMdp mdp;
    std::optional<FeatureMap> features;
    std::map<std::string, RewardSpec> rewards;
    std::map<std::string, Policy> policies;
    std::map<std::string, double> expected;  // documented reference values
    std::string notes;
};

namespace detail {

inline TabularMdp uniform_transition_mdp(Dims dims, std::vector<double> d0) {
    std::vector<double> p(dims.hsa() * dims.num_states, 1.0 / dims.num_states);
    return TabularMdp(dims, std::move(d0), std::move(p));
}

}  // namespace detail

/**
 * Fully specified benchmark instances:
 *  - "muffin": one state, three actions (muffin/cake/soup), horizon 1, with
 *    the four reference rewards r_e, r_g, r_b, r_b_prime.
 *  - "nondegenerate_phi1": two states, phi(s,a) = 1{a = a0}; the expert
 *    feature set separates and linear rewards with theta in (0,1] are feasible.
 *  - "degenerate_phi2": feature sets coincide across states, no separating
 *    hyperplane exists, and the only feasible linear reward is zero.
 *  - "two_state_expert": one feature map, two experts differing in a single
 *    state, flipping the feasible parameter set from a halfline to {0}.
 */
inline NamedExample make_named_example(const std::string& name) {
    if (name == "muffin") {
        Dims dims{1, 3, 1};
        NamedExample ex{detail::uniform_transition_mdp(dims, {1.0}), std::nullopt, {}, {}, {}, {}};
        ex.rewards.emplace("r_e", RewardSpec::dense({1.0, 0.99, -1.0}, dims));
        ex.rewards.emplace("r_g", RewardSpec::dense({0.99, 1.0, -1.0}, dims));
        ex.rewards.emplace("r_b", RewardSpec::dense({-1.0, -1.0, 1.0}, dims));
        ex.rewards.emplace("r_b_prime", RewardSpec::dense({0.99, -1.0, 1.0}, dims));
        ex.policies.emplace("expert", Policy::constant(dims, 0));
        ex.expected = {{"noncompat_r_e", 0.0},
                       {"noncompat_r_g", 0.01},
                       {"noncompat_r_b", 2.0},
                       {"noncompat_r_b_prime", 0.01},
                       {"j_star_r_e", 1.0}};
        ex.notes = "one-state choice between muffin, cake and soup";
        return ex;
    }
    if (name == "nondegenerate_phi1" || name == "degenerate_phi2") {
        Dims dims{2, 2, 1};
        NamedExample ex{detail::uniform_transition_mdp(dims, {0.5, 0.5}), std::nullopt, {}, {}, {}, {}};
        std::vector<double> phi(4, 0.0);
        if (name == "nondegenerate_phi1") {
            phi[dims.num_actions * 0 + 0] = 1.0;  // phi(s0, a0) = 1
            phi[dims.num_actions * 1 + 0] = 1.0;  // phi(s1, a0) = 1
            ex.notes = "expert features {1} vs {0}: separable, feasible theta in (0,1]";
            ex.expected = {{"separable", 1.0}};
        } else {
            phi[dims.num_actions * 0 + 0] = 1.0;  // phi(s0, a0) = 1
            phi[dims.num_actions * 1 + 1] = 1.0;  // phi(s1, a1) = 1
            ex.notes = "feature sets coincide: only the zero reward is feasible";
            ex.expected = {{"separable", 0.0}};
        }
        ex.features = FeatureMap(dims.num_states, dims.num_actions, 1, phi);
        ex.policies.emplace("expert", Policy::constant(dims, 0));
        return ex;
    }
    if (name == "two_state_expert") {
        Dims dims{2, 2, 1};
        NamedExample ex{detail::uniform_transition_mdp(dims, {0.5, 0.5}), std::nullopt, {}, {}, {}, {}};
        std::vector<double> phi(4, 0.0);
        phi[dims.num_actions * 0 + 0] = 1.0;
        phi[dims.num_actions * 1 + 0] = 1.0;
        ex.features = FeatureMap(dims.num_states, dims.num_actions, 1, phi);
        ex.policies.emplace("expert_all_a1", Policy::constant(dims, 0));
        ex.policies.emplace("expert_flip", Policy::deterministic(dims, {0, 1}));
        ex.notes = "changing the expert action in one state collapses the feasible set to {0}";
        return ex;
    }
    throw ValidationError("make_named_example: unknown name '" + name + "'");
}

// ---------------------------------------------------------------------------
// A-ary tree instance with a hidden biased leaf
// ---------------------------------------------------------------------------

/// Hidden (stage, leaf, action) triple; stage is 1-based as in the closed forms.
struct HiddenTriple {
    int stage = 0;  // 1-based, in [1+depth, wait_span+depth]
    int leaf = 0;
    int action = 0;
};

/**
 * Parameters of the waiting-tree instance: a wait state feeding a full A-ary
 * tree whose leaves flip a coin between an absorbing good and bad state. At
 * most one (stage, leaf, action) triple biases the coin by eps_bias. The
 * expert variant adds an absorbing state reached only by the expert's action,
 * worth -1 per stage.
 */
struct TreeInstanceParams {
    int branching = 2;        // A
    int depth = 2;            // d: tree node levels; leaves = A^(d-1)
    int horizon = 6;          // H >= 3d
    int wait_span = 1;        // H_bar <= H - d
    double eps_bias = 0.0;    // eps' in [0, 1/2]
    std::optional<HiddenTriple> hidden;  // none: the reference instance
    bool include_expert_state = true;

    [[nodiscard]] int leaf_count() const {
        int l = 1;
        for (int i = 0; i < depth - 1; ++i) l *= branching;
        return l;
    }
    [[nodiscard]] int tree_node_count() const {
        int total = 0, level = 1;
        for (int i = 0; i < depth; ++i) {
            total += level;
            level *= branching;
        }
        return total;
    }
    [[nodiscard]] int num_states() const {
        return (include_expert_state ? 4 : 3) + tree_node_count();
    }

    void validate() const {
        if (branching < 2) throw ValidationError("tree instance: branching must be >= 2");
        if (include_expert_state && branching < 3)
            throw ValidationError(
                "tree instance: the expert variant needs branching >= 3 so the wait and expert "
                "actions leave a tree entry");
        if (depth < 1) throw ValidationError("tree instance: depth must be >= 1");
        if (horizon < 3 * depth) throw ValidationError("tree instance: requires H >= 3d");
        if (wait_span < 1 || wait_span > horizon - depth)
            throw ValidationError("tree instance: requires 1 <= wait_span <= H - d");
        if (eps_bias < 0.0 || eps_bias > 0.5)
            throw ValidationError("tree instance: eps_bias must lie in [0, 1/2]");
        if (hidden) {
            if (hidden->stage < 1 + depth || hidden->stage > wait_span + depth)
                throw ValidationError("tree instance: hidden stage outside [1+d, wait_span+d]");
            if (hidden->leaf < 0 || hidden->leaf >= leaf_count())
                throw ValidationError("tree instance: hidden leaf out of range");
            if (hidden->action < 0 || hidden->action >= branching)
                throw ValidationError("tree instance: hidden action out of range");
        }
    }
};

struct TreeInstance {
    TabularMdp mdp;
    RewardSpec reward;               // canonical reward
    std::optional<Policy> expert;    // present when the expert state exists
    TreeInstanceParams params;
    int wait_state = 0;
    int good_state = 1;
    int bad_state = 2;
    int expert_state = -1;
    int root_state = 0;
    int first_leaf_state = 0;

    /// Optimal utility of the reference (unbiased) instance: (H - Hbar - d)/2.
    [[nodiscard]] double j_star_reference() const {
        return 0.5 * (params.horizon - params.wait_span - params.depth);
    }
    /// Optimal utility with a hidden biased triple.
    [[nodiscard]] double j_star_biased() const {
        return (params.horizon - params.wait_span - params.depth) * (0.5 + params.eps_bias);
    }
};

inline TreeInstance make_tree_instance(const TreeInstanceParams& params) {
    params.validate();
    const int A = params.branching;
    const int S = params.num_states();
    const int H = params.horizon;
    const int hbar = params.wait_span;
    const int depth = params.depth;
    const int base = params.include_expert_state ? 4 : 3;
    const int sw = 0, sg = 1, sb = 2;
    const int se = params.include_expert_state ? 3 : -1;
    const int aw = 0;
    const int ae = params.include_expert_state ? 1 : -1;
    const int tree_nodes = params.tree_node_count();
    const int leaves = params.leaf_count();
    const int first_leaf = base + tree_nodes - leaves;

    Dims dims{S, A, H};
    std::vector<double> p(dims.hsa() * S, 0.0);
    auto row = [&](int h, int s, int a) { return p.data() + dims.idx(h, s, a) * S; };

    for (int h = 0; h < H; ++h) {
        // wait state
        for (int a = 0; a < A; ++a) {
            if (a == ae) {
                row(h, sw, a)[se] = 1.0;
            } else if (a == aw && h < hbar) {
                row(h, sw, a)[sw] = 1.0;
            } else {
                row(h, sw, a)[base] = 1.0;  // tree root
            }
        }
        // absorbing states
        for (int a = 0; a < A; ++a) {
            row(h, sg, a)[sg] = 1.0;
            row(h, sb, a)[sb] = 1.0;
            if (se >= 0) row(h, se, a)[se] = 1.0;
        }
        // internal tree nodes: the a-th action moves to the a-th child
        int level_start = 0, level_size = 1;
        for (int lvl = 0; lvl + 1 < depth; ++lvl) {
            for (int j = 0; j < level_size; ++j) {
                int node = base + level_start + j;
                int child_base = base + level_start + level_size + j * A;
                for (int a = 0; a < A; ++a) row(h, node, a)[child_base + a] = 1.0;
            }
            level_start += level_size;
            level_size *= A;
        }
        // leaves: coin flip to good/bad, biased at the hidden triple only
        for (int l = 0; l < leaves; ++l) {
            int leaf = first_leaf + l;
            for (int a = 0; a < A; ++a) {
                double bias = 0.0;
                if (params.hidden && params.hidden->stage - 1 == h && params.hidden->leaf == l &&
                    params.hidden->action == a)
                    bias = params.eps_bias;
                row(h, leaf, a)[sg] = 0.5 + bias;
                row(h, leaf, a)[sb] = 0.5 - bias;
            }
        }
    }

    std::vector<double> d0(S, 0.0);
    d0[sw] = 1.0;

    std::vector<double> reward(dims.hsa(), 0.0);
    for (int h = hbar + depth; h < H; ++h)
        for (int a = 0; a < A; ++a) reward[dims.idx(h, sg, a)] = 1.0;
    if (se >= 0)
        for (int h = 0; h < H; ++h)
            for (int a = 0; a < A; ++a) reward[dims.idx(h, se, a)] = -1.0;

    std::optional<Policy> expert;
    if (se >= 0) {
        std::vector<int> actions(dims.hs(), 0);
        for (int h = 0; h < H; ++h) actions[dims.idx(h, sw)] = ae;
        expert = Policy::deterministic(dims, actions);
    }

    TreeInstance inst{TabularMdp(dims, std::move(d0), std::move(p)),
                      RewardSpec::dense(std::move(reward), dims),
                      std::move(expert),
                      params,
                      sw,
                      sg,
                      sb,
                      se,
                      base,
                      first_leaf};
    return inst;
}

// ---------------------------------------------------------------------------
// Packing vectors (zero-sum sign vectors with pairwise L1 separation)
// ---------------------------------------------------------------------------

/**
 * Randomized greedy construction of a D/16-packing of
 * V = {v in {-1,+1}^D : sum v = 0}. Emits up to requested_count vectors
 * (default: ceil(2^(D/5))) and reports whatever cardinality it achieved;
 * every emitted vector is audited for membership on the way out.
 */
inline std::vector<std::vector<int>> greedy_packing(int dimension, std::uint64_t seed,
                                                    int requested_count = 0) {
    if (dimension % 2 != 0) throw ValidationError("greedy_packing: dimension must be even");
    if (dimension < 4) throw ValidationError("greedy_packing: dimension must be >= 4");
    if (requested_count <= 0)
        requested_count = static_cast<int>(std::ceil(std::pow(2.0, dimension / 5.0)));
    const double min_dist = dimension / 16.0;
    Rng rng(seed);
    std::vector<std::vector<int>> out;
    std::vector<int> candidate(dimension);
    const long max_tries = 2000L + 400L * requested_count;
    for (long tries = 0; tries < max_tries && static_cast<int>(out.size()) < requested_count;
         ++tries) {
        // random zero-sum sign vector: +1 on a random half of the coordinates
        for (int i = 0; i < dimension; ++i) candidate[i] = i < dimension / 2 ? 1 : -1;
        for (int i = dimension - 1; i > 0; --i) std::swap(candidate[i], candidate[rng.uniform_int(i + 1)]);
        bool ok = true;
        for (const auto& v : out) {
            int l1 = 0;
            for (int i = 0; i < dimension; ++i) l1 += std::abs(v[i] - candidate[i]);
            if (static_cast<double>(l1) < min_dist) {
                ok = false;
                break;
            }
        }
        if (ok) out.push_back(candidate);
    }
    for (const auto& v : out) {
        int sum = 0;
        for (int x : v) {
            if (x != 1 && x != -1) throw ValidationError("greedy_packing: non-sign entry");
            sum += x;
        }
        if (sum != 0) throw ValidationError("greedy_packing: emitted vector is not zero-sum");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Packing-family instance (many absorbing states)
// ---------------------------------------------------------------------------

/// (leaf, action, stage) triple; stage is 1-based in [1+depth, wait_span+depth].
struct PackingTriple {
    int leaf = 0;
    int action = 0;
    int stage = 0;
    bool operator==(const PackingTriple&) const = default;
};

/**
 * Same waiting-tree skeleton as the tree instance, but leaves feed S_bar
 * absorbing states: the distinguished triple i_bar spreads uniformly while
 * every other triple's row is tilted by eps_bias/S_bar along its assigned
 * packing vector.
 */
struct PackingFamilyParams {
    int branching = 2;
    int depth = 2;       // leaf_count = branching^(depth-1)
    int horizon = 8;
    int wait_span = 1;
    double eps_bias = 0.05;
    double pac_eps = 0.0;  // target accuracy used in the feasibility constraint
    std::vector<std::vector<int>> vectors;  // packing vectors over the leaf count
    PackingTriple i_bar{0, 0, 0};           // stage 0 means "default to (0,0,1+depth)"
    PackingTriple j_bar{0, 1, 0};           // stage 0 means "default to (0,1,1+depth)"
    bool include_expert_state = true;

    [[nodiscard]] int leaf_count() const {
        int l = 1;
        for (int i = 0; i < depth - 1; ++i) l *= branching;
        return l;
    }
};

struct PackingInstance {
    TabularMdp mdp;
    std::optional<Policy> expert;
    PackingFamilyParams params;
    int leaf_count = 0;
    int wait_state = 0;
    int expert_state = -1;
    int root_state = 0;
    int first_leaf_state = 0;
    int first_absorbing_state = 0;
    std::vector<PackingTriple> triples;          // all of I-bar, i_bar first
    std::vector<std::vector<int>> triple_biases;  // assigned vector per triple (zero row for i_bar)

    [[nodiscard]] int triple_index(const PackingTriple& t) const {
        for (std::size_t i = 0; i < triples.size(); ++i)
            if (triples[i] == t) return static_cast<int>(i);
        throw ValidationError("packing instance: unknown triple");
    }

    /// Reward assigning 1 to the two distinguished triples and the given
    /// stationary tail values on the absorbing states from stage Hbar+d+1 on.
    [[nodiscard]] RewardSpec make_reward(const std::vector<double>& tail_values) const {
        const Dims& d = mdp.dims();
        if (tail_values.size() != static_cast<std::size_t>(leaf_count))
            throw DimensionError("packing reward: tail value count must equal S_bar");
        std::vector<double> r(d.hsa(), 0.0);
        auto set_triple = [&](const PackingTriple& t) {
            r[d.idx(t.stage - 1, first_leaf_state + t.leaf, t.action)] = 1.0;
        };
        set_triple(params.i_bar);
        set_triple(params.j_bar);
        for (int i = 0; i < leaf_count; ++i) {
            if (tail_values[i] < -1.0 || tail_values[i] > 1.0)
                throw ValidationError("packing reward: tail values must lie in [-1,1]");
            for (int h = params.wait_span + params.depth; h < params.horizon; ++h)
                for (int a = 0; a < params.branching; ++a)
                    r[d.idx(h, first_absorbing_state + i, a)] = tail_values[i];
        }
        if (expert_state >= 0)
            for (int h = 0; h < params.horizon; ++h)
                for (int a = 0; a < params.branching; ++a)
                    r[d.idx(h, expert_state, a)] = -1.0;
        return RewardSpec::dense(std::move(r), d);
    }

    /// The reward separating bias vectors v and w: +1 where v=+1,w=-1,
    /// -1 where v=-1,w=+1, 0 where they agree.
    [[nodiscard]] RewardSpec make_distinguishing_reward(const std::vector<int>& v,
                                                        const std::vector<int>& w) const {
        std::vector<double> tail(leaf_count, 0.0);
        for (int i = 0; i < leaf_count; ++i) {
            if (v[i] == 1 && w[i] == -1) tail[i] = 1.0;
            else if (v[i] == -1 && w[i] == 1) tail[i] = -1.0;
        }
        return make_reward(tail);
    }

    /// Deterministic policy reaching the given triple: wait, descend to the
    /// leaf, play the triple's action there.
    [[nodiscard]] Policy policy_reaching(const PackingTriple& t) const {
        const Dims& d = mdp.dims();
        const int wait_stages = t.stage - 1 - params.depth;  // 0-based stages spent waiting
        std::vector<int> actions(d.hs(), 0);
        int tree_entry = expert_state >= 0 ? 2 : 1;
        for (int h = 0; h < d.horizon; ++h)
            actions[d.idx(h, wait_state)] = h < wait_stages ? 0 : tree_entry;
        // digits of the leaf index give the path from the root
        int level_start = 0, level_size = 1, node_in_level = 0;
        int base = root_state;
        for (int lvl = 0; lvl + 1 < params.depth; ++lvl) {
            int stride = 1;
            for (int i = lvl + 2; i < params.depth; ++i) stride *= params.branching;
            int digit = (t.leaf / stride) % params.branching;
            int node = base + level_start + node_in_level;
            for (int h = 0; h < d.horizon; ++h) actions[d.idx(h, node)] = digit;
            node_in_level = node_in_level * params.branching + digit;
            level_start += level_size;
            level_size *= params.branching;
        }
        for (int h = 0; h < d.horizon; ++h)
            actions[d.idx(h, first_leaf_state + t.leaf)] = t.action;
        return Policy::deterministic(d, actions);
    }

    /// Closed-form utility of the policy reaching triple t under make_reward's
    /// tail values: bonus + (H - Hbar - d)/S_bar * (sum_i r_i + eps' <v_t, r>).
    [[nodiscard]] double closed_form_utility(const PackingTriple& t,
                                             const std::vector<double>& tail_values) const {
        double bonus = (t == params.i_bar || t == params.j_bar) ? 1.0 : 0.0;
        double sum = 0.0, tilt = 0.0;
        const std::vector<int>& v = triple_biases[triple_index(t)];
        for (int i = 0; i < leaf_count; ++i) {
            sum += tail_values[i];
            tilt += v[i] * tail_values[i];
        }
        double span = params.horizon - params.wait_span - params.depth;
        return bonus + span / leaf_count * (sum + params.eps_bias * tilt);
    }
};

inline PackingInstance make_packing_instance(PackingFamilyParams params) {
    const int A = params.branching;
    const int depth = params.depth;
    const int H = params.horizon;
    const int hbar = params.wait_span;
    const int sbar = params.leaf_count();
    if (A < 2) throw ValidationError("packing instance: branching must be >= 2");
    if (params.include_expert_state && A < 3)
        throw ValidationError("packing instance: expert variant needs branching >= 3");
    if (depth < 1) throw ValidationError("packing instance: depth must be >= 1");
    if (H < 3 * depth) throw ValidationError("packing instance: requires H >= 3d");
    if (hbar < 1 || hbar > H - depth)
        throw ValidationError("packing instance: requires 1 <= wait_span <= H - d");
    double span = static_cast<double>(H - hbar - depth);
    if (params.eps_bias < 0.0 || params.eps_bias > 0.5)
        throw ValidationError("packing instance: eps_bias must lie in [0, 1/2]");
    if (params.eps_bias >= (1.0 - params.pac_eps) / (2.0 * span))
        throw ValidationError("packing instance: eps_bias violates eps' < (1-eps)/(2(H-Hbar-d))");
    if (params.vectors.empty())
        throw ValidationError("packing instance: needs at least one packing vector");
    for (const auto& v : params.vectors) {
        if (v.size() != static_cast<std::size_t>(sbar))
            throw DimensionError("packing instance: vector length must equal the leaf count");
        int sum = 0;
        for (int x : v) {
            if (x != 1 && x != -1) throw ValidationError("packing instance: non-sign vector entry");
            sum += x;
        }
        if (sum != 0) throw ValidationError("packing instance: vectors must be zero-sum");
    }
    if (params.i_bar.stage == 0) params.i_bar = PackingTriple{0, 0, 1 + depth};
    if (params.j_bar.stage == 0) params.j_bar = PackingTriple{0, 1, 1 + depth};

    int tree_nodes = 0;
    {
        int level = 1;
        for (int i = 0; i < depth; ++i) {
            tree_nodes += level;
            level *= A;
        }
    }
    const int base = params.include_expert_state ? 2 : 1;
    const int sw = 0;
    const int se = params.include_expert_state ? 1 : -1;
    const int root = base;
    const int first_leaf = base + tree_nodes - sbar;
    const int first_abs = base + tree_nodes;
    const int S = first_abs + sbar;
    const int aw = 0;
    const int ae = params.include_expert_state ? 1 : -1;

    auto stage_in_window = [&](int h0) { return h0 >= depth && h0 < hbar + depth; };

    // enumerate triples, i_bar first
    PackingInstance inst{detail::uniform_transition_mdp(Dims{1, 1, 1}, {1.0}),
                         std::nullopt,
                         params,
                         sbar,
                         sw,
                         se,
                         root,
                         first_leaf,
                         first_abs,
                         {},
                         {}};
    inst.triples.push_back(params.i_bar);
    inst.triple_biases.push_back(std::vector<int>(sbar, 0));
    {
        int assign = 0;
        for (int stage = 1 + depth; stage <= hbar + depth; ++stage)
            for (int l = 0; l < sbar; ++l)
                for (int a = 0; a < A; ++a) {
                    PackingTriple t{l, a, stage};
                    if (t == params.i_bar) continue;
                    inst.triples.push_back(t);
                    inst.triple_biases.push_back(params.vectors[assign % params.vectors.size()]);
                    ++assign;
                }
    }
    (void)inst.triple_index(params.j_bar);  // throws when j_bar is not a valid triple

    Dims dims{S, A, H};
    std::vector<double> p(dims.hsa() * S, 0.0);
    auto row = [&](int h, int s, int a) { return p.data() + dims.idx(h, s, a) * S; };
    for (int h = 0; h < H; ++h) {
        for (int a = 0; a < A; ++a) {
            if (a == ae) row(h, sw, a)[se] = 1.0;
            else if (a == aw && h < hbar) row(h, sw, a)[sw] = 1.0;
            else row(h, sw, a)[root] = 1.0;
            if (se >= 0) row(h, se, a)[se] = 1.0;
        }
        int level_start = 0, level_size = 1;
        for (int lvl = 0; lvl + 1 < depth; ++lvl) {
            for (int j = 0; j < level_size; ++j) {
                int node = base + level_start + j;
                int child_base = base + level_start + level_size + j * A;
                for (int a = 0; a < A; ++a) row(h, node, a)[child_base + a] = 1.0;
            }
            level_start += level_size;
            level_size *= A;
        }
        for (int l = 0; l < sbar; ++l) {
            for (int a = 0; a < A; ++a) {
                double* r = row(h, first_leaf + l, a);
                const std::vector<int>* bias = nullptr;
                if (stage_in_window(h)) {
                    PackingTriple t{l, a, h + 1};
                    bias = &inst.triple_biases[inst.triple_index(t)];
                }
                for (int i = 0; i < sbar; ++i) {
                    double tilt = bias ? params.eps_bias * (*bias)[i] : 0.0;
                    r[first_abs + i] = (1.0 + tilt) / sbar;
                }
            }
        }
        for (int i = 0; i < sbar; ++i)
            for (int a = 0; a < A; ++a) row(h, first_abs + i, a)[first_abs + i] = 1.0;
    }

    std::vector<double> d0(S, 0.0);
    d0[sw] = 1.0;
    inst.mdp = TabularMdp(dims, std::move(d0), std::move(p));
    if (se >= 0) {
        std::vector<int> actions(dims.hs(), 0);
        for (int h = 0; h < H; ++h) actions[dims.idx(h, sw)] = ae;
        inst.expert = Policy::deterministic(dims, actions);
    }
    inst.params = params;
    return inst;
}

// ---------------------------------------------------------------------------
// Seeded random instances
// ---------------------------------------------------------------------------

struct RandomInstance {
    TabularMdp mdp;
    std::optional<LinearMdpSpec> linear;
};

/// Dirichlet(1) tabular instance, deterministic per seed.
inline RandomInstance random_tabular_instance(int S, int A, int H, std::uint64_t seed) {
    Dims dims{S, A, H};
    dims.validate();
    Rng rng = Rng::derive(seed, 0x7ab);
    std::vector<double> d0 = rng.dirichlet_uniform(S);
    std::vector<double> p(dims.hsa() * S);
    for (std::size_t i = 0; i < dims.hsa(); ++i) {
        std::vector<double> prob_row = rng.dirichlet_uniform(S);
        std::copy(prob_row.begin(), prob_row.end(), p.begin() + i * S);
    }
    return RandomInstance{TabularMdp(dims, std::move(d0), std::move(p)), std::nullopt};
}

/**
 * Random Linear MDP: features are random points of the d-simplex (so they sit
 * in the unit ball) and mu rows are random distributions over next states;
 * transition rows become convex combinations of distributions, hence valid by
 * construction.
 */
inline RandomInstance random_linear_instance(int S, int A, int H, int d, std::uint64_t seed) {
    Dims dims{S, A, H};
    dims.validate();
    if (d < 1) throw ValidationError("random_linear_instance: d must be >= 1");
    Rng rng = Rng::derive(seed, 0x11e);
    std::vector<double> phi(static_cast<std::size_t>(S) * A * d);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            std::vector<double> point = rng.dirichlet_uniform(d);
            std::copy(point.begin(), point.end(),
                      phi.begin() + (static_cast<std::size_t>(s) * A + a) * d);
        }
    std::vector<double> mu(static_cast<std::size_t>(H) * d * S);
    for (int h = 0; h < H; ++h)
        for (int k = 0; k < d; ++k) {
            std::vector<double> anchor = rng.dirichlet_uniform(S);
            std::copy(anchor.begin(), anchor.end(),
                      mu.begin() + (static_cast<std::size_t>(h) * d + k) * S);
        }
    std::vector<double> d0 = rng.dirichlet_uniform(S);
    LinearMdpSpec spec(FeatureMap(S, A, d, std::move(phi)), std::move(mu), std::move(d0), H);
    TabularMdp mdp = materialize(spec);
    return RandomInstance{std::move(mdp), std::move(spec)};
}

// ---------------------------------------------------------------------------
// Reward and policy samplers
// ---------------------------------------------------------------------------

/// Dense reward with i.i.d. entries uniform in [-1, 1].
inline RewardSpec random_dense_reward(const Dims& dims, Rng& rng) {
    std::vector<double> table(dims.hsa());
    for (double& r : table) r = rng.uniform(-1.0, 1.0);
    return RewardSpec::dense(std::move(table), dims);
}

/// Linear reward with theta_h uniform on the sqrt(d)-ball.
inline RewardSpec random_linear_reward(int d, int horizon, Rng& rng) {
    std::vector<std::vector<double>> theta(horizon, std::vector<double>(d));
    for (int h = 0; h < horizon; ++h) {
        double norm_sq = 0.0;
        for
(int k = 0; k < d; ++k) {
            theta[h][k] = rng.next_gaussian();
            norm_sq += theta[h][k] * theta[h][k];
        }
        double norm = std::sqrt(norm_sq);
        double radius = std::sqrt(static_cast<double>(d)) * std::pow(rng.next_double(), 1.0 / d);
        for (int k = 0; k < d; ++k) theta[h][k] = norm > 0.0 ? theta[h][k] / norm * radius : 0.0;
    }
    return RewardSpec::linear(std::move(theta));
}

inline Policy random_deterministic_policy(const Dims& dims, Rng& rng) {
    std::vector<int> actions(dims.hs());
    for (int& a : actions) a = rng.uniform_int(dims.num_actions);
    return Policy::deterministic(dims, actions);
}

}  // namespace caty
