#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "caty/caty.hpp"
#include "caty/expert.hpp"
#include "caty/instances.hpp"

using namespace caty;

namespace {

// Ring dynamics: a0 rotates, a1 stays. Every (h, s, a) is coverable.
TabularMdp make_ring(int S, int H) {
    Dims dims{S, 2, H};
    std::vector<double> p(dims.hsa() * S, 0.0);
    for (int h = 0; h < H; ++h)
        for (int s = 0; s < S; ++s) {
            p[dims.idx(h, s, 0) * S + (s + 1) % S] = 1.0;
            p[dims.idx(h, s, 1) * S + s] = 1.0;
        }
    std::vector<double> d0(S, 1.0 / S);
    return TabularMdp(dims, std::move(d0), std::move(p));
}

// Exploration dataset whose empirical model reproduces the ring exactly:
// one episode per (s0, a0, a1) combination.
ExplorationDataset full_cover_ring_dataset(const TabularMdp& ring) {
    const Dims& d = ring.dims();
    REQUIRE(d.horizon == 2);
    ExplorationDataset data(d);
    auto next = [&](int s, int a) { return a == 0 ? (s + 1) % d.num_states : s; };
    for (int s0 = 0; s0 < d.num_states; ++s0)
        for (int a0 = 0; a0 < 2; ++a0)
            for (int a1 = 0; a1 < 2; ++a1) {
                int s1 = next(s0, a0);
                data.add_episode(Episode{{s0, s1, next(s1, a1)}, {a0, a1}});
            }
    return data;
}

}  // namespace

TEST_CASE("plain planning on an exactly covered deterministic model is exact") {
    TabularMdp ring = make_ring(3, 2);
    ExplorationDataset data = full_cover_ring_dataset(ring);
    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> table = random_dense_reward(ring.dims(), rng).to_table(ring.dims());
        double planned = plan_tabular(data, table, ring.initial_dist(), PlanMode::Plain, 0.1);
        CHECK(planned == doctest::Approx(value_iteration(ring, table).j).epsilon(1e-9));
    }
}

TEST_CASE("optimistic planning clips unvisited regions at the stage ceiling") {
    Dims dims{3, 2, 4};
    ExplorationDataset empty(dims);
    std::vector<double> zero(dims.hsa(), 0.0);
    std::vector<double> d0 = {1.0, 0.0, 0.0};
    CHECK(plan_tabular(empty, zero, d0, PlanMode::Optimistic, 0.1) == doctest::Approx(4.0));
    // plain mode on no data stays at the reward level
    CHECK(plan_tabular(empty, zero, d0, PlanMode::Plain, 0.1) == doctest::Approx(0.0));
}

TEST_CASE("linear planning with no data returns the immediate reward") {
    RandomInstance inst = random_linear_instance(4, 3, 3, 2, 8);
    const FeatureMap& features = inst.linear->features();
    LsviEstimate empty = lsvi_empty(features.dim(), 4, 3);
    Rng rng(8);
    RewardSpec reward = random_linear_reward(features.dim(), 3, rng);
    double planned = plan_linear(empty, features, reward.as_linear().theta,
                                 inst.mdp.initial_dist(), 0.0, PlanMode::Plain);
    double expect = 0.0;
    for (int s = 0; s < 4; ++s) {
        double best = -1e300;
        for (int a = 0; a < 3; ++a)
            best = std::max(best, features.apply(s, a, reward.as_linear().theta[0]));
        expect += inst.mdp.initial_dist()[s] * best;
    }
    CHECK(planned == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("one-hot linear planning matches tabular planning at full coverage") {
    TabularMdp ring = make_ring(3, 2);
    const Dims& d = ring.dims();
    ExplorationDataset data = full_cover_ring_dataset(ring);
    FeatureMap one_hot = FeatureMap::one_hot(d.num_states, d.num_actions);
    const int dim = one_hot.dim();

    // estimate implied by N repetitions of every (s,a) with exact successors;
    // the ridge distortion shrinks as 1/N
    const double n = 1e9;
    LsviEstimate est = lsvi_empty(dim, d.num_states, d.horizon);
    est.tau = static_cast<std::int64_t>(n) * dim;
    auto next = [&](int s, int a) { return a == 0 ? (s + 1) % d.num_states : s; };
    for (int h = 0; h < d.horizon; ++h)
        for (int s = 0; s < d.num_states; ++s)
            for (int a = 0; a < d.num_actions; ++a) {
                int k = s * d.num_actions + a;
                est.gram[(static_cast<std::size_t>(h) * dim + k) * dim + k] = 1.0 + n;
                est.mu_hat[(static_cast<std::size_t>(h) * dim + k) * d.num_states + next(s, a)] =
                    n / (1.0 + n);
            }

    Rng rng(9);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> table = random_dense_reward(d, rng).to_table(d);
        std::vector<std::vector<double>> theta(d.horizon, std::vector<double>(dim));
        for (int h = 0; h < d.horizon; ++h)
            for (int s = 0; s < d.num_states; ++s)
                for (int a = 0; a < d.num_actions; ++a)
                    theta[h][s * d.num_actions + a] = table[d.idx(h, s, a)];
        double lin = plan_linear(est, one_hot, theta, ring.initial_dist(), 0.0, PlanMode::Plain);
        double tab = plan_tabular(data, table, ring.initial_dist(), PlanMode::Plain, 0.1);
        CHECK(std::abs(lin - tab) <= 1e-6);
    }
}

TEST_CASE("classification rule") {
    CHECK(classify(0.0, 0.0));      // boundary inclusive
    CHECK_FALSE(classify(2.0, 0.01));
    CHECK(classify(0.01, 0.01));
    CHECK_FALSE(classify(0.0, -0.5));  // negative thresholds are allowed
}

TEST_CASE("caty end-to-end on the one-state example") {
    NamedExample muffin = make_named_example("muffin");
    const Policy& expert = muffin.policies.at("expert");
    ExpertDataset demos = sample_expert_dataset(muffin.mdp, expert, 50, 77);
    std::vector<RewardSpec> rewards = {muffin.rewards.at("r_e"), muffin.rewards.at("r_g"),
                                       muffin.rewards.at("r_b"), muffin.rewards.at("r_b_prime")};
    CatyOptions opts;
    opts.structure = ProblemStructure::Tabular;
    opts.epsilon = 0.02;
    opts.delta = 0.1;
    opts.threshold = 0.02;
    opts.max_episodes = 500;
    opts.exploration_seed = 7;
    opts.oracle = true;
    ClassificationSweep sweep = run_caty(muffin.mdp, nullptr, demos, rewards, opts, &expert);
    REQUIRE(sweep.reports.size() == 4);
    CHECK(sweep.reports[0].label);        // r_e
    CHECK(sweep.reports[1].label);        // r_g
    CHECK_FALSE(sweep.reports[2].label);  // r_b
    CHECK(sweep.reports[3].label);        // r_b_prime
    CHECK(*sweep.reports[2].exact_c == doctest::Approx(2.0));
    CHECK(*sweep.reports[1].exact_c == doctest::Approx(0.01));
}

TEST_CASE("singleton reward sets ride the per-reward branch") {
    RandomInstance inst = random_tabular_instance(4, 2, 3, 18);
    const Dims& d = inst.mdp.dims();
    Rng rng(18);
    Policy expert = random_deterministic_policy(d, rng);
    ExpertDataset demos = sample_expert_dataset(inst.mdp, expert, 200, 18);
    std::vector<RewardSpec> rewards;
    rewards.push_back(RewardSpec::dense(std::vector<double>(d.hsa(), 0.0), d));
    CatyOptions opts;
    opts.epsilon = 0.2;
    opts.delta = 0.1;
    opts.threshold = 0.0;
    opts.max_episodes = 500;
    opts.exploration_seed = 19;
    ClassificationSweep sweep = run_caty(inst.mdp, nullptr, demos, rewards, opts);
    CHECK(sweep.exploration_algorithm == "per-reward-bpi");
    REQUIRE(sweep.bpi_segments.size() == 1);
    CHECK(sweep.reports[0].label);  // zero reward is compatible at any Delta >= 0
    CHECK(sweep.reports[0].c_hat == doctest::Approx(0.0));
}

TEST_CASE("caty sweep invariants on a random tabular instance") {
    RandomInstance inst = random_tabular_instance(4, 2, 3, 23);
    const Dims& d = inst.mdp.dims();
    Rng rng(23);
    Policy expert = random_deterministic_policy(d, rng);
    ExpertDataset demos = sample_expert_dataset(inst.mdp, expert, 4000, 23);

    std::vector<RewardSpec> rewards;
    Rng reward_rng(24);
    for (int i = 0; i < 40; ++i) rewards.push_back(random_dense_reward(d, reward_rng));

    CatyOptions opts;
    opts.structure = ProblemStructure::Tabular;
    opts.epsilon = 0.3;
    opts.delta = 0.1;
    opts.threshold = 0.5;
    opts.max_episodes = 4000;
    opts.exploration_seed = 25;
    opts.oracle = true;
    ClassificationSweep sweep = run_caty(inst.mdp, nullptr, demos, rewards, opts, &expert);

    double sup_err = 0.0;
    for (const CompatibilityReport& rep : sweep.reports) {
        // decomposition identity holds exactly
        CHECK(rep.c_hat == rep.j_star_hat - rep.j_expert_hat);
        CHECK(rep.label == (rep.c_hat <= opts.threshold));
        REQUIRE(rep.exact_c.has_value());
        sup_err = std::max(sup_err, std::abs(*rep.exact_c - rep.c_hat));

        // two-sided error split
        int id = rep.reward_id;
        std::vector<double> table = rewards[id].to_table(d);
        double j_star = value_iteration(inst.mdp, table).j;
        double j_e = policy_evaluation(inst.mdp, table, expert).j;
        CHECK(std::abs(*rep.exact_c - rep.c_hat) <=
              std::abs(j_star - rep.j_star_hat) + std::abs(j_e - rep.j_expert_hat) + 1e-12);
    }

    // estimation event at this budget, then the sandwich layers nest
    CHECK(sup_err <= opts.epsilon);
    for (int id : sweep.inner) {
        CHECK(std::find(sweep.mid_true.begin(), sweep.mid_true.end(), id) != sweep.mid_true.end());
    }
    for (int id : sweep.mid_true) {
        CHECK(std::find(sweep.outer.begin(), sweep.outer.end(), id) != sweep.outer.end());
    }

    // raising the threshold never flips a label to False
    CatyOptions wider = opts;
    wider.threshold = 1.2;
    ClassificationSweep sweep2 = run_caty(inst.mdp, nullptr, demos, rewards, wider, &expert);
    for (std::size_t i = 0; i < sweep.reports.size(); ++i)
        if (sweep.reports[i].label) CHECK(sweep2.reports[i].label);

    // classification is a pure function of the data: reruns are bit-identical
    ClassificationSweep sweep3 = run_caty(inst.mdp, nullptr, demos, rewards, opts, &expert);
    for (std::size_t i = 0; i < sweep.reports.size(); ++i) {
        CHECK(sweep.reports[i].c_hat == sweep3.reports[i].c_hat);
        CHECK(sweep.reports[i].j_star_hat == sweep3.reports[i].j_star_hat);
        CHECK(sweep.reports[i].j_expert_hat == sweep3.reports[i].j_expert_hat);
    }
}

TEST_CASE("threshold equal to epsilon keeps every feasible reward positive") {
    // rewards with exact noncompatibility zero must be labeled True whenever
    // the estimation event holds
    RandomInstance inst = random_tabular_instance(4, 2, 3, 61);
    const Dims& d = inst.mdp.dims();
    Rng rng(61);
    Policy expert = random_deterministic_policy(d, rng);

    // shaped rewards that make this expert exactly optimal: r = Q-consistent
    // potentials built from rewards whose greedy policy equals the expert
    std::vector<RewardSpec> rewards;
    int tries = 0;
    while (rewards.size() < 5 && tries < 4000) {
        ++tries;
        std::vector<double> table(d.hsa());
        for (double& r : table) r = rng.uniform(-1.0, 1.0);
        // bias the expert's own actions upward until it is optimal
        for (int h = 0; h < d.horizon; ++h)
            for (int s = 0; s < d.num_states; ++s)
                for (int a = 0; a < d.num_actions; ++a)
                    if (expert.prob(h, s, a) == 1.0) table[d.idx(h, s, a)] = 1.0;
        if (exact_noncompatibility(inst.mdp, expert, table) <= 1e-12)
            rewards.push_back(RewardSpec::dense(table, d));
    }
    REQUIRE(rewards.size() == 5);

    const double eps = 0.3;
    ExpertDataset demos = sample_expert_dataset(inst.mdp, expert, 5000, 62);
    CatyOptions opts;
    opts.epsilon = eps;
    opts.delta = 0.1;
    opts.threshold = eps;  // Delta = eps
    opts.max_episodes = 5000;
    opts.exploration_seed = 63;
    opts.small_reward_set_limit = 0;  // exercise the reward-free branch
    opts.oracle = true;
    ClassificationSweep sweep = run_caty(inst.mdp, nullptr, demos, rewards, opts, &expert);
    double sup = 0.0;
    for (const CompatibilityReport& r : sweep.reports)
        sup = std::max(sup, std::abs(*r.exact_c - r.c_hat));
    REQUIRE(sup <= eps);  // estimation event
    for (const CompatibilityReport& r : sweep.reports) CHECK(r.label);
}

TEST_CASE("caty linear-mdp pipeline") {
    RandomInstance inst = random_linear_instance(5, 2, 3, 2, 29);
    const FeatureMap& features = inst.linear->features();
    const Dims& d = inst.mdp.dims();
    Rng rng(29);
    Policy expert = random_deterministic_policy(d, rng);
    ExpertDataset demos = sample_expert_dataset(inst.mdp, expert, 4000, 29);

    std::vector<RewardSpec> rewards;
    Rng reward_rng(30);
    for (int i = 0; i < 20; ++i) rewards.push_back(random_linear_reward(features.dim(), d.horizon, reward_rng));

    CatyOptions opts;
    opts.structure = ProblemStructure::LinearMdp;
    opts.epsilon = 0.3;
    opts.delta = 0.1;
    opts.threshold = 0.4;
    opts.max_episodes = 5000;
    opts.exploration_seed = 31;
    opts.oracle = true;
    ClassificationSweep sweep = run_caty(inst.mdp, &features, demos, rewards, opts, &expert);
    CHECK(sweep.exploration_algorithm == "elliptical-bonus");

    double sup_err = 0.0;
    for (const CompatibilityReport& rep : sweep.reports) {
        CHECK(rep.c_hat == rep.j_star_hat - rep.j_expert_hat);
        sup_err = std::max(sup_err, std::abs(*rep.exact_c - rep.c_hat));
    }
    CHECK(sup_err <= opts.epsilon);
}

TEST_CASE("caty configuration errors") {
    RandomInstance inst = random_tabular_instance(3, 2, 2, 40);
    ExpertDataset demos = sample_expert_dataset(inst.mdp, Policy::uniform(inst.mdp.dims()), 10, 40);
    std::vector<RewardSpec> rewards = {
        RewardSpec::dense(std::vector<double>(inst.mdp.dims().hsa(), 0.0), inst.mdp.dims())};
    CatyOptions opts;
    opts.structure = ProblemStructure::LinearMdp;
    CHECK_THROWS_AS(run_caty(inst.mdp, nullptr, demos, rewards, opts), ValidationError);

    CatyOptions oracle_opts;
    oracle_opts.oracle = true;
    CHECK_THROWS_AS(run_caty(inst.mdp, nullptr, demos, rewards, oracle_opts), ValidationError);
}
