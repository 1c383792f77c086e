#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "caty/explore.hpp"
#include "caty/instances.hpp"
#include "caty/linear.hpp"
#include "caty/mdp.hpp"

using namespace caty;

namespace {

// Normal-equations solve by Gauss-Jordan elimination, independent of the
// Cholesky path used by lsvi_fit.
std::vector<double> gauss_jordan_solve(std::vector<double> a, std::vector<double> rhs, int n,
                                       int nrhs) {
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
        for (int j = 0; j < n; ++j) std::swap(a[col * n + j], a[pivot * n + j]);
        for (int j = 0; j < nrhs; ++j) std::swap(rhs[col * nrhs + j], rhs[pivot * nrhs + j]);
        double pv = a[col * n + col];
        for (int j = 0; j < n; ++j) a[col * n + j] /= pv;
        for (int j = 0; j < nrhs; ++j) rhs[col * nrhs + j] /= pv;
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            double f = a[r * n + col];
            if (f == 0.0) continue;
            for (int j = 0; j < n; ++j) a[r * n + j] -= f * a[col * n + j];
            for (int j = 0; j < nrhs; ++j) rhs[r * nrhs + j] -= f * rhs[col * nrhs + j];
        }
    }
    return rhs;
}

ExplorationDataset uniform_policy_dataset(const TabularMdp& mdp, std::int64_t episodes,
                                          std::uint64_t seed) {
    const Dims& d = mdp.dims();
    ForwardSampler sampler(mdp, seed);
    ExplorationDataset data(d);
    for (std::int64_t i = 0; i < episodes; ++i) {
        Rng pick = Rng::derive(seed ^ 0xacc, static_cast<std::uint64_t>(i));
        Episode e;
        e.states.push_back(sampler.reset());
        for (int h = 0; h < d.horizon; ++h) {
            int a = pick.uniform_int(d.num_actions);
            e.actions.push_back(a);
            e.states.push_back(sampler.step(a));
        }
        data.add_episode(std::move(e));
    }
    return data;
}

}  // namespace

TEST_CASE("materialize: one-hot embedding reproduces any tabular MDP") {
    RandomInstance inst = random_tabular_instance(3, 2, 2, 14);
    const Dims& d = inst.mdp.dims();
    FeatureMap one_hot = FeatureMap::one_hot(d.num_states, d.num_actions);
    // mu columns are the true transition rows
    std::vector<double> mu(static_cast<std::size_t>(d.horizon) * one_hot.dim() * d.num_states, 0.0);
    for (int h = 0; h < d.horizon; ++h)
        for (int s = 0; s < d.num_states; ++s)
            for (int a = 0; a < d.num_actions; ++a) {
                int k = s * d.num_actions + a;
                const double* row = inst.mdp.row(h, s, a);
                for (int sn = 0; sn < d.num_states; ++sn)
                    mu[(static_cast<std::size_t>(h) * one_hot.dim() + k) * d.num_states + sn] = row[sn];
            }
    LinearMdpSpec spec(one_hot, mu, inst.mdp.initial_dist(), d.horizon);
    TabularMdp back = materialize(spec);
    for (std::size_t i = 0; i < back.transitions().size(); ++i)
        CHECK(back.transitions()[i] == doctest::Approx(inst.mdp.transitions()[i]).epsilon(1e-12));
}

TEST_CASE("materialize: action-indicator features expand to <phi, mu> entrywise") {
    // two-coordinate completion of phi(s,a) = 1{a = a1}: e1 for a1, e2 otherwise
    const int S = 2, A = 2, H = 2, D = 2;
    std::vector<double> phi = {1, 0, 0, 1, 1, 0, 0, 1};  // (s,a,k)
    FeatureMap features(S, A, D, phi);
    std::vector<double> mu = {
        0.7, 0.3, 0.2, 0.8,  // h=0: mu rows are distributions
        0.5, 0.5, 0.9, 0.1,  // h=1
    };
    LinearMdpSpec spec(features, mu, {0.5, 0.5}, H);
    TabularMdp mdp = materialize(spec);
    for (int h = 0; h < H; ++h)
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                std::vector<double> expect = spec.transition_row(h, s, a);
                const double* row = mdp.row(h, s, a);
                for (int sn = 0; sn < S; ++sn) CHECK(row[sn] == doctest::Approx(expect[sn]));
            }
}

TEST_CASE("materialize rejects invalid rows naming the triple") {
    const int S = 2, A = 1, H = 1, D = 2;
    std::vector<double> phi = {0.6, 0.0, 0.6, 0.0};
    FeatureMap features(S, A, D, phi);
    std::vector<double> mu = {0.7, 0.3, 0.2, 0.8};  // <phi,mu> sums to 0.6: invalid
    CHECK_THROWS_AS(LinearMdpSpec(features, mu, {0.5, 0.5}, H), ValidationError);
}

TEST_CASE("materialize round-trip: LSVI recovers a random spec from samples") {
    RandomInstance inst = random_linear_instance(4, 2, 2, 3, 9);
    REQUIRE(inst.linear.has_value());
    const Dims& d = inst.mdp.dims();
    // 5e4 episodes x H=2 gives 1e5 transition samples
    ExplorationDataset data = uniform_policy_dataset(inst.mdp, 50000, 9);
    LsviEstimate est = lsvi_fit(data, inst.linear->features());
    double worst_l1 = 0.0;
    for (int h = 0; h < d.horizon; ++h)
        for (int s = 0; s < d.num_states; ++s)
            for (int a = 0; a < d.num_actions; ++a) {
                std::vector<double> est_row = est.estimated_row(inst.linear->features(), h, s, a);
                const double* true_row = inst.mdp.row(h, s, a);
                double l1 = 0.0;
                for (int sn = 0; sn < d.num_states; ++sn) l1 += std::abs(est_row[sn] - true_row[sn]);
                worst_l1 = std::max(worst_l1, l1);
            }
    CHECK(worst_l1 <= 0.05);
}

TEST_CASE("lsvi_fit closed forms") {
    SUBCASE("empty dataset: identity Gram, zero measures") {
        LsviEstimate est = lsvi_fit(ExplorationDataset(Dims{2, 1, 3}), FeatureMap::one_hot(2, 1));
        CHECK(est.tau == 0);
        for (int h = 0; h < 3; ++h) {
            const double* g = est.gram_at(h);
            for (int i = 0; i < est.dim; ++i)
                for (int j = 0; j < est.dim; ++j)
                    CHECK(g[i * est.dim + j] == doctest::Approx(i == j ? 1.0 : 0.0));
        }
        for (double m : est.mu_hat) CHECK(m == 0.0);
    }
    SUBCASE("one episode with phi = [1]: Lambda = 2, mu_hat = e_{s'}/2") {
        const int S = 2, A = 1, H = 2;
        std::vector<double> phi = {1.0, 1.0};  // phi(s,a) = [1] for both states
        FeatureMap features(S, A, 1, phi);
        ExplorationDataset data(Dims{S, A, H});
        data.add_episode(Episode{{0, 1, 0}, {0, 0}});
        LsviEstimate est = lsvi_fit(data, features);
        for (int h = 0; h < H; ++h) CHECK(est.gram_at(h)[0] == doctest::Approx(2.0));
        CHECK(est.mu_hat_row(0, 0)[1] == doctest::Approx(0.5));  // s_2 = 1
        CHECK(est.mu_hat_row(0, 0)[0] == doctest::Approx(0.0));
        CHECK(est.mu_hat_row(1, 0)[0] == doctest::Approx(0.5));  // s_3 = 0
    }
}

TEST_CASE("lsvi_fit agrees with an independent normal-equations solve") {
    RandomInstance inst = random_linear_instance(4, 2, 2, 2, 1);
    const FeatureMap& features = inst.linear->features();
    ExplorationDataset data = uniform_policy_dataset(inst.mdp, 10000, 1);
    LsviEstimate est = lsvi_fit(data, features);

    const Dims& d = data.dims();
    const int dim = features.dim();
    for (int h = 0; h < d.horizon; ++h) {
        std::vector<double> lambda(dim * dim, 0.0);
        for (int i = 0; i < dim; ++i) lambda[i * dim + i] = 1.0;
        std::vector<double> b(static_cast<std::size_t>(dim) * d.num_states, 0.0);
        for (const Episode& e : data.episodes()) {
            const double* phi = features.at(e.states[h], e.actions[h]);
            for (int i = 0; i < dim; ++i) {
                for (int j = 0; j < dim; ++j) lambda[i * dim + j] += phi[i] * phi[j];
                b[i * d.num_states + e.states[h + 1]] += phi[i];
            }
        }
        std::vector<double> mu = gauss_jordan_solve(lambda, b, dim, d.num_states);
        double frob = 0.0;
        for (int k = 0; k < dim; ++k)
            for (int sn = 0; sn < d.num_states; ++sn) {
                double diff = est.mu_hat_row(h, k)[sn] - mu[k * d.num_states + sn];
                frob += diff * diff;
            }
        CHECK(std::sqrt(frob) <= 1e-8);
    }
}

TEST_CASE("elliptical bonus closed forms and shrinkage") {
    RandomInstance inst = random_linear_instance(3, 2, 2, 2, 2);
    const FeatureMap& features = inst.linear->features();
    const Dims& d = inst.mdp.dims();

    SUBCASE("identity Gram: u = min(||phi||_2, H)") {
        LsviEstimate empty = lsvi_empty(features.dim(), d.num_states, d.horizon);
        std::vector<double> u = elliptical_bonus(empty, features, 1.0);
        for (int h = 0; h < d.horizon; ++h)
            for (int s = 0; s < d.num_states; ++s)
                for (int a = 0; a < d.num_actions; ++a) {
                    double norm = l2_norm(features.vec(s, a));
                    CHECK(u[d.idx(h, s, a)] ==
                          doctest::Approx(std::min(norm, double(d.horizon))).epsilon(1e-12));
                }
    }
    SUBCASE("beta = 0 zeroes the bonus") {
        LsviEstimate empty = lsvi_empty(features.dim(), d.num_states, d.horizon);
        for (double v : elliptical_bonus(empty, features, 0.0)) CHECK(v == 0.0);
    }
    SUBCASE("more data never raises the bonus (prefix datasets)") {
        ExplorationDataset big = uniform_policy_dataset(inst.mdp, 1000, 2);
        ExplorationDataset small(d);
        for (int i = 0; i < 100; ++i) small.add_episode(big.episodes()[i]);
        double beta = default_beta(features.dim(), d.horizon, 1000, 0.1);
        std::vector<double> u_small = elliptical_bonus(lsvi_fit(small, features), features, beta);
        std::vector<double> u_big = elliptical_bonus(lsvi_fit(big, features), features, beta);
        for (std::size_t i = 0; i < u_big.size(); ++i) CHECK(u_big[i] <= u_small[i] + 1e-12);
    }
}

TEST_CASE("default beta closed form") {
    CHECK(default_beta(1, 1, 0, 1.0 / std::exp(1.0)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(default_beta(3, 4, 2000, 0.1) > default_beta(3, 4, 1000, 0.1));
    CHECK(default_beta(4, 5, 1000, 0.1) == doctest::Approx(28.083376810263143).epsilon(1e-12));
    CHECK_THROWS_AS(default_beta(2, 2, 10, 1.5), ValidationError);
}

TEST_CASE("degeneracy check reproduces the worked feature examples") {
    SUBCASE("action-indicator features separate") {
        NamedExample ex = make_named_example("nondegenerate_phi1");
        DegeneracyReport rep = degeneracy_check(ex.mdp, ex.policies.at("expert"), *ex.features);
        REQUIRE(rep.stages.size() == 1);
        CHECK(rep.stages[0].separable);
        CHECK_FALSE(rep.degenerate());
        REQUIRE(rep.stages[0].witness.has_value());
        const auto& w = *rep.stages[0].witness;
        CHECK(l2_norm(w) == doctest::Approx(1.0).epsilon(1e-9));
        // witness validity: min expert projection >= max non-expert projection
        double min_e = 1e300, max_o = -1e300;
        for (const auto& fe : rep.stages[0].expert_features) min_e = std::min(min_e, dot(w, fe));
        for (const auto& fo : rep.stages[0].other_features) max_o = std::max(max_o, dot(w, fo));
        CHECK(min_e >= max_o - 1e-9);
    }
    SUBCASE("state-dependent indicator features coincide: degenerate") {
        NamedExample ex = make_named_example("degenerate_phi2");
        DegeneracyReport rep = degeneracy_check(ex.mdp, ex.policies.at("expert"), *ex.features);
        REQUIRE(rep.stages.size() == 1);
        CHECK_FALSE(rep.stages[0].separable);
        CHECK(rep.degenerate());
    }
    SUBCASE("expert covering all actions at a state is never separable") {
        Dims dims{2, 2, 1};
        std::vector<double> p(dims.hsa() * 2, 0.5);
        TabularMdp mdp(dims, {0.5, 0.5}, p);
        std::vector<double> phi = {1, 0, 0, 1, 0.6, 0.8, 1, 0};  // phi(1,a1) == phi(0,a0)
        FeatureMap features(2, 2, 2, phi);
        std::vector<double> probs = {0.5, 0.5, 1.0, 0.0};  // mixes at s0, plays a0 at s1
        Policy expert(dims, probs);
        DegeneracyReport rep = degeneracy_check(mdp, expert, features);
        CHECK_FALSE(rep.stages[0].separable);
    }
}

TEST_CASE("degenerate features admit only the zero linear reward") {
    NamedExample deg = make_named_example("degenerate_phi2");
    NamedExample good = make_named_example("nondegenerate_phi1");
    const Policy& expert_deg = deg.policies.at("expert");
    const Policy& expert_good = good.policies.at("expert");
    auto support_deg = expert_support(deg.mdp, expert_deg);
    auto support_good = expert_support(good.mdp, expert_good);

    int good_nonzero = 0;
    Rng rng(123);
    for (int i = 0; i < 1000; ++i) {
        double theta = rng.uniform(-1.0, 1.0);
        RewardSpec r = RewardSpec::linear({{theta}});
        if (feasible_membership(deg.mdp, expert_deg, support_deg, r, 1e-9, &*deg.features))
            CHECK(std::abs(theta) <= 1e-6);
        if (feasible_membership(good.mdp, expert_good, support_good, r, 1e-9, &*good.features) &&
            std::abs(theta) > 1e-6)
            ++good_nonzero;
    }
    CHECK(good_nonzero > 0);  // the non-degenerate instance keeps a halfline
}

TEST_CASE("lsvi estimate converges at the root-tau rate") {
    // median worst-row L1 error over seeds, on a 4x budget ladder
    const std::vector<std::int64_t> taus = {1000, 4000, 16000};
    std::vector<std::vector<double>> errors(taus.size());
    for (std::uint64_t seed = 0; seed < 9; ++seed) {
        RandomInstance inst = random_linear_instance(4, 2, 2, 3, 100 + seed);
        const FeatureMap& features = inst.linear->features();
        const Dims& d = inst.mdp.dims();
        ForwardSampler sampler(inst.mdp, 200 + seed);
        Rng pick = Rng::derive(300 + seed, 0);
        ExplorationDataset all(d);
        std::int64_t done = 0;
        for (std::size_t k = 0; k < taus.size(); ++k) {
            for (; done < taus[k]; ++done) {
                Episode e;
                e.states.push_back(sampler.reset());
                for (int h = 0; h < d.horizon; ++h) {
                    int a = pick.uniform_int(d.num_actions);
                    e.actions.push_back(a);
                    e.states.push_back(sampler.step(a));
                }
                all.add_episode(std::move(e));
            }
            LsviEstimate est = lsvi_fit(all, features);
            double worst = 0.0;
            for (int h = 0; h < d.horizon; ++h)
                for (int s = 0; s < d.num_states; ++s)
                    for (int a = 0; a < d.num_actions; ++a) {
                        std::vector<double> row = est.estimated_row(features, h, s, a);
                        double l1 = 0.0;
                        for (int sn = 0; sn < d.num_states; ++sn)
                            l1 += std::abs(row[sn] - inst.mdp.row(h, s, a)[sn]);
                        worst = std::max(worst, l1);
                    }
            errors[k].push_back(worst);
        }
    }
    std::vector<double> medians;
    for (auto& e : errors) {
        std::sort(e.begin(), e.end());
        medians.push_back(e[e.size() / 2]);
    }
    // each 4x of data should roughly halve the error
    for (std::size_t k = 0; k + 1 < medians.size(); ++k) {
        double ratio = medians[k] / medians[k + 1];
        CHECK(ratio >= 1.5);
        CHECK(ratio <= 2.7);
    }
}

TEST_CASE("linear spec invariant violations throw") {
    // total-variation bound: mu row with mass 3 in a d=1 spec breaks ||.||_2 <= sqrt(d)
    std::vector<double> phi = {1.0, 1.0};
    FeatureMap features(2, 1, 1, phi);
    std::vector<double> mu_bad = {2.0, 1.0};
    CHECK_THROWS_AS(LinearMdpSpec(features, mu_bad, {0.5, 0.5}, 1), ValidationError);
    // feature norm above one
    std::vector<double> phi_bad = {1.2, 0.0, 0.0, 1.0};
    CHECK_THROWS_AS(FeatureMap(2, 1, 2, phi_bad), ValidationError);
}
