#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "caty/caty.hpp"
#include "caty/config.hpp"
#include "caty/expert.hpp"
#include "caty/explore.hpp"
#include "caty/instances.hpp"
#include "caty/serialize.hpp"

namespace caty {

// ---------------------------------------------------------------------------
// Config resolution
// ---------------------------------------------------------------------------

struct ResolvedInstance {
    TabularMdp mdp;
    std::optional<LinearMdpSpec> linear;
    std::optional<FeatureMap> features;  // from the linear spec or a named example
    std::map<std::string, RewardSpec> rewards;
    std::map<std::string, Policy> policies;
    bool synthetic = true;  // true when the true model is known (oracle columns allowed)

    [[nodiscard]] const FeatureMap* feature_map() const {
        if (linear) return &linear->features();
        return features ? &*features : nullptr;
    }
};

inline ResolvedInstance resolve_instance(const ConfigDoc& cfg, std::uint64_t seed_offset = 0) {
    std::string kind = cfg.get_string("instance.kind");
    if (kind == "named") {
        NamedExample ex = make_named_example(cfg.get_string("instance.name"));
        return ResolvedInstance{std::move(ex.mdp),    std::nullopt,           std::move(ex.features),
                                std::move(ex.rewards), std::move(ex.policies), true};
    }
    if (kind == "random") {
        int S = static_cast<int>(cfg.get_int("instance.S"));
        int A = static_cast<int>(cfg.get_int("instance.A"));
        int H = static_cast<int>(cfg.get_int("instance.H"));
        std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("instance.seed", 0)) + seed_offset;
        std::string structure = cfg.get_string("instance.structure", "tabular");
        if (structure == "linear") {
            int d = static_cast<int>(cfg.get_int("instance.d"));
            RandomInstance inst = random_linear_instance(S, A, H, d, seed);
            return ResolvedInstance{std::move(inst.mdp), std::move(inst.linear), std::nullopt,
                                    {},                  {},                     true};
        }
        if (structure != "tabular") throw ConfigError("instance.structure must be tabular or linear");
        RandomInstance inst = random_tabular_instance(S, A, H, seed);
        return ResolvedInstance{std::move(inst.mdp), std::nullopt, std::nullopt, {}, {}, true};
    }
    if (kind == "tree") {
        TreeInstanceParams params;
        params.branching = static_cast<int>(cfg.get_int("instance.branching", 2));
        params.depth = static_cast<int>(cfg.get_int("instance.depth", 2));
        params.horizon = static_cast<int>(cfg.get_int("instance.H", 3 * params.depth));
        params.wait_span = static_cast<int>(cfg.get_int("instance.wait_span", 1));
        params.eps_bias = cfg.get_double("instance.eps_bias", 0.0);
        params.include_expert_state = cfg.get_bool("instance.expert_state", true);
        if (cfg.has("instance.hidden_stage"))
            params.hidden = HiddenTriple{static_cast<int>(cfg.get_int("instance.hidden_stage")),
                                         static_cast<int>(cfg.get_int("instance.hidden_leaf", 0)),
                                         static_cast<int>(cfg.get_int("instance.hidden_action", 0))};
        TreeInstance inst = make_tree_instance(params);
        ResolvedInstance out{std::move(inst.mdp), std::nullopt, std::nullopt, {}, {}, true};
        out.rewards.emplace("canonical", std::move(inst.reward));
        if (inst.expert) out.policies.emplace("expert", std::move(*inst.expert));
        return out;
    }
    if (kind == "packing") {
        PackingFamilyParams params;
        params.branching = static_cast<int>(cfg.get_int("instance.branching", 2));
        params.depth = static_cast<int>(cfg.get_int("instance.depth", 3));
        params.horizon = static_cast<int>(cfg.get_int("instance.H", 3 * params.depth));
        params.wait_span = static_cast<int>(cfg.get_int("instance.wait_span", 1));
        params.eps_bias = cfg.get_double("instance.eps_bias", 0.05);
        params.pac_eps = cfg.get_double("instance.pac_eps", 0.0);
        params.include_expert_state = cfg.get_bool("instance.expert_state", true);
        std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("instance.seed", 0)) + seed_offset;
        params.vectors = greedy_packing(params.leaf_count(), seed);
        PackingInstance inst = make_packing_instance(params);
        ResolvedInstance out{std::move(inst.mdp), std::nullopt, std::nullopt, {}, {}, true};
        if (inst.triple_biases.size() >= 3)
            out.rewards.emplace("distinguishing",
                                inst.make_distinguishing_reward(inst.triple_biases[1],
                                                                inst.triple_biases[2]));
        if (inst.expert) out.policies.emplace("expert", std::move(*inst.expert));
        return out;
    }
    if (kind == "file") {
        MdpDocument doc = mdp_document_from_json(read_json_file(cfg.get_string("instance.path")));
        ResolvedInstance out{std::move(doc.mdp),    std::nullopt,            std::nullopt,
                             std::move(doc.rewards), std::move(doc.policies), false};
        if (cfg.has("instance.linear_path")) {
            out.linear = linear_spec_from_json(read_json_file(cfg.get_string("instance.linear_path")));
            out.synthetic = true;
        }
        return out;
    }
    throw ConfigError("instance.kind must be named, random, tree, packing or file");
}

inline Policy resolve_expert_policy(const ConfigDoc& cfg, const ResolvedInstance& inst,
                                    std::uint64_t rep_seed) {
    std::string source = cfg.get_string("expert.source", "random");
    if (source == "named") return inst.policies.at(cfg.get_string("expert.name", "expert"));
    if (source == "greedy") {
        const RewardSpec& reward = inst.rewards.at(cfg.get_string("expert.reward"));
        ValueSolution sol = value_iteration(inst.mdp, reward, inst.feature_map());
        return greedy_policy(inst.mdp.dims(), sol.q);
    }
    if (source == "random") {
        Rng rng = Rng::derive(static_cast<std::uint64_t>(cfg.get_int("expert.seed", 0)) + rep_seed,
                              0xe9);
        return random_deterministic_policy(inst.mdp.dims(), rng);
    }
    throw ConfigError("expert.source must be named, greedy, random or file");
}

inline ExpertDataset resolve_expert_dataset(const ConfigDoc& cfg, const ResolvedInstance& inst,
                                            const Policy* expert, std::uint64_t rep_seed) {
    std::string source = cfg.get_string("expert.source", "random");
    if (source == "file") {
        std::ifstream is(cfg.get_string("expert.path"));
        if (!is) throw ConfigError("cannot open expert dataset " + cfg.get_string("expert.path"));
        return read_expert_jsonl(is, inst.mdp.dims());
    }
    if (expert == nullptr) throw ConfigError("expert policy required to sample demonstrations");
    std::int64_t tau_e = cfg.get_int("expert.tau_e", 1000);
    std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("expert.seed", 0)) + rep_seed;
    return sample_expert_dataset(inst.mdp, *expert, tau_e, seed ^ 0x5eed);
}

inline std::vector<RewardSpec> resolve_rewards(const ConfigDoc& cfg, const ResolvedInstance& inst,
                                               ProblemStructure structure, std::uint64_t rep_seed) {
    const Dims& d = inst.mdp.dims();
    std::string kind = cfg.get_string("rewards.kind", "random");
    std::vector<RewardSpec> out;
    if (kind == "named") {
        for (const auto& [name, reward] : inst.rewards) out.push_back(reward);
        if (out.empty()) throw ConfigError("instance carries no named rewards");
        return out;
    }
    if (kind == "random") {
        int count = static_cast<int>(cfg.get_int("rewards.count", 100));
        Rng rng = Rng::derive(static_cast<std::uint64_t>(cfg.get_int("rewards.seed", 0)) + rep_seed,
                              0x7e);
        const bool linear = structure != ProblemStructure::Tabular;
        for (int i = 0; i < count; ++i) {
            if (linear) {
                const FeatureMap* features = inst.feature_map();
                if (features == nullptr)
                    throw ConfigError("random linear rewards need a feature map");
                out.push_back(random_linear_reward(features->dim(), d.horizon, rng));
            } else {
                out.push_back(random_dense_reward(d, rng));
            }
        }
        return out;
    }
    if (kind == "grid") {
        // stationary linear theta on a componentwise grid over [-1, 1]^d
        const FeatureMap* features = inst.feature_map();
        if (features == nullptr) throw ConfigError("grid rewards need a feature map");
        int points = static_cast<int>(cfg.get_int("rewards.grid_points", 5));
        if (points < 2) throw ConfigError("rewards.grid_points must be >= 2");
        int dim = features->dim();
        std::int64_t total = 1;
        for (int k = 0; k < dim; ++k) {
            total *= points;
            if (total > 100000) throw ConfigError("reward grid too large");
        }
        for (std::int64_t idx = 0; idx < total; ++idx) {
            std::vector<double> theta(dim);
            std::int64_t rest = idx;
            for (int k = 0; k < dim; ++k) {
                theta[k] = -1.0 + 2.0 * static_cast<double>(rest % points) / (points - 1);
                rest /= points;
            }
            out.push_back(RewardSpec::linear(
                std::vector<std::vector<double>>(d.horizon, theta)));
        }
        return out;
    }
    if (kind == "file") {
        json j = read_json_file(cfg.get_string("rewards.path"));
        if (!j.is_array()) throw ConfigError("reward file must hold a JSON array");
        for (const json& rj : j) out.push_back(reward_from_json(rj, d));
        return out;
    }
    throw ConfigError("rewards.kind must be named, random, grid or file");
}

inline ProblemStructure structure_from_string(const std::string& s) {
    if (s == "tabular") return ProblemStructure::Tabular;
    if (s == "linear-rewards") return ProblemStructure::LinearRewards;
    if (s == "linear-mdp") return ProblemStructure::LinearMdp;
    throw ConfigError("algorithm.structure must be tabular, linear-rewards or linear-mdp");
}

inline CatyOptions caty_options_from(const ConfigDoc& cfg, std::uint64_t rep_seed) {
    CatyOptions opts;
    opts.structure = structure_from_string(cfg.get_string("algorithm.structure", "tabular"));
    opts.epsilon = cfg.get_double("algorithm.epsilon", 0.1);
    opts.delta = cfg.get_double("algorithm.delta", 0.1);
    opts.threshold = cfg.get_double("algorithm.threshold", 0.0);
    opts.max_episodes = cfg.get_int("algorithm.max_episodes", 10000);
    opts.bonus_constant = cfg.get_double("algorithm.bonus_constant", 1.0);
    opts.beta_constant = cfg.get_double("algorithm.beta_constant", 1.0);
    opts.stop_fraction = cfg.get_double("algorithm.stop_fraction", 0.5);
    opts.small_reward_set_limit =
        static_cast<int>(cfg.get_int("algorithm.small_reward_set_limit", -1));
    std::string mode = cfg.get_string("algorithm.plan_mode", "plain");
    if (mode == "plain") opts.rfe_plan_mode = PlanMode::Plain;
    else if (mode == "optimistic") opts.rfe_plan_mode = PlanMode::Optimistic;
    else throw ConfigError("algorithm.plan_mode must be plain or optimistic");
    opts.exploration_seed =
        Rng::derive(static_cast<std::uint64_t>(cfg.get_int("algorithm.seed", 0)), rep_seed)
            .next_u64();
    if (opts.epsilon <= 0.0 || opts.epsilon >= 1.0 || opts.delta <= 0.0 || opts.delta >= 1.0)
        throw ConfigError("algorithm.epsilon and algorithm.delta must lie in (0,1)");
    return opts;
}

inline std::vector<std::int64_t> replication_seeds(const ConfigDoc& cfg) {
    if (cfg.has("replication.seeds")) return cfg.get_int_array("replication.seeds");
    std::int64_t count = cfg.get_int("replication.count", 1);
    std::int64_t base = cfg.get_int("replication.base", 0);
    std::vector<std::int64_t> seeds(count);
    for (std::int64_t i = 0; i < count; ++i) seeds[i] = base + i;
    return seeds;
}

// Fan a per-seed job across a small worker pool; results land in a pre-sized
// vector so the merge order never depends on scheduling. The first exception
// raised by a job is rethrown on the calling thread.
template <typename Result, typename Fn>
std::vector<Result> map_seeds(const std::vector<std::int64_t>& seeds, int threads, Fn&& fn) {
    std::vector<Result> results(seeds.size());
    if (threads < 2 || seeds.size() < 2) {
        for (std::size_t i = 0; i < seeds.size(); ++i) results[i] = fn(seeds[i]);
        return results;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> poisoned{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&]() {
        for (std::size_t i = next.fetch_add(1); i < seeds.size(); i = next.fetch_add(1)) {
            if (poisoned.load()) return;
            try {
                results[i] = fn(seeds[i]);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                poisoned.store(true);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    int n = std::min<int>(threads, static_cast<int>(seeds.size()));
    pool.reserve(n);
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
    return results;
}

inline std::string config_hash_hex(const std::string& config_text) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a(config_text)));
    return buf;
}

inline json provenance_block(const std::string& config_text,
                             const std::vector<std::int64_t>& seeds) {
    return json{{"config_hash", config_hash_hex(config_text)},
                {"seeds", seeds},
                {"library_version", kVersion}};
}

// ---------------------------------------------------------------------------
// classify: config-driven CATY sweeps with per-seed summaries
// ---------------------------------------------------------------------------

struct ClassifyOutcome {
    ClassificationSweep sweep;
    double sup_error = 0.0;       // oracle mode only
    double mislabel_rate = 0.0;   // oracle mode only
    bool sandwich_ok = true;      // inner subset mid_true subset outer
    std::int64_t tau_e = 0;
};

inline ClassifyOutcome classify_one_seed(const ConfigDoc& cfg, std::int64_t rep_seed,
                                         bool oracle_allowed) {
    ResolvedInstance inst = resolve_instance(cfg, static_cast<std::uint64_t>(rep_seed));
    // file-sourced demonstrations come without a policy, so no oracle columns
    const bool file_expert = cfg.get_string("expert.source", "random") == "file";
    std::optional<Policy> expert;
    if (!file_expert)
        expert = resolve_expert_policy(cfg, inst, static_cast<std::uint64_t>(rep_seed));
    ExpertDataset demos = resolve_expert_dataset(cfg, inst, expert ? &*expert : nullptr,
                                                 static_cast<std::uint64_t>(rep_seed));
    CatyOptions opts = caty_options_from(cfg, static_cast<std::uint64_t>(rep_seed));
    opts.oracle = oracle_allowed && inst.synthetic && expert.has_value();
    std::vector<RewardSpec> rewards =
        resolve_rewards(cfg, inst, opts.structure, static_cast<std::uint64_t>(rep_seed));

    ClassifyOutcome out;
    out.tau_e = demos.count();
    out.sweep = run_caty(inst.mdp, inst.feature_map(), demos, rewards, opts,
                         opts.oracle ? &*expert : nullptr);
    if (opts.oracle) {
        int mislabels = 0;
        for (const CompatibilityReport& r : out.sweep.reports) {
            out.sup_error = std::max(out.sup_error, std::abs(r.c_hat - *r.exact_c));
            bool truth = *r.exact_c <= opts.threshold;
            if (truth != r.label) ++mislabels;
        }
        out.mislabel_rate =
            out.sweep.reports.empty()
                ? 0.0
                : static_cast<double>(mislabels) / static_cast<double>(out.sweep.reports.size());
        for (int id : out.sweep.inner)
            if (std::find(out.sweep.mid_true.begin(), out.sweep.mid_true.end(), id) ==
                out.sweep.mid_true.end())
                out.sandwich_ok = false;
        for (int id : out.sweep.mid_true)
            if (std::find(out.sweep.outer.begin(), out.sweep.outer.end(), id) ==
                out.sweep.outer.end())
                out.sandwich_ok = false;
    }
    return out;
}

inline json run_classify_experiment(const ConfigDoc& cfg, const std::string& config_text,
                                    const std::string& out_dir, int threads, bool oracle_allowed,
                                    bool write_sweeps = true) {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<std::int64_t> seeds = replication_seeds(cfg);
    std::vector<ClassifyOutcome> outcomes = map_seeds<ClassifyOutcome>(
        seeds, threads, [&](std::int64_t seed) { return classify_one_seed(cfg, seed, oracle_allowed); });

    std::filesystem::create_directories(out_dir);
    std::string prefix = cfg.get_string("output.prefix", "classify");
    json per_seed = json::array();
    int pac_hits = 0, sandwich_hits = 0;
    double eps = cfg.get_double("algorithm.epsilon", 0.1);
    bool any_oracle = false;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        const ClassifyOutcome& o = outcomes[i];
        if (write_sweeps) {
            std::string stem = out_dir + "/" + prefix + "_seed" + std::to_string(seeds[i]);
            write_text_file(stem + ".csv", sweep_to_csv(o.sweep));
            write_text_file(stem + ".json", sweep_to_json(o.sweep).dump(2) + "\n");
            write_text_file(stem + "_hist.json", sweep_histogram_json(o.sweep).dump(2) + "\n");
        }
        bool oracle = o.sweep.oracle;
        any_oracle = any_oracle || oracle;
        if (oracle && o.sup_error <= eps) ++pac_hits;
        if (oracle && o.sandwich_ok) ++sandwich_hits;
        json row{{"seed", seeds[i]},
                 {"episodes", o.sweep.exploration_episodes},
                 {"budget_exhausted", o.sweep.budget_exhausted},
                 {"tau_e", o.tau_e},
                 {"algorithm", o.sweep.exploration_algorithm}};
        if (oracle) {
            row["sup_error"] = o.sup_error;
            row["mislabel_rate"] = o.mislabel_rate;
            row["sandwich_ok"] = o.sandwich_ok;
        }
        per_seed.push_back(std::move(row));
    }
    json summary;
    summary["command"] = "classify";
    summary["provenance"] = provenance_block(config_text, seeds);
    summary["per_seed"] = std::move(per_seed);
    if (any_oracle) {
        summary["pac_success_rate"] = static_cast<double>(pac_hits) / seeds.size();
        summary["sandwich_success_rate"] = static_cast<double>(sandwich_hits) / seeds.size();
    }
    summary["wall_time_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                                  std::chrono::steady_clock::now() - t0)
                                  .count();
    write_text_file(out_dir + "/" + prefix + "_summary.json", summary.dump(2) + "\n");
    return summary;
}

// ---------------------------------------------------------------------------
// rates: estimator and exploration error against geometric budget grids
// ---------------------------------------------------------------------------

inline double fit_loglog_slope(const std::vector<double>& budgets, const std::vector<double>& errors) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = static_cast<int>(budgets.size());
    for (int i = 0; i < n; ++i) {
        double x = std::log(budgets[i]);
        double y = std::log(std::max(errors[i], 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline json run_rates_experiment(const ConfigDoc& cfg, const std::string& config_text,
                                 const std::string& out_dir, int threads) {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<std::int64_t> seeds = replication_seeds(cfg);
    std::vector<std::int64_t> budgets = cfg.get_int_array("rates.budgets");
    if (budgets.empty()) throw ConfigError("rates.budgets must not be empty");
    std::string target = cfg.get_string("rates.target", "expert");
    const bool flagged_single_point = budgets.size() < 2;

    struct SeedRates {
        std::vector<double> errors;
        double slope = 0.0;
    };
    std::vector<SeedRates> rows = map_seeds<SeedRates>(seeds, threads, [&](std::int64_t seed) {
        ResolvedInstance inst = resolve_instance(cfg, static_cast<std::uint64_t>(seed));
        Policy expert = resolve_expert_policy(cfg, inst, static_cast<std::uint64_t>(seed));
        SeedRates row;
        if (target == "expert" || target == "expert-features") {
            std::vector<double> occ = occupancy_measure(inst.mdp, expert);
            const Dims& d = inst.mdp.dims();
            const FeatureMap* features = inst.feature_map();
            std::vector<std::vector<double>> psi;
            if (target == "expert-features") {
                if (features == nullptr) throw ConfigError("expert-features rates need a feature map");
                psi.assign(d.horizon, std::vector<double>(features->dim(), 0.0));
                for (int h = 0; h < d.horizon; ++h)
                    for (int s = 0; s < d.num_states; ++s)
                        for (int a = 0; a < d.num_actions; ++a)
                            for (int k = 0; k < features->dim(); ++k)
                                psi[h][k] += occ[d.idx(h, s, a)] * features->at(s, a)[k];
            }
            for (std::int64_t tau : budgets) {
                ExpertDataset demos = sample_expert_dataset(
                    inst.mdp, expert, tau,
                    Rng::derive(static_cast<std::uint64_t>(seed), static_cast<std::uint64_t>(tau))
                        .next_u64());
                double err = 0.0;
                if (target == "expert") {
                    OccupancyEstimate est = empirical_occupancy(demos);
                    for (std::size_t i = 0; i < occ.size(); ++i)
                        err += std::abs(est.d_hat[i] - occ[i]);
                } else {
                    FeatureExpectationEstimate est = empirical_feature_expectation(demos, *features);
                    for (int h = 0; h < d.horizon; ++h) {
                        std::vector<double> diff = est.psi_hat[h];
                        for (int k = 0; k < features->dim(); ++k) diff[k] -= psi[h][k];
                        err += l2_norm(diff);
                    }
                }
                row.errors.push_back(err);
            }
        } else if (target == "exploration") {
            const Dims& d = inst.mdp.dims();
            int count = static_cast<int>(cfg.get_int("rates.rewards_per_seed", 50));
            Rng reward_rng = Rng::derive(static_cast<std::uint64_t>(seed), 0x4e);
            std::vector<std::vector<double>> tables;
            for (int i = 0; i < count; ++i)
                tables.push_back(random_dense_reward(d, reward_rng).to_table(d));
            for (std::int64_t budget : budgets) {
                ForwardSampler sampler(inst.mdp,
                                       Rng::derive(static_cast<std::uint64_t>(seed),
                                                   static_cast<std::uint64_t>(budget))
                                           .next_u64());
                ExplorationResult res = explore_reward_free_tabular(
                    sampler, cfg.get_double("algorithm.epsilon", 0.2),
                    cfg.get_double("algorithm.delta", 0.1), budget,
                    cfg.get_double("algorithm.bonus_constant", 1.0));
                double sup = 0.0;
                for (const auto& table : tables) {
                    double exact = value_iteration(inst.mdp, table).j;
                    double planned = plan_tabular(res.dataset, table, inst.mdp.initial_dist(),
                                                  PlanMode::Plain,
                                                  cfg.get_double("algorithm.delta", 0.1));
                    sup = std::max(sup, std::abs(planned - exact));
                }
                row.errors.push_back(sup);
            }
        } else {
            throw ConfigError("rates.target must be expert, expert-features or exploration");
        }
        if (!flagged_single_point) {
            std::vector<double> b(budgets.begin(), budgets.end());
            row.slope = fit_loglog_slope(b, row.errors);
        }
        return row;
    });

    std::filesystem::create_directories(out_dir);
    std::string prefix = cfg.get_string("output.prefix", "rates");
    std::ostringstream csv;
    csv << "seed,budget,error\n";
    for (std::size_t i = 0; i < seeds.size(); ++i)
        for (std::size_t b = 0; b < budgets.size(); ++b)
            csv << seeds[i] << ',' << budgets[b] << ','
                << detail::format_double(rows[i].errors[b]) << '\n';
    write_text_file(out_dir + "/" + prefix + "_points.csv", csv.str());

    json summary;
    summary["command"] = "rates";
    summary["target"] = target;
    summary["provenance"] = provenance_block(config_text, seeds);
    summary["budgets"] = budgets;
    summary["flagged_single_point"] = flagged_single_point;
    if (!flagged_single_point) {
        std::vector<double> slopes;
        for (const SeedRates& r : rows) slopes.push_back(r.slope);
        std::sort(slopes.begin(), slopes.end());
        summary["slopes"] = slopes;
        summary["median_slope"] = slopes[slopes.size() / 2];
        // median error per budget must not increase along the grid
        json medians = json::array();
        bool nonincreasing = true;
        double prev = 1e300;
        for (std::size_t b = 0; b < budgets.size(); ++b) {
            std::vector<double> errs;
            for (const SeedRates& r : rows) errs.push_back(r.errors[b]);
            std::sort(errs.begin(), errs.end());
            double median = errs[errs.size() / 2];
            medians.push_back(median);
            if (median > prev + 1e-12) nonincreasing = false;
            prev = median;
        }
        summary["median_errors"] = std::move(medians);
        summary["median_error_nonincreasing"] = nonincreasing;
    }
    summary["wall_time_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                                  std::chrono::steady_clock::now() - t0)
                                  .count();
    write_text_file(out_dir + "/" + prefix + "_summary.json", summary.dump(2) + "\n");
    return summary;
}

// ---------------------------------------------------------------------------
// hardness: fixed-budget accuracy on hard instances vs matched random ones
// ---------------------------------------------------------------------------

inline json run_hardness_experiment(const ConfigDoc& cfg, const std::string& config_text,
                                    const std::string& out_dir, int threads) {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<std::int64_t> seeds = replication_seeds(cfg);
    std::string family = cfg.get_string("hardness.family", "tree");
    std::int64_t budget = cfg.get_int("hardness.budget", 2000);
    double eps = cfg.get_double("algorithm.epsilon", 0.2);
    double delta = cfg.get_double("algorithm.delta", 0.1);

    json summary;
    summary["command"] = "hardness";
    summary["family"] = family;
    summary["budget"] = budget;

    if (family == "tree") {
        TreeInstanceParams params;
        params.branching = static_cast<int>(cfg.get_int("hardness.branching", 2));
        params.depth = static_cast<int>(cfg.get_int("hardness.depth", 2));
        params.horizon = static_cast<int>(cfg.get_int("hardness.horizon", 8));
        params.wait_span = static_cast<int>(cfg.get_int("hardness.wait_span", 2));
        params.include_expert_state = cfg.get_bool("hardness.expert_state", false);
        double detect_eps = cfg.get_double("hardness.detect_eps", eps);
        double span = params.horizon - params.wait_span - params.depth;
        params.eps_bias = 2.0 * detect_eps / span;
        if (params.eps_bias > 0.5)
            throw ConfigError("hardness.detect_eps too large for this tree shape");

        if (params.eps_bias == 0.0) {
            summary["trivial"] = true;
            summary["note"] = "zero bias: no distinguishing reward exists";
        } else {
            struct TreeRow {
                bool misclassified = false;
                double j_hat = 0.0;
            };
            // threshold midway between the two optimal utilities
            TreeInstanceParams ref = params;
            ref.hidden.reset();
            ref.eps_bias = 0.0;
            TreeInstance reference = make_tree_instance(ref);
            std::vector<TreeRow> rows = map_seeds<TreeRow>(seeds, threads, [&](std::int64_t seed) {
                TreeInstanceParams inst_params = params;
                Rng pick = Rng::derive(static_cast<std::uint64_t>(seed), 0x7e11);
                inst_params.hidden =
                    HiddenTriple{inst_params.depth + 1 + pick.uniform_int(inst_params.wait_span),
                                 pick.uniform_int(inst_params.leaf_count()),
                                 pick.uniform_int(inst_params.branching)};
                TreeInstance inst = make_tree_instance(inst_params);
                ForwardSampler sampler(inst.mdp, static_cast<std::uint64_t>(seed) ^ 0x7777);
                ExplorationResult res =
                    explore_reward_free_tabular(sampler, eps, delta, budget,
                                                cfg.get_double("algorithm.bonus_constant", 1.0));
                std::vector<double> table = inst.reward.to_table(inst.mdp.dims());
                double j_hat = plan_tabular(res.dataset, table, inst.mdp.initial_dist(),
                                            PlanMode::Plain, delta);
                // classify the canonical reward against a threshold between the
                // two closed-form optima; truth is the biased value
                double mid = 0.5 * (inst.j_star_reference() + inst.j_star_biased());
                bool label = j_hat <= mid;
                bool truth = value_iteration(inst.mdp, table).j <= mid;  // always false
                return TreeRow{label != truth, j_hat};
            });
            int miss = 0;
            for (const TreeRow& r : rows) miss += r.misclassified ? 1 : 0;
            summary["trivial"] = false;
            summary["j_star_reference"] = reference.j_star_reference();
            summary["misclassified_seeds"] = miss;
            summary["misclassification_rate"] = static_cast<double>(miss) / seeds.size();
        }
    } else if (family == "packing") {
        PackingFamilyParams params;
        params.branching = static_cast<int>(cfg.get_int("hardness.branching", 2));
        params.depth = static_cast<int>(cfg.get_int("hardness.depth", 4));
        params.horizon = static_cast<int>(cfg.get_int("hardness.horizon", 12));
        params.wait_span = static_cast<int>(cfg.get_int("hardness.wait_span", 2));
        params.eps_bias = cfg.get_double("hardness.eps_bias", 0.05);
        params.pac_eps = eps;
        params.include_expert_state = cfg.get_bool("hardness.expert_state", false);
        int rewards_per_seed = static_cast<int>(cfg.get_int("hardness.rewards_per_seed", 50));

        struct PackRow {
            double hard_err = 0.0;
            double random_err = 0.0;
        };
        std::vector<PackRow> rows = map_seeds<PackRow>(seeds, threads, [&](std::int64_t seed) {
            PackingFamilyParams p = params;
            p.vectors = greedy_packing(p.leaf_count(), static_cast<std::uint64_t>(seed) + 1);
            PackingInstance hard = make_packing_instance(p);
            const Dims& d = hard.mdp.dims();
            RandomInstance matched = random_tabular_instance(
                d.num_states, d.num_actions, d.horizon, static_cast<std::uint64_t>(seed) ^ 0xaa);

            auto sup_error = [&](const TabularMdp& mdp, std::uint64_t explore_seed) {
                ForwardSampler sampler(mdp, explore_seed);
                ExplorationResult res =
                    explore_reward_free_tabular(sampler, eps, delta, budget,
                                                cfg.get_double("algorithm.bonus_constant", 1.0));
                Rng rng = Rng::derive(static_cast<std::uint64_t>(seed), 0xbb);
                double sup = 0.0;
                for (int i = 0; i < rewards_per_seed; ++i) {
                    std::vector<double> tail(hard.leaf_count);
                    for (double& v : tail) v = rng.uniform(-1.0, 1.0);
                    // the same tail defines rewards on both instances: hard uses
                    // the construction; the matched instance reuses the table
                    RewardSpec hard_reward = hard.make_reward(tail);
                    const std::vector<double>& table = hard_reward.as_dense().table;
                    double exact = value_iteration(mdp, table).j;
                    double planned = plan_tabular(res.dataset, table, mdp.initial_dist(),
                                                  PlanMode::Plain, delta);
                    sup = std::max(sup, std::abs(planned - exact));
                }
                return sup;
            };
            PackRow row;
            row.hard_err = sup_error(hard.mdp, static_cast<std::uint64_t>(seed) ^ 0x111);
            row.random_err = sup_error(matched.mdp, static_cast<std::uint64_t>(seed) ^ 0x222);
            return row;
        });
        int harder = 0;
        json pairs = json::array();
        for (const PackRow& r : rows) {
            if (r.hard_err > r.random_err) ++harder;
            pairs.push_back(json{{"hard", r.hard_err}, {"random", r.random_err}});
        }
        summary["pairs"] = std::move(pairs);
        summary["hard_instance_worse_count"] = harder;
        summary["hard_instance_worse_rate"] = static_cast<double>(harder) / seeds.size();
    } else {
        throw ConfigError("hardness.family must be tree or packing");
    }

    summary["provenance"] = provenance_block(config_text, seeds);
    summary["wall_time_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                                  std::chrono::steady_clock::now() - t0)
                                  .count();
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir + "/" + cfg.get_string("output.prefix", "hardness") + "_summary.json",
                    summary.dump(2) + "\n");
    return summary;
}

// ---------------------------------------------------------------------------
// degeneracy: separating-hyperplane verdicts with a theta-grid cross-check
// ---------------------------------------------------------------------------

inline json run_degeneracy_experiment(const ConfigDoc& cfg, const std::string& config_text,
                                      const std::string& out_dir, int /*threads*/) {
    auto t0 = std::chrono::steady_clock::now();
    ResolvedInstance inst = resolve_instance(cfg);
    const FeatureMap* features = inst.feature_map();
    if (features == nullptr) throw ConfigError("degeneracy analysis needs a linear instance");
    Policy expert = resolve_expert_policy(cfg, inst, 0);

    DegeneracyReport report = degeneracy_check(inst.mdp, expert, *features);

    // theta-grid feasibility scan on the (materialized) model
    const Dims& d = inst.mdp.dims();
    int grid_points = static_cast<int>(cfg.get_int("degeneracy.grid_points", 10000));
    double tol = cfg.get_double("degeneracy.tol", 1e-9);
    auto support = expert_support(inst.mdp, expert);
    std::vector<double> occ = occupancy_measure(inst.mdp, expert);

    Rng rng = Rng::derive(static_cast<std::uint64_t>(cfg.get_int("degeneracy.seed", 0)), 0xde);
    int feasible_count = 0, feasible_nonzero = 0;
    double max_feasible_magnitude = 0.0;
    for (int i = 0; i < grid_points; ++i) {
        RewardSpec reward = random_linear_reward(features->dim(), d.horizon, rng);
        if (!feasible_membership(inst.mdp, expert, support, reward, tol, features)) continue;
        ++feasible_count;
        // magnitude of the induced reward on expert-supported pairs
        std::vector<double> table = reward.to_table(d, features);
        double mag = 0.0;
        for (int h = 0; h < d.horizon; ++h)
            for (int s = 0; s < d.num_states; ++s)
                for (int a = 0; a < d.num_actions; ++a)
                    if (occ[d.idx(h, s, a)] > kSupportEps)
                        mag = std::max(mag, std::abs(table[d.idx(h, s, a)]));
        max_feasible_magnitude = std::max(max_feasible_magnitude, mag);
        if (mag > 1e-6) ++feasible_nonzero;
    }

    bool grid_nonzero = feasible_nonzero > 0;
    bool lp_degenerate = report.degenerate();
    // Prop-style agreement: degeneracy forces the grid to zero rewards; a
    // separable stage paired with nonzero feasible points also agrees.
    bool agreement = lp_degenerate ? !grid_nonzero : grid_nonzero;

    json stages = json::array();
    for (const SeparabilityReport& st : report.stages) {
        json sj{{"stage", st.stage}, {"separable", st.separable}, {"margin", st.margin}};
        if (st.witness) sj["witness"] = *st.witness;
        stages.push_back(std::move(sj));
    }
    json summary;
    summary["command"] = "degeneracy";
    summary["stages"] = std::move(stages);
    summary["degenerate"] = lp_degenerate;
    summary["grid"] = json{{"points", grid_points},
                           {"feasible_count", feasible_count},
                           {"feasible_nonzero", feasible_nonzero},
                           {"max_feasible_magnitude", max_feasible_magnitude}};
    summary["agreement"] = agreement;
    summary["provenance"] = provenance_block(config_text, {});
    summary["wall_time_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                                  std::chrono::steady_clock::now() - t0)
                                  .count();
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir + "/" + cfg.get_string("output.prefix", "degeneracy") + "_summary.json",
                    summary.dump(2) + "\n");
    return summary;
}

// ---------------------------------------------------------------------------
// gen-instance and validate
// ---------------------------------------------------------------------------

inline json run_gen_instance(const ConfigDoc& cfg, const std::string& config_text,
                             const std::string& out_dir) {
    ResolvedInstance inst = resolve_instance(cfg);
    std::filesystem::create_directories(out_dir);
    std::string prefix = cfg.get_string("output.prefix", "instance");
    MdpDocument doc{std::move(inst.mdp), std::move(inst.rewards), std::move(inst.policies), json()};
    json params;
    for (const auto& [key, value] : cfg.scalars()) {
        if (key.rfind("instance.", 0) != 0) continue;
        std::string name = key.substr(9);
        std::visit([&](const auto& v) { params[name] = v; }, value);
    }
    doc.provenance = json{{"generator", cfg.get_string("instance.kind")},
                          {"seed", cfg.get_int("instance.seed", 0)},
                          {"params", std::move(params)},
                          {"config_hash", config_hash_hex(config_text)}};
    write_text_file(out_dir + "/" + prefix + ".json", mdp_document_to_json(doc).dump(2) + "\n");
    json result{{"command", "gen-instance"},
                {"written", out_dir + "/" + prefix + ".json"}};
    if (inst.linear) {
        write_text_file(out_dir + "/" + prefix + "_linear.json",
                        linear_spec_to_json(*inst.linear).dump(2) + "\n");
        result["written_linear"] = out_dir + "/" + prefix + "_linear.json";
    }
    return result;
}

/// Validates an MDP JSON document or a JSONL trajectory file; returns the
/// collected issues (empty means valid).
inline json run_validate(const std::string& path, const std::string& format, const Dims* dims) {
    json result{{"command", "validate"}, {"path", path}, {"format", format}};
    if (format == "mdp") {
        MdpDocument doc = mdp_document_from_json(read_json_file(path));  // throws on problems
        result["S"] = doc.mdp.num_states();
        result["A"] = doc.mdp.num_actions();
        result["H"] = doc.mdp.horizon();
        result["rewards"] = doc.rewards.size();
        result["policies"] = doc.policies.size();
        result["valid"] = true;
        return result;
    }
    if (format == "linear") {
        LinearMdpSpec spec = linear_spec_from_json(read_json_file(path));
        result["S"] = spec.features().num_states();
        result["d"] = spec.features().dim();
        result["valid"] = true;
        return result;
    }
    if (format == "jsonl") {
        if (dims == nullptr) throw ConfigError("jsonl validation needs S, A and H");
        std::ifstream is(path);
        if (!is) throw ConfigError("cannot open: " + path);
        std::vector<JsonlIssue> issues;
        ExpertDataset data = read_expert_jsonl(is, *dims, &issues);
        json issue_rows = json::array();
        for (const JsonlIssue& issue : issues)
            issue_rows.push_back(json{{"line", issue.line}, {"message", issue.message}});
        result["episodes"] = data.count();
        result["issues"] = std::move(issue_rows);
        result["valid"] = issues.empty();
        return result;
    }
    throw ConfigError("validate format must be mdp, linear or jsonl");
}

}  // namespace caty
