#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "caty/caty.hpp"
#include "caty/common.hpp"
#include "caty/datasets.hpp"
#include "caty/linear.hpp"
#include "caty/mdp.hpp"

namespace caty {

using nlohmann::json;

// ---------------------------------------------------------------------------
// MDP document: {"version":1, "S","A","H", "d0", "p", "rewards"?, "policies"?}
// ---------------------------------------------------------------------------

struct MdpDocument {
    TabularMdp mdp;
    std::map<std::string, RewardSpec> rewards;
    std::map<std::string, Policy> policies;
    json provenance;  // generator metadata, absent when hand-written
};

namespace detail {

inline json tensor3_to_json(const std::vector<double>& t, const Dims& d, int inner) {
    json out = json::array();
    for (int h = 0; h < d.horizon; ++h) {
        json stage = json::array();
        for (int s = 0; s < d.num_states; ++s) {
            json row = json::array();
            for (int a = 0; a < d.num_actions; ++a) {
                if (inner == 1) {
                    row.push_back(t[d.idx(h, s, a)]);
                } else {
                    json cell = json::array();
                    for (int k = 0; k < inner; ++k) cell.push_back(t[d.idx(h, s, a) * inner + k]);
                    row.push_back(std::move(cell));
                }
            }
            stage.push_back(std::move(row));
        }
        out.push_back(std::move(stage));
    }
    return out;
}

inline void require_array(const json& j, const char* what) {
    if (!j.is_array()) throw ConfigError(std::string(what) + " must be an array");
}

// Parses an (h, s, a[, inner]) nested array; a stage count of one is
// replicated across the horizon (stationary shorthand).
inline std::vector<double> tensor3_from_json(const json& j, const Dims& d, int inner,
                                             const char* what) {
    require_array(j, what);
    int stages = static_cast<int>(j.size());
    if (stages != d.horizon && stages != 1)
        throw ConfigError(std::string(what) + ": stage count must be H or 1");
    std::vector<double> out(d.hsa() * inner);
    for (int h = 0; h < d.horizon; ++h) {
        const json& stage = j[stages == 1 ? 0 : h];
        require_array(stage, what);
        if (static_cast<int>(stage.size()) != d.num_states)
            throw ConfigError(std::string(what) + ": state count mismatch");
        for (int s = 0; s < d.num_states; ++s) {
            const json& row = stage[s];
            require_array(row, what);
            if (static_cast<int>(row.size()) != d.num_actions)
                throw ConfigError(std::string(what) + ": action count mismatch");
            for (int a = 0; a < d.num_actions; ++a) {
                if (inner == 1) {
                    out[d.idx(h, s, a)] = row[a].get<double>();
                } else {
                    const json& cell = row[a];
                    require_array(cell, what);
                    if (static_cast<int>(cell.size()) != inner)
                        throw ConfigError(std::string(what) + ": inner dimension mismatch");
                    for (int k = 0; k < inner; ++k)
                        out[d.idx(h, s, a) * inner + k] = cell[k].get<double>();
                }
            }
        }
    }
    return out;
}

}  // namespace detail

inline json reward_to_json(const RewardSpec& reward, const Dims& dims) {
    if (reward.is_linear()) {
        json theta = json::array();
        for (const auto& t : reward.as_linear().theta) theta.push_back(t);
        return json{{"theta", std::move(theta)}};
    }
    return detail::tensor3_to_json(reward.as_dense().table, dims, 1);
}

inline RewardSpec reward_from_json(const json& j, const Dims& dims) {
    if (j.is_object()) {
        if (!j.contains("theta")) throw ConfigError("linear reward object needs a 'theta' field");
        std::vector<std::vector<double>> theta;
        for (const json& row : j.at("theta")) theta.push_back(row.get<std::vector<double>>());
        if (theta.size() == 1 && dims.horizon > 1)
            theta.assign(dims.horizon, theta.front());  // stationary shorthand
        return RewardSpec::linear(std::move(theta));
    }
    return RewardSpec::dense(detail::tensor3_from_json(j, dims, 1, "reward"), dims);
}

inline json mdp_document_to_json(const MdpDocument& doc) {
    const Dims& d = doc.mdp.dims();
    json j;
    j["version"] = 1;
    j["S"] = d.num_states;
    j["A"] = d.num_actions;
    j["H"] = d.horizon;
    j["d0"] = doc.mdp.initial_dist();
    j["p"] = detail::tensor3_to_json(doc.mdp.transitions(), d, d.num_states);
    if (!doc.rewards.empty()) {
        json rewards;
        for (const auto& [name, reward] : doc.rewards) rewards[name] = reward_to_json(reward, d);
        j["rewards"] = std::move(rewards);
    }
    if (!doc.policies.empty()) {
        json policies;
        for (const auto& [name, policy] : doc.policies)
            policies[name] = detail::tensor3_to_json(policy.probs(), d, 1);
        j["policies"] = std::move(policies);
    }
    if (!doc.provenance.is_null()) j["provenance"] = doc.provenance;
    return j;
}

inline MdpDocument mdp_document_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("MDP document must be a JSON object");
    if (j.value("version", 0) != 1) throw ConfigError("unsupported MDP document version");
    Dims d{j.at("S").get<int>(), j.at("A").get<int>(), j.at("H").get<int>()};
    d.validate();
    std::vector<double> d0 = j.at("d0").get<std::vector<double>>();
    std::vector<double> p = detail::tensor3_from_json(j.at("p"), d, d.num_states, "p");
    MdpDocument doc{TabularMdp(d, std::move(d0), std::move(p)), {}, {}, json()};
    if (j.contains("rewards"))
        for (const auto& [name, rj] : j.at("rewards").items())
            doc.rewards.emplace(name, reward_from_json(rj, d));
    if (j.contains("policies"))
        for (const auto& [name, pj] : j.at("policies").items())
            doc.policies.emplace(name, Policy(d, detail::tensor3_from_json(pj, d, 1, "policy")));
    if (j.contains("provenance")) doc.provenance = j.at("provenance");
    return doc;
}

// ---------------------------------------------------------------------------
// Linear MDP document: {"version":1, "S","A","H","d", "d0", "phi", "mu"}
// ---------------------------------------------------------------------------

inline json linear_spec_to_json(const LinearMdpSpec& spec) {
    const Dims d = spec.dims();
    const int dim = spec.features().dim();
    json j;
    j["version"] = 1;
    j["S"] = d.num_states;
    j["A"] = d.num_actions;
    j["H"] = d.horizon;
    j["d"] = dim;
    j["d0"] = spec.initial_dist();
    json phi = json::array();
    for (int s = 0; s < d.num_states; ++s)
        for (int a = 0; a < d.num_actions; ++a) phi.push_back(spec.features().vec(s, a));
    j["phi"] = std::move(phi);
    json mu = json::array();
    for (int h = 0; h < d.horizon; ++h) {
        json stage = json::array();
        for (int k = 0; k < dim; ++k) {
            const double* row = spec.mu_row(h, k);
            stage.push_back(std::vector<double>(row, row + d.num_states));
        }
        mu.push_back(std::move(stage));
    }
    j["mu"] = std::move(mu);
    return j;
}

inline LinearMdpSpec linear_spec_from_json(const json& j) {
    if (j.value("version", 0) != 1) throw ConfigError("unsupported linear MDP document version");
    const int S = j.at("S").get<int>();
    const int A = j.at("A").get<int>();
    const int H = j.at("H").get<int>();
    const int dim = j.at("d").get<int>();
    const json& phi_rows = j.at("phi");
    if (static_cast<int>(phi_rows.size()) != S * A)
        throw ConfigError("phi must have S*A rows");
    std::vector<double> phi;
    phi.reserve(static_cast<std::size_t>(S) * A * dim);
    for (const json& row : phi_rows) {
        auto vals = row.get<std::vector<double>>();
        if (static_cast<int>(vals.size()) != dim) throw ConfigError("phi row dimension mismatch");
        phi.insert(phi.end(), vals.begin(), vals.end());
    }
    const json& mu_stages = j.at("mu");
    if (static_cast<int>(mu_stages.size()) != H) throw ConfigError("mu must have H stages");
    std::vector<double> mu;
    mu.reserve(static_cast<std::size_t>(H) * dim * S);
    for (const json& stage : mu_stages) {
        if (static_cast<int>(stage.size()) != dim) throw ConfigError("mu stage dimension mismatch");
        for (const json& row : stage) {
            auto vals = row.get<std::vector<double>>();
            if (static_cast<int>(vals.size()) != S) throw ConfigError("mu row length mismatch");
            mu.insert(mu.end(), vals.begin(), vals.end());
        }
    }
    return LinearMdpSpec(FeatureMap(S, A, dim, std::move(phi)), std::move(mu),
                         j.at("d0").get<std::vector<double>>(), H);
}

// ---------------------------------------------------------------------------
// JSONL trajectories: one {"states":[...], "actions":[...]} object per line
// ---------------------------------------------------------------------------

struct JsonlIssue {
    std::size_t line = 0;  // 1-based
    std::string message;
};

inline std::string episode_to_jsonl(const Episode& e) {
    json j{{"states", e.states}, {"actions", e.actions}};
    return j.dump();
}

inline void write_expert_jsonl(const ExpertDataset& dataset, std::ostream& os) {
    for (const Episode& e : dataset.episodes) os << episode_to_jsonl(e) << '\n';
}

/**
 * Reads a JSONL trajectory stream. Malformed lines are collected into
 * `issues` with their 1-based line numbers; well-formed episodes must carry
 * exactly H actions and H or H+1 states.
 */
inline ExpertDataset read_expert_jsonl(std::istream& is, const Dims& dims,
                                       std::vector<JsonlIssue>* issues = nullptr) {
    ExpertDataset out{dims, {}};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fail = [&](const std::string& msg) {
            if (issues == nullptr) throw ConfigError("line " + std::to_string(line_no) + ": " + msg);
            issues->push_back({line_no, msg});
        };
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("states") || !j.contains("actions")) {
            fail("not a {\"states\",\"actions\"} object");
            continue;
        }
        Episode e;
        try {
            e.states = j.at("states").get<std::vector<int>>();
            e.actions = j.at("actions").get<std::vector<int>>();
            validate_episode(e, dims, /*require_terminal=*/false);
        } catch (const std::exception& ex) {
            fail(ex.what());
            continue;
        }
        out.episodes.push_back(std::move(e));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Exploration dataset container
// ---------------------------------------------------------------------------

struct ExplorationRunConfig {
    std::string algorithm;
    double epsilon = 0.0;
    double delta = 0.0;
    std::int64_t max_episodes = 0;
    double bonus_constant = 1.0;
    std::uint64_t seed = 0;
};

inline json exploration_dataset_to_json(const ExplorationDataset& data,
                                        const ExplorationRunConfig& config) {
    const Dims& d = data.dims();
    json j;
    j["version"] = 1;
    j["S"] = d.num_states;
    j["A"] = d.num_actions;
    j["H"] = d.horizon;
    j["tau"] = data.tau();
    j["counts"] = data.counts_sa();
    j["counts_next"] = data.counts_sas();
    json episodes = json::array();
    for (const Episode& e : data.episodes())
        episodes.push_back(json{{"states", e.states}, {"actions", e.actions}});
    j["episodes"] = std::move(episodes);
    j["config"] = json{{"algorithm", config.algorithm}, {"epsilon", config.epsilon},
                       {"delta", config.delta},         {"max_episodes", config.max_episodes},
                       {"bonus_constant", config.bonus_constant}, {"seed", config.seed}};
    return j;
}

inline ExplorationDataset exploration_dataset_from_json(const json& j,
                                                        ExplorationRunConfig* config = nullptr) {
    if (j.value("version", 0) != 1) throw ConfigError("unsupported dataset version");
    Dims d{j.at("S").get<int>(), j.at("A").get<int>(), j.at("H").get<int>()};
    ExplorationDataset data(d);
    for (const json& ej : j.at("episodes")) {
        Episode e;
        e.states = ej.at("states").get<std::vector<int>>();
        e.actions = ej.at("actions").get<std::vector<int>>();
        data.add_episode(std::move(e));
    }
    if (data.tau() != j.at("tau").get<std::int64_t>())
        throw ConfigError("dataset tau does not match the episode log");
    if (j.contains("counts") &&
        j.at("counts").get<std::vector<std::int64_t>>() != data.counts_sa())
        throw ConfigError("dataset counts do not match the episode log");
    if (j.contains("counts_next") &&
        j.at("counts_next").get<std::vector<std::int64_t>>() != data.counts_sas())
        throw ConfigError("dataset successor counts do not match the episode log");
    if (config != nullptr && j.contains("config")) {
        const json& c = j.at("config");
        config->algorithm = c.value("algorithm", "");
        config->epsilon = c.value("epsilon", 0.0);
        config->delta = c.value("delta", 0.0);
        config->max_episodes = c.value("max_episodes", std::int64_t{0});
        config->bonus_constant = c.value("bonus_constant", 1.0);
        config->seed = c.value("seed", std::uint64_t{0});
    }
    return data;
}

// ---------------------------------------------------------------------------
// Classification sweep emission
// ---------------------------------------------------------------------------

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

/// CSV columns: reward_id, j_star_hat, j_expert_hat, c_hat, label, exact_c.
inline std::string sweep_to_csv(const ClassificationSweep& sweep) {
    std::ostringstream os;
    os << "reward_id,j_star_hat,j_expert_hat,c_hat,label,exact_c\n";
    for (const CompatibilityReport& r : sweep.reports) {
        os << r.reward_id << ',' << detail::format_double(r.j_star_hat) << ','
           << detail::format_double(r.j_expert_hat) << ',' << detail::format_double(r.c_hat) << ','
           << (r.label ? "true" : "false") << ',';
        if (r.exact_c) os << detail::format_double(*r.exact_c);
        os << '\n';
    }
    return os.str();
}

inline json sweep_to_json(const ClassificationSweep& sweep) {
    json j;
    j["epsilon"] = sweep.epsilon;
    j["threshold"] = sweep.threshold;
    j["oracle"] = sweep.oracle;
    j["exploration"] = json{{"algorithm", sweep.exploration_algorithm},
                            {"episodes", sweep.exploration_episodes},
                            {"budget_exhausted", sweep.budget_exhausted}};
    json reports = json::array();
    for (const CompatibilityReport& r : sweep.reports) {
        json rj{{"reward_id", r.reward_id},       {"j_star_hat", r.j_star_hat},
                {"j_expert_hat", r.j_expert_hat}, {"c_hat", r.c_hat},
                {"label", r.label}};
        if (r.exact_c) rj["exact_c"] = *r.exact_c;
        if (r.bpi_segment >= 0) rj["bpi_segment"] = r.bpi_segment;
        reports.push_back(std::move(rj));
    }
    j["reports"] = std::move(reports);
    j["sandwich"] = json{{"inner", sweep.inner}, {"outer", sweep.outer}};
    if (sweep.oracle) j["sandwich"]["mid_true"] = sweep.mid_true;
    if (!sweep.bpi_segments.empty()) {
        json segs = json::array();
        for (const BpiSegment& s : sweep.bpi_segments)
            segs.push_back(json{{"reward_id", s.reward_id},
                                {"first_episode", s.first_episode},
                                {"episode_count", s.episode_count}});
        j["bpi_segments"] = std::move(segs);
    }
    return j;
}

/// Histogram of estimated noncompatibilities with the Delta +- eps band
/// markers, ready for external plotting.
inline json sweep_histogram_json(const ClassificationSweep& sweep, int bins = 40) {
    double lo = 0.0, hi = 0.0;
    for (const CompatibilityReport& r : sweep.reports) {
        lo = std::min(lo, r.c_hat);
        hi = std::max(hi, r.c_hat);
    }
    if (hi <= lo) hi = lo + 1.0;
    std::vector<int> counts(bins, 0);
    double width = (hi - lo) / bins;
    for (const CompatibilityReport& r : sweep.reports) {
        int b = std::min(bins - 1, static_cast<int>((r.c_hat - lo) / width));
        ++counts[std::max(0, b)];
    }
    json j;
    j["lo"] = lo;
    j["hi"] = hi;
    j["bin_width"] = width;
    j["counts"] = counts;
    j["threshold"] = sweep.threshold;
    j["band"] = json{{"lower", sweep.threshold - sweep.epsilon},
                     {"upper", sweep.threshold + sweep.epsilon}};
    return j;
}

// ---------------------------------------------------------------------------
// File helpers
// ---------------------------------------------------------------------------

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot open for writing: " + path);
    os << text;
}

inline json read_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open: " + path);
    json j = json::parse(is, nullptr, false);
    if (j.is_discarded()) throw ConfigError("invalid JSON in " + path);
    return j;
}

}  // namespace caty
