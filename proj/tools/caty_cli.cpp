#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "caty/experiments.hpp"

namespace {

std::string slurp(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw caty::ConfigError("cannot open config file: " + path);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rewards-compatibility experiments: exact compatibility oracles, CATY "
                 "classification runs, estimator rate studies, hard-instance probes"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out";
    int threads = 1;
    bool oracle = true;

    auto add_run_options = [&](CLI::App* cmd, bool with_oracle) {
        cmd->add_option("--config", config_path, "experiment config file (TOML-like)")->required();
        cmd->add_option("--out-dir", out_dir, "output directory");
        cmd->add_option("--threads", threads, "worker threads for seed fan-out");
        if (with_oracle)
            cmd->add_flag("--oracle,!--no-oracle", oracle,
                          "attach exact oracle columns on synthetic instances");
    };

    CLI::App* classify = app.add_subcommand("classify", "run a CATY classification sweep");
    add_run_options(classify, true);
    CLI::App* rates = app.add_subcommand("rates", "estimator / exploration error rate study");
    add_run_options(rates, false);
    CLI::App* hardness = app.add_subcommand("hardness", "fixed-budget probes on hard instances");
    add_run_options(hardness, false);
    CLI::App* degeneracy =
        app.add_subcommand("degeneracy", "separating-hyperplane analysis with grid cross-check");
    add_run_options(degeneracy, false);
    CLI::App* gen = app.add_subcommand("gen-instance", "generate and serialize an instance");
    add_run_options(gen, false);

    CLI::App* validate = app.add_subcommand("validate", "validate an instance or trajectory file");
    std::string v_path, v_format = "mdp";
    int v_s = 0, v_a = 0, v_h = 0;
    validate->add_option("--path", v_path, "file to validate")->required();
    validate->add_option("--format", v_format, "mdp | linear | jsonl");
    validate->add_option("--S", v_s, "state count (jsonl)");
    validate->add_option("--A", v_a, "action count (jsonl)");
    validate->add_option("--H", v_h, "horizon (jsonl)");

    CLI11_PARSE(app, argc, argv);

    try {
        caty::json summary;
        if (validate->parsed()) {
            caty::Dims dims{v_s, v_a, v_h};
            summary = caty::run_validate(v_path, v_format,
                                         v_format == "jsonl" ? &dims : nullptr);
            std::cout << summary.dump(2) << std::endl;
            return summary.value("valid", false) ? 0 : 2;
        }
        std::string config_text = slurp(config_path);
        caty::ConfigDoc cfg = caty::ConfigDoc::parse(config_text);
        if (classify->parsed())
            summary = caty::run_classify_experiment(cfg, config_text, out_dir, threads, oracle);
        else if (rates->parsed())
            summary = caty::run_rates_experiment(cfg, config_text, out_dir, threads);
        else if (hardness->parsed())
            summary = caty::run_hardness_experiment(cfg, config_text, out_dir, threads);
        else if (degeneracy->parsed())
            summary = caty::run_degeneracy_experiment(cfg, config_text, out_dir, threads);
        else if (gen->parsed())
            summary = caty::run_gen_instance(cfg, config_text, out_dir);
        std::cout << summary.dump(2) << std::endl;
        return 0;
    } catch (const caty::ConfigError& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << std::endl;
        return 3;
    }
}
