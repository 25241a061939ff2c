#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "fdi/error.hpp"
#include "fdi/pipeline.hpp"

namespace {

enum Exit { kOk = 0, kInfeasible = 2, kSimulation = 3, kConfig = 4, kInternal = 1 };

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mismatch-robust attack detection filters for multi-area AGC"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "experiment";
    std::uint64_t seed = 0;
    std::string mode;
    int jobs = 0;
    bool dump = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "experiment directory");
        sub->add_option("--seed", seed, "top-level seed (overrides the config)");
        sub->add_option("--mode", mode, "design mode")->check(CLI::IsMember({"pure", "assisted"}));
        sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
        sub->add_flag("--dump-matrices", dump, "write A_c, B_cd, B_cf, C, D_f as CSV");
    };
    auto* pretrain = app.add_subcommand("pretrain", "solve LP_j and report gamma*_j");
    auto* train = app.add_subcommand("train", "paired simulations, mismatch signatures and Qbar");
    auto* design = app.add_subcommand("design", "solve the design programs and write the filter artifact");
    auto* test = app.add_subcommand("test", "held-out runs with and without the attack");
    auto* run_all = app.add_subcommand("run-all", "every phase in order");
    for (auto* sub : {pretrain, train, design, test, run_all}) add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        fdi::pipeline::Options opts;
        if (!mode.empty()) opts.mode = fdi::design::parse_mode(mode);
        for (auto* sub : app.get_subcommands()) {
            if (!sub->get_option("--seed")->empty()) opts.seed = seed;
        }
        if (jobs > 0) opts.jobs = jobs;
        opts.dump_matrices = dump;
        const auto cfg = fdi::pipeline::apply_options(fdi::config::load_experiment(config_path), opts);
        fdi::pipeline::prepare_directory(cfg, out_dir, dump);

        if (app.got_subcommand(pretrain)) {
            fdi::pipeline::cmd_pretrain(cfg, out_dir);
        } else if (app.got_subcommand(train)) {
            fdi::pipeline::cmd_train(cfg, out_dir);
        } else if (app.got_subcommand(design)) {
            fdi::pipeline::cmd_design(cfg, out_dir);
        } else if (app.got_subcommand(test)) {
            fdi::pipeline::cmd_test(cfg, out_dir);
        } else {
            fdi::pipeline::cmd_run_all(cfg, out_dir);
        }
    } catch (const fdi::InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return kInfeasible;
    } catch (const fdi::SimulationError& e) {
        std::cerr << "simulation failure: " << e.what() << "\n";
        return kSimulation;
    } catch (const fdi::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const fdi::DimensionError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInternal;
    }
    return kOk;
}
