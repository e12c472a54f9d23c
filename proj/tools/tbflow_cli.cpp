// tbflow: command-line front end for the experiment pipelines.

#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <omp.h>

#include "CLI11.hpp"
#include "tbflow/experiments.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Boussinesq control experiments on the periodic square"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs, resolution;

    using Cmd = int (*)(const tbf::ExperimentConfig&);
    const std::map<std::string, std::pair<Cmd, std::string>> commands{
        {"geometry", {tbf::cmd_geometry, "covering, cutoffs, kappa, r and the flow identities"}},
        {"transport", {tbf::cmd_transport, "transport control synthesis, rearrangement and control contract"}},
        {"scaling", {tbf::cmd_scaling, "delta sweep of the scaled control against its limit system"}},
        {"lsc", {tbf::cmd_lsc, "large-data scaling limits"}},
        {"full", {tbf::cmd_full, "end-to-end temperature demo or the staged vorticity schedule"}},
        {"saturation", {tbf::cmd_saturation, "mode coverage of the quadratic saturation"}},
        {"selftest", {tbf::cmd_selftest, "quick solver, saturation and contract checks"}},
    };
    std::map<std::string, CLI::App*> subs;
    for (const auto& [name, entry] : commands) {
        CLI::App* sub = app.add_subcommand(name, entry.second);
        sub->add_option("--config", config_path, "JSON configuration")->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "signal seed");
        sub->add_option("--jobs", jobs, "worker count")->check(CLI::PositiveNumber);
        sub->add_option("--resolution", resolution, "grid resolution N")->check(CLI::PositiveNumber);
        subs[name] = sub;
    }
    CLI11_PARSE(app, argc, argv);

    try {
        tbf::ExperimentConfig cfg =
            config_path.empty() ? tbf::ExperimentConfig::defaults() : tbf::ExperimentConfig::load(config_path);
        if (seed) cfg.seed = *seed;
        if (jobs) cfg.jobs = *jobs;
        if (resolution) cfg.N = *resolution;
        for (const auto& [name, sub] : subs)
            if (sub->parsed()) {
                if (!out_dir.empty()) cfg.out = out_dir;
                else if (config_path.empty()) cfg.out = "runs/" + name;
                cfg.validate();
                omp_set_num_threads(cfg.jobs);
                return commands.at(name).first(cfg);
            }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
