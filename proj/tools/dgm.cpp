#include <CLI11.hpp>

#include <iostream>

#include "dgm/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Constrained HMC and ABC inference for differentiable generative models"};
    app.require_subcommand(1);

    dgm::SimulateOptions sim;
    std::string sim_config;
    std::size_t sim_steps = 0;
    auto* simulate = app.add_subcommand("simulate", "Draw a synthetic data set with known parameters");
    simulate->add_option("--config", sim_config, "Take the [model] section from this config");
    simulate->add_option("--model", sim.model, "lotka-volterra | linear-gaussian | circle | toy1d")
        ->capture_default_str();
    auto* steps_opt = simulate->add_option("--steps", sim_steps, "Lotka-Volterra time steps");
    simulate->add_option("--seed", sim.seed, "Noise seed")->capture_default_str();
    simulate->add_option("--output-dir", sim.output_dir, "Directory for the CSV files")->capture_default_str();

    dgm::InferOptions inf;
    std::uint64_t inf_seed = 0;
    std::string inf_out;
    auto* infer = app.add_subcommand("infer", "Run one sampler from a config file");
    infer->add_option("--config", inf.config, "Experiment config")->required();
    auto* inf_seed_opt = infer->add_option("--seed", inf_seed, "Override [run] seed");
    auto* inf_out_opt = infer->add_option("--output-dir", inf_out, "Override [run] output_dir");

    dgm::CompareOptions cmp;
    std::uint64_t cmp_seed = 0;
    auto* compare = app.add_subcommand("compare", "Repeat several configs over seeds and merge ESS/sec");
    compare->add_option("--config", cmp.configs, "Experiment configs (repeat or list)")->required();
    compare->add_option("--runs", cmp.runs, "Runs per config, seeds seed..seed+runs-1")->capture_default_str();
    auto* cmp_seed_opt = compare->add_option("--seed", cmp_seed, "Override each config's base seed");
    compare->add_option("--output-dir", cmp.output_dir, "Directory for per-run outputs and compare.csv")
        ->capture_default_str();
    compare->add_option("--jobs", cmp.jobs, "Worker threads")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : dgm::exit_code::usage;
    }

    if (*simulate) {
        if (!sim_config.empty()) sim.config = sim_config;
        if (*steps_opt) sim.steps = sim_steps;
        return dgm::cmd_simulate(sim, std::cout, std::cerr);
    }
    if (*infer) {
        if (*inf_seed_opt) inf.seed = inf_seed;
        if (*inf_out_opt) inf.output_dir = inf_out;
        return dgm::cmd_infer(inf, std::cout, std::cerr);
    }
    if (*cmp_seed_opt) cmp.seed = cmp_seed;
    return dgm::cmd_compare(cmp, std::cout, std::cerr);
}
