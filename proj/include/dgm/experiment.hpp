#pragma once

// Experiment runner behind the dgm command-line tool. Each cmd_* function
// returns a process exit code and reports to the given streams instead of
// throwing, so it can be driven from tests.
//
// Output files of one inference run (schemas in docs/outputs.md):
//   chain.csv   stored samples of g_z with per-transition flags
//   stats.csv   per-parameter posterior summaries
//   rmse.csv    error of the running posterior mean (truth known only)
//   timing.csv  wall time and ESS per second
// Everything except timing.csv is a pure function of (config, seed).

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dgm/chain.hpp"
#include "dgm/config.hpp"
#include "dgm/diagnostics.hpp"

namespace dgm {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;
inline constexpr int usage = 2;
inline constexpr int initialization_failed = 3;
inline constexpr int zero_acceptance = 4;
}  // namespace exit_code

struct SimulatedData {
    Vector u;
    Vector z;
    Observation obs;
};

// Draws a synthetic data set. Lotka-Volterra uses the reference rates with
// noise increments from Rng(seed); the circle observes radius^2 (u and z are
// then left empty); the other models draw u from their base density.
SimulatedData simulate_data(const ModelConfig& model, std::uint64_t seed);

struct ResolvedObservation {
    Observation obs;
    std::optional<Vector> truth;
};

ResolvedObservation resolve_observation(const ExperimentConfig& cfg, const GeneratorModel& model);

// Runs the configured method with the given seed.
SampleChain run_method(const ExperimentConfig& cfg, const GeneratorModel& model, const Observation& obs,
                       std::uint64_t seed);

struct InferResult {
    SampleChain chain;
    ChainStats stats;
    std::optional<Vector> truth;
};

// Throws ConfigError, InitializationFailed and IO errors.
InferResult run_infer(const ExperimentConfig& cfg);
void write_infer_outputs(const std::filesystem::path& dir, const InferResult& result);

struct SimulateOptions {
    std::optional<std::filesystem::path> config;
    std::string model = "lotka-volterra";
    std::optional<std::size_t> steps;
    std::uint64_t seed = 1;
    std::filesystem::path output_dir = "simulated";
};

struct InferOptions {
    std::filesystem::path config;
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> output_dir;
};

struct CompareOptions {
    std::vector<std::filesystem::path> configs;
    std::size_t runs = 10;
    std::optional<std::uint64_t> seed;
    std::filesystem::path output_dir = "compare";
    std::size_t jobs = 1;
};

int cmd_simulate(const SimulateOptions& opts, std::ostream& out, std::ostream& err);
int cmd_infer(const InferOptions& opts, std::ostream& out, std::ostream& err);
int cmd_compare(const CompareOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace dgm
