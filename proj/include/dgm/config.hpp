#pragma once

// Experiment configuration: a flat INI-style file. Grammar (see docs/config.md):
//
//   file    := { line }
//   line    := blank | comment | section | entry
//   comment := ('#' | ';') text
//   section := '[' name ']'
//   entry   := key '=' value
//
// Keys are only valid inside their section; unknown sections or keys, repeated
// keys and malformed values raise ConfigError carrying the 1-based line.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "dgm/abc.hpp"
#include "dgm/chmc.hpp"
#include "dgm/models.hpp"

namespace dgm {

struct ModelConfig {
    // lotka-volterra | linear-gaussian | circle | toy1d
    std::string name = "lotka-volterra";
    LotkaVolterraSpec lotka_volterra;
    Vector weights{1.0, 1.0};
    double radius = 1.0;

    bool operator==(const ModelConfig&) const = default;
};

struct ExperimentConfig {
    ModelConfig model;
    // chmc | abc-reject | abc-mcmc | abc-input | abc-slice
    std::string method = "chmc";
    SamplerConfig sampler;
    AbcConfig abc;
    std::size_t n_samples = 1000;
    std::size_t burn_in = 0;
    std::uint64_t seed = 0;
    // Either a file path (resolved against the config file's directory) or
    // "simulate:<seed>".
    std::string observation = "simulate:1";
    std::filesystem::path output_dir = "out";
    // Known g_z at the data-generating inputs; filled automatically for
    // simulated observations.
    std::optional<Vector> truth;

    // Line of each "section.key" entry, for error messages raised after parsing.
    std::map<std::string, int> lines;

    void validate() const;
};

GeneratorModel build_model(const ModelConfig& cfg);

// Parses config text. Relative paths are resolved against base_dir.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

bool is_chmc(const ExperimentConfig& cfg);

}  // namespace dgm
