#pragma once

// Experiment configuration: everything a run needs, derivable from one JSON
// document. Stage seeds are never stored; they are derived from the master
// seed by stage name (see stage_seed).

#include "marc/autoencoder.hpp"
#include "marc/dynamical_systems.hpp"
#include "marc/latent_search.hpp"
#include "marc/metrics.hpp"
#include "marc/reservoir.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace marc {

enum class Profile { paper, smoke };

std::string_view to_string(Profile p);
Profile profile_from_string(std::string_view name);

struct TestSignalConfig {
    std::size_t count = 100;        // number of test signals
    std::size_t observations = 10;  // |s|
    SampleMode mode = SampleMode::random_times;
};

/// Reference forecasters scored next to the latent fit (chaotic family only).
struct BaselineConfig {
    bool enabled = false;
    std::size_t members = 20;                // full-data member RCs
    std::size_t continuation_points = 5000;  // held-out truth after each member
};

struct ExperimentConfig {
    std::string experiment = "sine";
    Profile profile = Profile::paper;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    std::string output_dir = "run";

    SystemSpec system;
    ReservoirParams reservoir;
    TrainConfig training;
    AutoencoderConfig autoencoder;
    SearchConfig search;
    TestSignalConfig test;
    BaselineConfig baseline;
    ValidTimeSpec valid_time;

    Family family() const noexcept { return system.family; }
    /// "mse" for the analytic families, "valid_time" for Lorenz.
    std::string metric() const;
};

ExperimentConfig paper_profile(Family family);
ExperimentConfig smoke_profile(Family family);
ExperimentConfig make_profile(Profile profile, Family family);

/// Recomputes fields that follow from others: stage seeds, input
/// dimension and dt. Call after changing the master seed or sampling.
void apply_derived_fields(ExperimentConfig& c);

/// Stage seed: derive_seed(master, stage, index).
std::uint64_t stage_seed(const ExperimentConfig& c, std::string_view stage, std::uint64_t index = 0);

nlohmann::json to_json(const ExperimentConfig& c);
/// Fields absent from `j` keep their values from `base`.
/// Throws ConfigError on unknown keys or wrongly typed values.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base);
/// Reads "experiment"/"profile" from the document to choose the base profile.
ExperimentConfig config_from_json(const nlohmann::json& j);

struct Diagnostics {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;

    bool ok() const noexcept { return errors.empty(); }
};

/// Collects every configuration problem instead of stopping at the first.
Diagnostics validate_config(const ExperimentConfig& c);

}  // namespace marc
