#pragma once

// End-to-end experiment orchestration over a run directory:
//
//   <out>/manifest.json
//   <out>/library/     members, ground-truth parameters, test signals
//   <out>/topology/    reservoir parameters and checksum
//   <out>/features/    one flattened (r0, W_out) row per library member
//   <out>/autoencoder/ model, training report, library latents
//   <out>/fits/        one JSON record per test signal
//   <out>/reports/     scores, tables and plot CSVs (no timings)
//
// Every stage reads only persisted upstream artifacts, so any stage can be
// rerun in a fresh process.

#include "marc/config.hpp"
#include "marc/error.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace marc {

enum class Stage { generate, topology, train_rc, train_ae, fit, evaluate, report };

inline constexpr std::array<Stage, 7> kAllStages{Stage::generate, Stage::topology, Stage::train_rc, Stage::train_ae,
                                                 Stage::fit,      Stage::evaluate, Stage::report};

std::string_view to_string(Stage s);
Stage stage_from_string(std::string_view name);

struct StageRecord {
    bool completed = false;
    double seconds = 0.0;
    std::map<std::string, std::string> artifacts;  // run-relative path -> sha256
};

struct StageFailure {
    Stage stage = Stage::generate;
    std::string message;
};

struct RunManifest {
    std::string config_sha256;
    std::map<Stage, StageRecord> stages;
    std::optional<StageFailure> failure;

    bool completed(Stage s) const;
    /// True when every stage before `s` has completed.
    bool upstream_complete(Stage s) const;

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
};

/// Raised when a stage fails; carries the stage for the exit message.
class StageError : public Error {
public:
    StageError(Stage stage, const std::string& what);
    Stage stage() const noexcept { return stage_; }

private:
    Stage stage_;
};

class Pipeline {
public:
    /// Opens (or creates) config.output_dir. An existing manifest written
    /// for a different configuration is discarded along with its stages.
    explicit Pipeline(ExperimentConfig config);

    const ExperimentConfig& config() const noexcept { return config_; }
    const RunManifest& manifest() const noexcept { return manifest_; }
    const std::filesystem::path& root() const noexcept { return root_; }

    /// Runs one stage and invalidates everything downstream of it. Throws
    /// ManifestError if an upstream stage is missing, StageError on failure
    /// (the failure is recorded in the manifest first).
    void run(Stage stage);

    /// Runs every stage that is not already complete with intact artifacts.
    void run_all();

    /// True when the stage completed and its artifacts still match their checksums.
    bool verified(Stage stage) const;

private:
    void save_manifest() const;
    void record(Stage stage, double seconds, const std::vector<std::filesystem::path>& written);
    std::vector<std::filesystem::path> execute(Stage stage);

    std::vector<std::filesystem::path> stage_generate();
    std::vector<std::filesystem::path> stage_topology();
    std::vector<std::filesystem::path> stage_train_rc();
    std::vector<std::filesystem::path> stage_train_ae();
    std::vector<std::filesystem::path> stage_fit();
    std::vector<std::filesystem::path> stage_evaluate();
    std::vector<std::filesystem::path> stage_report();

    ExperimentConfig config_;
    std::filesystem::path root_;
    RunManifest manifest_;
};

/// run_all on a fresh or partially complete run directory.
RunManifest run_pipeline(const ExperimentConfig& config);

/// Reads the final summary of a completed run. Throws ManifestError when
/// the scoring stages have not completed.
nlohmann::json load_report(const std::filesystem::path& run_dir);

/// Reference scores printed next to the measured sine MSE.
inline constexpr double kMamlSineMse = 0.208;
inline constexpr double kMelaSineMse = 0.129;

}  // namespace marc
