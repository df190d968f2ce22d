// Command-line front end for the experiment pipeline.
//
//   marc pipeline --experiment sine --profile smoke --out runs/sine --jobs 4
//   marc fit --out runs/sine          (reuses runs/sine/config.json)

#include "marc/config.hpp"
#include "marc/harness.hpp"
#include "marc/io.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace {

namespace fs = std::filesystem;
using marc::Stage;

struct Options {
    std::string config_path;
    std::string out = "run";
    std::optional<std::uint64_t> seed;
    std::optional<std::string> profile;
    std::optional<std::string> experiment;
    std::optional<std::size_t> jobs;
};

marc::ExperimentConfig resolve(const Options& o) {
    marc::ExperimentConfig c;
    const fs::path saved = fs::path(o.out) / "config.json";
    if (!o.config_path.empty()) {
        nlohmann::json j = marc::io::read_json(o.config_path);
        if (o.profile) j["profile"] = *o.profile;
        if (o.experiment) {
            j["experiment"] = *o.experiment;
            if (j.contains("system")) j["system"]["family"] = *o.experiment;
        }
        c = marc::config_from_json(j);
    } else if (!o.profile && !o.experiment && fs::exists(saved)) {
        c = marc::config_from_json(marc::io::read_json(saved));
    } else {
        c = marc::make_profile(marc::profile_from_string(o.profile.value_or("paper")),
                               marc::family_from_string(o.experiment.value_or("sine")));
    }
    if (o.seed) c.seed = *o.seed;
    if (o.jobs) c.jobs = *o.jobs;
    c.output_dir = o.out;
    marc::apply_derived_fields(c);
    return c;
}

void run_stage(marc::Pipeline& p, Stage s) {
    std::fprintf(stderr, "[marc] %s ...\n", std::string(marc::to_string(s)).c_str());
    const auto t0 = std::chrono::steady_clock::now();
    p.run(s);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::fprintf(stderr, "[marc] %s done in %.1f s\n", std::string(marc::to_string(s)).c_str(), secs);
}

void print_summary(const marc::Pipeline& p) {
    std::cout << marc::io::read_text(p.root() / "reports" / "summary.md");
}

int execute(const std::string& command, const Options& o) {
    const marc::ExperimentConfig c = resolve(o);
    const marc::Diagnostics d = marc::validate_config(c);
    for (const auto& w : d.warnings) std::fprintf(stderr, "[marc] warning: %s\n", w.c_str());
    if (!d.ok()) {
        for (const auto& e : d.errors) std::fprintf(stderr, "[marc] config error: %s\n", e.c_str());
        return 2;
    }
    marc::Pipeline p(c);
    if (command == "pipeline") {
        for (Stage s : marc::kAllStages) {
            if (p.verified(s)) {
                std::fprintf(stderr, "[marc] %s up to date\n", std::string(marc::to_string(s)).c_str());
                continue;
            }
            run_stage(p, s);
        }
        print_summary(p);
    } else if (command == "train-rc") {
        if (!p.verified(Stage::topology)) run_stage(p, Stage::topology);
        run_stage(p, Stage::train_rc);
    } else {
        run_stage(p, marc::stage_from_string(command));
        if (command == "report") print_summary(p);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Meta-learning reservoir computing experiments"};
    app.require_subcommand(1);
    Options o;

    const std::vector<std::pair<std::string, std::string>> commands{
        {"generate", "sample the library and test signals"},
        {"train-rc", "build the reservoir and train one readout per library member"},
        {"train-ae", "train the autoencoder on the member features"},
        {"fit", "search the latent space for every test signal"},
        {"evaluate", "forecast and score every test signal"},
        {"report", "write the summary tables and plot data"},
        {"pipeline", "run every stage that is not already complete"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", o.config_path, "JSON configuration file")->check(CLI::ExistingFile);
        sub->add_option("--out", o.out, "run directory")->capture_default_str();
        sub->add_option("--seed", o.seed, "master seed");
        sub->add_option("--profile", o.profile, "paper or smoke")->check(CLI::IsMember({"paper", "smoke"}));
        sub->add_option("--experiment", o.experiment, "sine, lorenz or multimodal")
            ->check(CLI::IsMember({"sine", "lorenz", "lorenz63", "multimodal"}));
        sub->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
    }
    CLI11_PARSE(app, argc, argv);

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        return execute(command, o);
    } catch (const marc::StageError& e) {
        std::fprintf(stderr, "[marc] error: %s\n", e.what());
        return 1;
    } catch (const marc::ConfigError& e) {
        std::fprintf(stderr, "[marc] config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "[marc] error in %s: %s\n", command.c_str(), e.what());
        return 1;
    }
}
