#include "marc/error.hpp"
#include "marc/harness.hpp"
#include "marc/io.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>

namespace {

using namespace marc;
namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("marc_harness_" + name);
    fs::remove_all(p);
    return p;
}

ExperimentConfig tiny(Family family, const fs::path& out) {
    ExperimentConfig c = smoke_profile(family);
    c.output_dir = out.string();
    c.reservoir.nodes = 30;
    c.reservoir.mean_degree = 5.0;
    c.system.sample_count = 12;
    c.autoencoder.hidden = {16, 8};
    c.autoencoder.latent_dim = 2;
    c.autoencoder.epoch_cap = 60;
    c.test.count = 2;
    c.search.annealing.max_iterations = 3;
    c.search.annealing.local.max_evaluations = 40;
    if (family == Family::lorenz63) {
        c.system.sampling.points = 1200;
        c.system.sampling.eval_end = 0.01 * 1199;
        c.system.spin_up = 5.0;
        c.baseline.members = 2;
        c.baseline.continuation_points = 300;
    }
    apply_derived_fields(c);
    return c;
}

std::map<std::string, std::string> read_tree(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files[fs::relative(e.path(), dir).generic_string()] = io::read_text(e.path());
    return files;
}

TEST(Harness, StageNamesRoundTrip) {
    for (Stage s : kAllStages) EXPECT_EQ(stage_from_string(to_string(s)), s);
    EXPECT_THROW(stage_from_string("train"), ConfigError);
}

TEST(Harness, SinePipelineCompletesAndReports) {
    const fs::path out = scratch("sine");
    const RunManifest m = run_pipeline(tiny(Family::sine, out));
    for (Stage s : kAllStages) EXPECT_TRUE(m.completed(s)) << to_string(s);
    EXPECT_FALSE(m.failure.has_value());

    const nlohmann::json r = load_report(out);
    EXPECT_EQ(r.at("metric"), "mse");
    EXPECT_EQ(r.at("test_signals"), 2);
    EXPECT_DOUBLE_EQ(r.at("comparison").at("MAML").get<double>(), 0.208);
    EXPECT_DOUBLE_EQ(r.at("comparison").at("MeLA").get<double>(), 0.129);
    for (const char* f : {"reports/summary.md", "reports/latent_pca.csv", "reports/loss_vs_metric.csv",
                          "reports/forecasts/signal_0000.csv", "fits/signal_0001.json", "topology/topology.json",
                          "autoencoder/model.bin", "features/features.bin", "library/members.bin"})
        EXPECT_TRUE(fs::exists(out / f)) << f;
}

TEST(Harness, SameSeedGivesByteIdenticalReports) {
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    ExperimentConfig cb = tiny(Family::sine, b);
    cb.jobs = 2;  // scheduling must not leak into results
    run_pipeline(tiny(Family::sine, a));
    run_pipeline(cb);
    EXPECT_EQ(read_tree(a / "reports"), read_tree(b / "reports"));
    EXPECT_EQ(read_tree(a / "fits"), read_tree(b / "fits"));
}

TEST(Harness, DifferentSeedChangesResults) {
    const fs::path a = scratch("seed_a"), b = scratch("seed_b");
    ExperimentConfig cb = tiny(Family::sine, b);
    cb.seed = 1;
    apply_derived_fields(cb);
    run_pipeline(tiny(Family::sine, a));
    run_pipeline(cb);
    EXPECT_NE(io::read_text(a / "reports/scores.json"), io::read_text(b / "reports/scores.json"));
}

TEST(Harness, DeletedDownstreamArtifactsAreRebuiltIdentically) {
    const fs::path out = scratch("resume");
    const ExperimentConfig c = tiny(Family::sine, out);
    run_pipeline(c);
    const auto reports = read_tree(out / "reports");
    const auto fits = read_tree(out / "fits");
    const std::string library_sha = Pipeline(c).manifest().stages.at(Stage::generate).artifacts.at("library/members.bin");

    fs::remove_all(out / "fits");
    fs::remove_all(out / "reports");
    Pipeline p(c);
    EXPECT_TRUE(p.verified(Stage::train_ae));
    EXPECT_FALSE(p.verified(Stage::fit));
    p.run_all();
    EXPECT_EQ(read_tree(out / "reports"), reports);
    EXPECT_EQ(read_tree(out / "fits"), fits);
    EXPECT_EQ(p.manifest().stages.at(Stage::generate).artifacts.at("library/members.bin"), library_sha);
}

TEST(Harness, TamperedArtifactFailsVerification) {
    const fs::path out = scratch("tamper");
    const ExperimentConfig c = tiny(Family::sine, out);
    run_pipeline(c);
    {
        std::ofstream f(out / "topology/topology.json", std::ios::app);
        f << " ";
    }
    Pipeline p(c);
    EXPECT_TRUE(p.verified(Stage::generate));
    EXPECT_FALSE(p.verified(Stage::topology));
}

TEST(Harness, RerunningAStageInvalidatesDownstream) {
    const fs::path out = scratch("invalidate");
    const ExperimentConfig c = tiny(Family::sine, out);
    run_pipeline(c);
    Pipeline p(c);
    p.run(Stage::train_ae);
    EXPECT_TRUE(p.manifest().completed(Stage::train_ae));
    EXPECT_FALSE(p.manifest().completed(Stage::fit));
    EXPECT_FALSE(p.manifest().completed(Stage::report));
    EXPECT_TRUE(p.manifest().completed(Stage::train_rc));
}

TEST(Harness, StageOutOfOrderIsRejected) {
    const fs::path out = scratch("order");
    Pipeline p(tiny(Family::sine, out));
    EXPECT_THROW(p.run(Stage::fit), ManifestError);
    p.run(Stage::generate);
    EXPECT_THROW(p.run(Stage::train_rc), ManifestError);
}

TEST(Harness, ReportOfIncompleteRunIsAnError) {
    const fs::path out = scratch("incomplete");
    Pipeline p(tiny(Family::sine, out));
    p.run(Stage::generate);
    EXPECT_THROW(load_report(out), ManifestError);
    EXPECT_THROW(load_report(scratch("missing")), ManifestError);
}

TEST(Harness, FailureIsRecordedWithItsStage) {
    const fs::path out = scratch("failure");
    const ExperimentConfig c = tiny(Family::sine, out);
    Pipeline p(c);
    p.run(Stage::generate);
    p.run(Stage::topology);
    p.run(Stage::train_rc);
    io::write_text(out / "features/features.bin", "not a matrix\n");
    try {
        p.run(Stage::train_ae);
        FAIL() << "expected StageError";
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), Stage::train_ae);
        EXPECT_NE(std::string(e.what()).find("train-ae"), std::string::npos);
    }
    const RunManifest m = RunManifest::from_json(io::read_json(out / "manifest.json"));
    ASSERT_TRUE(m.failure.has_value());
    EXPECT_EQ(m.failure->stage, Stage::train_ae);
    EXPECT_FALSE(m.completed(Stage::train_ae));
}

TEST(Harness, ChangedConfigurationStartsAFreshManifest) {
    const fs::path out = scratch("reconfig");
    ExperimentConfig c = tiny(Family::sine, out);
    Pipeline(c).run(Stage::generate);
    EXPECT_TRUE(Pipeline(c).manifest().completed(Stage::generate));
    c.training.alpha = 1e-3;
    EXPECT_FALSE(Pipeline(c).manifest().completed(Stage::generate));
}

TEST(Harness, InvalidConfigurationIsRejectedUpFront) {
    ExperimentConfig c = tiny(Family::sine, scratch("invalid"));
    c.training.alpha = -1.0;
    EXPECT_THROW(Pipeline{c}, ConfigError);
}

TEST(Harness, LorenzPipelineScoresBaselines) {
    const fs::path out = scratch("lorenz");
    run_pipeline(tiny(Family::lorenz63, out));
    const nlohmann::json r = load_report(out);
    EXPECT_EQ(r.at("metric"), "valid_time");
    const nlohmann::json b = io::read_json(out / "reports/baselines.json");
    EXPECT_EQ(b.at("full_data_member").at("count"), 2);
    EXPECT_EQ(b.at("observations_only").at("count"), 2);
    for (const auto& v : b.at("full_data_member").at("values")) EXPECT_GE(v.get<double>(), 0.0);
    // forecasts are scored from the last observation onwards
    const std::string csv = io::read_text(out / "reports/forecasts/signal_0000.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,truth_0,truth_1,truth_2,forecast_0,forecast_1,forecast_2");
    EXPECT_NEAR(std::stod(csv.substr(csv.find('\n') + 1)), 0.09, 1e-12);
}

}  // namespace
