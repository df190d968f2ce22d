#include "marc/config.hpp"
#include "marc/error.hpp"

#include <gtest/gtest.h>

#include <algorithm>

namespace {

using namespace marc;

bool mentions(const std::vector<std::string>& messages, std::string_view needle) {
    return std::any_of(messages.begin(), messages.end(), [&](const std::string& m) { return m.find(needle) != std::string::npos; });
}

TEST(Profiles, SineDefaults) {
    const ExperimentConfig c = paper_profile(Family::sine);
    EXPECT_EQ(c.system.sample_count, 100u);
    EXPECT_EQ(c.reservoir.nodes, 1000u);
    EXPECT_DOUBLE_EQ(c.reservoir.mean_degree, 100.0);
    EXPECT_DOUBLE_EQ(c.reservoir.spectral_radius, 1.0);
    EXPECT_DOUBLE_EQ(c.reservoir.input_scale, 1.0);
    EXPECT_DOUBLE_EQ(c.reservoir.bias_scale, 1.5);
    EXPECT_DOUBLE_EQ(c.reservoir.time_constant, 1.0);
    EXPECT_DOUBLE_EQ(c.training.alpha, 5e-6);
    EXPECT_DOUBLE_EQ(c.training.warmup, 1.0);
    EXPECT_EQ(c.autoencoder.hidden, (std::vector<std::size_t>{200, 200}));
    EXPECT_EQ(c.autoencoder.latent_dim, 4u);
    EXPECT_EQ(c.test.observations, 10u);
    EXPECT_EQ(c.test.count, 100u);
    EXPECT_EQ(c.metric(), "mse");
}

TEST(Profiles, LorenzDefaults) {
    const ExperimentConfig c = paper_profile(Family::lorenz63);
    EXPECT_EQ(c.system.sample_count, 1000u);
    EXPECT_EQ(c.system.sampling.points, 5000u);
    EXPECT_EQ(c.reservoir.nodes, 1000u);
    EXPECT_DOUBLE_EQ(c.reservoir.mean_degree, 100.0);
    EXPECT_DOUBLE_EQ(c.reservoir.spectral_radius, 0.8);
    EXPECT_DOUBLE_EQ(c.reservoir.input_scale, 0.05);
    EXPECT_DOUBLE_EQ(c.reservoir.bias_scale, 0.5);
    EXPECT_DOUBLE_EQ(c.training.alpha, 5e-4);
    EXPECT_DOUBLE_EQ(c.training.warmup, 10.0);
    EXPECT_EQ(c.autoencoder.hidden, (std::vector<std::size_t>{600, 200}));
    EXPECT_EQ(c.autoencoder.latent_dim, 7u);
    EXPECT_EQ(c.reservoir.input_dim, 3u);
    EXPECT_EQ(c.test.count, 20u);
    EXPECT_EQ(c.test.mode, SampleMode::sequential);
    EXPECT_TRUE(c.baseline.enabled);
    EXPECT_EQ(c.metric(), "valid_time");
}

TEST(Profiles, MultimodalChangesOnlyLatentWidth) {
    const ExperimentConfig s = paper_profile(Family::sine);
    const ExperimentConfig m = paper_profile(Family::multimodal);
    EXPECT_EQ(m.reservoir.nodes, s.reservoir.nodes);
    EXPECT_DOUBLE_EQ(m.reservoir.bias_scale, s.reservoir.bias_scale);
    EXPECT_DOUBLE_EQ(m.training.alpha, s.training.alpha);
    EXPECT_EQ(m.autoencoder.hidden, s.autoencoder.hidden);
    EXPECT_EQ(m.autoencoder.latent_dim, 7u);
    EXPECT_EQ(m.system.sample_count, 1000u);
    EXPECT_EQ(m.test.count, 200u);
}

TEST(Profiles, EveryProfileValidates) {
    for (Profile p : {Profile::paper, Profile::smoke})
        for (Family f : {Family::sine, Family::lorenz63, Family::multimodal}) {
            const Diagnostics d = validate_config(make_profile(p, f));
            EXPECT_TRUE(d.ok()) << to_string(p) << "/" << to_string(f) << ": " << (d.errors.empty() ? "" : d.errors.front());
        }
}

TEST(Profiles, StageSeedsFollowMasterSeed) {
    ExperimentConfig a = paper_profile(Family::sine);
    ExperimentConfig b = a;
    b.seed = 99;
    apply_derived_fields(b);
    EXPECT_NE(a.reservoir.seed, b.reservoir.seed);
    EXPECT_NE(a.system.rng_seed, b.system.rng_seed);
    EXPECT_NE(a.autoencoder.seed, b.autoencoder.seed);
    EXPECT_NE(stage_seed(a, "fit", 0), stage_seed(a, "fit", 1));
    EXPECT_NE(stage_seed(a, "fit", 0), stage_seed(a, "test-signal", 0));
    EXPECT_EQ(stage_seed(a, "fit", 3), stage_seed(paper_profile(Family::sine), "fit", 3));
}

TEST(ConfigJson, RoundTripPreservesEveryField) {
    for (Family f : {Family::sine, Family::lorenz63, Family::multimodal}) {
        ExperimentConfig c = smoke_profile(f);
        c.seed = 17;
        c.jobs = 3;
        apply_derived_fields(c);
        const nlohmann::json j = to_json(c);
        EXPECT_EQ(to_json(config_from_json(j)), j);
    }
}

TEST(ConfigJson, PartialDocumentOverridesProfile) {
    const nlohmann::json j = nlohmann::json::parse(R"({"experiment": "lorenz", "profile": "smoke", "seed": 5,
        "reservoir": {"nodes": 64}, "training": {"alpha": 0.001}})");
    const ExperimentConfig c = config_from_json(j);
    EXPECT_EQ(c.family(), Family::lorenz63);
    EXPECT_EQ(c.profile, Profile::smoke);
    EXPECT_EQ(c.reservoir.nodes, 64u);
    EXPECT_DOUBLE_EQ(c.training.alpha, 1e-3);
    EXPECT_DOUBLE_EQ(c.reservoir.spectral_radius, 0.8);
    EXPECT_EQ(c.reservoir.seed, stage_seed(c, "topology"));
}

TEST(ConfigJson, UnknownKeysAreRejected) {
    EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"reservoir": {"node": 10}})")), ConfigError);
    EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"colour": 1})")), ConfigError);
    EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"search": {"nelder_mead": {"tol": 1}}})")), ConfigError);
}

TEST(ConfigJson, WrongTypesAreRejected) {
    EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"reservoir": {"nodes": "many"}})")), ConfigError);
    EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"profile": "huge"})")), ConfigError);
    EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"test": {"mode": "shuffled"}})")), ConfigError);
}

TEST(ValidateConfig, SineWithTenObservationsHasNoWarning) {
    const Diagnostics d = validate_config(paper_profile(Family::sine));
    EXPECT_TRUE(d.ok());
    EXPECT_TRUE(d.warnings.empty());
}

TEST(ValidateConfig, LorenzWithOneObservationWarns) {
    ExperimentConfig c = paper_profile(Family::lorenz63);
    c.test.observations = 1;
    const Diagnostics d = validate_config(c);
    ASSERT_FALSE(d.warnings.empty());
    EXPECT_TRUE(mentions(d.warnings, "underdetermined"));
}

TEST(ValidateConfig, LorenzWithTwoObservationsStillWarns) {
    ExperimentConfig c = paper_profile(Family::lorenz63);
    c.test.observations = 2;  // 6 observed scalars, 6 unknowns
    const Diagnostics d = validate_config(c);
    EXPECT_TRUE(d.ok());
    EXPECT_EQ(d.warnings.size(), 1u);
}

TEST(ValidateConfig, NegativeAlphaIsAnError) {
    ExperimentConfig c = paper_profile(Family::sine);
    c.training.alpha = -1.0;
    const Diagnostics d = validate_config(c);
    EXPECT_FALSE(d.ok());
    EXPECT_TRUE(mentions(d.errors, "alpha"));
}

TEST(ValidateConfig, CollectsSeveralErrors) {
    ExperimentConfig c = paper_profile(Family::sine);
    c.training.alpha = -1.0;
    c.reservoir.nodes = 0;
    c.autoencoder.learning_rate = 0.0;
    c.jobs = 0;
    EXPECT_GE(validate_config(c).errors.size(), 4u);
}

TEST(ValidateConfig, WarmupLongerThanMemberIsAnError) {
    ExperimentConfig c = smoke_profile(Family::sine);
    c.training.warmup = 20.0;
    EXPECT_FALSE(validate_config(c).ok());
}

TEST(ValidateConfig, MismatchedExperimentNameIsAnError) {
    ExperimentConfig c = paper_profile(Family::sine);
    c.experiment = "lorenz";
    EXPECT_FALSE(validate_config(c).ok());
}

}  // namespace
