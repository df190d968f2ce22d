#include "marc/dynamical_systems.hpp"
#include "marc/error.hpp"
#include "marc/latent_search.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <memory>

namespace {

using namespace marc;

// A small but complete trained pipeline shared by the tests below.
class LatentSearch : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        ReservoirParams rp;
        rp.nodes = 40;
        rp.mean_degree = 6.0;
        rp.seed = 31;
        topology_ = std::make_unique<ReservoirTopology>(ReservoirTopology::build(rp));

        SystemSpec spec = SystemSpec::sine_default();
        spec.sample_count = 24;
        spec.rng_seed = 8;
        const LibraryBundle lib = generate_sine_library(spec);
        TrainConfig tc;
        tc.dt = spec.sampling.dt();
        dt_ = tc.dt;
        features_ = RowMatrix(24, 80);
        for (std::size_t i = 0; i < 24; ++i) {
            const auto m = train_member(*topology_, lib.members[i], tc);
            features_.row(static_cast<Eigen::Index>(i)) = m.features.flatten().transpose();
            start_time_ = m.start_time;
        }
        AutoencoderConfig ac;
        ac.hidden = {24, 12};
        ac.latent_dim = 2;
        ac.learning_rate = 1e-3;
        ac.epoch_cap = 300;
        ac.seed = 4;
        model_ = std::make_unique<AutoencoderModel>(train_autoencoder(features_, ac).model);
        latents_ = model_->encode(features_);
    }
    static void TearDownTestSuite() {
        topology_.reset();
        model_.reset();
    }

    static SearchConfig config(std::uint64_t seed, std::size_t iterations = 30) {
        SearchConfig c;
        c.seed = seed;
        c.annealing.max_iterations = iterations;
        return c;
    }

    // Observations generated by decoding `e` and predicting at `times`.
    static FitProblem planted(const Vector& e, const std::vector<double>& times) {
        FitProblem p;
        p.start_time = start_time_;
        p.dt = dt_;
        p.observed = TimeSeries(times, RowMatrix::Zero(static_cast<Eigen::Index>(times.size()), 1));
        const LatentObjective obj(*model_, *topology_, p);
        p.observed = TimeSeries(times, predict_at(*topology_, obj.features(as_span(e)), start_time_, times, dt_));
        return p;
    }

    static std::unique_ptr<ReservoirTopology> topology_;
    static std::unique_ptr<AutoencoderModel> model_;
    static RowMatrix features_;
    static RowMatrix latents_;
    static double dt_;
    static double start_time_;
};

std::unique_ptr<ReservoirTopology> LatentSearch::topology_;
std::unique_ptr<AutoencoderModel> LatentSearch::model_;
RowMatrix LatentSearch::features_;
RowMatrix LatentSearch::latents_;
double LatentSearch::dt_ = 0.0;
double LatentSearch::start_time_ = 0.0;

const std::vector<double> kTimes{-4.2, -3.1, -2.05, -1.0, 0.3, 1.1, 2.0, 2.9, 3.7, 4.8};

TEST(LatentBounds, ExpandByHalfTheRange) {
    RowMatrix l(3, 2);
    l << 0.2, 0.5, 0.4, 0.5, 0.3, 0.5;
    const Bounds b = latent_bounds(l, 0.5);
    EXPECT_NEAR(b.lower(0), 0.1, 1e-15);
    EXPECT_NEAR(b.upper(0), 0.5, 1e-15);
    EXPECT_LT(b.lower(1), 0.5);
    EXPECT_GT(b.upper(1), 0.5);
    EXPECT_NO_THROW(b.validate());
}

TEST_F(LatentSearch, OwnPredictionHasZeroLoss) {
    const Vector e = latents_.row(3).transpose();
    const FitProblem p = planted(e, kTimes);
    const LatentObjective obj(*model_, *topology_, p);
    EXPECT_EQ(obj(as_span(e)), 0.0);
}

TEST_F(LatentSearch, DivergentDecodingMapsToSentinel) {
    AutoencoderModel broken = *model_;
    broken.layers().back().bias.setConstant(1e300);
    FitProblem p = planted(latents_.row(0).transpose(), kTimes);
    const LatentObjective obj(broken, *topology_, p);
    const Vector e = latents_.row(0).transpose();
    EXPECT_EQ(obj(as_span(e)), kDivergenceSentinel);
}

TEST_F(LatentSearch, RecoversAPlantedLatent) {
    const Bounds b = latent_bounds(latents_, 0.5);
    Vector e = 0.3 * b.lower + 0.7 * b.upper;
    const FitProblem p = planted(e, kTimes);
    const FitResult r = fit(*model_, *topology_, p, config(5, 100), &latents_);
    EXPECT_LE(r.loss, 1e-6);
}

TEST_F(LatentSearch, FitIsDeterministicAndNeverWorseThanItsSeed) {
    const FitProblem p = planted(latents_.row(7).transpose() * 1.01, kTimes);
    const FitResult a = fit(*model_, *topology_, p, config(9), &latents_);
    const FitResult b = fit(*model_, *topology_, p, config(9), &latents_);
    EXPECT_EQ(a.e_hat, b.e_hat);
    EXPECT_EQ(a.loss, b.loss);
    EXPECT_EQ(a.evaluations, b.evaluations);
    EXPECT_LE(a.loss, a.start_loss);
    for (std::size_t i = 1; i < a.trace.size(); ++i) EXPECT_LE(a.trace[i], a.trace[i - 1]);
    const LatentObjective obj(*model_, *topology_, p);
    EXPECT_EQ(obj(as_span(a.e_hat)), a.loss);
    EXPECT_EQ(a.features_hat.flatten(), model_->decode(as_span(a.e_hat)));
}

TEST_F(LatentSearch, ForecastStartsAtTheWindowStart) {
    const FitProblem p = planted(latents_.row(2).transpose(), kTimes);
    const FitResult r = fit(*model_, *topology_, p, config(2, 5), &latents_);
    EXPECT_TRUE(forecast(*topology_, r, start_time_, {}, dt_).is_empty());
    const std::vector<double> horizon{start_time_, 0.0, 5.0};
    const TimeSeries f = forecast(*topology_, r, start_time_, horizon, dt_);
    EXPECT_EQ(f.size(), 3u);
    EXPECT_NEAR(f.values()(0, 0), r.features_hat.w_out.row(0).dot(r.features_hat.r0), 1e-12);
}

TEST_F(LatentSearch, RejectsMismatchedProblems) {
    FitProblem p;
    p.start_time = 0.0;
    p.dt = dt_;
    p.observed = TimeSeries({0.0, 1.0}, RowMatrix::Zero(2, 3));
    EXPECT_THROW(LatentObjective(*model_, *topology_, p), DimensionError);
    p.observed = TimeSeries::empty(1);
    EXPECT_THROW(LatentObjective(*model_, *topology_, p), ConfigError);
    p.observed = TimeSeries({0.0, 1.0}, RowMatrix::Zero(2, 1));
    EXPECT_THROW(fit(*model_, *topology_, p, config(1), nullptr), ConfigError);
}

}  // namespace
