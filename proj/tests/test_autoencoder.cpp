#include "marc/autoencoder.hpp"
#include "marc/error.hpp"
#include "marc/io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

namespace {

using namespace marc;

RowMatrix random_features(Eigen::Index rows, Eigen::Index cols, unsigned seed) {
    std::srand(seed);
    return RowMatrix::Random(rows, cols) * 3.0;
}

AutoencoderConfig tiny_config() {
    AutoencoderConfig c;
    c.hidden = {6, 4};
    c.latent_dim = 2;
    c.seed = 5;
    return c;
}

TEST(Normalizer, MapsRangeOntoInnerUnitInterval) {
    RowMatrix x(3, 2);
    x << -2, 3.7, 2, 3.7, 0, 3.7;
    const Normalizer n = Normalizer::fit(x);
    const RowMatrix y = n.forward(x);
    EXPECT_NEAR(y(0, 0), 0.1, 1e-15);
    EXPECT_NEAR(y(1, 0), 0.9, 1e-15);
    EXPECT_NEAR(y(2, 0), 0.5, 1e-15);
    for (int r = 0; r < 3; ++r) EXPECT_EQ(y(r, 1), 0.5);
    const RowMatrix back = n.inverse(y);
    for (int r = 0; r < 3; ++r) EXPECT_EQ(back(r, 1), 3.7);
}

TEST(Normalizer, RoundTripIsIdentity) {
    const RowMatrix x = random_features(40, 25, 1);
    const Normalizer n = Normalizer::fit(x);
    EXPECT_LT((n.inverse(n.forward(x)) - x).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Normalizer, RejectsBadInput) {
    EXPECT_THROW(Normalizer::fit(RowMatrix::Zero(1, 3)), DataError);
    RowMatrix x = RowMatrix::Zero(4, 3);
    x(1, 1) = std::nan("");
    EXPECT_THROW(Normalizer::fit(x), DataError);
}

TEST(Autoencoder, LayerDimsMirrorTheEncoder) {
    AutoencoderConfig c;
    c.latent_dim = 7;
    c.hidden = {600, 200};
    const std::vector<std::size_t> want{4000, 600, 200, 7, 200, 600, 4000};
    EXPECT_EQ(c.layer_dims(4000), want);
    const auto m = AutoencoderModel::initialize({8, 6, 4, 2, 4, 6, 8}, WeightInit::glorot_uniform, 1);
    ASSERT_EQ(m.layers().size(), 6u);
    for (std::size_t l = 0; l < 5; ++l) EXPECT_EQ(m.layers()[l].activation, Activation::sigmoid);
    EXPECT_EQ(m.layers()[5].activation, Activation::linear);
    EXPECT_EQ(m.latent_dim(), 2u);
    EXPECT_EQ(m.input_dim(), 8u);
    for (const auto& l : m.layers()) {
        const double limit = std::sqrt(6.0 / static_cast<double>(l.inputs() + l.outputs()));
        EXPECT_LE(l.weights.cwiseAbs().maxCoeff(), limit);
        EXPECT_EQ(l.bias.cwiseAbs().maxCoeff(), 0.0);
    }
}

TEST(Autoencoder, GradientMatchesCentralDifferences) {
    AutoencoderModel m = AutoencoderModel::initialize({8, 6, 4, 2, 4, 6, 8}, WeightInit::glorot_uniform, 17);
    std::srand(4);
    Vector p = m.parameters();
    p += 0.3 * Vector::Random(p.size());  // non-zero biases, away from the symmetric start
    m.set_parameters(as_span(p));
    const RowMatrix x = (RowMatrix::Random(5, 8).array() * 0.4 + 0.5).matrix();

    Vector g;
    reconstruction_loss(m, x, &g);
    const double h = 1e-5;
    Vector fd(p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        Vector q = p;
        q(i) = p(i) + h;
        m.set_parameters(as_span(q));
        const double up = reconstruction_loss(m, x, nullptr);
        q(i) = p(i) - h;
        m.set_parameters(as_span(q));
        const double down = reconstruction_loss(m, x, nullptr);
        fd(i) = (up - down) / (2.0 * h);
    }
    EXPECT_LT((g - fd).norm() / g.norm(), 1e-5);
    for (Eigen::Index i = 0; i < p.size(); ++i)
        EXPECT_LT(std::abs(g(i) - fd(i)), 1e-5 * std::max(std::abs(fd(i)), 1e-3)) << "parameter " << i;
}

TEST(Autoencoder, ZeroInitialisedNetworkReconstructsAConstant) {
    AutoencoderConfig c = tiny_config();
    c.init = WeightInit::zeros;
    c.epoch_cap = 1;
    const RowMatrix x = random_features(20, 8, 2);
    const auto trained = train_autoencoder(x, c);
    EXPECT_EQ(trained.report.epochs, 1u);
    RowMatrix out(20, 8);
    for (Eigen::Index r = 0; r < 20; ++r) {
        const Vector e = trained.model.encode(row_span(x, r));
        out.row(r) = trained.model.decode(as_span(e)).transpose();
    }
    for (Eigen::Index r = 1; r < 20; ++r) EXPECT_EQ(out.row(r), out.row(0));
}

TEST(Autoencoder, ReturnsBestValidationParameters) {
    AutoencoderConfig c = tiny_config();
    c.learning_rate = 1e-2;
    c.epoch_cap = 400;
    c.patience = 50;
    const RowMatrix x = random_features(30, 8, 3);
    const auto trained = train_autoencoder(x, c);
    const auto& hist = trained.report.validation_history;
    ASSERT_EQ(hist.size(), trained.report.epochs);
    for (double v : hist) EXPECT_LE(trained.report.validation_mse, v);
    EXPECT_TRUE(std::isfinite(trained.report.validation_mse));
    EXPECT_GE(trained.report.epochs, 1u);
    EXPECT_EQ(trained.report.validation_mse, hist[trained.report.best_epoch - 1]);
    if (trained.report.stop_reason == StopReason::early_stop)
        EXPECT_EQ(trained.report.epochs, trained.report.best_epoch + c.patience);
}

TEST(Autoencoder, TrainingIsDeterministic) {
    AutoencoderConfig c = tiny_config();
    c.epoch_cap = 50;
    const RowMatrix x = random_features(12, 8, 4);
    const auto a = train_autoencoder(x, c);
    const auto b = train_autoencoder(x, c);
    EXPECT_EQ(a.model.parameters(), b.model.parameters());
    EXPECT_EQ(a.report.validation_history, b.report.validation_history);
}

TEST(Autoencoder, EncodeDecodeShapesAndDeterminism) {
    AutoencoderConfig c = tiny_config();
    c.epoch_cap = 20;
    const RowMatrix x = random_features(15, 8, 5);
    const auto m = train_autoencoder(x, c).model;
    const Vector e1 = m.encode(row_span(x, 3));
    const Vector e2 = m.encode(row_span(x, 3));
    ASSERT_EQ(e1.size(), 2);
    EXPECT_EQ(e1, e2);
    EXPECT_TRUE((e1.array() > 0.0).all() && (e1.array() < 1.0).all());
    EXPECT_EQ(m.decode(as_span(e1)).size(), 8);
    EXPECT_EQ(m.encode(x).rows(), 15);
    EXPECT_THROW(m.encode(std::span<const double>(x.data(), 7)), DimensionError);
    const std::vector<double> wrong(3, 0.5);
    EXPECT_THROW(m.decode(wrong), DimensionError);
}

TEST(Autoencoder, RejectsTooFewSamples) {
    EXPECT_THROW(train_autoencoder(random_features(9, 8, 6), tiny_config()), DataError);
    AutoencoderConfig c = tiny_config();
    c.learning_rate = 0.0;
    EXPECT_THROW(train_autoencoder(random_features(20, 8, 6), c), ConfigError);
}

TEST(Autoencoder, DivergenceReportsTheEpoch) {
    AutoencoderConfig c = tiny_config();
    c.learning_rate = 1e300;
    c.epoch_cap = 50;
    try {
        train_autoencoder(random_features(20, 8, 7), c);
        FAIL() << "expected a training error";
    } catch (const TrainingError& e) {
        EXPECT_GE(e.epoch(), 1u);
    }
}

TEST(Autoencoder, SaveLoadPreservesForwardOutputs) {
    AutoencoderConfig c = tiny_config();
    c.epoch_cap = 30;
    const RowMatrix x = random_features(15, 8, 8);
    const auto m = train_autoencoder(x, c).model;
    const auto path = std::filesystem::temp_directory_path() / "marc_test_model.bin";
    m.save(path);
    const auto loaded = AutoencoderModel::load(path);
    EXPECT_EQ(loaded.layer_dims(), m.layer_dims());
    EXPECT_EQ(loaded.encode(x), m.encode(x));
    EXPECT_EQ(loaded.decode(m.encode(x)), m.decode(m.encode(x)));
    loaded.save(path.string() + ".again");
    EXPECT_EQ(io::read_text(path), io::read_text(path.string() + ".again"));
    std::filesystem::remove(path);
    std::filesystem::remove(path.string() + ".again");
}

}  // namespace
