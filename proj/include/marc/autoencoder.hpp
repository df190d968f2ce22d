#pragma once

// Dense autoencoder over flattened RC feature vectors.
//
// Layer widths are [D, h1, h2, e, h2, h1, D]. Every layer except the last
// applies a logistic sigmoid, so latents lie in (0, 1)^e. Inputs are mapped
// through a per-component affine normalizer before the first layer and the
// output is mapped back through its inverse.

#include "marc/types.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace marc {

/// Sends each component's fitted range onto [0.1, 0.9]; zero-range
/// components map to 0.5 and invert to the stored constant.
class Normalizer {
public:
    Normalizer() = default;
    /// Rows are samples. Throws DataError for fewer than 2 rows or non-finite values.
    static Normalizer fit(const RowMatrix& samples);
    static Normalizer from_arrays(Vector low, Vector range);

    std::size_t dim() const noexcept { return static_cast<std::size_t>(low_.size()); }
    const Vector& low() const noexcept { return low_; }
    const Vector& range() const noexcept { return range_; }

    RowMatrix forward(const RowMatrix& x) const;
    RowMatrix inverse(const RowMatrix& y) const;
    Vector forward(std::span<const double> x) const;
    Vector inverse(std::span<const double> y) const;

private:
    Vector low_;
    Vector range_;  // 0 marks a constant component
};

enum class Activation { sigmoid, linear };

struct DenseLayer {
    RowMatrix weights;  // in x out, so a batch maps as X * W
    Vector bias;        // out
    Activation activation = Activation::sigmoid;

    std::size_t inputs() const noexcept { return static_cast<std::size_t>(weights.rows()); }
    std::size_t outputs() const noexcept { return static_cast<std::size_t>(weights.cols()); }
};

enum class WeightInit { glorot_uniform, zeros };

struct AutoencoderConfig {
    std::vector<std::size_t> hidden{200, 200};  // encoder widths; decoder mirrors them
    std::size_t latent_dim = 4;
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double validation_fraction = 0.10;
    std::size_t patience = 200;
    std::size_t epoch_cap = 20000;
    std::size_t batch_size = 0;  // 0 = full batch
    WeightInit init = WeightInit::glorot_uniform;
    std::uint64_t seed = 0;

    void validate() const;
    /// [D, h1, ..., e, ..., h1, D].
    std::vector<std::size_t> layer_dims(std::size_t input_dim) const;
};

class AutoencoderModel {
public:
    AutoencoderModel() = default;
    AutoencoderModel(Normalizer normalizer, std::vector<DenseLayer> layers);

    /// Fresh parameters for the given widths; the normalizer is left unset.
    static AutoencoderModel initialize(const std::vector<std::size_t>& dims, WeightInit init, std::uint64_t seed);

    std::size_t input_dim() const;
    std::size_t latent_dim() const;
    std::vector<std::size_t> layer_dims() const;
    /// Index of the first decoder layer.
    std::size_t latent_layer() const noexcept { return layers_.size() / 2; }

    const Normalizer& normalizer() const noexcept { return normalizer_; }
    void set_normalizer(Normalizer n);
    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
    std::vector<DenseLayer>& layers() noexcept { return layers_; }

    Vector encode(std::span<const double> features) const;
    Vector decode(std::span<const double> latent) const;
    /// Batched variants; rows are samples.
    RowMatrix encode(const RowMatrix& features) const;
    RowMatrix decode(const RowMatrix& latents) const;

    /// Forward pass of layers [first, last) on already-normalized rows.
    RowMatrix forward_range(const RowMatrix& x, std::size_t first, std::size_t last) const;

    /// Mean squared reconstruction error per component, in normalized space.
    double normalized_mse(const RowMatrix& features) const;

    std::size_t parameter_count() const;
    /// Layer-ordered [W_0 (row-major), b_0, W_1, b_1, ...].
    Vector parameters() const;
    void set_parameters(std::span<const double> flat);

    void save(const std::filesystem::path& path) const;
    static AutoencoderModel load(const std::filesystem::path& path);

private:
    Normalizer normalizer_;
    std::vector<DenseLayer> layers_;
};

/// Loss 1/(B D) * sum (A(x) - x)^2 over normalized rows x. When `gradient`
/// is non-null it receives dLoss/dparameters in parameters() order.
double reconstruction_loss(const AutoencoderModel& model, const RowMatrix& normalized, Vector* gradient);

enum class StopReason { early_stop, epoch_cap };

std::string_view to_string(StopReason r);

struct TrainingReport {
    std::size_t epochs = 0;
    std::size_t best_epoch = 0;
    double train_mse = 0.0;       // at the returned parameters
    double validation_mse = 0.0;  // at the returned parameters
    StopReason stop_reason = StopReason::epoch_cap;
    std::vector<double> validation_history;  // one entry per epoch
};

struct TrainedAutoencoder {
    AutoencoderModel model;
    TrainingReport report;
};

/// Full-batch Adam on the normalized features (rows are samples). Keeps the
/// parameters with the lowest validation loss seen. Throws TrainingError
/// when the loss becomes non-finite.
TrainedAutoencoder train_autoencoder(const RowMatrix& features, const AutoencoderConfig& config);

}  // namespace marc
