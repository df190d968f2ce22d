#include "marc/autoencoder.hpp"

#include "marc/error.hpp"
#include "marc/io.hpp"
#include "marc/kernels.hpp"
#include "marc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace marc {

namespace {

constexpr double kLow = 0.1;
constexpr double kSpan = 0.8;

std::span<const double> flat(const RowMatrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<double> flat(RowMatrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }

// c = a * b through the dispatched kernel.
void matmul(const RowMatrix& a, const RowMatrix& b, RowMatrix& c) {
    c.resize(a.rows(), b.cols());
    kernels::gemm(static_cast<std::size_t>(a.rows()), static_cast<std::size_t>(b.cols()), static_cast<std::size_t>(a.cols()),
                  flat(a), flat(b), flat(c));
}

void apply_layer(const DenseLayer& layer, const RowMatrix& x, RowMatrix& out) {
    if (static_cast<std::size_t>(x.cols()) != layer.inputs())
        throw DimensionError("layer expects " + std::to_string(layer.inputs()) + " inputs, got " + std::to_string(x.cols()));
    matmul(x, layer.weights, out);
    out.rowwise() += layer.bias.transpose();
    if (layer.activation == Activation::sigmoid) {
        const auto s = flat(out);
        kernels::sigmoid(s, s);
    }
}

}  // namespace

// --- Normalizer ---------------------------------------------------------------

Normalizer Normalizer::fit(const RowMatrix& samples) {
    if (samples.rows() < 2) throw DataError("normalizer needs at least 2 feature vectors");
    if (!samples.allFinite()) throw DataError("feature vectors contain non-finite values");
    Normalizer n;
    n.low_ = samples.colwise().minCoeff().transpose();
    n.range_ = samples.colwise().maxCoeff().transpose() - n.low_;
    return n;
}

Normalizer Normalizer::from_arrays(Vector low, Vector range) {
    if (low.size() != range.size()) throw DimensionError("normalizer arrays differ in length");
    if (!low.allFinite() || !range.allFinite() || (range.array() < 0.0).any())
        throw DataError("normalizer arrays must be finite with non-negative ranges");
    Normalizer n;
    n.low_ = std::move(low);
    n.range_ = std::move(range);
    return n;
}

RowMatrix Normalizer::forward(const RowMatrix& x) const {
    if (static_cast<std::size_t>(x.cols()) != dim()) throw DimensionError("normalizer dimension mismatch");
    RowMatrix y(x.rows(), x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        if (range_(c) == 0.0)
            y.col(c).setConstant(0.5);
        else
            y.col(c) = (kLow + kSpan * ((x.col(c).array() - low_(c)) / range_(c))).matrix();
    }
    return y;
}

RowMatrix Normalizer::inverse(const RowMatrix& y) const {
    if (static_cast<std::size_t>(y.cols()) != dim()) throw DimensionError("normalizer dimension mismatch");
    RowMatrix x(y.rows(), y.cols());
    for (Eigen::Index c = 0; c < y.cols(); ++c) {
        if (range_(c) == 0.0)
            x.col(c).setConstant(low_(c));
        else
            x.col(c) = (low_(c) + (y.col(c).array() - kLow) * (range_(c) / kSpan)).matrix();
    }
    return x;
}

Vector Normalizer::forward(std::span<const double> x) const {
    const RowMatrix row = Eigen::Map<const RowMatrix>(x.data(), 1, static_cast<Eigen::Index>(x.size()));
    return forward(row).transpose();
}

Vector Normalizer::inverse(std::span<const double> y) const {
    const RowMatrix row = Eigen::Map<const RowMatrix>(y.data(), 1, static_cast<Eigen::Index>(y.size()));
    return inverse(row).transpose();
}

// --- Configuration --------------------------------------------------------------

void AutoencoderConfig::validate() const {
    if (latent_dim < 1) throw ConfigError("latent dimension must be positive");
    for (std::size_t h : hidden)
        if (h < 1) throw ConfigError("hidden widths must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) throw ConfigError("validation fraction must lie in (0, 1)");
    if (epoch_cap < 1) throw ConfigError("epoch cap must be at least 1");
}

std::vector<std::size_t> AutoencoderConfig::layer_dims(std::size_t input_dim) const {
    std::vector<std::size_t> dims{input_dim};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(latent_dim);
    dims.insert(dims.end(), hidden.rbegin(), hidden.rend());
    dims.push_back(input_dim);
    return dims;
}

// --- Model ----------------------------------------------------------------------

AutoencoderModel::AutoencoderModel(Normalizer normalizer, std::vector<DenseLayer> layers)
    : normalizer_(std::move(normalizer)), layers_(std::move(layers)) {
    if (layers_.size() < 2 || layers_.size() % 2 != 0) throw DimensionError("autoencoder needs an even number of layers");
    for (std::size_t l = 1; l < layers_.size(); ++l)
        if (layers_[l].inputs() != layers_[l - 1].outputs()) throw DimensionError("consecutive layer widths do not chain");
    if (layers_.front().inputs() != layers_.back().outputs()) throw DimensionError("output width differs from input width");
    if (normalizer_.dim() != 0 && normalizer_.dim() != input_dim()) throw DimensionError("normalizer width differs from input");
}

AutoencoderModel AutoencoderModel::initialize(const std::vector<std::size_t>& dims, WeightInit init, std::uint64_t seed) {
    if (dims.size() < 3 || dims.size() % 2 == 0) throw ConfigError("layer widths must be [D, ..., e, ..., D]");
    Rng rng(seed);
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        DenseLayer layer;
        const auto in = static_cast<Eigen::Index>(dims[l]);
        const auto out = static_cast<Eigen::Index>(dims[l + 1]);
        layer.weights = RowMatrix::Zero(in, out);
        layer.bias = Vector::Zero(out);
        layer.activation = l + 2 == dims.size() ? Activation::linear : Activation::sigmoid;
        if (init == WeightInit::glorot_uniform) {
            const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
            for (double& w : flat(layer.weights)) w = uniform(rng, -limit, limit);
        }
        layers.push_back(std::move(layer));
    }
    return AutoencoderModel(Normalizer{}, std::move(layers));
}

std::size_t AutoencoderModel::input_dim() const { return layers_.empty() ? 0 : layers_.front().inputs(); }
std::size_t AutoencoderModel::latent_dim() const { return layers_.empty() ? 0 : layers_[latent_layer()].inputs(); }

std::vector<std::size_t> AutoencoderModel::layer_dims() const {
    std::vector<std::size_t> dims;
    if (layers_.empty()) return dims;
    dims.push_back(layers_.front().inputs());
    for (const auto& l : layers_) dims.push_back(l.outputs());
    return dims;
}

void AutoencoderModel::set_normalizer(Normalizer n) {
    if (n.dim() != input_dim()) throw DimensionError("normalizer width differs from input");
    normalizer_ = std::move(n);
}

RowMatrix AutoencoderModel::forward_range(const RowMatrix& x, std::size_t first, std::size_t last) const {
    if (first > last || last > layers_.size()) throw DimensionError("layer range out of bounds");
    RowMatrix cur = x, next;
    for (std::size_t l = first; l < last; ++l) {
        apply_layer(layers_[l], cur, next);
        cur.swap(next);
    }
    return cur;
}

RowMatrix AutoencoderModel::encode(const RowMatrix& features) const {
    if (static_cast<std::size_t>(features.cols()) != input_dim())
        throw DimensionError("feature width " + std::to_string(features.cols()) + " differs from model input " +
                             std::to_string(input_dim()));
    return forward_range(normalizer_.forward(features), 0, latent_layer());
}

RowMatrix AutoencoderModel::decode(const RowMatrix& latents) const {
    if (static_cast<std::size_t>(latents.cols()) != latent_dim())
        throw DimensionError("latent width " + std::to_string(latents.cols()) + " differs from model latent " +
                             std::to_string(latent_dim()));
    return normalizer_.inverse(forward_range(latents, latent_layer(), layers_.size()));
}

Vector AutoencoderModel::encode(std::span<const double> features) const {
    return encode(RowMatrix(Eigen::Map<const RowMatrix>(features.data(), 1, static_cast<Eigen::Index>(features.size()))))
        .transpose();
}

Vector AutoencoderModel::decode(std::span<const double> latent) const {
    return decode(RowMatrix(Eigen::Map<const RowMatrix>(latent.data(), 1, static_cast<Eigen::Index>(latent.size()))))
        .transpose();
}

double AutoencoderModel::normalized_mse(const RowMatrix& features) const {
    const RowMatrix x = normalizer_.forward(features);
    return reconstruction_loss(*this, x, nullptr);
}

std::size_t AutoencoderModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    return n;
}

Vector AutoencoderModel::parameters() const {
    Vector p(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index at = 0;
    for (const auto& l : layers_) {
        p.segment(at, l.weights.size()) = Eigen::Map<const Vector>(l.weights.data(), l.weights.size());
        at += l.weights.size();
        p.segment(at, l.bias.size()) = l.bias;
        at += l.bias.size();
    }
    return p;
}

void AutoencoderModel::set_parameters(std::span<const double> p) {
    if (p.size() != parameter_count()) throw DimensionError("parameter vector has the wrong length");
    const double* src = p.data();
    for (auto& l : layers_) {
        std::copy(src, src + l.weights.size(), l.weights.data());
        src += l.weights.size();
        std::copy(src, src + l.bias.size(), l.bias.data());
        src += l.bias.size();
    }
}

void AutoencoderModel::save(const std::filesystem::path& path) const {
    if (normalizer_.dim() != input_dim()) throw ConfigError("cannot save an autoencoder without a fitted normalizer");
    io::json header{{"format", "marc-autoencoder"}, {"version", 1}, {"dims", layer_dims()}};
    io::json acts = io::json::array();
    for (const auto& l : layers_) acts.push_back(l.activation == Activation::sigmoid ? "sigmoid" : "linear");
    header["activations"] = acts;
    header["payload_layout"] = "normalizer.low[D], normalizer.range[D], then per layer W (in x out, row-major), b";
    std::vector<double> payload;
    payload.reserve(2 * input_dim() + parameter_count());
    payload.insert(payload.end(), normalizer_.low().begin(), normalizer_.low().end());
    payload.insert(payload.end(), normalizer_.range().begin(), normalizer_.range().end());
    const Vector p = parameters();
    payload.insert(payload.end(), p.begin(), p.end());
    io::write_blob(path, std::move(header), payload);
}

AutoencoderModel AutoencoderModel::load(const std::filesystem::path& path) {
    const io::Blob blob = io::read_blob(path);
    if (blob.header.value("format", "") != "marc-autoencoder") throw IoError(path.string() + " is not an autoencoder model");
    const auto dims = blob.header.at("dims").get<std::vector<std::size_t>>();
    const auto acts = blob.header.at("activations").get<std::vector<std::string>>();
    AutoencoderModel model = initialize(dims, WeightInit::zeros, 0);
    if (acts.size() != model.layers_.size()) throw IoError(path.string() + " activation list does not match its layers");
    for (std::size_t l = 0; l < acts.size(); ++l) {
        if (acts[l] == "sigmoid")
            model.layers_[l].activation = Activation::sigmoid;
        else if (acts[l] == "linear")
            model.layers_[l].activation = Activation::linear;
        else
            throw IoError("unknown activation '" + acts[l] + "' in " + path.string());
    }
    const std::size_t d = dims.front();
    if (blob.payload.size() != 2 * d + model.parameter_count()) throw IoError(path.string() + " payload size mismatch");
    const auto n = static_cast<Eigen::Index>(d);
    model.set_normalizer(Normalizer::from_arrays(Eigen::Map<const Vector>(blob.payload.data(), n),
                                                 Eigen::Map<const Vector>(blob.payload.data() + d, n)));
    model.set_parameters(std::span<const double>(blob.payload).subspan(2 * d));
    return model;
}

// --- Loss and gradient ------------------------------------------------------------

namespace {

// Buffers reused across evaluations so training does not reallocate per epoch.
struct LossWorkspace {
    std::vector<RowMatrix> acts;
    RowMatrix delta, at_t, grad_w, w_t, prev_delta;

    double evaluate(const AutoencoderModel& model, const RowMatrix& x, Vector* gradient) {
        const auto& layers = model.layers();
        if (static_cast<std::size_t>(x.cols()) != model.input_dim()) throw DimensionError("input width differs from the model");
        if (x.rows() == 0) throw DataError("empty batch");

        acts.resize(layers.size() + 1);
        acts[0] = x;
        for (std::size_t l = 0; l < layers.size(); ++l) apply_layer(layers[l], acts[l], acts[l + 1]);

        delta = acts.back() - x;
        const double scale = 1.0 / static_cast<double>(x.size());
        const double loss = delta.squaredNorm() * scale;
        if (gradient == nullptr) return loss;

        gradient->resize(static_cast<Eigen::Index>(model.parameter_count()));
        std::vector<Eigen::Index> offset(layers.size());
        Eigen::Index at = 0;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            offset[l] = at;
            at += layers[l].weights.size() + layers[l].bias.size();
        }

        delta *= 2.0 * scale;  // dLoss / d(output)
        for (std::size_t l = layers.size(); l-- > 0;) {
            const DenseLayer& layer = layers[l];
            if (layer.activation == Activation::sigmoid)
                delta.array() *= acts[l + 1].array() * (1.0 - acts[l + 1].array());
            at_t = acts[l].transpose();
            matmul(at_t, delta, grad_w);
            gradient->segment(offset[l], grad_w.size()) = Eigen::Map<const Vector>(grad_w.data(), grad_w.size());
            gradient->segment(offset[l] + grad_w.size(), layer.bias.size()) = delta.colwise().sum().transpose();
            if (l == 0) break;
            w_t = layer.weights.transpose();
            matmul(delta, w_t, prev_delta);
            delta.swap(prev_delta);
        }
        return loss;
    }
};

}  // namespace

double reconstruction_loss(const AutoencoderModel& model, const RowMatrix& x, Vector* gradient) {
    LossWorkspace ws;
    return ws.evaluate(model, x, gradient);
}

// --- Training ---------------------------------------------------------------------

std::string_view to_string(StopReason r) { return r == StopReason::early_stop ? "early-stop" : "epoch-cap"; }

TrainedAutoencoder train_autoencoder(const RowMatrix& features, const AutoencoderConfig& config) {
    config.validate();
    const auto n = static_cast<std::size_t>(features.rows());
    if (n < 10) throw DataError("autoencoder training needs at least 10 feature vectors");

    Normalizer normalizer = Normalizer::fit(features);
    const RowMatrix x = normalizer.forward(features);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng split_rng(derive_seed(config.seed, "autoencoder-split"));
    std::shuffle(order.begin(), order.end(), split_rng);
    const auto n_val = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(config.validation_fraction * static_cast<double>(n))), 1, n - 1);
    const std::size_t n_train = n - n_val;
    RowMatrix x_train(static_cast<Eigen::Index>(n_train), x.cols());
    RowMatrix x_val(static_cast<Eigen::Index>(n_val), x.cols());
    for (std::size_t i = 0; i < n; ++i) {
        if (i < n_train)
            x_train.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(order[i]));
        else
            x_val.row(static_cast<Eigen::Index>(i - n_train)) = x.row(static_cast<Eigen::Index>(order[i]));
    }

    AutoencoderModel model = AutoencoderModel::initialize(config.layer_dims(static_cast<std::size_t>(features.cols())),
                                                          config.init, derive_seed(config.seed, "autoencoder-init"));
    model.set_normalizer(normalizer);

    Vector params = model.parameters();
    Vector m1 = Vector::Zero(params.size());
    Vector m2 = Vector::Zero(params.size());
    Vector grad;
    Vector best = params;
    double best_val = reconstruction_loss(model, x_val, nullptr);

    LossWorkspace ws;
    TrainingReport report;
    double b1_pow = 1.0, b2_pow = 1.0;
    const std::size_t batch = config.batch_size == 0 ? n_train : std::min(config.batch_size, n_train);
    std::vector<std::size_t> perm(n_train);
    std::iota(perm.begin(), perm.end(), 0);
    Rng batch_rng(derive_seed(config.seed, "autoencoder-batches"));
    RowMatrix x_batch;
    for (std::size_t epoch = 1; epoch <= config.epoch_cap; ++epoch) {
        if (batch < n_train) std::shuffle(perm.begin(), perm.end(), batch_rng);
        for (std::size_t first = 0; first < n_train; first += batch) {
            const std::size_t count = std::min(batch, n_train - first);
            const RowMatrix* xb = &x_train;
            if (batch < n_train) {
                x_batch.resize(static_cast<Eigen::Index>(count), x_train.cols());
                for (std::size_t i = 0; i < count; ++i)
                    x_batch.row(static_cast<Eigen::Index>(i)) = x_train.row(static_cast<Eigen::Index>(perm[first + i]));
                xb = &x_batch;
            }
            const double train_loss = ws.evaluate(model, *xb, &grad);
            if (!std::isfinite(train_loss) || !grad.allFinite()) throw TrainingError("training loss became non-finite", epoch);
            b1_pow *= config.beta1;
            b2_pow *= config.beta2;
            m1 = config.beta1 * m1 + (1.0 - config.beta1) * grad;
            m2 = config.beta2 * m2 + (1.0 - config.beta2) * grad.cwiseAbs2();
            const double step = config.learning_rate / (1.0 - b1_pow);
            const double v_corr = 1.0 / (1.0 - b2_pow);
            params.array() -= step * m1.array() / ((m2.array() * v_corr).sqrt() + config.epsilon);
            model.set_parameters(as_span(params));
        }

        const double val = ws.evaluate(model, x_val, nullptr);
        if (!std::isfinite(val)) throw TrainingError("validation loss became non-finite", epoch);
        report.validation_history.push_back(val);
        report.epochs = epoch;
        if (val < best_val || report.best_epoch == 0) {
            best_val = val;
            best = params;
            report.best_epoch = epoch;
        } else if (epoch - report.best_epoch >= config.patience) {
            report.stop_reason = StopReason::early_stop;
            break;
        }
    }

    model.set_parameters(as_span(best));
    report.validation_mse = best_val;
    report.train_mse = reconstruction_loss(model, x_train, nullptr);
    return {std::move(model), std::move(report)};
}

}  // namespace marc
