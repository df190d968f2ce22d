#include "marc/reservoir.hpp"

#include "marc/checksum.hpp"
#include "marc/error.hpp"
#include "marc/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace marc {

void ReservoirParams::validate() const {
    if (nodes < 1) throw ConfigError("reservoir needs at least one node");
    if (!(mean_degree > 0.0) || mean_degree > static_cast<double>(nodes))
        throw ConfigError("mean degree must lie in (0, N]");
    if (!(spectral_radius > 0.0)) throw ConfigError("spectral radius must be positive");
    if (input_scale < 0.0 || bias_scale < 0.0) throw ConfigError("input and bias scales must be non-negative");
    if (!(time_constant > 0.0)) throw ConfigError("time constant must be positive");
    if (input_dim < 1) throw ConfigError("input dimension must be positive");
}

double spectral_radius(const RowMatrix& w) {
    if (w.rows() != w.cols()) throw DimensionError("spectral radius needs a square matrix");
    if (w.rows() == 0) return 0.0;
    const Eigen::MatrixXd dense = w;
    Eigen::EigenSolver<Eigen::MatrixXd> solver(dense, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) throw Error("eigenvalue computation did not converge");
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

ReservoirTopology ReservoirTopology::build(const ReservoirParams& params) {
    params.validate();
    const std::size_t n = params.nodes;
    const double p = std::min(1.0, params.mean_degree / static_cast<double>(n));

    for (std::uint64_t attempt = 0; attempt < 10; ++attempt) {
        const std::uint64_t seed = attempt == 0 ? params.seed : derive_seed(params.seed, "topology-retry", attempt);
        Rng rng(seed);
        ReservoirTopology t;
        t.params_ = params;
        t.realized_seed_ = seed;
        t.row_ptr_.assign(n + 1, 0);
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        std::normal_distribution<double> weight(0.0, 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (coin(rng) < p) {
                    t.col_idx_.push_back(static_cast<std::int32_t>(j));
                    t.values_.push_back(weight(rng));
                }
            }
            t.row_ptr_[i + 1] = static_cast<std::int32_t>(t.values_.size());
        }
        t.w_in_.resize(n * params.input_dim);
        for (auto& v : t.w_in_) v = params.input_scale > 0.0 ? uniform(rng, -params.input_scale, params.input_scale) : 0.0;
        t.bias_.resize(n);
        for (auto& v : t.bias_) v = params.bias_scale > 0.0 ? uniform(rng, -params.bias_scale, params.bias_scale) : 0.0;

        const double radius = spectral_radius(t.recurrent_dense());
        if (!(radius > 1e-12)) continue;
        const double scale = params.spectral_radius / radius;
        for (auto& v : t.values_) v *= scale;
        return t;
    }
    throw ConfigError("could not draw a recurrent matrix with a non-zero spectrum after 10 attempts");
}

ReservoirTopology ReservoirTopology::from_matrices(const ReservoirParams& params, const RowMatrix& w,
                                                   const RowMatrix& w_in, const Vector& bias) {
    const auto n = static_cast<Eigen::Index>(params.nodes);
    if (w.rows() != n || w.cols() != n || w_in.rows() != n || w_in.cols() != static_cast<Eigen::Index>(params.input_dim) ||
        bias.size() != n)
        throw DimensionError("reservoir matrices do not match the declared sizes");
    ReservoirTopology t;
    t.params_ = params;
    t.realized_seed_ = params.seed;
    t.row_ptr_.assign(params.nodes + 1, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (w(i, j) != 0.0) {
                t.col_idx_.push_back(static_cast<std::int32_t>(j));
                t.values_.push_back(w(i, j));
            }
        }
        t.row_ptr_[static_cast<std::size_t>(i) + 1] = static_cast<std::int32_t>(t.values_.size());
    }
    t.w_in_.assign(w_in.data(), w_in.data() + w_in.size());
    t.bias_.assign(bias.data(), bias.data() + bias.size());
    return t;
}

kernels::CsrView ReservoirTopology::recurrent() const noexcept {
    return {params_.nodes, params_.nodes, row_ptr_.data(), col_idx_.data(), values_.data()};
}

RowMatrix ReservoirTopology::recurrent_dense() const {
    const auto n = static_cast<Eigen::Index>(params_.nodes);
    RowMatrix w = RowMatrix::Zero(n, n);
    for (std::size_t i = 0; i < params_.nodes; ++i)
        for (std::int32_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p)
            w(static_cast<Eigen::Index>(i), col_idx_[static_cast<std::size_t>(p)]) = values_[static_cast<std::size_t>(p)];
    return w;
}

std::string ReservoirTopology::checksum() const {
    Sha256 h;
    h.update(std::span<const std::int32_t>(row_ptr_));
    h.update(std::span<const std::int32_t>(col_idx_));
    h.update(std::span<const double>(values_));
    h.update(std::span<const double>(w_in_));
    h.update(std::span<const double>(bias_));
    return h.hex();
}

Vector RcFeatures::flatten() const {
    const Eigen::Index n = r0.size();
    Vector flat(n * (w_out.rows() + 1));
    flat.head(n) = r0;
    for (Eigen::Index k = 0; k < w_out.rows(); ++k) flat.segment(n * (k + 1), n) = w_out.row(k).transpose();
    return flat;
}

RcFeatures RcFeatures::unflatten(std::span<const double> flat, std::size_t nodes, std::size_t outputs) {
    if (flat.size() != (outputs + 1) * nodes)
        throw DimensionError("feature vector of length " + std::to_string(flat.size()) + " does not match (m+1)N = " +
                             std::to_string((outputs + 1) * nodes));
    RcFeatures f;
    const auto n = static_cast<Eigen::Index>(nodes);
    f.r0 = Eigen::Map<const Vector>(flat.data(), n);
    f.w_out = Eigen::Map<const RowMatrix>(flat.data() + nodes, static_cast<Eigen::Index>(outputs), n);
    return f;
}

bool RcFeatures::all_finite() const { return r0.allFinite() && w_out.allFinite(); }

void TrainConfig::validate() const {
    if (!(alpha >= 0.0)) throw ConfigError("ridge alpha must be non-negative");
    if (!(warmup >= 0.0)) throw ConfigError("warm-up must be non-negative");
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
}

std::size_t TrainConfig::warmup_rows() const {
    return static_cast<std::size_t>(std::ceil(warmup / dt - 1e-9));
}

namespace {

// One leaky-integrator step in place: r <- r + leak (-r + tanh(W r + W_in u + b)).
void advance(const ReservoirTopology& topo, std::span<double> r, std::span<const double> u, double leak,
             std::span<double> pre) {
    kernels::csr_matvec(topo.recurrent(), r, pre);
    const auto w_in = topo.input_weights();
    const auto b = topo.bias();
    const std::size_t m = u.size();
    for (std::size_t i = 0; i < pre.size(); ++i) {
        double acc = pre[i] + b[i];
        for (std::size_t j = 0; j < m; ++j) acc += w_in[i * m + j] * u[j];
        pre[i] = acc;
    }
    kernels::leaky_tanh(pre, r, leak);
}

bool finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

RowMatrix drive(const ReservoirTopology& topology, const TimeSeries& input, std::span<const double> r_start) {
    const std::size_t n = topology.size();
    if (r_start.size() != n) throw DimensionError("initial reservoir state has the wrong length");
    if (input.dim() != topology.input_dim()) throw DimensionError("input dimension does not match W_in");
    if (!input.values().allFinite()) throw DataError("reservoir input contains non-finite values");
    const std::size_t steps = input.size();
    RowMatrix states(static_cast<Eigen::Index>(steps), static_cast<Eigen::Index>(n));
    if (steps == 0) return states;
    std::copy(r_start.begin(), r_start.end(), row_span(states, 0).begin());
    if (steps == 1) return states;

    const double dt = input.uniform_step();
    if (dt <= 0.0) throw DataError("open-loop drive needs equally spaced input");
    const double leak = dt / topology.time_constant();

    std::vector<double> r(r_start.begin(), r_start.end());
    std::vector<double> pre(n);
    for (std::size_t t = 0; t + 1 < steps; ++t) {
        advance(topology, r, input.row(t), leak, pre);
        if (!finite(r)) throw DivergenceError("reservoir state became non-finite at step " + std::to_string(t + 1));
        std::copy(r.begin(), r.end(), row_span(states, static_cast<Eigen::Index>(t + 1)).begin());
    }
    return states;
}

namespace {

RowMatrix solve_ridge(const double* states, std::size_t rows, std::size_t n, const RowMatrix& targets, double alpha) {
    const auto m = static_cast<std::size_t>(targets.cols());
    RowMatrix rt = Eigen::Map<const RowMatrix>(states, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n))
                       .transpose();
    const auto& k = kernels::active();
    RowMatrix gram(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    k.gemm(n, n, rows, rt.data(), rows, states, n, gram.data(), n, false);
    RowMatrix rhs(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    k.gemm(n, m, rows, rt.data(), rows, targets.data(), m, rhs.data(), m, false);
    gram.diagonal().array() += alpha;

    const Eigen::MatrixXd g = gram;
    Eigen::LLT<Eigen::MatrixXd> llt(g);
    if (llt.info() != Eigen::Success) throw SingularSystemError("ridge normal equations are not positive definite");
    if (alpha == 0.0 && llt.rcond() < 1e-12)
        throw SingularSystemError("states are rank deficient and alpha = 0; the readout is not unique");
    const Eigen::MatrixXd x = llt.solve(Eigen::MatrixXd(rhs));
    return x.transpose();
}

}  // namespace

RowMatrix train_readout(const RowMatrix& states, const RowMatrix& targets, double alpha) {
    if (!(alpha >= 0.0)) throw ConfigError("ridge alpha must be non-negative");
    if (states.rows() != targets.rows()) throw DimensionError("states and targets are not row-aligned");
    if (states.rows() == 0) throw DataError("no training rows");
    return solve_ridge(states.data(), static_cast<std::size_t>(states.rows()), static_cast<std::size_t>(states.cols()),
                       targets, alpha);
}

TrainedMember train_member(const ReservoirTopology& topology, const TimeSeries& member, const TrainConfig& config) {
    config.validate();
    const double dt = member.uniform_step();
    if (dt <= 0.0) throw DataError("library member is not equally spaced");
    if (std::abs(dt - config.dt) > 1e-6 * config.dt)
        throw ConfigError("member spacing " + std::to_string(dt) + " differs from configured dt " +
                          std::to_string(config.dt));
    const std::size_t skip = config.warmup_rows();
    if (member.size() < skip + 2) throw DataError("member too short: fewer than 2 rows remain after warm-up");

    const std::vector<double> zero(topology.size(), 0.0);
    const RowMatrix states = drive(topology, member, zero);
    const std::size_t rows = member.size() - skip;
    const RowMatrix targets = member.values().bottomRows(static_cast<Eigen::Index>(rows));

    TrainedMember out;
    out.features.w_out =
        solve_ridge(states.data() + skip * topology.size(), rows, topology.size(), targets, config.alpha);
    out.features.r0 = states.row(static_cast<Eigen::Index>(skip)).transpose();
    out.start_time = member.time(skip);
    return out;
}

RowMatrix predict_at(const ReservoirTopology& topology, const RcFeatures& features, double t0,
                     std::span<const double> times, double dt) {
    const std::size_t n = topology.size();
    const std::size_t m = features.outputs();
    if (features.nodes() != n) throw DimensionError("features were trained for a different reservoir size");
    if (m != topology.input_dim()) throw DimensionError("readout width does not match the reservoir input dimension");
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (times[i] < times[i - 1]) throw DataError("prediction times must be non-decreasing");
    RowMatrix out(static_cast<Eigen::Index>(times.size()), static_cast<Eigen::Index>(m));
    if (times.empty()) return out;

    const double leak = dt / topology.time_constant();
    const double eps = 1e-9;
    const auto steps = static_cast<std::size_t>(std::max(0.0, std::ceil((times.back() - t0) / dt - eps)));

    std::vector<double> r(features.r0.data(), features.r0.data() + n);
    std::vector<double> pre(n);
    std::vector<double> prev(m), curr(m);
    const std::span<const double> w_out{features.w_out.data(), m * n};
    kernels::gemv(w_out, m, n, r, curr);

    std::size_t k = 0;
    auto emit = [&](std::size_t step) {
        while (k < times.size()) {
            const double pos = (times[k] - t0) / dt;
            if (pos > static_cast<double>(step) + eps) break;
            double frac = pos - static_cast<double>(step) + 1.0;  // weight on curr
            if (step == 0 || frac >= 1.0 - eps) frac = 1.0;
            if (frac < 0.0) frac = 0.0;
            for (std::size_t j = 0; j < m; ++j)
                out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) =
                    frac == 1.0 ? curr[j] : (1.0 - frac) * prev[j] + frac * curr[j];
            ++k;
        }
    };

    if (!finite(curr)) throw DivergenceError("closed-loop output is non-finite at the start");
    emit(0);
    for (std::size_t s = 1; s <= steps && k < times.size(); ++s) {
        advance(topology, r, curr, leak, pre);
        prev.swap(curr);
        kernels::gemv(w_out, m, n, r, curr);
        if (!finite(curr)) throw DivergenceError("closed-loop output became non-finite at step " + std::to_string(s));
        emit(s);
    }
    return out;
}

TimeSeries predict(const ReservoirTopology& topology, const RcFeatures& features, std::span<const double> times,
                   double dt) {
    if (times.empty()) return TimeSeries::empty(features.outputs());
    RowMatrix out = predict_at(topology, features, times.front(), times, dt);
    return TimeSeries(std::vector<double>(times.begin(), times.end()), std::move(out));
}

}  // namespace marc
