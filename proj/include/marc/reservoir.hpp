#pragma once

// Echo state network: a fixed sparse random reservoir driven open-loop for
// training and closed-loop (output fed back as input) for forecasting.
//
// Both modes use the same forward-Euler leaky-integrator map with step dt:
//
//   r_{n+1} = r_n + (dt / c) * (-r_n + tanh(W r_n + W_in u_n + b))
//
// Open loop takes u_n from the data; closed loop uses u_n = W_out r_n.

#include "marc/kernels.hpp"
#include "marc/time_series.hpp"
#include "marc/types.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace marc {

struct ReservoirParams {
    std::size_t nodes = 1000;
    double mean_degree = 100.0;
    double spectral_radius = 1.0;
    double input_scale = 1.0;  // W_in ~ U[-input_scale, input_scale]
    double bias_scale = 1.5;   // b ~ U[-bias_scale, bias_scale]
    double time_constant = 1.0;
    std::size_t input_dim = 1;
    std::uint64_t seed = 0;

    void validate() const;
    bool operator==(const ReservoirParams&) const = default;
};

/// The fixed random network shared by every member RC of an experiment.
/// Immutable after construction; safe to share across threads.
class ReservoirTopology {
public:
    /// Sparse W with Bernoulli(k/N) support and standard-normal entries,
    /// rescaled to the requested spectral radius. Retries with a derived seed
    /// when the draw has a zero spectrum; throws ConfigError after 10 failures.
    static ReservoirTopology build(const ReservoirParams& params);

    /// Explicit matrices, no spectral rescaling (tests and diagnostics).
    static ReservoirTopology from_matrices(const ReservoirParams& params, const RowMatrix& w, const RowMatrix& w_in,
                                           const Vector& bias);

    const ReservoirParams& params() const noexcept { return params_; }
    std::size_t size() const noexcept { return params_.nodes; }
    std::size_t input_dim() const noexcept { return params_.input_dim; }
    double time_constant() const noexcept { return params_.time_constant; }
    std::size_t nonzeros() const noexcept { return values_.size(); }
    /// Seed of the draw that was kept (differs from params().seed after a retry).
    std::uint64_t realized_seed() const noexcept { return realized_seed_; }

    kernels::CsrView recurrent() const noexcept;
    std::span<const double> input_weights() const noexcept { return w_in_; }  // N x dim_u, row-major
    std::span<const double> bias() const noexcept { return bias_; }

    RowMatrix recurrent_dense() const;
    /// SHA-256 over the realized W (CSR arrays), W_in and b.
    std::string checksum() const;

    bool operator==(const ReservoirTopology&) const = default;

private:
    ReservoirParams params_;
    std::uint64_t realized_seed_ = 0;
    std::vector<std::int32_t> row_ptr_;
    std::vector<std::int32_t> col_idx_;
    std::vector<double> values_;
    std::vector<double> w_in_;
    std::vector<double> bias_;
};

/// Largest eigenvalue modulus of a dense square matrix.
double spectral_radius(const RowMatrix& w);

/// Trained readout pair. Flattened as [r0 ; rows of W_out], length (m+1)N.
struct RcFeatures {
    Vector r0;        // N
    RowMatrix w_out;  // m x N

    std::size_t nodes() const noexcept { return static_cast<std::size_t>(r0.size()); }
    std::size_t outputs() const noexcept { return static_cast<std::size_t>(w_out.rows()); }

    Vector flatten() const;
    static RcFeatures unflatten(std::span<const double> flat, std::size_t nodes, std::size_t outputs);
    bool all_finite() const;
};

struct TrainConfig {
    double alpha = 5e-6;   // ridge penalty
    double warmup = 1.0;   // T_init, seconds discarded before fitting
    double dt = 0.01;      // sampling and integration step

    void validate() const;
    std::size_t warmup_rows() const;
};

/// Open-loop drive. Row n of the result is the state at input.time(n);
/// row 0 is r_start and row n+1 has absorbed input rows 0..n.
/// Throws DataError for non-uniform times, DivergenceError on non-finite state.
RowMatrix drive(const ReservoirTopology& topology, const TimeSeries& input, std::span<const double> r_start);

/// Minimizer of |W_out R - O|^2 + alpha |W_out|^2 with samples in rows:
/// solves (R^T R + alpha I) W_out^T = R^T O. Returns W_out (m x N).
/// Throws SingularSystemError when alpha = 0 and R^T R is singular.
RowMatrix train_readout(const RowMatrix& states, const RowMatrix& targets, double alpha);

struct TrainedMember {
    RcFeatures features;
    double start_time = 0.0;  // time stamp r0 belongs to
};

/// Self-prediction training on one library member: drive from r = 0, drop
/// the warm-up rows, fit W_out against the member itself, and keep the state
/// at the first post-warm-up stamp as r0.
TrainedMember train_member(const ReservoirTopology& topology, const TimeSeries& member, const TrainConfig& config);

/// Closed-loop outputs W_out r at the given non-decreasing times, integrating
/// from r0 at t0 with step dt. Outputs between integration steps are
/// linearly interpolated; times before t0 take the output at t0.
/// Throws DivergenceError if the output becomes non-finite.
RowMatrix predict_at(const ReservoirTopology& topology, const RcFeatures& features, double t0,
                     std::span<const double> times, double dt);

/// predict_at with t0 = times.front(), packaged as a series.
TimeSeries predict(const ReservoirTopology& topology, const RcFeatures& features, std::span<const double> times,
                   double dt);

}  // namespace marc
