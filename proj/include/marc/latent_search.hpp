#pragma once

// Latent-space fitting of a short test signal: find e such that the
// reservoir configured by the decoded features D(e) reproduces the
// observations in closed loop.

#include "marc/autoencoder.hpp"
#include "marc/optim.hpp"
#include "marc/reservoir.hpp"
#include "marc/time_series.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace marc {

inline constexpr double kDivergenceSentinel = 1e12;

/// What the objective compares against: observations, plus the time stamp
/// and step of the closed-loop integration that produces predictions.
struct FitProblem {
    TimeSeries observed;
    double start_time = 0.0;
    double dt = 0.01;

    void validate() const;
};

struct SearchConfig {
    Bounds bounds;  // empty means derive from library latents
    DualAnnealingOptions annealing;
    double bound_expansion = 0.5;     // fraction of the latent range added on each side
    std::size_t seed_candidates = 20;  // library latents tried as the start point
    std::uint64_t seed = 0;

    void validate() const;
};

/// Per-dimension [min, max] of the latents widened by `expansion` of the range on each side.
Bounds latent_bounds(const RowMatrix& latents, double expansion);

/// Sum of squared errors between R(D(e)) and the observations. Total: any
/// failure (divergence, non-finite output) maps to kDivergenceSentinel.
class LatentObjective {
public:
    LatentObjective(const AutoencoderModel& model, const ReservoirTopology& topology, FitProblem problem);

    double operator()(std::span<const double> e) const;
    RcFeatures features(std::span<const double> e) const;
    std::size_t dim() const noexcept { return model_.latent_dim(); }
    const FitProblem& problem() const noexcept { return problem_; }

private:
    const AutoencoderModel& model_;
    const ReservoirTopology& topology_;
    FitProblem problem_;
    std::vector<double> times_;  // observation stamps clamped to start_time
};

struct FitResult {
    Vector e_hat;
    double loss = 0.0;  // objective at e_hat
    RcFeatures features_hat;
    std::size_t evaluations = 0;
    Vector e_start;
    double start_loss = 0.0;
    std::vector<double> trace;  // best loss after each global iteration
    std::uint64_t seed = 0;
};

/// Dual annealing over the latent box, started from the best of a random
/// subsample of library latents (when given). Deterministic for a seed.
FitResult fit(const AutoencoderModel& model, const ReservoirTopology& topology, const FitProblem& problem,
              const SearchConfig& config, const RowMatrix* library_latents = nullptr);

/// Closed-loop prediction from the fitted features at the given times,
/// integrating from start_time. Throws DivergenceError.
TimeSeries forecast(const ReservoirTopology& topology, const FitResult& result, double start_time,
                    std::span<const double> times, double dt);

}  // namespace marc
