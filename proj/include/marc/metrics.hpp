#pragma once

// Forecast scores and latent-space diagnostics. All functions are pure.

#include "marc/dynamical_systems.hpp"
#include "marc/time_series.hpp"
#include "marc/types.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace marc {

/// Mean over all stamps and components of the squared error.
/// Throws MetricError unless both series share their time stamps.
double full_curve_mse(const TimeSeries& forecast, const TimeSeries& truth);

struct ValidTimeSpec {
    double lyapunov_time = kLorenzLyapunovTime;
    /// Threshold each component against its own variance instead of the
    /// summed error against the summed variance.
    bool per_component = false;

    void validate() const;
};

/// Time, in Lyapunov times, from the first stamp until the squared error
/// first exceeds the variance of the truth over the same window. The
/// crossing is linearly interpolated between stamps. Returns the window
/// length when the threshold is never exceeded.
/// Throws MetricError for misaligned grids or a constant truth.
double valid_time(const TimeSeries& forecast, const TimeSeries& truth, const ValidTimeSpec& spec = {});

struct Summary {
    std::size_t count = 0;
    double mean = 0.0;
    double median = 0.0;  // arithmetic: mean of the two middle values for even counts
    double stddev = 0.0;  // population
    double min = 0.0;
    double max = 0.0;
};

Summary summarize(std::vector<double> values);

struct LogHistogram {
    std::vector<double> edges;  // log10 space, bins + 1 entries
    std::vector<std::size_t> counts;
    double mean = 0.0;    // of the raw errors
    double median = 0.0;  // of the raw errors, arithmetic
};

/// Histogram of log10(errors). Throws MetricError for non-positive errors or zero bins.
LogHistogram log_error_histogram(const std::vector<double>& errors, std::size_t bins);

struct PcaResult {
    Vector mean;
    RowMatrix components;         // d x k, unit columns, descending variance
    Vector explained_variance;    // all d eigenvalues, descending
    RowMatrix scores;             // n x k
    std::vector<std::string> warnings;
};

/// Mean-centred PCA via the covariance eigen-decomposition. Requests for
/// more components than the covariance supports are truncated with a warning.
PcaResult latent_pca(const RowMatrix& latents, std::size_t components = 2);

/// Rows of (pc..., label...) for plotting.
RowMatrix pca_table(const PcaResult& pca, const RowMatrix& labels);

/// Rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

/// Per-signal scores with their aggregates. Aggregates are always
/// recomputed from `values`.
struct ScoreReport {
    std::string metric;
    std::vector<double> values;
    std::vector<std::string> labels;  // optional, one per value

    Summary summary() const;
    nlohmann::json to_json(std::size_t histogram_bins = 20) const;
};

}  // namespace marc
