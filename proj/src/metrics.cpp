#include "marc/metrics.hpp"

#include "marc/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

namespace marc {

namespace {

void require_aligned(const TimeSeries& a, const TimeSeries& b) {
    if (a.size() != b.size() || a.dim() != b.dim())
        throw MetricError("forecast and truth differ in shape (" + std::to_string(a.size()) + "x" + std::to_string(a.dim()) +
                          " vs " + std::to_string(b.size()) + "x" + std::to_string(b.dim()) + ")");
    if (a.is_empty()) throw MetricError("cannot score an empty series");
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::abs(a.time(i) - b.time(i)) > 1e-9 * std::max(1.0, std::abs(b.time(i))))
            throw MetricError("forecast and truth time stamps differ at row " + std::to_string(i));
}

// Interpolated first time e exceeds v, or nullopt.
std::optional<double> first_crossing(const std::vector<double>& t, const Vector& e, double v) {
    if (e(0) > v) return t[0];
    for (std::size_t i = 1; i < t.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        if (e(k) > v) {
            const double frac = (v - e(k - 1)) / (e(k) - e(k - 1));
            return t[i - 1] + frac * (t[i] - t[i - 1]);
        }
    }
    return std::nullopt;
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

double full_curve_mse(const TimeSeries& forecast, const TimeSeries& truth) {
    require_aligned(forecast, truth);
    return (forecast.values() - truth.values()).squaredNorm() / static_cast<double>(truth.values().size());
}

void ValidTimeSpec::validate() const {
    if (!(lyapunov_time > 0.0)) throw ConfigError("Lyapunov time must be positive");
}

double valid_time(const TimeSeries& forecast, const TimeSeries& truth, const ValidTimeSpec& spec) {
    spec.validate();
    require_aligned(forecast, truth);
    const RowMatrix& y = truth.values();
    const Vector variance = (y.rowwise() - y.colwise().mean()).colwise().squaredNorm().transpose() / static_cast<double>(y.rows());
    const RowMatrix sq = (forecast.values() - y).cwiseAbs2();
    const std::vector<double>& t = truth.times();

    std::optional<double> crossing;
    if (spec.per_component) {
        for (Eigen::Index c = 0; c < y.cols(); ++c) {
            if (!(variance(c) > 0.0)) throw MetricError("truth component " + std::to_string(c) + " has zero variance");
            const auto tc = first_crossing(t, sq.col(c), variance(c));
            if (tc && (!crossing || *tc < *crossing)) crossing = tc;
        }
    } else {
        const double v = variance.sum();
        if (!(v > 0.0)) throw MetricError("truth has zero variance; valid time is undefined");
        crossing = first_crossing(t, sq.rowwise().sum(), v);
    }
    const double end = crossing.value_or(t.back());
    return (end - t.front()) / spec.lyapunov_time;
}

Summary summarize(std::vector<double> values) {
    Summary s;
    s.count = values.size();
    if (values.empty()) return s;
    const double n = static_cast<double>(values.size());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / n);
    s.min = *std::min_element(values.begin(), values.end());
    s.max = *std::max_element(values.begin(), values.end());
    s.median = median_of(std::move(values));
    return s;
}

LogHistogram log_error_histogram(const std::vector<double>& errors, std::size_t bins) {
    if (bins == 0) throw MetricError("histogram needs at least one bin");
    if (errors.empty()) throw MetricError("no errors to histogram");
    std::vector<double> logs;
    logs.reserve(errors.size());
    for (double e : errors) {
        if (!(e > 0.0) || !std::isfinite(e)) throw MetricError("log histogram needs positive finite errors");
        logs.push_back(std::log10(e));
    }
    LogHistogram h;
    double lo = *std::min_element(logs.begin(), logs.end());
    double hi = *std::max_element(logs.begin(), logs.end());
    if (hi == lo) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double width = (hi - lo) / static_cast<double>(bins);
    for (std::size_t i = 0; i <= bins; ++i) h.edges.push_back(lo + width * static_cast<double>(i));
    h.edges.back() = hi;
    h.counts.assign(bins, 0);
    for (double l : logs) {
        auto b = static_cast<std::size_t>(std::floor((l - lo) / width));
        ++h.counts[std::min(b, bins - 1)];
    }
    h.mean = std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(errors.size());
    h.median = median_of(errors);
    return h;
}

PcaResult latent_pca(const RowMatrix& latents, std::size_t components) {
    if (latents.rows() < 3) throw MetricError("PCA needs at least 3 latents");
    if (!latents.allFinite()) throw MetricError("latents contain non-finite values");
    PcaResult r;
    r.mean = latents.colwise().mean().transpose();
    const RowMatrix centred = latents.rowwise() - r.mean.transpose();
    const Eigen::MatrixXd cov = centred.transpose() * centred / static_cast<double>(latents.rows() - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw MetricError("covariance eigen-decomposition failed");

    const Eigen::Index d = cov.rows();
    r.explained_variance = eig.eigenvalues().reverse();
    const Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();
    const double total = std::max(r.explained_variance.sum(), 0.0);
    std::size_t usable = 0;
    for (Eigen::Index i = 0; i < d; ++i)
        if (r.explained_variance(i) > 1e-12 * std::max(total, 1e-300) && total > 0.0) ++usable;
    std::size_t k = std::min<std::size_t>(components, static_cast<std::size_t>(d));
    if (usable < k) {
        r.warnings.push_back("covariance is degenerate: only " + std::to_string(usable) + " of " + std::to_string(k) +
                             " requested components carry variance");
        k = usable;
    }
    r.components = vectors.leftCols(static_cast<Eigen::Index>(k));
    for (Eigen::Index c = 0; c < r.components.cols(); ++c) {
        // sign convention: largest-magnitude loading positive
        Eigen::Index arg = 0;
        r.components.col(c).cwiseAbs().maxCoeff(&arg);
        if (r.components(arg, c) < 0.0) r.components.col(c) *= -1.0;
    }
    r.scores = centred * r.components;
    return r;
}

RowMatrix pca_table(const PcaResult& pca, const RowMatrix& labels) {
    if (labels.rows() != 0 && labels.rows() != pca.scores.rows()) throw DimensionError("labels and scores differ in row count");
    RowMatrix t(pca.scores.rows(), pca.scores.cols() + labels.cols());
    t.leftCols(pca.scores.cols()) = pca.scores;
    if (labels.cols() > 0) t.rightCols(labels.cols()) = labels;
    return t;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& x) {
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> rank(x.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
        i = j + 1;
    }
    return rank;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw MetricError("rank correlation needs equal-length samples");
    if (x.size() < 2) throw MetricError("rank correlation needs at least two pairs");
    const auto rx = average_ranks(x), ry = average_ranks(y);
    const Eigen::Map<const Vector> a(rx.data(), static_cast<Eigen::Index>(rx.size()));
    const Eigen::Map<const Vector> b(ry.data(), static_cast<Eigen::Index>(ry.size()));
    const Vector ca = a.array() - a.mean();
    const Vector cb = b.array() - b.mean();
    const double den = ca.norm() * cb.norm();
    if (!(den > 0.0)) throw MetricError("rank correlation is undefined for a constant sample");
    return ca.dot(cb) / den;
}

Summary ScoreReport::summary() const { return summarize(values); }

nlohmann::json ScoreReport::to_json(std::size_t histogram_bins) const {
    const Summary s = summary();
    nlohmann::json j;
    j["metric"] = metric;
    j["count"] = s.count;
    j["mean"] = s.mean;
    j["median"] = s.median;
    j["stddev"] = s.stddev;
    j["min"] = s.min;
    j["max"] = s.max;
    j["values"] = values;
    if (!labels.empty()) j["labels"] = labels;
    const bool positive = !values.empty() && std::all_of(values.begin(), values.end(), [](double v) { return v > 0.0 && std::isfinite(v); });
    if (positive && histogram_bins > 0) {
        const LogHistogram h = log_error_histogram(values, histogram_bins);
        j["log10_histogram"] = {{"edges", h.edges}, {"counts", h.counts}};
    }
    return j;
}

}  // namespace marc
