#include "marc/latent_search.hpp"

#include "marc/error.hpp"
#include "marc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace marc {

void FitProblem::validate() const {
    if (observed.is_empty()) throw ConfigError("test signal has no observations");
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    if (!std::isfinite(start_time)) throw ConfigError("start time must be finite");
    if (!observed.values().allFinite()) throw DataError("test signal contains non-finite values");
}

void SearchConfig::validate() const {
    if (bounds.dim() > 0) bounds.validate();
    annealing.validate();
    if (!(bound_expansion >= 0.0)) throw ConfigError("bound expansion must be non-negative");
}

Bounds latent_bounds(const RowMatrix& latents, double expansion) {
    if (latents.rows() < 1 || latents.cols() < 1) throw DataError("no latents to bound");
    Bounds b;
    b.lower = latents.colwise().minCoeff().transpose();
    b.upper = latents.colwise().maxCoeff().transpose();
    for (Eigen::Index i = 0; i < b.lower.size(); ++i) {
        const double range = std::max(b.upper(i) - b.lower(i), 1e-6);
        b.lower(i) -= expansion * range;
        b.upper(i) += expansion * range;
        if (!(b.upper(i) > b.lower(i))) b.upper(i) = b.lower(i) + 1e-6;
    }
    return b;
}

LatentObjective::LatentObjective(const AutoencoderModel& model, const ReservoirTopology& topology, FitProblem problem)
    : model_(model), topology_(topology), problem_(std::move(problem)) {
    problem_.validate();
    if (problem_.observed.dim() != topology_.input_dim())
        throw DimensionError("test signal dimension differs from the reservoir input dimension");
    if (model_.input_dim() != (topology_.input_dim() + 1) * topology_.size())
        throw DimensionError("autoencoder width does not match (m+1)N of the reservoir");
    times_.reserve(problem_.observed.size());
    for (double t : problem_.observed.times()) times_.push_back(std::max(t, problem_.start_time));
}

RcFeatures LatentObjective::features(std::span<const double> e) const {
    const Vector flat = model_.decode(e);
    return RcFeatures::unflatten(as_span(flat), topology_.size(), topology_.input_dim());
}

double LatentObjective::operator()(std::span<const double> e) const {
    try {
        const RcFeatures f = features(e);
        if (!f.all_finite()) return kDivergenceSentinel;
        const RowMatrix pred = predict_at(topology_, f, problem_.start_time, times_, problem_.dt);
        const double sse = (pred - problem_.observed.values()).squaredNorm();
        return std::isfinite(sse) ? std::min(sse, kDivergenceSentinel) : kDivergenceSentinel;
    } catch (const DivergenceError&) {
        return kDivergenceSentinel;
    }
}

FitResult fit(const AutoencoderModel& model, const ReservoirTopology& topology, const FitProblem& problem,
              const SearchConfig& config, const RowMatrix* library_latents) {
    config.validate();
    const LatentObjective objective(model, topology, problem);
    const auto dim = static_cast<Eigen::Index>(objective.dim());

    Bounds bounds = config.bounds;
    if (bounds.dim() == 0) {
        if (library_latents == nullptr) throw ConfigError("search needs explicit bounds or library latents");
        bounds = latent_bounds(*library_latents, config.bound_expansion);
    }
    if (bounds.lower.size() != dim) throw DimensionError("search bounds do not match the latent dimension");

    FitResult out;
    out.seed = config.seed;
    std::size_t seeding_evals = 0;
    if (library_latents != nullptr && library_latents->rows() > 0 && config.seed_candidates > 0) {
        if (library_latents->cols() != dim) throw DimensionError("library latents do not match the latent dimension");
        std::vector<std::size_t> idx(static_cast<std::size_t>(library_latents->rows()));
        std::iota(idx.begin(), idx.end(), 0);
        Rng rng(derive_seed(config.seed, "latent-seeding"));
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(std::min(idx.size(), config.seed_candidates));
        double best = kDivergenceSentinel * 10.0;
        for (std::size_t i : idx) {
            const Vector e = bounds.clip(library_latents->row(static_cast<Eigen::Index>(i)).transpose());
            const double v = objective(as_span(e));
            ++seeding_evals;
            if (v < best) {
                best = v;
                out.e_start = e;
            }
        }
        out.start_loss = best;
    } else {
        out.e_start = 0.5 * (bounds.lower + bounds.upper);
        out.start_loss = objective(as_span(out.e_start));
        ++seeding_evals;
    }

    DualAnnealingOptions annealing = config.annealing;
    annealing.seed = derive_seed(config.seed, "dual-annealing");
    const OptimResult r = dual_annealing([&](std::span<const double> e) { return objective(e); }, bounds, annealing,
                                         out.e_start);
    out.e_hat = r.x;
    out.loss = objective(as_span(out.e_hat));
    out.features_hat = objective.features(as_span(out.e_hat));
    out.evaluations = r.evaluations + seeding_evals;
    out.trace = r.trace;
    return out;
}

TimeSeries forecast(const ReservoirTopology& topology, const FitResult& result, double start_time,
                    std::span<const double> times, double dt) {
    if (times.empty()) return TimeSeries::empty(result.features_hat.outputs());
    RowMatrix values = predict_at(topology, result.features_hat, start_time, times, dt);
    return TimeSeries(std::vector<double>(times.begin(), times.end()), std::move(values));
}

}  // namespace marc
