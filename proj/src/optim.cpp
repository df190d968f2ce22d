#include "marc/optim.hpp"

#include "marc/error.hpp"
#include "marc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace marc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Counts calls and maps non-finite values to +inf.
class Counted {
public:
    explicit Counted(const Objective& f) : f_(f) {}
    double operator()(const Vector& x) {
        ++count;
        const double v = f_(as_span(x));
        return std::isfinite(v) ? v : kInf;
    }
    std::size_t count = 0;

private:
    const Objective& f_;
};

}  // namespace

void Bounds::validate() const {
    if (lower.size() != upper.size() || lower.size() == 0) throw ConfigError("bounds need matching, non-empty ends");
    for (Eigen::Index i = 0; i < lower.size(); ++i)
        if (!std::isfinite(lower(i)) || !std::isfinite(upper(i)) || !(lower(i) < upper(i)))
            throw ConfigError("bounds must be finite with lower < upper in every dimension");
}

Vector Bounds::clip(const Vector& x) const { return x.cwiseMax(lower).cwiseMin(upper); }

bool Bounds::contains(std::span<const double> x) const {
    if (x.size() != dim()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        if (x[i] < lower(k) || x[i] > upper(k)) return false;
    }
    return true;
}

// --- Nelder-Mead ----------------------------------------------------------------

namespace {

OptimResult nelder_mead_counted(Counted& f, const Vector& start, double start_value, const Bounds& bounds,
                                const NelderMeadOptions& opt) {
    const auto n = static_cast<Eigen::Index>(bounds.dim());
    const std::size_t budget_start = f.count;
    auto spent = [&] { return f.count - budget_start; };

    std::vector<Vector> simplex(static_cast<std::size_t>(n) + 1);
    std::vector<double> values(simplex.size());
    simplex[0] = bounds.clip(start);
    values[0] = start_value;
    for (Eigen::Index k = 0; k < n; ++k) {
        Vector v = simplex[0];
        const double step = opt.initial_scale * (bounds.upper(k) - bounds.lower(k));
        v(k) += (v(k) + step <= bounds.upper(k)) ? step : -step;
        simplex[static_cast<std::size_t>(k) + 1] = bounds.clip(v);
        values[static_cast<std::size_t>(k) + 1] = f(simplex[static_cast<std::size_t>(k) + 1]);
    }

    OptimResult res;
    std::vector<std::size_t> order(simplex.size());
    auto sort_simplex = [&] {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        std::vector<Vector> s2;
        std::vector<double> v2;
        for (std::size_t i : order) {
            s2.push_back(simplex[i]);
            v2.push_back(values[i]);
        }
        simplex.swap(s2);
        values.swap(v2);
    };

    sort_simplex();
    while (spent() < opt.max_evaluations) {
        double size = 0.0, spread = 0.0;
        for (std::size_t i = 1; i < simplex.size(); ++i) {
            size = std::max(size, (simplex[i] - simplex[0]).cwiseAbs().maxCoeff());
            spread = std::max(spread, std::abs(values[i] - values[0]));
        }
        if (size <= opt.xtol * (1.0 + simplex[0].cwiseAbs().maxCoeff()) &&
            (spread <= opt.ftol * (1.0 + std::abs(values[0])) || !std::isfinite(values[0]))) {
            res.converged = true;
            break;
        }

        const std::size_t worst = simplex.size() - 1;
        Vector centroid = Vector::Zero(n);
        for (std::size_t i = 0; i < worst; ++i) centroid += simplex[i];
        centroid /= static_cast<double>(worst);

        const Vector xr = bounds.clip(centroid + (centroid - simplex[worst]));
        const double fr = f(xr);
        if (fr < values[0]) {
            const Vector xe = bounds.clip(centroid + 2.0 * (centroid - simplex[worst]));
            const double fe = spent() < opt.max_evaluations ? f(xe) : kInf;
            if (fe < fr) {
                simplex[worst] = xe;
                values[worst] = fe;
            } else {
                simplex[worst] = xr;
                values[worst] = fr;
            }
        } else if (fr < values[worst - 1]) {
            simplex[worst] = xr;
            values[worst] = fr;
        } else {
            const bool outside = fr < values[worst];
            const Vector xc = outside ? bounds.clip(centroid + 0.5 * (xr - centroid))
                                      : bounds.clip(centroid + 0.5 * (simplex[worst] - centroid));
            const double fc = f(xc);
            if (fc < (outside ? fr : values[worst])) {
                simplex[worst] = xc;
                values[worst] = fc;
            } else {
                for (std::size_t i = 1; i < simplex.size() && spent() < opt.max_evaluations; ++i) {
                    simplex[i] = bounds.clip(simplex[0] + 0.5 * (simplex[i] - simplex[0]));
                    values[i] = f(simplex[i]);
                }
            }
        }
        sort_simplex();
        res.trace.push_back(values[0]);
    }
    res.x = simplex[0];
    res.value = values[0];
    res.evaluations = spent();
    return res;
}

}  // namespace

OptimResult nelder_mead(const Objective& objective, const Vector& x0, const Bounds& bounds, const NelderMeadOptions& options) {
    bounds.validate();
    if (static_cast<std::size_t>(x0.size()) != bounds.dim()) throw DimensionError("start point and bounds differ in dimension");
    if (options.max_evaluations < 1) throw ConfigError("Nelder-Mead needs at least one evaluation");
    Counted f(objective);
    const Vector start = bounds.clip(x0);
    const double v0 = f(start);
    OptimResult r = nelder_mead_counted(f, start, v0, bounds, options);
    r.evaluations = f.count;
    return r;
}

// --- Dual annealing ---------------------------------------------------------------

void DualAnnealingOptions::validate() const {
    if (max_iterations < 1) throw ConfigError("dual annealing needs at least one iteration");
    if (!(initial_temperature > 0.0)) throw ConfigError("initial temperature must be positive");
    if (!(restart_temperature_ratio > 0.0 && restart_temperature_ratio < 1.0))
        throw ConfigError("restart temperature ratio must lie in (0, 1)");
    if (!(visit > 1.0 && visit < 3.0)) throw ConfigError("visiting parameter must lie in (1, 3)");
    if (!(accept < 0.0)) throw ConfigError("acceptance parameter must be negative");
}

namespace {

constexpr double kTailLimit = 1e8;
constexpr double kMinVisitBound = 1e-10;

// Tsallis-distributed visiting step generator.
class Visitor {
public:
    Visitor(const Bounds& b, double qv, Rng& rng) : b_(b), qv_(qv), rng_(rng) {
        factor2_ = std::exp((4.0 - qv) * std::log(qv - 1.0));
        factor3_ = std::exp((2.0 - qv) * std::numbers::ln2 / (qv - 1.0));
        factor4p_ = std::sqrt(std::numbers::pi) * factor2_ / (factor3_ * (3.0 - qv));
        const double factor5 = 1.0 / (qv - 1.0) - 0.5;
        const double d1 = 2.0 - factor5;
        factor6_ = std::numbers::pi * (1.0 - factor5) / std::sin(std::numbers::pi * (1.0 - factor5)) / std::exp(std::lgamma(d1));
    }

    Vector visit(const Vector& x, std::size_t step, double temperature) {
        const auto n = static_cast<std::size_t>(x.size());
        const Vector range = b_.upper - b_.lower;
        Vector out = x;
        if (step < n) {
            Vector v = draw(temperature, n);
            const double up = uniform(rng_, 0.0, 1.0), lo = uniform(rng_, 0.0, 1.0);
            for (Eigen::Index i = 0; i < v.size(); ++i) {
                if (v(i) > kTailLimit) v(i) = kTailLimit * up;
                if (v(i) < -kTailLimit) v(i) = -kTailLimit * lo;
                out(i) = wrap(v(i) + x(i), i, range(i));
                if (std::abs(out(i) - b_.lower(i)) < kMinVisitBound) out(i) += 1e-10;
            }
        } else {
            double v = draw(temperature, 1)(0);
            if (v > kTailLimit)
                v = kTailLimit * uniform(rng_, 0.0, 1.0);
            else if (v < -kTailLimit)
                v = -kTailLimit * uniform(rng_, 0.0, 1.0);
            const auto i = static_cast<Eigen::Index>(step - n);
            out(i) = wrap(v + x(i), i, range(i));
            if (std::abs(out(i) - b_.lower(i)) < kMinVisitBound) out(i) += kMinVisitBound;
        }
        return out;
    }

private:
    double wrap(double value, Eigen::Index i, double range) const {
        const double a = value - b_.lower(i);
        const double b = std::fmod(a, range) + range;
        return std::fmod(b, range) + b_.lower(i);
    }

    Vector draw(double temperature, std::size_t n) {
        const double factor1 = std::exp(std::log(temperature) / (qv_ - 1.0));
        const double factor4 = factor4p_ * factor1;
        const double sigmax = std::exp(-(qv_ - 1.0) * std::log(factor6_ / factor4) / (3.0 - qv_));
        Vector out(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) out(static_cast<Eigen::Index>(i)) = sigmax * standard_normal(rng_);
        for (std::size_t i = 0; i < n; ++i) {
            const double y = standard_normal(rng_);
            const double den = std::exp((qv_ - 1.0) * std::log(std::abs(y)) / (3.0 - qv_));
            out(static_cast<Eigen::Index>(i)) /= den;
        }
        return out;
    }

    const Bounds& b_;
    double qv_;
    Rng& rng_;
    double factor2_ = 0, factor3_ = 0, factor4p_ = 0, factor6_ = 0;
};

struct Annealer {
    Counted& f;
    const Bounds& bounds;
    const DualAnnealingOptions& opt;
    Rng& rng;
    Visitor visitor;

    Vector current, best, xmin;
    double e_current = kInf, e_best = kInf, e_min = kInf;
    bool improved = false;
    std::size_t not_improved = 0;
    std::size_t not_improved_max;
    double temperature_step = 0.0;

    Annealer(Counted& f_, const Bounds& b, const DualAnnealingOptions& o, Rng& r)
        : f(f_), bounds(b), opt(o), rng(r), visitor(b, o.visit, r), not_improved_max(1000) {}

    bool exhausted() const { return f.count >= opt.max_evaluations; }

    void reset(const std::optional<Vector>& x0) {
        for (int attempt = 0; attempt < 1000; ++attempt) {
            if (x0 && attempt == 0) {
                current = bounds.clip(*x0);
            } else {
                current.resize(bounds.lower.size());
                for (Eigen::Index i = 0; i < current.size(); ++i) current(i) = uniform(rng, bounds.lower(i), bounds.upper(i));
            }
            e_current = f(current);
            if (std::isfinite(e_current) || exhausted()) break;
        }
        if (best.size() == 0 || e_current < e_best) {
            best = current;
            e_best = e_current;
        }
    }

    void chain(std::size_t step, double temperature) {
        temperature_step = temperature / static_cast<double>(step + 1);
        ++not_improved;
        const std::size_t n = bounds.dim();
        for (std::size_t j = 0; j < 2 * n && !exhausted(); ++j) {
            if (j == 0) improved = step == 0;
            const Vector x = visitor.visit(current, j, temperature);
            const double e = f(x);
            if (e < e_current) {
                current = x;
                e_current = e;
                if (e < e_best) {
                    best = x;
                    e_best = e;
                    improved = true;
                    not_improved = 0;
                }
            } else {
                accept_reject(j, e, x);
            }
        }
    }

    void accept_reject(std::size_t j, double e, const Vector& x) {
        const double r = uniform(rng, 0.0, 1.0);
        const double q = 1.0 - ((1.0 - opt.accept) * (e - e_current) / temperature_step);
        const double p = q <= 0.0 ? 0.0 : std::exp(std::log(q) / (1.0 - opt.accept));
        if (r <= p) {
            current = x;
            e_current = e;
        }
        if (not_improved >= not_improved_max && (j == 0 || e_current < e_min)) {
            e_min = e_current;
            xmin = current;
        }
    }

    void refine() {
        if (!opt.local_search) return;
        auto run = [&](const Vector& x, double e) {
            NelderMeadOptions local = opt.local;
            local.max_evaluations = std::min(local.max_evaluations, opt.max_evaluations - std::min(opt.max_evaluations, f.count));
            if (local.max_evaluations == 0) return std::pair{e, x};
            const OptimResult r = nelder_mead_counted(f, x, e, bounds, local);
            return std::pair{r.value, r.x};
        };
        if (improved && !exhausted()) {
            const auto [e, x] = run(best, e_best);
            if (e < e_best) {
                not_improved = 0;
                best = x;
                e_best = e;
                current = x;
                e_current = e;
            }
        }
        if (not_improved >= not_improved_max && xmin.size() > 0 && !exhausted()) {
            const auto [e, x] = run(xmin, e_min);
            xmin = x;
            e_min = e;
            not_improved = 0;
            not_improved_max = bounds.dim();
            if (e < e_best) {
                best = x;
                e_best = e;
                current = x;
                e_current = e;
            }
        }
    }
};

}  // namespace

OptimResult dual_annealing(const Objective& objective, const Bounds& bounds, const DualAnnealingOptions& options,
                           std::optional<Vector> x0) {
    bounds.validate();
    options.validate();
    if (x0 && static_cast<std::size_t>(x0->size()) != bounds.dim())
        throw DimensionError("start point and bounds differ in dimension");

    Counted f(objective);
    Rng rng(options.seed);
    Annealer a(f, bounds, options, rng);
    a.reset(x0);

    OptimResult res;
    const double t1 = std::exp((options.visit - 1.0) * std::log(2.0)) - 1.0;
    const double restart_temperature = options.initial_temperature * options.restart_temperature_ratio;
    std::size_t iteration = 0;
    while (iteration < options.max_iterations && !a.exhausted()) {
        for (std::size_t i = 0; iteration < options.max_iterations && !a.exhausted(); ++i) {
            const double s = static_cast<double>(i) + 2.0;
            const double t2 = std::exp((options.visit - 1.0) * std::log(s)) - 1.0;
            const double temperature = options.initial_temperature * t1 / t2;
            if (temperature < restart_temperature) {
                a.reset(std::nullopt);
                break;
            }
            a.chain(i, temperature);
            a.refine();
            res.trace.push_back(a.e_best);
            ++iteration;
        }
    }
    res.x = a.best;
    res.value = a.e_best;
    res.evaluations = f.count;
    res.converged = iteration >= options.max_iterations;
    return res;
}

}  // namespace marc
