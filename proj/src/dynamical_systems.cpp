#include "marc/dynamical_systems.hpp"

#include "marc/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace marc {

std::string_view to_string(Family f) {
    switch (f) {
        case Family::sine: return "sine";
        case Family::lorenz63: return "lorenz";
        case Family::multimodal: return "multimodal";
    }
    return "unknown";
}

Family family_from_string(std::string_view name) {
    if (name == "sine") return Family::sine;
    if (name == "lorenz" || name == "lorenz63") return Family::lorenz63;
    if (name == "multimodal") return Family::multimodal;
    throw ConfigError("unknown system family '" + std::string(name) + "'");
}

double Distribution::sample(Rng& rng) const {
    if (kind == Kind::normal) return b == 0.0 ? a : std::normal_distribution<double>(a, b)(rng);
    return a == b ? a : marc::uniform(rng, a, b);
}

void Distribution::validate(std::string_view name) const {
    if (!std::isfinite(a) || !std::isfinite(b))
        throw ConfigError("distribution '" + std::string(name) + "' has non-finite bounds");
    if (kind == Kind::uniform && a > b)
        throw ConfigError("distribution '" + std::string(name) + "' has low > high");
    if (kind == Kind::normal && b < 0.0)
        throw ConfigError("distribution '" + std::string(name) + "' has negative standard deviation");
}

std::vector<double> Sampling::grid() const {
    if (t_end) return linspace(t_start, *t_end, points);
    std::vector<double> g(points);
    for (std::size_t i = 0; i < points; ++i) g[i] = t_start + static_cast<double>(i) * step.value_or(1.0);
    return g;
}

double Sampling::dt() const {
    if (t_end) return (*t_end - t_start) / static_cast<double>(points - 1);
    return step.value_or(1.0);
}

void SystemSpec::validate() const {
    if (sample_count < 1) throw ConfigError("sample_count must be positive");
    if (sampling.points < 2) throw ConfigError("sampling needs at least 2 points");
    if (sampling.t_end.has_value() == sampling.step.has_value())
        throw ConfigError("sampling needs exactly one of t_end or step");
    if (sampling.t_end && !(*sampling.t_end > sampling.t_start)) throw ConfigError("sampling t_end must exceed t_start");
    if (sampling.step && !(*sampling.step > 0.0)) throw ConfigError("sampling step must be positive");
    if (!(sampling.eval_end > sampling.eval_start)) throw ConfigError("evaluation window is empty");
    if (spin_up < 0.0) throw ConfigError("spin_up must be non-negative");
    const std::vector<std::string> required = [&]() -> std::vector<std::string> {
        switch (family) {
            case Family::sine: return {"amplitude", "phase"};
            case Family::lorenz63: return {"sigma", "rho", "beta", "initial_state"};
            case Family::multimodal: return {"amplitude", "frequency", "phase", "coefficient"};
        }
        return {};
    }();
    for (const auto& name : required)
        if (!parameters.contains(name)) throw ConfigError("missing parameter distribution '" + name + "'");
    for (const auto& [name, dist] : parameters) dist.validate(name);
}

std::size_t SystemSpec::observation_dim() const { return family == Family::lorenz63 ? 3 : 1; }

std::size_t SystemSpec::hidden_dim() const {
    switch (family) {
        case Family::sine: return 2;        // oscillator state (amplitude, phase)
        case Family::lorenz63: return 6;    // 3 state + 3 parameters
        case Family::multimodal: return 4;  // widest member: cubic coefficients
    }
    return 0;
}

const Distribution& SystemSpec::parameter(const std::string& name) const {
    const auto it = parameters.find(name);
    if (it == parameters.end()) throw ConfigError("missing parameter distribution '" + name + "'");
    return it->second;
}

SystemSpec SystemSpec::sine_default() {
    SystemSpec s;
    s.family = Family::sine;
    s.parameters = {{"amplitude", Distribution::uniform(0.1, 5.0)}, {"phase", Distribution::uniform(0.0, std::numbers::pi)}};
    s.sample_count = 100;
    s.sampling.t_start = -6.0;
    s.sampling.t_end = 5.0;
    s.sampling.points = 1000;
    s.sampling.eval_start = -5.0;
    s.sampling.eval_end = 5.0;
    return s;
}

SystemSpec SystemSpec::lorenz_default() {
    SystemSpec s;
    s.family = Family::lorenz63;
    s.parameters = {{"sigma", Distribution::uniform(10.0, 15.0)},
                    {"rho", Distribution::uniform(28.0, 42.0)},
                    {"beta", Distribution::uniform(8.0 / 3.0, 12.0 / 3.0)},
                    {"initial_state", Distribution::uniform(-10.0, 10.0)}};
    s.sample_count = 1000;
    s.sampling.t_start = 0.0;
    s.sampling.step = 0.01;
    s.sampling.points = 5000;
    s.sampling.eval_start = 0.0;
    s.sampling.eval_end = 0.01 * 4999;
    s.spin_up = 100.0 * kLorenzLyapunovTime;
    return s;
}

SystemSpec SystemSpec::multimodal_default() {
    SystemSpec s = sine_default();
    s.family = Family::multimodal;
    s.parameters = {{"amplitude", Distribution::uniform(0.1, 0.5)},
                    {"frequency", Distribution::uniform(0.8, 1.2)},
                    {"phase", Distribution::uniform(0.0, 2.0 * std::numbers::pi)},
                    {"coefficient", Distribution::uniform(0.1, 0.5)}};
    s.sample_count = 1000;
    return s;
}

std::vector<std::string> parameter_names(Family family) {
    switch (family) {
        case Family::sine: return {"amplitude", "phase"};
        case Family::lorenz63: return {"sigma", "rho", "beta", "x1", "x2", "x3"};
        case Family::multimodal: return {"shape", "p0", "p1", "p2", "p3"};
    }
    return {};
}

StateVec<3> lorenz_rhs(const StateVec<3>& x, const LorenzParams& p) {
    return {p.sigma * (x[1] - x[0]), x[0] * (p.rho - x[2]) - x[1], x[0] * x[1] - p.beta * x[2]};
}

namespace {

void require_finite(const StateVec<3>& x) {
    for (double v : x)
        if (!std::isfinite(v)) throw DivergenceError("Lorenz integration produced a non-finite state");
}

}  // namespace

TimeSeries integrate_lorenz(const LorenzParams& p, StateVec<3> x0, double t0, double step, std::size_t points) {
    const auto rhs = [&p](const StateVec<3>& x) { return lorenz_rhs(x, p); };
    std::vector<double> times(points);
    RowMatrix values(static_cast<Eigen::Index>(points), 3);
    StateVec<3> x = x0;
    for (std::size_t i = 0; i < points; ++i) {
        if (i > 0) x = rk4_step(rhs, x, step);
        require_finite(x);
        times[i] = t0 + static_cast<double>(i) * step;
        for (int c = 0; c < 3; ++c) values(static_cast<Eigen::Index>(i), c) = x[static_cast<std::size_t>(c)];
    }
    return TimeSeries(std::move(times), std::move(values));
}

double shape_value(Shape shape, std::span<const double> c, double x) {
    switch (shape) {
        case Shape::sine: return c[0] * std::sin(c[1] * x + c[2]);
        case Shape::linear: return c[0] * x + c[1];
        case Shape::quadratic: return (c[0] * x + c[1]) * x + c[2];
        case Shape::cubic: return ((c[0] * x + c[1]) * x + c[2]) * x + c[3];
    }
    return 0.0;
}

namespace {

// One parameter draw of a family: how to evaluate it at arbitrary times (for
// analytic families) or its dense grid trajectory (Lorenz).
struct Realization {
    std::vector<double> params;
    Shape shape = Shape::sine;
    std::vector<double> coeffs;
    TimeSeries dense;  // always filled on the configured grid
};

double analytic_value(const Realization& r, double t) { return shape_value(r.shape, r.coeffs, t); }

Realization realize(const SystemSpec& spec, Rng& rng) {
    Realization r;
    const std::vector<double> grid = spec.sampling.grid();
    switch (spec.family) {
        case Family::sine: {
            const double amplitude = spec.parameter("amplitude").sample(rng);
            const double phase = spec.parameter("phase").sample(rng);
            r.shape = Shape::sine;
            r.coeffs = {amplitude, 1.0, phase};
            r.params = {amplitude, phase};
            break;
        }
        case Family::multimodal: {
            const int label = std::uniform_int_distribution<int>(0, 3)(rng);
            r.shape = static_cast<Shape>(label);
            const Distribution& coef = spec.parameter("coefficient");
            switch (r.shape) {
                case Shape::sine:
                    r.coeffs = {spec.parameter("amplitude").sample(rng), spec.parameter("frequency").sample(rng),
                                spec.parameter("phase").sample(rng)};
                    break;
                case Shape::linear: r.coeffs = {coef.sample(rng), coef.sample(rng)}; break;
                case Shape::quadratic: r.coeffs = {coef.sample(rng), coef.sample(rng), coef.sample(rng)}; break;
                case Shape::cubic: r.coeffs = {coef.sample(rng), coef.sample(rng), coef.sample(rng), coef.sample(rng)}; break;
            }
            r.params = {static_cast<double>(label), 0.0, 0.0, 0.0, 0.0};
            std::copy(r.coeffs.begin(), r.coeffs.end(), r.params.begin() + 1);
            break;
        }
        case Family::lorenz63: {
            LorenzParams p;
            p.sigma = spec.parameter("sigma").sample(rng);
            p.rho = spec.parameter("rho").sample(rng);
            p.beta = spec.parameter("beta").sample(rng);
            const Distribution& init = spec.parameter("initial_state");
            StateVec<3> x{init.sample(rng), init.sample(rng), init.sample(rng)};
            const double step = spec.sampling.dt();
            const auto spin_steps = static_cast<std::size_t>(std::llround(spec.spin_up / step));
            const auto rhs = [&p](const StateVec<3>& s) { return lorenz_rhs(s, p); };
            for (std::size_t s = 0; s < spin_steps; ++s) {
                x = rk4_step(rhs, x, step);
                require_finite(x);
            }
            r.dense = integrate_lorenz(p, x, spec.sampling.t_start, step, spec.sampling.points);
            r.params = {p.sigma, p.rho, p.beta, x[0], x[1], x[2]};
            return r;
        }
    }
    RowMatrix values(static_cast<Eigen::Index>(grid.size()), 1);
    for (std::size_t i = 0; i < grid.size(); ++i) values(static_cast<Eigen::Index>(i), 0) = analytic_value(r, grid[i]);
    r.dense = TimeSeries(grid, std::move(values));
    return r;
}

LibraryBundle generate_family(const SystemSpec& spec, Family expected) {
    if (spec.family != expected) throw ConfigError("system spec family does not match the generator");
    spec.validate();
    LibraryBundle bundle;
    bundle.spec = spec;
    bundle.param_names = parameter_names(spec.family);
    bundle.members.reserve(spec.sample_count);
    for (std::size_t i = 0; i < spec.sample_count; ++i) {
        Rng rng(derive_seed(spec.rng_seed, "member", i));
        Realization r = realize(spec, rng);
        bundle.members.push_back(std::move(r.dense));
        bundle.ground_truth_params.push_back(std::move(r.params));
    }
    return bundle;
}

}  // namespace

LibraryBundle generate_sine_library(const SystemSpec& spec) { return generate_family(spec, Family::sine); }
LibraryBundle generate_lorenz_library(const SystemSpec& spec) { return generate_family(spec, Family::lorenz63); }
LibraryBundle generate_multimodal_library(const SystemSpec& spec) { return generate_family(spec, Family::multimodal); }

LibraryBundle generate_library(const SystemSpec& spec) { return generate_family(spec, spec.family); }

SampleMode sample_mode_from_string(std::string_view name) {
    if (name == "random_times") return SampleMode::random_times;
    if (name == "sequential") return SampleMode::sequential;
    throw ConfigError("unknown sample mode '" + std::string(name) + "'");
}

std::string_view to_string(SampleMode mode) {
    return mode == SampleMode::random_times ? "random_times" : "sequential";
}

std::optional<std::string> identifiability_warning(const SystemSpec& spec, std::size_t count) {
    const std::size_t observed = count * spec.observation_dim();
    if (observed > spec.hidden_dim()) return std::nullopt;
    return "test signal carries " + std::to_string(observed) + " scalar observations but the " +
           std::string(to_string(spec.family)) + " family has " + std::to_string(spec.hidden_dim()) +
           " unknown states and parameters; the fit is underdetermined";
}

TestSignal sample_test_signal(const SystemSpec& spec, SampleMode mode, std::size_t count, std::uint64_t seed) {
    spec.validate();
    if (count < 2) throw ConfigError("test signals need at least 2 observations");

    Rng rng(seed);
    Realization r = realize(spec, rng);
    TestSignal out;
    out.params = r.params;
    if (auto w = identifiability_warning(spec, count)) out.warnings.push_back(*w);

    const TimeSeries in_window = r.dense.window(spec.sampling.eval_start, spec.sampling.eval_end);
    const bool analytic = spec.family != Family::lorenz63;

    if (mode == SampleMode::sequential) {
        if (count > in_window.size())
            throw ConfigError("requested " + std::to_string(count) + " sequential observations but only " +
                              std::to_string(in_window.size()) + " grid points lie in the evaluation window");
        out.observed = in_window.slice(0, count);
    } else if (analytic) {
        std::vector<double> times(count);
        for (auto& t : times) t = uniform(rng, spec.sampling.eval_start, spec.sampling.eval_end);
        std::sort(times.begin(), times.end());
        times.erase(std::unique(times.begin(), times.end()), times.end());
        while (times.size() < count) {  // measure-zero duplicates
            times.push_back(uniform(rng, spec.sampling.eval_start, spec.sampling.eval_end));
            std::sort(times.begin(), times.end());
            times.erase(std::unique(times.begin(), times.end()), times.end());
        }
        RowMatrix values(static_cast<Eigen::Index>(count), 1);
        for (std::size_t i = 0; i < count; ++i) values(static_cast<Eigen::Index>(i), 0) = analytic_value(r, times[i]);
        out.observed = TimeSeries(std::move(times), std::move(values));
    } else {
        if (count > in_window.size()) throw ConfigError("more observations requested than grid points available");
        std::vector<std::size_t> idx(in_window.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(count);
        std::sort(idx.begin(), idx.end());
        std::vector<double> times;
        RowMatrix values(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(in_window.dim()));
        for (std::size_t i = 0; i < count; ++i) {
            times.push_back(in_window.time(idx[i]));
            values.row(static_cast<Eigen::Index>(i)) = in_window.values().row(static_cast<Eigen::Index>(idx[i]));
        }
        out.observed = TimeSeries(std::move(times), std::move(values));
    }
    out.truth = std::move(r.dense);
    return out;
}

}  // namespace marc
