#pragma once

// Synthetic task families: sine waves, Lorenz-63 attractors and the
// four-function multi-modal mix. Libraries and test signals are pure
// functions of their SystemSpec (including the seed).

#include "marc/ode.hpp"
#include "marc/rng.hpp"
#include "marc/time_series.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace marc {

enum class Family { sine, lorenz63, multimodal };

std::string_view to_string(Family f);
Family family_from_string(std::string_view name);

struct Distribution {
    enum class Kind { uniform, normal };

    Kind kind = Kind::uniform;
    double a = 0.0;  // low, or mean
    double b = 0.0;  // high, or standard deviation

    static Distribution uniform(double lo, double hi) { return {Kind::uniform, lo, hi}; }
    static Distribution normal(double mean, double stddev) { return {Kind::normal, mean, stddev}; }

    double sample(Rng& rng) const;
    /// Throws ConfigError for unordered bounds or a negative deviation.
    void validate(std::string_view name) const;
};

/// Observation grid. Exactly one of t_end (linspace) or step (fixed spacing)
/// is set. [eval_start, eval_end] is where test observations are drawn.
struct Sampling {
    double t_start = 0.0;
    std::size_t points = 2;
    std::optional<double> t_end;
    std::optional<double> step;
    double eval_start = 0.0;
    double eval_end = 0.0;

    std::vector<double> grid() const;
    double dt() const;
};

struct SystemSpec {
    Family family = Family::sine;
    std::map<std::string, Distribution> parameters;
    std::size_t sample_count = 1;
    Sampling sampling;
    double spin_up = 0.0;  // Lorenz only
    std::uint64_t rng_seed = 0;

    void validate() const;

    std::size_t observation_dim() const;
    /// dim(x) + dim(v) of the generating family; used by the identifiability check.
    std::size_t hidden_dim() const;
    const Distribution& parameter(const std::string& name) const;

    static SystemSpec sine_default();
    static SystemSpec lorenz_default();
    static SystemSpec multimodal_default();
};

struct LibraryBundle {
    std::vector<TimeSeries> members;
    /// Kept for plotting and validation only; training never reads these.
    std::vector<std::vector<double>> ground_truth_params;
    std::vector<std::string> param_names;
    SystemSpec spec;
};

LibraryBundle generate_library(const SystemSpec& spec);
LibraryBundle generate_sine_library(const SystemSpec& spec);
LibraryBundle generate_lorenz_library(const SystemSpec& spec);
LibraryBundle generate_multimodal_library(const SystemSpec& spec);

std::vector<std::string> parameter_names(Family family);

// --- Lorenz-63 ---------------------------------------------------------------

inline constexpr double kLorenzLyapunovTime = 1.104;

struct LorenzParams {
    double sigma = 10.0;
    double rho = 28.0;
    double beta = 8.0 / 3.0;
};

StateVec<3> lorenz_rhs(const StateVec<3>& x, const LorenzParams& p);

/// Records `points` states spaced by `step`, starting from x0 at t0.
/// Throws DivergenceError if the state becomes non-finite.
TimeSeries integrate_lorenz(const LorenzParams& p, StateVec<3> x0, double t0, double step, std::size_t points);

// --- Multi-modal --------------------------------------------------------------

enum class Shape { sine = 0, linear = 1, quadratic = 2, cubic = 3 };

/// coeffs: sine {A, omega, b}; linear {A, B}; quadratic {A, B, C}; cubic {A, B, C, D}.
double shape_value(Shape shape, std::span<const double> coeffs, double x);

// --- Test signals -------------------------------------------------------------

enum class SampleMode { random_times, sequential };

SampleMode sample_mode_from_string(std::string_view name);
std::string_view to_string(SampleMode mode);

struct TestSignal {
    TimeSeries observed;  // what the fitting path sees
    TimeSeries truth;     // dense ground truth, evaluation only
    std::vector<double> params;
    std::vector<std::string> warnings;
};

/// Draws a fresh parameter sample and observes `count` points of it.
/// Throws ConfigError for count < 2 or, in sequential mode, a count larger
/// than the grid points available in the evaluation window.
TestSignal sample_test_signal(const SystemSpec& spec, SampleMode mode, std::size_t count, std::uint64_t seed);

/// Empty when count * dim(y) > dim(x) + dim(v); otherwise a warning message.
std::optional<std::string> identifiability_warning(const SystemSpec& spec, std::size_t count);

}  // namespace marc
