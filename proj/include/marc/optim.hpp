#pragma once

// Derivative-free minimizers over a box: bounded Nelder-Mead and
// generalized-simulated-annealing "dual annealing" with Nelder-Mead
// refinement. Non-finite objective values are treated as +infinity.

#include "marc/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace marc {

using Objective = std::function<double(std::span<const double>)>;

struct Bounds {
    Vector lower;
    Vector upper;

    std::size_t dim() const noexcept { return static_cast<std::size_t>(lower.size()); }
    /// Throws ConfigError unless both ends are finite and lower < upper everywhere.
    void validate() const;
    Vector clip(const Vector& x) const;
    bool contains(std::span<const double> x) const;
};

struct NelderMeadOptions {
    double initial_scale = 0.05;  // simplex edge as a fraction of each bound width
    double xtol = 1e-8;           // relative simplex size
    double ftol = 1e-8;           // relative spread of simplex values
    std::size_t max_evaluations = 500;
};

struct OptimResult {
    Vector x;
    double value = 0.0;
    std::size_t evaluations = 0;
    bool converged = false;
    /// Best value after each iteration; non-increasing.
    std::vector<double> trace;
};

/// Points are clipped into the box before every evaluation.
OptimResult nelder_mead(const Objective& f, const Vector& x0, const Bounds& bounds, const NelderMeadOptions& options = {});

struct DualAnnealingOptions {
    std::size_t max_iterations = 100;
    double initial_temperature = 5230.0;
    double restart_temperature_ratio = 2e-5;
    double visit = 2.62;
    double accept = -5.0;
    std::size_t max_evaluations = 10'000'000;
    bool local_search = true;
    NelderMeadOptions local;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Each global iteration runs a Markov chain of 2*dim visits at the current
/// temperature, then a Nelder-Mead refinement of the best point whenever it
/// improved. The chain restarts from a random point when the temperature
/// falls below initial_temperature * restart_temperature_ratio.
OptimResult dual_annealing(const Objective& f, const Bounds& bounds, const DualAnnealingOptions& options,
                           std::optional<Vector> x0 = std::nullopt);

}  // namespace marc
