#pragma once

#include "marc/types.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace marc {

/// Time-stamped vector-valued observations, one row per time stamp.
class TimeSeries {
public:
    TimeSeries() = default;
    /// Throws DataError unless times are strictly increasing and match the row count.
    TimeSeries(std::vector<double> times, RowMatrix values);

    static TimeSeries empty(std::size_t dim);

    std::size_t size() const noexcept { return times_.size(); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(values_.cols()); }
    bool is_empty() const noexcept { return times_.empty(); }

    const std::vector<double>& times() const noexcept { return times_; }
    const RowMatrix& values() const noexcept { return values_; }
    double time(std::size_t i) const { return times_.at(i); }
    std::span<const double> row(std::size_t i) const { return row_span(values_, static_cast<Eigen::Index>(i)); }

    /// Rows [first, first + count).
    TimeSeries slice(std::size_t first, std::size_t count) const;
    /// Rows with lo <= t <= hi (inclusive, with a relative tolerance on the ends).
    TimeSeries window(double lo, double hi) const;

    /// Common spacing if the stamps are uniform to the given relative tolerance, else 0.
    double uniform_step(double rel_tol = 1e-6) const;

    friend bool operator==(const TimeSeries& a, const TimeSeries& b);

private:
    std::vector<double> times_;
    RowMatrix values_;
};

/// n equally spaced points on [lo, hi], endpoints included.
std::vector<double> linspace(double lo, double hi, std::size_t n);

}  // namespace marc
