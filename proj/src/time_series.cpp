#include "marc/time_series.hpp"

#include "marc/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace marc {

TimeSeries::TimeSeries(std::vector<double> times, RowMatrix values) : times_(std::move(times)), values_(std::move(values)) {
    if (static_cast<std::size_t>(values_.rows()) != times_.size())
        throw DataError("time series has " + std::to_string(times_.size()) + " stamps but " +
                        std::to_string(values_.rows()) + " rows");
    if (values_.cols() < 1) throw DataError("time series needs at least one component");
    for (std::size_t i = 1; i < times_.size(); ++i)
        if (!(times_[i] > times_[i - 1])) throw DataError("time stamps must be strictly increasing");
}

TimeSeries TimeSeries::empty(std::size_t dim) { return TimeSeries({}, RowMatrix(0, static_cast<Eigen::Index>(dim))); }

TimeSeries TimeSeries::slice(std::size_t first, std::size_t count) const {
    if (first + count > size()) throw DimensionError("time series slice out of range");
    std::vector<double> t(times_.begin() + static_cast<std::ptrdiff_t>(first),
                          times_.begin() + static_cast<std::ptrdiff_t>(first + count));
    RowMatrix v = values_.middleRows(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(count));
    return TimeSeries(std::move(t), std::move(v));
}

TimeSeries TimeSeries::window(double lo, double hi) const {
    const double tol = 1e-9 * std::max({1.0, std::abs(lo), std::abs(hi)});
    std::size_t first = 0;
    while (first < size() && times_[first] < lo - tol) ++first;
    std::size_t last = first;
    while (last < size() && times_[last] <= hi + tol) ++last;
    return slice(first, last - first);
}

double TimeSeries::uniform_step(double rel_tol) const {
    if (size() < 2) return 0.0;
    const double step = (times_.back() - times_.front()) / static_cast<double>(size() - 1);
    for (std::size_t i = 1; i < size(); ++i)
        if (std::abs((times_[i] - times_[i - 1]) - step) > rel_tol * step) return 0.0;
    return step;
}

bool operator==(const TimeSeries& a, const TimeSeries& b) {
    return a.times_ == b.times_ && a.values_.rows() == b.values_.rows() && a.values_.cols() == b.values_.cols() &&
           a.values_ == b.values_;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> out(n);
    if (n == 1) {
        out[0] = lo;
        return out;
    }
    const double step = (hi - lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) out[i] = lo + step * static_cast<double>(i);
    out[n - 1] = hi;
    return out;
}

}  // namespace marc
