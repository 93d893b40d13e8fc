#include "mi/stats.hpp"

#include <algorithm>
#include <cmath>

#include "mi/errors.hpp"

namespace mi::stats {

namespace {

double interpolate_sorted(const std::vector<double>& sorted, double p) {
    const std::size_t n = sorted.size();
    if (n == 1)
        return sorted.front();
    const double h = static_cast<double>(n - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= n)
        return sorted.back();
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

} // namespace

double quantile_type7(std::vector<double> values, double p) {
    if (values.empty())
        throw EmptyInputError("quantile of empty sample");
    if (p < 0.0 || p > 1.0)
        throw InvalidSpecError("quantile probability must be in [0, 1]");
    std::sort(values.begin(), values.end());
    return interpolate_sorted(values, p);
}

EmpiricalCdf::EmpiricalCdf(std::vector<double> values) : sorted_(std::move(values)) {
    if (sorted_.empty())
        throw EmptyInputError("empirical CDF of empty sample");
    std::sort(sorted_.begin(), sorted_.end());
}

std::vector<std::pair<double, double>> EmpiricalCdf::steps() const {
    std::vector<std::pair<double, double>> out;
    out.reserve(sorted_.size());
    const double n = static_cast<double>(sorted_.size());
    for (std::size_t i = 0; i < sorted_.size(); ++i)
        out.emplace_back(sorted_[i], static_cast<double>(i + 1) / n);
    return out;
}

double EmpiricalCdf::quantile(double p) const {
    if (p < 0.0 || p > 1.0)
        throw InvalidSpecError("quantile probability must be in [0, 1]");
    return interpolate_sorted(sorted_, p);
}

} // namespace mi::stats
