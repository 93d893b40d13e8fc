#pragma once

#include <utility>
#include <vector>

namespace mi::stats {

// Quantile with linear interpolation between order statistics (type 7).
// p in [0, 1]; values need not be sorted.
double quantile_type7(std::vector<double> values, double p);

// Step CDF over the input sample: sorted values with probabilities i/n.
class EmpiricalCdf {
public:
    explicit EmpiricalCdf(std::vector<double> values);

    const std::vector<double>& values() const { return sorted_; }

    // (value, P[X <= value]) pairs, one per sample.
    std::vector<std::pair<double, double>> steps() const;

    double quantile(double p) const; // type-7 interpolation
    double median() const { return quantile(0.5); }

private:
    std::vector<double> sorted_;
};

} // namespace mi::stats
