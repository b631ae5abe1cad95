#pragma once

#include <vector>

namespace comove {

struct DistStats {
    double min = 0.0;
    double q25 = 0.0;
    double median = 0.0;
    double q75 = 0.0;
    double mean = 0.0;
    double max = 0.0;
    std::size_t count = 0;
};

// Quantile with linear interpolation between order statistics.
// Values need not be sorted. p in [0, 1]. Empty input is the caller's error.
double quantile(std::vector<double> values, double p);

// min / Q25 / median / Q75 / mean / max over the sample.
// count == 0 marks the explicit "no data" case (all fields zero).
DistStats order_stats(const std::vector<double>& values);

}  // namespace comove
