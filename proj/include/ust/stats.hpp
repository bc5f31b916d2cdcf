#ifndef UST_STATS_HPP
#define UST_STATS_HPP

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace ust {

double mean(std::span<const double> xs);

/// Linear-interpolation quantile (R type 7) of unsorted data, q in [0, 1].
double quantile(std::span<const double> xs, double q);

std::vector<std::pair<double, double>> quantiles(std::span<const double> xs, std::span<const double> qs);

struct Histogram {
    std::vector<double> edges;
    std::vector<std::size_t> counts;

    std::size_t total() const;
};

/// `bins` equal-width bins on [lo, hi]; values outside are clamped into the
/// end bins so counts always sum to the sample size.
Histogram histogram(std::span<const double> xs, std::size_t bins, double lo, double hi);

double pearson_correlation(std::span<const double> x, std::span<const double> y);

}  // namespace ust

#endif  // UST_STATS_HPP
