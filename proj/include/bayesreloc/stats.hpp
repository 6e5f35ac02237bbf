#pragma once

#include <optional>
#include <span>
#include <vector>

namespace bayesreloc {

// Lower median: element (n - 1) / 2 of the sorted values, so the result is
// always one of the inputs. Throws InvalidArgument on empty input.
double lower_median(std::span<const double> values);

double mean(std::span<const double> values);
// Sample standard deviation (n - 1); zero for a single value.
double sample_stddev(std::span<const double> values);

// Ranks starting at 1, ties receive the average of their positions.
std::vector<double> average_ranks(std::span<const double> values);

// Empty when undefined (fewer than two points or a constant column).
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);
std::optional<double> spearman(std::span<const double> a, std::span<const double> b);

// Nearest-rank percentile, q in [0, 1].
double percentile(std::span<const double> values, double q);

}  // namespace bayesreloc
