#pragma once

#include <optional>
#include <span>
#include <vector>

namespace kgtopo {

/// 1-based ranks; tied values share the average of their positions.
std::vector<double> fractional_ranks(std::span<const double> x);

/// Pearson correlation; nullopt when either side has zero variance.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

/// Pearson correlation of fractional ranks. Throws InvalidArgument when the
/// sizes differ or are below 2; nullopt when either ranking is constant.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

/// Median (mean of the middle pair for even sizes). Throws on empty input.
double median(std::vector<double> values);

}  // namespace kgtopo
