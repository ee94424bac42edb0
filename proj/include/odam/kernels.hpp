#pragma once

#include <span>
#include <vector>

#include "odam/ndcore.hpp"

namespace odam {

/// Bandwidth used when every pairwise distance is zero.
inline constexpr double kMedianFloor = 1e-8;

/// Convex combination of Gaussian kernels exp(-|x-y|^2 / sigma_m) with
/// uniform weights beta_m = 1/kappa and strictly increasing sigma_m.
struct KernelBank {
    std::vector<double> bandwidths;
    std::vector<double> weights;

    std::size_t size() const { return bandwidths.size(); }
};

/// exp(-|x - y|^2 / sigma). Throws std::invalid_argument for sigma <= 0 or
/// mismatched dimensions.
double gaussian_kernel(std::span<const double> x, std::span<const double> y, double sigma);

/// Median of the pairwise squared distances between distinct rows. An even
/// pair count averages the two middle values; a zero median returns
/// kMedianFloor.
double median_bandwidth(const Mat& points);

/// Bandwidths sigma * factor^e for e = -span_exponent .. span_exponent.
KernelBank build_bank(double sigma, int span_exponent, double factor);

}  // namespace odam
