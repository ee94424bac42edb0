#include "odam/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace odam {

double gaussian_kernel(std::span<const double> x, std::span<const double> y, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_kernel: bandwidth must be positive");
    if (x.size() != y.size())
        throw std::invalid_argument("gaussian_kernel: dimension mismatch " + std::to_string(x.size()) +
                                    " vs " + std::to_string(y.size()));
    return std::exp(-squared_distance(x, y) / sigma);
}

double median_bandwidth(const Mat& points) {
    const std::size_t n = points.rows();
    if (n < 2) throw std::invalid_argument("median_bandwidth: need at least 2 points");
    std::vector<double> d;
    d.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) d.push_back(squared_distance(points.row(i), points.row(j)));

    const std::size_t mid = d.size() / 2;
    std::nth_element(d.begin(), d.begin() + mid, d.end());
    double median = d[mid];
    if (d.size() % 2 == 0) {
        const double lower = *std::max_element(d.begin(), d.begin() + mid);
        median = 0.5 * (lower + median);
    }
    return median > 0.0 ? median : kMedianFloor;
}

KernelBank build_bank(double sigma, int span_exponent, double factor) {
    if (!(sigma > 0.0)) throw std::invalid_argument("build_bank: sigma must be positive");
    if (span_exponent < 0) throw std::invalid_argument("build_bank: span exponent must be >= 0");
    if (!(factor > 1.0)) throw std::invalid_argument("build_bank: factor must exceed 1");
    KernelBank bank;
    const int kappa = 2 * span_exponent + 1;
    for (int e = -span_exponent; e <= span_exponent; ++e) bank.bandwidths.push_back(sigma * std::pow(factor, e));
    bank.weights.assign(kappa, 1.0 / kappa);
    return bank;
}

}  // namespace odam
