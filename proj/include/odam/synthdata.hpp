#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "odam/ndcore.hpp"

namespace odam {

enum class Domain { Source, Target };

/// Identity label carried by every outlier.
inline constexpr int kOutlierIdentity = -1;

struct LabeledSample {
    std::vector<double> features;
    Domain domain = Domain::Source;
    int identity = 0;
    bool inlier = true;

    friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

using Samples = std::vector<LabeledSample>;

/// Parameters of the synthetic cross-domain cluster scenario.
struct ToySpec {
    std::size_t identities = 4;
    std::size_t per_identity = 50;  // per domain
    std::size_t dim = 2;
    double center_radius = 4.0;     // cluster centers lie at this distance from the layout center
    double cluster_spread = 0.5;    // isotropic standard deviation
    double center_jitter = 0.0;     // 2D only: angular jitter of each center, as a fraction of the spacing
    double layout_offset = 8.0;     // layout center is layout_offset * e1; the rotation turns about it
    std::vector<double> translation;  // target shift; empty means none
    double rotation_deg = 30.0;
    double outlier_ratio = 0.1;     // outliers / all targets, at most 0.5
    double outlier_inner = 8.0;     // outlier shell radii around the target centroid
    double outlier_outer = 12.0;
    double outlier_axis_deg = 180.0;  // sector direction in the e1/e2 plane, measured from e1
    double outlier_arc_deg = 40.0;    // full opening angle of the sector; 360 is the whole shell
    std::uint64_t seed = 1;

    void validate() const;
};

/// Thrown when the outlier ratio breaks the at-most-half assumption.
class OutlierRatioError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct DomainData {
    Samples source;
    Samples target;
};

/// Outlier count for a given inlier count: round(ratio * inliers / (1 - ratio)).
std::size_t outlier_count(std::size_t inliers, double ratio);

/// Two-dimensional scenario: Gaussian identity clusters, target clusters
/// rotated and translated, outliers uniform over a sector of a shell around
/// the target centroid with a 3-spread exclusion zone around every inlier center.
DomainData gen_toy(const ToySpec& spec);

/// Any dimension >= 2; dim 2 is gen_toy. The rotation acts in a random
/// plane drawn from the seed.
DomainData gen_clusters_nd(const ToySpec& spec);

/// Target cluster centers used by the generator (after the domain shift).
std::vector<std::vector<double>> target_centers(const ToySpec& spec);
std::vector<std::vector<double>> source_centers(const ToySpec& spec);

/// `odam-v1 <dim>` header, then `<s|t> <identity> <0|1> <f1> ... <fdim>` per line.
void write_dataset(std::span<const LabeledSample> samples, const std::filesystem::path& path);
Samples read_dataset(const std::filesystem::path& path);

Mat feature_matrix(std::span<const LabeledSample> samples);

}  // namespace odam
