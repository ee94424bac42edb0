#include "odam/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "odam/textio.hpp"

namespace odam {

namespace {

using Vec = std::vector<double>;

enum Stream : std::uint64_t { kCenters = 1, kPlane = 2, kSourceNoise = 3, kTargetNoise = 4, kOutliers = 5, kShuffle = 6 };

std::mt19937_64 stream_rng(std::uint64_t seed, Stream stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

Vec random_unit(std::mt19937_64& rng, std::size_t dim) {
    std::normal_distribution<double> n01;
    Vec v(dim);
    double s = 0.0;
    do {
        s = 0.0;
        for (double& x : v) {
            x = n01(rng);
            s += x * x;
        }
    } while (s < 1e-24);
    for (double& x : v) x /= std::sqrt(s);
    return v;
}

double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// Orthonormal pair spanning the rotation plane.
std::pair<Vec, Vec> rotation_plane(const ToySpec& spec) {
    Vec a(spec.dim, 0.0), b(spec.dim, 0.0);
    if (spec.dim == 2) {
        a[0] = 1.0;
        b[1] = 1.0;
        return {a, b};
    }
    auto rng = stream_rng(spec.seed, kPlane);
    a = random_unit(rng, spec.dim);
    do {
        b = random_unit(rng, spec.dim);
        const double p = dot(a, b);
        for (std::size_t i = 0; i < b.size(); ++i) b[i] -= p * a[i];
    } while (dot(b, b) < 1e-6);
    const double nb = std::sqrt(dot(b, b));
    for (double& x : b) x /= nb;
    return {a, b};
}

Vec shift_point(const Vec& x, const ToySpec& spec, const std::pair<Vec, Vec>& plane) {
    const auto& [a, b] = plane;
    const double theta = spec.rotation_deg * std::numbers::pi / 180.0;
    Vec rel = x;
    rel[0] -= spec.layout_offset;
    const double alpha = dot(a, rel);
    const double beta = dot(b, rel);
    const double ra = std::cos(theta) * alpha - std::sin(theta) * beta;
    const double rb = std::sin(theta) * alpha + std::cos(theta) * beta;
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] + (ra - alpha) * a[i] + (rb - beta) * b[i];
        if (!spec.translation.empty()) out[i] += spec.translation[i];
    }
    return out;
}

void append_cluster(Samples& out, const Vec& center, std::size_t count, double spread, int identity, Domain domain,
                    std::mt19937_64& rng) {
    std::normal_distribution<double> noise(0.0, spread);
    for (std::size_t j = 0; j < count; ++j) {
        LabeledSample s;
        s.features = center;
        for (double& x : s.features) x += noise(rng);
        s.domain = domain;
        s.identity = identity;
        s.inlier = true;
        out.push_back(std::move(s));
    }
}

DomainData generate(const ToySpec& spec) {
    spec.validate();
    const auto src_centers = source_centers(spec);
    const auto tgt_centers = target_centers(spec);
    DomainData data;

    auto src_rng = stream_rng(spec.seed, kSourceNoise);
    auto tgt_rng = stream_rng(spec.seed, kTargetNoise);
    for (std::size_t k = 0; k < spec.identities; ++k) {
        append_cluster(data.source, src_centers[k], spec.per_identity, spec.cluster_spread, static_cast<int>(k),
                       Domain::Source, src_rng);
        append_cluster(data.target, tgt_centers[k], spec.per_identity, spec.cluster_spread, static_cast<int>(k),
                       Domain::Target, tgt_rng);
    }

    const std::size_t n_out = outlier_count(data.target.size(), spec.outlier_ratio);
    Vec centroid(spec.dim, 0.0);
    for (const Vec& c : tgt_centers)
        for (std::size_t i = 0; i < spec.dim; ++i) centroid[i] += c[i] / static_cast<double>(tgt_centers.size());

    auto out_rng = stream_rng(spec.seed, kOutliers);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double d = static_cast<double>(spec.dim);
    const double lo = std::pow(spec.outlier_inner, d);
    const double hi = std::pow(spec.outlier_outer, d);
    const double exclusion = 3.0 * spec.cluster_spread;
    const double axis_angle = spec.outlier_axis_deg * std::numbers::pi / 180.0;
    Vec axis(spec.dim, 0.0);
    axis[0] = std::cos(axis_angle);
    axis[1] = std::sin(axis_angle);
    const double min_cos = std::cos(spec.outlier_arc_deg * std::numbers::pi / 360.0);
    std::size_t attempts = 0;
    while (data.target.size() < spec.identities * spec.per_identity + n_out) {
        if (++attempts > 1'000'000)
            throw std::invalid_argument("gen_toy: outlier region is covered by the inlier exclusion zones");
        const Vec dir = random_unit(out_rng, spec.dim);
        if (spec.outlier_arc_deg < 360.0) {
            // The sector is an angle in the e1/e2 plane; higher dimensions use the projection.
            const double planar = std::hypot(dir[0], dir[1]);
            const double c = spec.dim == 2 ? dot(dir, axis) : (dir[0] * axis[0] + dir[1] * axis[1]) / planar;
            if (!(c >= min_cos)) continue;
        }
        const double r = std::pow(lo + u01(out_rng) * (hi - lo), 1.0 / d);
        Vec x(spec.dim);
        for (std::size_t i = 0; i < spec.dim; ++i) x[i] = centroid[i] + r * dir[i];
        const bool near_cluster = std::any_of(tgt_centers.begin(), tgt_centers.end(), [&](const Vec& c) {
            return std::sqrt(squared_distance(x, c)) < exclusion;
        });
        if (near_cluster) continue;
        data.target.push_back(LabeledSample{std::move(x), Domain::Target, kOutlierIdentity, false});
    }

    auto shuffle_rng = stream_rng(spec.seed, kShuffle);
    std::shuffle(data.source.begin(), data.source.end(), shuffle_rng);
    std::shuffle(data.target.begin(), data.target.end(), shuffle_rng);
    return data;
}

}  // namespace

void ToySpec::validate() const {
    if (identities < 1 || per_identity < 1) throw std::invalid_argument("ToySpec: counts must be >= 1");
    if (dim < 2) throw std::invalid_argument("ToySpec: dim must be >= 2");
    if (!(cluster_spread > 0.0)) throw std::invalid_argument("ToySpec: cluster_spread must be positive");
    if (!(center_radius >= 0.0)) throw std::invalid_argument("ToySpec: center_radius must be >= 0");
    if (!std::isfinite(layout_offset)) throw std::invalid_argument("ToySpec: layout_offset must be finite");
    if (!translation.empty() && translation.size() != dim)
        throw std::invalid_argument("ToySpec: translation has " + std::to_string(translation.size()) +
                                    " components, dim is " + std::to_string(dim));
    if (!(outlier_ratio >= 0.0)) throw std::invalid_argument("ToySpec: outlier_ratio must be >= 0");
    if (outlier_ratio > 0.5)
        throw OutlierRatioError("outlier ratio " + format_real(outlier_ratio) +
                                " exceeds 0.5: outliers are assumed to come from a low-density region and "
                                "make up no more than half of the target domain");
    if (!(outlier_inner >= 0.0) || !(outlier_outer > outlier_inner))
        throw std::invalid_argument("ToySpec: need 0 <= outlier_inner < outlier_outer");
    if (!(center_jitter >= 0.0 && center_jitter < 0.5))
        throw std::invalid_argument("ToySpec: center_jitter must be in [0, 0.5)");
    if (!(outlier_arc_deg > 0.0 && outlier_arc_deg <= 360.0))
        throw std::invalid_argument("ToySpec: outlier_arc_deg must be in (0, 360]");
}

std::size_t outlier_count(std::size_t inliers, double ratio) {
    if (ratio <= 0.0) return 0;
    return static_cast<std::size_t>(std::llround(ratio * static_cast<double>(inliers) / (1.0 - ratio)));
}

std::vector<std::vector<double>> source_centers(const ToySpec& spec) {
    spec.validate();
    auto rng = stream_rng(spec.seed, kCenters);
    std::vector<Vec> centers;
    if (spec.dim == 2) {
        // Evenly spaced with a random phase, optionally jittered.
        std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
        const double step = 2.0 * std::numbers::pi / static_cast<double>(spec.identities);
        std::uniform_real_distribution<double> jitter(-spec.center_jitter * step, spec.center_jitter * step);
        const double phase = phase_dist(rng);
        for (std::size_t k = 0; k < spec.identities; ++k) {
            const double a = phase + step * static_cast<double>(k) + (spec.center_jitter > 0.0 ? jitter(rng) : 0.0);
            centers.push_back({spec.layout_offset + spec.center_radius * std::cos(a), spec.center_radius * std::sin(a)});
        }
        return centers;
    }
    const double min_sep = 6.0 * spec.cluster_spread;
    for (std::size_t k = 0; k < spec.identities; ++k) {
        Vec best;
        double best_sep = -1.0;
        for (int attempt = 0; attempt < 1000; ++attempt) {
            Vec c = random_unit(rng, spec.dim);
            for (double& x : c) x *= spec.center_radius;
            double sep = std::numeric_limits<double>::infinity();
            for (const Vec& o : centers) sep = std::min(sep, std::sqrt(squared_distance(c, o)));
            if (sep > best_sep) {
                best_sep = sep;
                best = c;
            }
            if (sep >= min_sep) break;
        }
        centers.push_back(std::move(best));
    }
    for (Vec& c : centers) c[0] += spec.layout_offset;
    return centers;
}

std::vector<std::vector<double>> target_centers(const ToySpec& spec) {
    const auto plane = rotation_plane(spec);
    auto centers = source_centers(spec);
    for (Vec& c : centers) c = shift_point(c, spec, plane);
    return centers;
}

DomainData gen_toy(const ToySpec& spec) {
    if (spec.dim != 2) throw std::invalid_argument("gen_toy: dim must be 2, use gen_clusters_nd");
    return generate(spec);
}

DomainData gen_clusters_nd(const ToySpec& spec) {
    if (spec.dim == 2) return gen_toy(spec);
    return generate(spec);
}

// ---------------------------------------------------------------------------

void write_dataset(std::span<const LabeledSample> samples, const std::filesystem::path& path) {
    const std::size_t dim = samples.empty() ? 0 : samples.front().features.size();
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (samples[i].features.size() != dim)
            throw std::invalid_argument("write_dataset: sample " + std::to_string(i) + " has dimension " +
                                        std::to_string(samples[i].features.size()) + ", expected " +
                                        std::to_string(dim));
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write dataset " + path.string());
    os << "odam-v1 " << dim << '\n';
    for (const LabeledSample& s : samples) {
        os << (s.domain == Domain::Source ? 's' : 't') << ' ' << s.identity << ' ' << (s.inlier ? 1 : 0);
        for (double x : s.features) os << ' ' << format_real(x);
        os << '\n';
    }
    if (!os) throw std::runtime_error("failed writing dataset " + path.string());
}

Samples read_dataset(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open dataset " + path.string());
    auto fail = [&](std::size_t line, const std::string& what) -> void {
        throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + what);
    };

    std::string line;
    if (!std::getline(is, line)) fail(1, "missing header");
    auto header = split_ws(line);
    if (header.size() != 2 || header[0] != "odam-v1") fail(1, "missing header (expected 'odam-v1 <dim>')");
    const auto dim = parse_int(header[1]);
    if (!dim || *dim < 1) fail(1, "bad dimension '" + std::string(header[1]) + "'");

    Samples out;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        auto f = split_ws(line);
        if (f.empty()) continue;
        if (f.size() != static_cast<std::size_t>(*dim) + 3)
            fail(lineno, "row has " + std::to_string(f.size() >= 3 ? f.size() - 3 : 0) + " values, header dim is " +
                             std::to_string(*dim));
        LabeledSample s;
        if (f[0] == "s")
            s.domain = Domain::Source;
        else if (f[0] == "t")
            s.domain = Domain::Target;
        else
            fail(lineno, "domain must be 's' or 't'");
        const auto id = parse_int(f[1]);
        if (!id || *id < kOutlierIdentity) fail(lineno, "bad identity '" + std::string(f[1]) + "'");
        s.identity = static_cast<int>(*id);
        if (f[2] != "0" && f[2] != "1") fail(lineno, "inlier flag must be 0 or 1");
        s.inlier = f[2] == "1";
        for (std::size_t i = 3; i < f.size(); ++i) {
            const auto v = parse_real(f[i]);
            if (!v || !std::isfinite(*v)) fail(lineno, "bad real '" + std::string(f[i]) + "'");
            s.features.push_back(*v);
        }
        out.push_back(std::move(s));
    }
    return out;
}

Mat feature_matrix(std::span<const LabeledSample> samples) {
    if (samples.empty()) return Mat();
    const std::size_t dim = samples.front().features.size();
    Mat m(samples.size(), dim);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].features.size() != dim) throw std::invalid_argument("feature_matrix: ragged samples");
        std::copy(samples[i].features.begin(), samples[i].features.end(), m.row(i).begin());
    }
    return m;
}

}  // namespace odam
