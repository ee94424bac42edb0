#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "odam/ndcore.hpp"

namespace odam {

/// Gallery indices sorted by ascending Euclidean distance between
/// L2-normalized embeddings; ties keep gallery order.
std::vector<std::size_t> rank_gallery(std::span<const double> query, const Mat& gallery);

/// Mean over relevant ranks r of (relevant items in top r) / r.
/// `relevant` is in ranked order. Returns 0 when nothing is relevant.
double average_precision(const std::vector<bool>& relevant);

struct MapResult {
    double map = 0.0;
    std::size_t evaluated = 0;  // queries with at least one relevant item
    std::size_t skipped = 0;    // queries with none
};

/// Relevance is identity equality; negative identities (outliers) are never
/// relevant. With `exclude_self`, gallery item i is dropped for query i
/// (query set and gallery coincide). Throws std::runtime_error when no query
/// is evaluable.
MapResult mean_average_precision(const Mat& queries, std::span<const int> query_ids, const Mat& gallery,
                                 std::span<const int> gallery_ids, bool exclude_self = false);

struct PrPoint {
    double recall = 0.0;
    double precision = 0.0;
};

struct PrCurve {
    std::vector<PrPoint> raw;           // one point per rank
    std::vector<PrPoint> interpolated;  // suffix maximum of precision
    double average_precision = 0.0;     // area under the interpolated curve
};

/// Ranks by descending score (ties keep input order) and builds the
/// interpolated precision-recall curve.
PrCurve pr_curve(std::span<const double> scores, const std::vector<bool>& relevant);

/// Builds the curve from relevance flags already in ranked order.
PrCurve pr_curve_ranked(const std::vector<bool>& relevant);

/// Interpolated precision at fixed recall levels: max precision over points
/// with recall >= level (0 if none).
std::vector<double> precision_at_recall(const PrCurve& curve, std::span<const double> levels);

/// Inlier iff weight >= threshold.
std::vector<bool> classify_inliers(std::span<const double> weights, double threshold = 0.5);

struct DetectionScores {
    std::size_t true_pos = 0;
    std::size_t false_pos = 0;
    std::size_t false_neg = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Outliers are the positive class. Inputs are inlier flags.
DetectionScores outlier_f1(const std::vector<bool>& predicted_inlier, const std::vector<bool>& truth_inlier);

/// Retrieval report for one direction (t2s, s2s, t2t).
struct DirectionReport {
    std::string direction;
    MapResult map;
    std::size_t queries_total = 0;
    std::size_t queries_used = 0;  // classified inliers
    std::vector<double> recall_levels;
    std::vector<double> mean_precision;  // mean interpolated precision per level
};

/// Standard 11-point recall grid 0, 0.1, ..., 1.
std::vector<double> eleven_point_levels();

/// MAP plus mean interpolated precision over the queries flagged in
/// `query_used`. With `exclude_self`, queries and gallery are the same set and
/// gallery item q is dropped for query q. No evaluable query leaves
/// `map.evaluated == 0` instead of throwing.
DirectionReport evaluate_direction(std::string direction, const Mat& queries, std::span<const int> query_ids,
                                   const std::vector<bool>& query_used, const Mat& gallery,
                                   std::span<const int> gallery_ids, bool exclude_self);

/// Key-value text: `key = value` per line.
void write_report(const std::filesystem::path& path, const std::vector<std::pair<std::string, std::string>>& kv);
/// `recall precision` per line.
void write_pr_data(const std::filesystem::path& path, std::span<const double> recall,
                   std::span<const double> precision);

}  // namespace odam
