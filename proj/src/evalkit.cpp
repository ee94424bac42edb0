#include "odam/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "odam/textio.hpp"

namespace odam {

namespace {

std::vector<double> unit(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    const double norm = std::max(std::sqrt(s), 1e-12);
    std::vector<double> out(v.begin(), v.end());
    for (double& x : out) x /= norm;
    return out;
}

Mat unit_rows(const Mat& m) {
    Mat out(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto u = unit(m.row(r));
        std::copy(u.begin(), u.end(), out.row(r).begin());
    }
    return out;
}

std::vector<std::size_t> rank_normalized(std::span<const double> unit_query, const Mat& unit_gallery) {
    std::vector<double> dist(unit_gallery.rows());
    for (std::size_t i = 0; i < dist.size(); ++i) dist[i] = squared_distance(unit_query, unit_gallery.row(i));
    std::vector<std::size_t> order(dist.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
    return order;
}

}  // namespace

std::vector<std::size_t> rank_gallery(std::span<const double> query, const Mat& gallery) {
    if (gallery.rows() == 0) throw std::invalid_argument("rank_gallery: empty gallery");
    if (query.size() != gallery.cols()) throw std::invalid_argument("rank_gallery: dimension mismatch");
    return rank_normalized(unit(query), unit_rows(gallery));
}

double average_precision(const std::vector<bool>& relevant) {
    std::size_t hits = 0;
    double sum = 0.0;
    for (std::size_t r = 0; r < relevant.size(); ++r) {
        if (!relevant[r]) continue;
        ++hits;
        sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
    return hits ? sum / static_cast<double>(hits) : 0.0;
}

MapResult mean_average_precision(const Mat& queries, std::span<const int> query_ids, const Mat& gallery,
                                 std::span<const int> gallery_ids, bool exclude_self) {
    if (queries.rows() != query_ids.size() || gallery.rows() != gallery_ids.size())
        throw std::invalid_argument("mean_average_precision: label counts do not match embeddings");
    if (exclude_self && queries.rows() != gallery.rows())
        throw std::invalid_argument("mean_average_precision: self exclusion needs query set == gallery");
    const Mat ug = unit_rows(gallery);
    MapResult result;
    double total = 0.0;
    std::vector<bool> rel;
    for (std::size_t q = 0; q < queries.rows(); ++q) {
        const int id = query_ids[q];
        rel.clear();
        if (id >= 0) {
            for (std::size_t g : rank_normalized(unit(queries.row(q)), ug)) {
                if (exclude_self && g == q) continue;
                rel.push_back(gallery_ids[g] == id);
            }
        }
        if (std::find(rel.begin(), rel.end(), true) == rel.end()) {
            ++result.skipped;
            continue;
        }
        total += average_precision(rel);
        ++result.evaluated;
    }
    if (result.evaluated == 0) throw std::runtime_error("mean_average_precision: no evaluable query");
    result.map = total / static_cast<double>(result.evaluated);
    return result;
}

PrCurve pr_curve_ranked(const std::vector<bool>& relevant) {
    PrCurve c;
    const auto total = static_cast<std::size_t>(std::count(relevant.begin(), relevant.end(), true));
    std::size_t hits = 0;
    for (std::size_t r = 0; r < relevant.size(); ++r) {
        if (relevant[r]) ++hits;
        c.raw.push_back({total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0,
                         static_cast<double>(hits) / static_cast<double>(r + 1)});
    }
    c.interpolated = c.raw;
    for (std::size_t i = c.interpolated.size(); i-- > 1;)
        c.interpolated[i - 1].precision = std::max(c.interpolated[i - 1].precision, c.interpolated[i].precision);
    double prev_recall = 0.0;
    for (const PrPoint& p : c.interpolated) {
        c.average_precision += (p.recall - prev_recall) * p.precision;
        prev_recall = p.recall;
    }
    return c;
}

PrCurve pr_curve(std::span<const double> scores, const std::vector<bool>& relevant) {
    if (scores.size() != relevant.size()) throw std::invalid_argument("pr_curve: length mismatch");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::vector<bool> ranked(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) ranked[i] = relevant[order[i]];
    return pr_curve_ranked(ranked);
}

std::vector<double> precision_at_recall(const PrCurve& curve, std::span<const double> levels) {
    std::vector<double> out;
    for (double level : levels) {
        double best = 0.0;
        for (const PrPoint& p : curve.raw)
            if (p.recall >= level - 1e-12) best = std::max(best, p.precision);
        out.push_back(best);
    }
    return out;
}

std::vector<bool> classify_inliers(std::span<const double> weights, double threshold) {
    std::vector<bool> out;
    out.reserve(weights.size());
    for (double w : weights) out.push_back(w >= threshold);
    return out;
}

DetectionScores outlier_f1(const std::vector<bool>& predicted_inlier, const std::vector<bool>& truth_inlier) {
    if (predicted_inlier.size() != truth_inlier.size()) throw std::invalid_argument("outlier_f1: length mismatch");
    DetectionScores s;
    for (std::size_t i = 0; i < truth_inlier.size(); ++i) {
        const bool pred_out = !predicted_inlier[i];
        const bool true_out = !truth_inlier[i];
        if (pred_out && true_out) ++s.true_pos;
        if (pred_out && !true_out) ++s.false_pos;
        if (!pred_out && true_out) ++s.false_neg;
    }
    const double tp = static_cast<double>(s.true_pos);
    s.precision = s.true_pos + s.false_pos ? tp / static_cast<double>(s.true_pos + s.false_pos) : 0.0;
    s.recall = s.true_pos + s.false_neg ? tp / static_cast<double>(s.true_pos + s.false_neg) : 0.0;
    s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

std::vector<double> eleven_point_levels() {
    std::vector<double> levels;
    for (int i = 0; i <= 10; ++i) levels.push_back(i / 10.0);
    return levels;
}

DirectionReport evaluate_direction(std::string direction, const Mat& queries, std::span<const int> query_ids,
                                   const std::vector<bool>& query_used, const Mat& gallery,
                                   std::span<const int> gallery_ids, bool exclude_self) {
    if (queries.rows() != query_ids.size() || queries.rows() != query_used.size() ||
        gallery.rows() != gallery_ids.size())
        throw std::invalid_argument("evaluate_direction: label counts do not match embeddings");
    if (queries.cols() != gallery.cols()) throw std::invalid_argument("evaluate_direction: embedding widths differ");
    if (exclude_self && queries.rows() != gallery.rows())
        throw std::invalid_argument("evaluate_direction: self exclusion needs query set == gallery");

    DirectionReport report;
    report.direction = std::move(direction);
    report.queries_total = queries.rows();
    report.recall_levels = eleven_point_levels();
    report.mean_precision.assign(report.recall_levels.size(), 0.0);

    const Mat ug = unit_rows(gallery);
    double total = 0.0;
    std::vector<bool> rel;
    for (std::size_t q = 0; q < queries.rows(); ++q) {
        if (!query_used[q]) continue;
        ++report.queries_used;
        rel.clear();
        if (query_ids[q] >= 0)
            for (std::size_t g : rank_normalized(unit(queries.row(q)), ug)) {
                if (exclude_self && g == q) continue;
                rel.push_back(gallery_ids[g] == query_ids[q]);
            }
        if (std::find(rel.begin(), rel.end(), true) == rel.end()) {
            ++report.map.skipped;
            continue;
        }
        total += average_precision(rel);
        ++report.map.evaluated;
        const auto prec = precision_at_recall(pr_curve_ranked(rel), report.recall_levels);
        for (std::size_t i = 0; i < prec.size(); ++i) report.mean_precision[i] += prec[i];
    }
    if (report.map.evaluated > 0) {
        const auto n = static_cast<double>(report.map.evaluated);
        report.map.map = total / n;
        for (double& p : report.mean_precision) p /= n;
    }
    return report;
}

void write_report(const std::filesystem::path& path, const std::vector<std::pair<std::string, std::string>>& kv) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write report " + path.string());
    for (const auto& [k, v] : kv) os << k << " = " << v << '\n';
    if (!os) throw std::runtime_error("failed writing report " + path.string());
}

void write_pr_data(const std::filesystem::path& path, std::span<const double> recall,
                   std::span<const double> precision) {
    if (recall.size() != precision.size()) throw std::invalid_argument("write_pr_data: length mismatch");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write PR data " + path.string());
    for (std::size_t i = 0; i < recall.size(); ++i) os << format_real(recall[i]) << ' ' << format_real(precision[i]) << '\n';
    if (!os) throw std::runtime_error("failed writing PR data " + path.string());
}

}  // namespace odam
