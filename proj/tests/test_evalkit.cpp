#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "doctest.h"
#include "gen.hpp"
#include "odam/evalkit.hpp"
#include "oracles.hpp"

using namespace odam;

TEST_CASE("rank_gallery examples") {
    const Mat gallery{{1, 0}, {0, 1}, {0.6, 0.8}};
    CHECK(rank_gallery(std::vector<double>{0, 1}, gallery).front() == 1);

    // Normalized distances from the query: 0.5-ish for the first, 0.1-ish for the second.
    const Mat two{{std::cos(0.5), std::sin(0.5)}, {std::cos(0.1), std::sin(0.1)}};
    CHECK(rank_gallery(std::vector<double>{1, 0}, two) == std::vector<std::size_t>{1, 0});

    Mat scaled = gallery;
    for (double& x : scaled.data()) x *= 10.0;
    CHECK(rank_gallery(std::vector<double>{0.3, 0.2}, scaled) == rank_gallery(std::vector<double>{0.3, 0.2}, gallery));
    CHECK_THROWS_AS(rank_gallery(std::vector<double>{1}, gallery), std::invalid_argument);
}

TEST_CASE("average precision examples") {
    CHECK(average_precision({true, false, true}) == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
    CHECK(average_precision({true, true, true}) == 1.0);
    CHECK(average_precision({false, false}) == 0.0);

    // Relevant items ranked last give the smallest AP over every ordering of 4 items.
    const std::vector<bool> last{false, false, true, true};
    std::vector<bool> perm{false, false, true, true};
    double lowest = 1.0;
    do lowest = std::min(lowest, oracle::average_precision(perm));
    while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(average_precision(last) == lowest);
}

TEST_CASE("mean_average_precision examples") {
    const Mat e{{1, 0}, {0.9, 0.1}, {0, 1}, {0.1, 0.9}};
    const std::vector<int> ids{0, 0, 1, 1};
    const auto perfect = mean_average_precision(e, ids, e, ids);
    CHECK(perfect.map == 1.0);
    CHECK(perfect.evaluated == 4);

    const auto excluded = mean_average_precision(e, ids, e, ids, true);
    CHECK(excluded.map == 1.0);

    const std::vector<int> outlier_ids{-1, -1, -1, -1};
    CHECK_THROWS_AS(mean_average_precision(e, outlier_ids, e, ids), std::runtime_error);
    const std::vector<int> lonely{0, 1, 2, 3};
    CHECK_THROWS_AS(mean_average_precision(e, lonely, e, lonely, true), std::runtime_error);
    const std::vector<int> mixed{0, 0, 1, 2};
    const auto partial = mean_average_precision(e, mixed, e, mixed, true);
    CHECK(partial.evaluated == 2);
    CHECK(partial.skipped == 2);
}

TEST_CASE("property: MAP matches the brute-force oracle on small galleries") {
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        gen::Rng rng(seed);
        const std::size_t n = gen::index(rng, 1, 6);
        const Mat gallery = gen::mat(rng, n, 2);
        std::vector<int> gids(n);
        for (int& id : gids) id = static_cast<int>(gen::index(rng, 0, 2));
        const std::size_t nq = gen::index(rng, 1, 3);
        const Mat queries = gen::mat(rng, nq, 2);
        std::vector<int> qids(nq);
        for (int& id : qids) id = static_cast<int>(gen::index(rng, 0, 2));

        const auto want = oracle::mean_average_precision(queries, qids, gallery, gids, false);
        if (want.evaluated == 0) {
            CHECK_THROWS(mean_average_precision(queries, qids, gallery, gids));
            continue;
        }
        const auto got = mean_average_precision(queries, qids, gallery, gids);
        CHECK(got.map == want.map);
        CHECK(got.evaluated == want.evaluated);
        CHECK(got.map >= 0.0);
        CHECK(got.map <= 1.0);
    }
}

TEST_CASE("property: self exclusion matches the oracle") {
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        gen::Rng rng(seed);
        const std::size_t n = gen::index(rng, 2, 6);
        const Mat e = gen::mat(rng, n, 3);
        std::vector<int> ids(n);
        for (int& id : ids) id = static_cast<int>(gen::index(rng, 0, 1));
        const auto want = oracle::mean_average_precision(e, ids, e, ids, true);
        if (want.evaluated == 0) continue;
        CHECK(mean_average_precision(e, ids, e, ids, true).map == want.map);
    }
}

TEST_CASE("property: ranking ignores positive scaling") {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        gen::Rng rng(seed);
        const std::size_t d = gen::index(rng, 1, 5);
        const Mat gallery = gen::mat(rng, gen::index(rng, 1, 10), d);
        const Mat q = gen::mat(rng, 1, d);
        Mat scaled = gallery;
        const double s = gen::uniform(rng, 0.01, 100);
        for (double& x : scaled.data()) x *= s;
        CHECK(rank_gallery(q.row(0), scaled) == rank_gallery(q.row(0), gallery));
    }
}

TEST_CASE("pr_curve examples") {
    const auto all = pr_curve_ranked({true, true, true});
    for (const auto& p : all.interpolated) CHECK(p.precision == 1.0);

    // Raw precisions (1, 0.5, 0.67) at recalls (0.5, 0.5, 1).
    const auto c = pr_curve_ranked({true, false, true});
    REQUIRE(c.raw.size() == 3);
    CHECK(c.raw[1].precision == 0.5);
    CHECK(c.raw[1].recall == 0.5);
    CHECK(c.interpolated[0].precision == 1.0);
    CHECK(c.interpolated[1].precision == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(c.interpolated[2].precision == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

    const auto first = pr_curve(std::vector<double>{0.9, 0.1, 0.2, 0.3}, {true, false, false, false});
    CHECK(first.average_precision == 1.0);
    CHECK_THROWS_AS(pr_curve(std::vector<double>{1.0}, {true, false}), std::invalid_argument);

    const std::vector<double> levels{0.0, 0.5, 1.0};
    CHECK(precision_at_recall(c, levels) == std::vector<double>{1.0, 1.0, c.raw[2].precision});
}

TEST_CASE("property: interpolated precision is nonincreasing in recall") {
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        gen::Rng rng(seed);
        const auto rel = gen::flags(rng, gen::index(rng, 1, 20));
        const auto c = pr_curve_ranked(rel);
        for (std::size_t i = 1; i < c.interpolated.size(); ++i) {
            CHECK(c.interpolated[i].precision <= c.interpolated[i - 1].precision);
            CHECK(c.interpolated[i].recall >= c.interpolated[i - 1].recall);
        }
        const auto p = precision_at_recall(c, eleven_point_levels());
        CHECK(std::is_sorted(p.rbegin(), p.rend()));
    }
}

TEST_CASE("classify_inliers examples") {
    CHECK(classify_inliers(std::vector<double>{0.8}, 0.5) == std::vector<bool>{true});
    CHECK(classify_inliers(std::vector<double>{0.5}, 0.5) == std::vector<bool>{true});
    CHECK(classify_inliers(std::vector<double>{0.3, 0.3}, 0.5) == std::vector<bool>{false, false});

    // All weights 0.3: no query survives, and the direction reports nothing evaluable.
    const Mat e{{1, 0}, {0, 1}};
    const std::vector<int> ids{0, 1};
    const auto used = classify_inliers(std::vector<double>{0.3, 0.3}, 0.5);
    const auto report = evaluate_direction("t2s", e, ids, used, e, ids, false);
    CHECK(report.queries_used == 0);
    CHECK(report.map.evaluated == 0);
}

TEST_CASE("property: threshold extremes") {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        gen::Rng rng(seed);
        std::vector<double> w(gen::index(rng, 1, 30));
        for (double& x : w) x = gen::uniform(rng, 0.0, 1.0);
        for (bool b : classify_inliers(w, 0.0)) CHECK(b);
        for (bool b : classify_inliers(w, std::nextafter(1.0, 2.0))) CHECK_FALSE(b);
    }
}

TEST_CASE("outlier_f1 examples") {
    const std::vector<bool> truth{true, false, true, false};
    CHECK(outlier_f1(truth, truth).f1 == 1.0);

    const auto none = outlier_f1({true, true, true, true}, truth);
    CHECK(none.recall == 0.0);
    CHECK(none.f1 == 0.0);

    // TP 2, FP 1, FN 1.
    const std::vector<bool> t{false, false, false, true, true};
    const std::vector<bool> p{false, false, true, false, true};
    const auto s = outlier_f1(p, t);
    CHECK(s.true_pos == 2);
    CHECK(s.false_pos == 1);
    CHECK(s.false_neg == 1);
    CHECK(s.precision == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(s.recall == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(s.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK_THROWS_AS(outlier_f1({true}, truth), std::invalid_argument);
}

TEST_CASE("property: F1 stays in the unit interval") {
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        gen::Rng rng(seed);
        const std::size_t n = gen::index(rng, 1, 30);
        const auto s = outlier_f1(gen::flags(rng, n), gen::flags(rng, n));
        CHECK(s.f1 >= 0.0);
        CHECK(s.f1 <= 1.0);
    }
}

TEST_CASE("evaluate_direction counts and files") {
    const Mat e{{1, 0}, {0.9, 0.1}, {0, 1}, {0.1, 0.9}};
    const std::vector<int> ids{0, 0, 1, -1};
    const auto r = evaluate_direction("t2t", e, ids, {true, true, true, false}, e, ids, true);
    CHECK(r.queries_total == 4);
    CHECK(r.queries_used == 3);
    CHECK(r.map.evaluated == 2);  // identity 1 has no other member
    CHECK(r.map.skipped == 1);
    CHECK(r.map.map == 1.0);
    CHECK(r.mean_precision.size() == 11);

    const auto dir = std::filesystem::temp_directory_path() / "odam_test_evalkit";
    std::filesystem::create_directories(dir);
    write_report(dir / "x.report", {{"map", "1"}, {"queries", "3"}});
    write_pr_data(dir / "x.dat", std::vector<double>{0.0, 1.0}, std::vector<double>{1.0, 0.5});
    std::ifstream rep(dir / "x.report"), dat(dir / "x.dat");
    std::string a, b;
    std::getline(rep, a);
    std::getline(dat, b);
    CHECK(a == "map = 1");
    CHECK(b == "0 1");
}
