#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "gen.hpp"
#include "odam/kernels.hpp"

using namespace odam;

TEST_CASE("gaussian_kernel examples") {
    const std::vector<double> a{0.3, -1.2};
    CHECK(gaussian_kernel(a, a, 0.7) == 1.0);
    CHECK(gaussian_kernel(std::vector<double>{0}, std::vector<double>{1}, 1.0) == doctest::Approx(0.367879).epsilon(1e-6));
    CHECK(gaussian_kernel(std::vector<double>{0, 0}, std::vector<double>{1, 1}, 2.0) == std::exp(-1.0));
    CHECK_THROWS_AS(gaussian_kernel(a, a, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(gaussian_kernel(a, a, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(gaussian_kernel(a, std::vector<double>{1}, 1.0), std::invalid_argument);
}

TEST_CASE("median_bandwidth examples") {
    CHECK(median_bandwidth(Mat{{0}, {1}, {3}}) == 4.0);
    CHECK(median_bandwidth(Mat{{2, 5}, {2, 5}}) == kMedianFloor);
    CHECK(median_bandwidth(Mat{{0}, {2}}) == 4.0);
    // Four points, six pairs: squared distances {1, 4, 9, 1, 4, 1} -> middle pair (1, 4).
    CHECK(median_bandwidth(Mat{{0}, {1}, {2}, {3}}) == 2.5);
    CHECK_THROWS_AS(median_bandwidth(Mat{{1, 2}}), std::invalid_argument);
}

TEST_CASE("build_bank examples") {
    const auto b = build_bank(1.0, 8, 2.0);
    REQUIRE(b.size() == 17);
    CHECK(b.bandwidths.front() == std::ldexp(1.0, -8));
    CHECK(b.bandwidths.back() == 256.0);
    for (double w : b.weights) CHECK(w == 1.0 / 17.0);

    const auto single = build_bank(1.0, 0, 2.0);
    REQUIRE(single.size() == 1);
    CHECK(single.weights[0] == 1.0);

    const auto three = build_bank(4.0, 1, 2.0);
    CHECK(three.bandwidths == std::vector<double>{2.0, 4.0, 8.0});

    CHECK_THROWS_AS(build_bank(1.0, -1, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(build_bank(1.0, 2, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(build_bank(0.0, 2, 2.0), std::invalid_argument);
}

namespace {

// Independent oracle: all pairwise squared distances, sorted, middle taken.
double median_oracle(const Mat& m) {
    std::vector<double> d;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = i + 1; j < m.rows(); ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < m.cols(); ++c) s += (m(i, c) - m(j, c)) * (m(i, c) - m(j, c));
            d.push_back(s);
        }
    std::sort(d.begin(), d.end());
    const std::size_t n = d.size();
    const double med = n % 2 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
    return med > 0.0 ? med : kMedianFloor;
}

}  // namespace

TEST_CASE("property: median matches the sorting oracle and ignores row order") {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        gen::Rng rng(seed);
        const Mat m = gen::mat(rng, gen::index(rng, 2, 15), gen::index(rng, 1, 4), -3, 3);
        const double med = median_bandwidth(m);
        CHECK(med == doctest::Approx(median_oracle(m)).epsilon(1e-12));

        std::vector<std::size_t> perm(m.rows());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        CHECK(median_bandwidth(select_rows(m, perm)) == med);
    }
}

TEST_CASE("property: median is translation invariant") {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        gen::Rng rng(seed);
        Mat m = gen::mat(rng, gen::index(rng, 2, 12), 3, -2, 2);
        const double before = median_bandwidth(m);
        const std::vector<double> shift{gen::uniform(rng, -5, 5), gen::uniform(rng, -5, 5), gen::uniform(rng, -5, 5)};
        for (std::size_t r = 0; r < m.rows(); ++r)
            for (std::size_t c = 0; c < 3; ++c) m(r, c) += shift[c];
        CHECK(median_bandwidth(m) == doctest::Approx(before).epsilon(1e-9));
    }
}

TEST_CASE("property: kernel symmetry and bank weights") {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        gen::Rng rng(seed);
        const std::size_t d = gen::index(rng, 1, 6);
        const Mat xy = gen::mat(rng, 2, d, -3, 3);
        const double s = gen::uniform(rng, 0.01, 10);
        const double k = gaussian_kernel(xy.row(0), xy.row(1), s);
        CHECK(k == gaussian_kernel(xy.row(1), xy.row(0), s));
        CHECK(k > 0.0);
        CHECK(k <= 1.0);

        const auto bank = build_bank(gen::uniform(rng, 0.1, 10), static_cast<int>(gen::index(rng, 0, 10)),
                                     gen::uniform(rng, 1.1, 3));
        CHECK(std::abs(std::accumulate(bank.weights.begin(), bank.weights.end(), 0.0) - 1.0) < 1e-12);
        CHECK(std::is_sorted(bank.bandwidths.begin(), bank.bandwidths.end(), std::less_equal<>()));
        CHECK(std::adjacent_find(bank.bandwidths.begin(), bank.bandwidths.end()) == bank.bandwidths.end());
    }
}
