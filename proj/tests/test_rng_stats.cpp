#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "invlab/parallel.hpp"
#include "invlab/rng.hpp"
#include "invlab/stats.hpp"

using namespace invlab;

TEST_CASE("rng streams are deterministic and substreams differ") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());

    Rng s0(42, 0), s1(42, 1);
    bool any_diff = false;
    for (int i = 0; i < 10; ++i) any_diff |= (s0.next() != s1.next());
    CHECK(any_diff);

    // Substream construction depends only on (seed, index).
    Rng c(7, 3), d(7, 3);
    CHECK(c.next() == d.next());
}

TEST_CASE("rng bounded stays in range and covers values") {
    Rng rng(1);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 2000; ++i) {
        const std::uint64_t v = rng.bounded(7);
        CHECK(v < 7);
        seen.insert(v);
    }
    CHECK(seen.size() == 7);
}

TEST_CASE("rng uniform lies in [0,1) and gaussian has sane moments") {
    Rng rng(3);
    double sum = 0.0, sum2 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    for (int i = 0; i < n; ++i) {
        const double g = rng.gaussian();
        sum += g;
        sum2 += g * g;
    }
    const double mean_g = sum / n;
    const double var_g = sum2 / n - mean_g * mean_g;
    CHECK(std::fabs(mean_g) < 0.02);
    CHECK(std::fabs(var_g - 1.0) < 0.03);
}

TEST_CASE("pairwise_sum matches long double accumulation") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 1 + rng.bounded(5000);
        std::vector<double> x(n);
        long double ref = 0.0L;
        for (auto& v : x) {
            v = rng.gaussian() * 1e3;
            ref += v;
        }
        const double got = pairwise_sum(x);
        CHECK(got == doctest::Approx(static_cast<double>(ref)).epsilon(1e-12));
    }
    CHECK(pairwise_sum(nullptr, 0) == 0.0);
    CHECK(mean({2.0, 4.0, 9.0}) == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("normal cdf and quantile hit reference values and invert") {
    CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(normal_cdf(-1.0) == doctest::Approx(0.15865525393145705).epsilon(1e-13));
    CHECK(normal_cdf(1.0) == doctest::Approx(0.84134474606854295).epsilon(1e-13));
    CHECK(normal_cdf(-2.0) == doctest::Approx(0.022750131948179207).epsilon(1e-13));
    CHECK(normal_quantile(0.95) == doctest::Approx(1.6448536269514727).epsilon(1e-13));
    CHECK(normal_quantile(0.975) == doctest::Approx(1.9599639845400542).epsilon(1e-13));
    for (double p = 0.01; p < 1.0; p += 0.037) {
        CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-12));
    }
}

TEST_CASE("sorted_quantile interpolates linearly") {
    const std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
    CHECK(sorted_quantile(x, 0.0) == 1.0);
    CHECK(sorted_quantile(x, 1.0) == 4.0);
    CHECK(sorted_quantile(x, 0.5) == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(sorted_quantile(x, 0.25) == doctest::Approx(1.75).epsilon(1e-15));
    CHECK(sorted_quantile({5.0}, 0.7) == 5.0);
}

TEST_CASE("median_inplace handles odd and even counts") {
    std::vector<double> odd = {3.0, 1.0, 2.0};
    CHECK(median_inplace(odd) == 2.0);
    std::vector<double> even = {4.0, 1.0, 3.0, 2.0};
    CHECK(median_inplace(even) == doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("parallel_for visits every index exactly once for any thread count") {
    for (const int threads : {1, 2, 3, 8}) {
        const std::size_t n = 1003;
        std::vector<int> hits(n, 0);
        parallel_for(n, threads, [&](std::size_t i) { hits[i] += 1; });
        CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    }
    parallel_for(0, 4, [&](std::size_t) { CHECK(false); });
}
