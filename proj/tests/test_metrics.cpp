#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "kiml/metrics.hpp"
#include "kiml/rng.hpp"

using namespace kiml;
using namespace kiml::metrics;

TEST_SUITE("metrics") {

TEST_CASE("nrmse examples") {
    const std::vector<double> obs{0.0, 10.0};
    CHECK(nrmse(obs, obs) == 0.0);
    CHECK(nrmse(std::vector<double>{1.0, 9.0}, obs) == doctest::Approx(10.0).epsilon(1e-14));
    MetricConfig frac;
    frac.report_percent = false;
    CHECK(nrmse(std::vector<double>{1.0, 9.0}, obs, frac) == doctest::Approx(0.1).epsilon(1e-14));
    MetricConfig sd;
    sd.normalizer = Normalizer::Std;
    CHECK(nrmse(std::vector<double>{1.0, 9.0}, obs, sd) == doctest::Approx(20.0).epsilon(1e-14));
    MetricConfig mean;
    mean.normalizer = Normalizer::Mean;
    CHECK(nrmse(std::vector<double>{1.0, 9.0}, obs, mean) == doctest::Approx(20.0).epsilon(1e-14));
    const std::vector<double> flat{3.0, 3.0, 3.0};
    CHECK_THROWS_AS((void)nrmse(std::vector<double>{1.0, 2.0, 3.0}, flat), ZeroNormalizer);
    CHECK_THROWS_AS((void)nrmse(std::vector<double>{1.0, 2.0, 3.0}, flat, sd), ZeroNormalizer);
    CHECK_THROWS((void)nrmse(std::vector<double>{1.0}, obs));
}

TEST_CASE("r squared examples") {
    const std::vector<double> obs{0.0, 1.0, 2.0};
    CHECK(r_squared(obs, obs) == 1.0);
    CHECK(r_squared(std::vector<double>{1.0, 1.0, 1.0}, obs) == 0.0);
    CHECK(r_squared(std::vector<double>{0.0, 0.0, 0.0}, obs) == doctest::Approx(-1.5).epsilon(1e-14));
    CHECK_THROWS((void)r_squared(obs, std::vector<double>{4.0, 4.0, 4.0}));
}

TEST_CASE("summaries") {
    const std::vector<double> one{5.0};
    const auto s = summarize_rounds(one);
    CHECK(s.n == 1);
    CHECK(s.min == 5.0);
    CHECK(s.q1 == 5.0);
    CHECK(s.median == 5.0);
    CHECK(s.q3 == 5.0);
    CHECK(s.max == 5.0);
    CHECK(s.mean == 5.0);
    CHECK(s.std == 0.0);
    const std::vector<double> four{1.0, 2.0, 3.0, 4.0};
    CHECK(summarize_rounds(four).median == 2.5);
    CHECK(summarize_rounds(four).q1 == 1.75);
    CHECK(median(four) == 2.5);

    Rng rng(4);
    std::vector<double> v(17);
    for (auto& x : v) x = rng.normal();
    const auto a = summarize_rounds(v);
    rng.shuffle(std::span<double>(v));
    const auto b = summarize_rounds(v);
    CHECK(a.median == b.median);
    CHECK(a.q1 == b.q1);
    CHECK(a.q3 == b.q3);
    CHECK(a.min <= a.q1);
    CHECK(a.q1 <= a.median);
    CHECK(a.median <= a.q3);
    CHECK(a.q3 <= a.max);
}

TEST_CASE("shift and affine invariance") {
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> p(30);
        std::vector<double> o(30);
        for (std::size_t k = 0; k < p.size(); ++k) {
            o[k] = rng.normal(3.0, 2.0);
            p[k] = o[k] + rng.normal(0.0, 0.5);
        }
        const double c = rng.uniform(-100.0, 100.0);
        const double s = rng.uniform(0.1, 10.0);
        std::vector<double> ps = p;
        std::vector<double> os = o;
        std::vector<double> pa = p;
        std::vector<double> oa = o;
        for (std::size_t k = 0; k < p.size(); ++k) {
            ps[k] += c;
            os[k] += c;
            pa[k] = s * p[k] + c;
            oa[k] = s * o[k] + c;
        }
        MetricConfig sd;
        sd.normalizer = Normalizer::Std;
        CHECK(nrmse(ps, os) == doctest::Approx(nrmse(p, o)).epsilon(1e-9));
        CHECK(nrmse(ps, os, sd) == doctest::Approx(nrmse(p, o, sd)).epsilon(1e-9));
        CHECK(r_squared(pa, oa) == doctest::Approx(r_squared(p, o)).epsilon(1e-9));
    }
}

TEST_CASE("nrmse_std squared equals one minus r squared") {
    Rng rng(21);
    MetricConfig sd;
    sd.normalizer = Normalizer::Std;
    sd.report_percent = false;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.uniform_index(50);
        std::vector<double> p(n);
        std::vector<double> o(n);
        for (std::size_t k = 0; k < n; ++k) {
            o[k] = rng.normal(0.0, 5.0);
            p[k] = rng.normal(0.0, 5.0);
        }
        const double e = nrmse(p, o, sd);
        CHECK(std::abs(e * e - (1.0 - r_squared(p, o))) < 1e-10);
    }
}

TEST_CASE("normalizer names and tags") {
    CHECK(normalizer_from_string("range") == Normalizer::Range);
    CHECK(normalizer_from_string("std") == Normalizer::Std);
    CHECK(normalizer_from_string("mean") == Normalizer::Mean);
    CHECK_THROWS((void)normalizer_from_string("max"));
    CHECK(MetricConfig{}.nrmse_tag() == "nrmse_range_pct");
    CHECK(MetricConfig{Normalizer::Std, false}.nrmse_tag() == "nrmse_std");
}

}
