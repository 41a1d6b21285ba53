#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <vector>

#include "kiml/decomp.hpp"
#include "kiml/rng.hpp"

using namespace kiml;
using namespace kiml::decomp;

namespace {

std::vector<double> planted(std::size_t n, const std::vector<double>& pattern, double slope, double noise,
                            std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> x(n);
    for (std::size_t t = 0; t < n; ++t)
        x[t] = (1.0 + slope * static_cast<double>(t)) * pattern[t % pattern.size()] * (1.0 + noise * rng.normal());
    return x;
}

double geo_mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += std::log(x);
    return std::exp(s / static_cast<double>(v.size()));
}

}  // namespace

TEST_SUITE("decomp") {

TEST_CASE("constant series") {
    const std::vector<double> x(40, 3.5);
    const auto d = decompose_multiplicative(x, 4, 5);
    for (std::size_t k = 0; k < x.size(); ++k) {
        CHECK(d.trend[k] == doctest::Approx(3.5).epsilon(1e-14));
        CHECK(d.seasonal[k] == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(d.residual[k] == doctest::Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("planted seasonality is recovered within 1 percent") {
    const double k = 1.0 / std::cbrt(0.9 * 1.0 * 1.1);
    const std::vector<double> s{0.9 * k, 1.0 * k, 1.1 * k};
    CHECK(geo_mean(s) == doctest::Approx(1.0).epsilon(1e-12));
    const auto x = planted(300, s, 0.001, 0.0, 1);
    const auto d = decompose_multiplicative(x, 3, 3);
    const auto p = d.pattern();
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(p[j] / s[j] - 1.0) < 0.01);
    CHECK(geo_mean(p) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("reconstruction identity on random positive series") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t period = 2 + rng.uniform_index(10);
        const std::size_t n = 2 * period + rng.uniform_index(200);
        std::size_t window = period + rng.uniform_index(6);
        if (window % 2 == 0) ++window;
        std::vector<double> x(n);
        for (auto& v : x) v = std::exp(rng.uniform(-3.0, 3.0));
        const auto d = decompose_multiplicative(x, period, window);
        for (std::size_t t = 0; t < n; ++t) {
            const double back = d.trend[t] * d.seasonal[t] * d.residual[t];
            CHECK(std::abs(back - x[t]) <= 1e-12 * x[t]);
            CHECK(d.seasonal[t] == d.seasonal[t % period]);
        }
        CHECK(geo_mean(d.pattern()) == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("recompose round trip") {
    const auto x = planted(200, {0.8, 1.3, 1.0, 0.95}, 0.002, 0.01, 3);
    const auto d = decompose_multiplicative(x, 4, 5);
    const auto pattern = d.pattern();
    const auto r = recompose(d.trend, pattern, 0);
    for (std::size_t t = 0; t < x.size(); ++t) CHECK(std::abs(r[t] * d.residual[t] - x[t]) <= 1e-12 * x[t]);
}

TEST_CASE("recompose examples") {
    const std::vector<double> ones{1.0, 1.0, 1.0};
    const std::vector<double> tr{2.0, 5.0, 7.0};
    CHECK(recompose(tr, ones, 1) == tr);
    const std::vector<double> pat{0.5, 1.5};
    CHECK(recompose(std::vector<double>{2, 2, 2}, pat, 0) == std::vector<double>{1.0, 3.0, 1.0});
    CHECK(recompose(std::vector<double>{2, 2}, pat, 1) == std::vector<double>{3.0, 1.0});
    CHECK_THROWS((void)recompose(tr, pat, 2));
}

TEST_CASE("rotation by a full period leaves the pattern unchanged") {
    const auto x = planted(120, {0.9, 1.2, 0.95, 1.0, 0.97}, 0.0, 0.02, 8);
    std::vector<double> rotated(x.begin() + 5, x.end());
    rotated.insert(rotated.end(), x.begin(), x.begin() + 5);
    const auto a = decompose_multiplicative(x, 5, 5).pattern();
    const auto b = decompose_multiplicative(rotated, 5, 5).pattern();
    for (std::size_t j = 0; j < 5; ++j) CHECK(b[j] == doctest::Approx(a[j]).epsilon(0.02));
}

TEST_CASE("scaling homogeneity") {
    const auto x = planted(150, {0.9, 1.1, 1.0}, 0.003, 0.01, 2);
    std::vector<double> y = x;
    for (auto& v : y) v *= 7.5;
    const auto a = decompose_multiplicative(x, 3, 7);
    const auto b = decompose_multiplicative(y, 3, 7);
    for (std::size_t t = 0; t < x.size(); ++t) {
        CHECK(b.trend[t] == doctest::Approx(7.5 * a.trend[t]).epsilon(1e-12));
        CHECK(b.seasonal[t] == doctest::Approx(a.seasonal[t]).epsilon(1e-12));
    }
}

TEST_CASE("input validation") {
    std::vector<double> x(20, 1.0);
    CHECK_THROWS_AS((void)decompose_multiplicative(x, 11, 11), std::invalid_argument);
    CHECK_THROWS_AS((void)decompose_multiplicative(x, 4, 4), std::invalid_argument);
    CHECK_THROWS_AS((void)decompose_multiplicative(x, 4, 3), std::invalid_argument);
    x[3] = 0.0;
    CHECK_THROWS_AS((void)decompose_multiplicative(x, 4, 5), std::invalid_argument);
    x[3] = -2.0;
    CHECK_THROWS_AS((void)decompose_multiplicative(x, 4, 5), std::invalid_argument);
}

TEST_CASE("partial decomposition ignores unobserved values") {
    const auto x = planted(280, {0.9, 1.2, 1.0, 0.9}, 0.002, 0.005, 4);
    std::vector<bool> mask_bits(x.size());
    Rng rng(9);
    for (std::size_t t = 0; t < x.size(); ++t) mask_bits[t] = rng.uniform() < 0.8;
    std::unique_ptr<bool[]> mask(new bool[x.size()]);
    for (std::size_t t = 0; t < x.size(); ++t) mask[t] = mask_bits[t];
    const std::span<const bool> observed(mask.get(), x.size());

    std::vector<double> y = x;
    for (std::size_t t = 0; t < y.size(); ++t)
        if (!mask_bits[t]) y[t] = 1e6;
    const auto a = decompose_partial(x, observed, 4, 5);
    const auto b = decompose_partial(y, observed, 4, 5);
    CHECK(a.pattern() == b.pattern());
    CHECK(a.trend == b.trend);

    const auto full = decompose_multiplicative(x, 4, 5).pattern();
    for (std::size_t j = 0; j < 4; ++j) CHECK(a.pattern()[j] == doctest::Approx(full[j]).epsilon(0.01));
}

TEST_CASE("csv export") {
    const std::vector<double> x(12, 2.0);
    const auto d = decompose_multiplicative(x, 3, 3);
    std::ostringstream out;
    write_decomposition_csv(d, x, out);
    const std::string s = out.str();
    CHECK(s.rfind("t_index,observed,trend,seasonal,residual\n", 0) == 0);
    CHECK(std::count(s.begin(), s.end(), '\n') == 13);
}

}
