#include "kiml/decomp.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "kiml/physics.hpp"

namespace kiml::decomp {

std::vector<double> Decomposition::pattern() const {
    return {seasonal.begin(), seasonal.begin() + static_cast<std::ptrdiff_t>(std::min(period, seasonal.size()))};
}

namespace {

std::vector<double> moving_average(std::span<const double> x, std::size_t window) {
    const std::size_t n = x.size();
    std::vector<double> out(n);
    if (n <= window) {
        const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
        std::fill(out.begin(), out.end(), mean);
        return out;
    }
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t k = 0; k < n; ++k) prefix[k + 1] = prefix[k] + x[k];
    const std::size_t half = window / 2;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t lo = k >= half ? k - half : 0;
        if (lo + window > n) lo = n - window;
        out[k] = (prefix[lo + window] - prefix[lo]) / static_cast<double>(window);
    }
    return out;
}

}  // namespace

Decomposition decompose_multiplicative(std::span<const double> series, std::size_t period, std::size_t trend_window) {
    const std::size_t n = series.size();
    if (period == 0) throw std::invalid_argument("decompose: period must be positive");
    if (n < 2 * period) throw std::invalid_argument("decompose: series shorter than two periods");
    if (trend_window % 2 == 0) throw std::invalid_argument("decompose: trend window must be odd");
    if (trend_window < period) throw std::invalid_argument("decompose: trend window narrower than the period");
    for (double v : series) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument("decompose: multiplicative model needs strictly positive finite values");
        }
    }

    Decomposition d;
    d.period = period;
    d.trend = moving_average(series, trend_window);

    std::vector<double> log_sum(period, 0.0);
    std::vector<std::size_t> count(period, 0);
    for (std::size_t k = 0; k < n; ++k) {
        log_sum[k % period] += std::log(series[k] / d.trend[k]);
        ++count[k % period];
    }
    std::vector<double> log_pattern(period);
    for (std::size_t j = 0; j < period; ++j) log_pattern[j] = log_sum[j] / static_cast<double>(count[j]);
    const double centre = std::accumulate(log_pattern.begin(), log_pattern.end(), 0.0) / static_cast<double>(period);
    std::vector<double> pattern(period);
    for (std::size_t j = 0; j < period; ++j) pattern[j] = std::exp(log_pattern[j] - centre);

    d.seasonal.resize(n);
    d.residual.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        d.seasonal[k] = pattern[k % period];
        d.residual[k] = series[k] / (d.trend[k] * d.seasonal[k]);
    }
    return d;
}

Decomposition decompose_partial(std::span<const double> series, std::span<const bool> observed, std::size_t period,
                                std::size_t trend_window, std::size_t iterations) {
    const std::size_t n = series.size();
    if (observed.size() != n) throw std::invalid_argument("decompose_partial: mask length differs from series");
    std::vector<std::size_t> seen;
    for (std::size_t k = 0; k < n; ++k) {
        if (observed[k]) {
            if (!(series[k] > 0.0) || !std::isfinite(series[k])) {
                throw std::invalid_argument("decompose: multiplicative model needs strictly positive finite values");
            }
            seen.push_back(k);
        }
    }
    if (seen.size() < 2) throw std::invalid_argument("decompose_partial: need at least two observed points");
    if (period == 0) throw std::invalid_argument("decompose: period must be positive");

    std::vector<double> pattern(period, 1.0);
    std::vector<double> filled(n);
    Decomposition d;
    for (std::size_t it = 0; it < std::max<std::size_t>(iterations, 1); ++it) {
        std::size_t next = 0;  // index into `seen` of the first observed point >= k
        for (std::size_t k = 0; k < n; ++k) {
            while (next < seen.size() && seen[next] < k) ++next;
            if (next < seen.size() && seen[next] == k) {
                filled[k] = series[k];
                continue;
            }
            const auto deseason = [&](std::size_t idx) { return series[idx] / pattern[idx % period]; };
            double level = 0.0;
            if (next == 0) {
                level = deseason(seen.front());
            } else if (next == seen.size()) {
                level = deseason(seen.back());
            } else {
                const std::size_t a = seen[next - 1];
                const std::size_t b = seen[next];
                const double w = static_cast<double>(k - a) / static_cast<double>(b - a);
                level = (1.0 - w) * deseason(a) + w * deseason(b);
            }
            filled[k] = level * pattern[k % period];
        }
        d = decompose_multiplicative(filled, period, trend_window);
        pattern = d.pattern();
    }
    return d;
}

std::vector<double> recompose(std::span<const double> trend_forecast, std::span<const double> pattern,
                              std::size_t start_phase) {
    if (pattern.empty()) throw std::invalid_argument("recompose: empty seasonal pattern");
    if (start_phase >= pattern.size()) throw std::invalid_argument("recompose: start phase outside the period");
    std::vector<double> out(trend_forecast.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = trend_forecast[k] * pattern[(start_phase + k) % pattern.size()];
    }
    return out;
}

void write_decomposition_csv(const Decomposition& d, std::span<const double> observed, std::ostream& out) {
    using physics::format_double;
    if (observed.size() != d.size()) throw std::invalid_argument("write_decomposition_csv: length mismatch");
    out << "t_index,observed,trend,seasonal,residual\n";
    for (std::size_t k = 0; k < d.size(); ++k) {
        out << k << ',' << format_double(observed[k]) << ',' << format_double(d.trend[k]) << ','
            << format_double(d.seasonal[k]) << ',' << format_double(d.residual[k]) << '\n';
    }
}

}  // namespace kiml::decomp
