#pragma once

// Multiplicative trend / seasonal / residual decomposition.

#include <cstddef>
#include <ostream>
#include <span>
#include <vector>

namespace kiml::decomp {

struct Decomposition {
    std::vector<double> trend;
    std::vector<double> seasonal;  ///< tiled: seasonal[k] == pattern[k % period]
    std::vector<double> residual;
    std::size_t period = 1;

    [[nodiscard]] std::size_t size() const { return trend.size(); }
    /// The first `period` seasonal factors; geometric mean 1.
    [[nodiscard]] std::vector<double> pattern() const;
};

/// Classical multiplicative decomposition.
///
/// trend: centered moving average of width `trend_window` (odd, >= period).
/// Within half a window of either end the window keeps its full width and is
/// anchored at that end, so it still spans whole periods. When the series is
/// shorter than the window the trend is the series mean.
///
/// seasonal: per phase, geometric mean of series/trend, rescaled so the
/// pattern's geometric mean is 1, then tiled.
///
/// residual: series / (trend * seasonal).
///
/// Throws std::invalid_argument for non-positive or non-finite values, fewer
/// than 2*period points, an even window, or a window narrower than period.
[[nodiscard]] Decomposition decompose_multiplicative(std::span<const double> series, std::size_t period,
                                                     std::size_t trend_window);

/// Decomposition of a series observed only where `observed[k]` is true.
///
/// Unobserved points are filled from the current seasonal estimate times a
/// linear interpolation of the deseasonalized observed neighbours, then the
/// full grid is decomposed; this alternates `iterations` times starting from a
/// flat seasonal pattern. Values at unobserved points never influence the
/// result. The returned residual is relative to the filled series.
[[nodiscard]] Decomposition decompose_partial(std::span<const double> series, std::span<const bool> observed,
                                              std::size_t period, std::size_t trend_window,
                                              std::size_t iterations = 5);

/// output[k] = trend_forecast[k] * pattern[(start_phase + k) % pattern.size()].
/// The residual is not reattached.
[[nodiscard]] std::vector<double> recompose(std::span<const double> trend_forecast, std::span<const double> pattern,
                                            std::size_t start_phase);

/// CSV with header `t_index,observed,trend,seasonal,residual`.
void write_decomposition_csv(const Decomposition& d, std::span<const double> observed, std::ostream& out);

}  // namespace kiml::decomp
