#pragma once

// NRMSE, R^2 and across-round summaries. Variances use the population (1/n)
// convention throughout.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace kiml::metrics {

enum class Normalizer { Range, Std, Mean };

struct MetricConfig {
    Normalizer normalizer = Normalizer::Range;
    bool report_percent = true;

    /// Column tag used in reports, e.g. "nrmse_range_pct" or "nrmse_std".
    [[nodiscard]] std::string nrmse_tag() const;
};

[[nodiscard]] std::string to_string(Normalizer n);
[[nodiscard]] Normalizer normalizer_from_string(const std::string& s);
void to_json(nlohmann::json& j, const MetricConfig& c);
void from_json(const nlohmann::json& j, MetricConfig& c);

class ZeroNormalizer : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

[[nodiscard]] double rmse(std::span<const double> pred, std::span<const double> obs);

/// RMSE / (range | std | mean of obs), times 100 when report_percent.
/// Throws ZeroNormalizer when the chosen scale of obs is zero.
[[nodiscard]] double nrmse(std::span<const double> pred, std::span<const double> obs, const MetricConfig& cfg = {});

/// 1 - SS_res / SS_tot. Throws std::domain_error for constant obs.
[[nodiscard]] double r_squared(std::span<const double> pred, std::span<const double> obs);

struct RoundStats {
    std::size_t n = 0;
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0, mean = 0, std = 0;
};

void to_json(nlohmann::json& j, const RoundStats& s);

/// Quantiles by linear interpolation between order statistics (position
/// q*(n-1)); std is the population standard deviation.
[[nodiscard]] RoundStats summarize_rounds(std::span<const double> values);

[[nodiscard]] double median(std::span<const double> values);

}  // namespace kiml::metrics
