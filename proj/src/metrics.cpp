#include "kiml/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace kiml::metrics {

std::string to_string(Normalizer n) {
    switch (n) {
        case Normalizer::Range: return "range";
        case Normalizer::Std: return "std";
        case Normalizer::Mean: return "mean";
    }
    return "range";
}

Normalizer normalizer_from_string(const std::string& s) {
    if (s == "range") return Normalizer::Range;
    if (s == "std") return Normalizer::Std;
    if (s == "mean") return Normalizer::Mean;
    throw std::invalid_argument("unknown NRMSE normalizer '" + s + "'");
}

std::string MetricConfig::nrmse_tag() const {
    return "nrmse_" + to_string(normalizer) + (report_percent ? "_pct" : "");
}

void to_json(nlohmann::json& j, const MetricConfig& c) {
    j = {{"normalizer", to_string(c.normalizer)}, {"report_percent", c.report_percent}, {"nrmse_tag", c.nrmse_tag()}};
}

void from_json(const nlohmann::json& j, MetricConfig& c) {
    c.normalizer = normalizer_from_string(j.at("normalizer").get<std::string>());
    c.report_percent = j.at("report_percent").get<bool>();
}

namespace {

void check_pair(std::span<const double> pred, std::span<const double> obs, std::size_t min_len) {
    if (pred.size() != obs.size()) throw std::invalid_argument("metric: prediction and observation lengths differ");
    if (obs.size() < min_len) throw std::invalid_argument("metric: too few observations");
}

double mean_of(std::span<const double> x) { return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size()); }

double population_std(std::span<const double> x) {
    const double m = mean_of(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(x.size()));
}

}  // namespace

double rmse(std::span<const double> pred, std::span<const double> obs) {
    check_pair(pred, obs, 1);
    double ss = 0.0;
    for (std::size_t k = 0; k < obs.size(); ++k) ss += (pred[k] - obs[k]) * (pred[k] - obs[k]);
    return std::sqrt(ss / static_cast<double>(obs.size()));
}

double nrmse(std::span<const double> pred, std::span<const double> obs, const MetricConfig& cfg) {
    check_pair(pred, obs, 1);
    double scale = 0.0;
    switch (cfg.normalizer) {
        case Normalizer::Range: {
            const auto [lo, hi] = std::minmax_element(obs.begin(), obs.end());
            scale = *hi - *lo;
            break;
        }
        case Normalizer::Std: scale = population_std(obs); break;
        case Normalizer::Mean: scale = mean_of(obs); break;
    }
    if (scale == 0.0) throw ZeroNormalizer("nrmse: normalizer (" + to_string(cfg.normalizer) + ") of observations is zero");
    const double v = rmse(pred, obs) / std::abs(scale);
    return cfg.report_percent ? 100.0 * v : v;
}

double r_squared(std::span<const double> pred, std::span<const double> obs) {
    check_pair(pred, obs, 2);
    const double m = mean_of(obs);
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (std::size_t k = 0; k < obs.size(); ++k) {
        ss_res += (obs[k] - pred[k]) * (obs[k] - pred[k]);
        ss_tot += (obs[k] - m) * (obs[k] - m);
    }
    if (ss_tot == 0.0) throw std::domain_error("r_squared: observations are constant");
    return 1.0 - ss_res / ss_tot;
}

void to_json(nlohmann::json& j, const RoundStats& s) {
    j = {{"n", s.n},   {"min", s.min},   {"q1", s.q1},     {"median", s.median},
         {"q3", s.q3}, {"max", s.max},   {"mean", s.mean}, {"std", s.std}};
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

RoundStats summarize_rounds(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("summarize_rounds: no values");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    RoundStats s;
    s.n = sorted.size();
    s.min = sorted.front();
    s.max = sorted.back();
    s.q1 = quantile_sorted(sorted, 0.25);
    s.median = quantile_sorted(sorted, 0.5);
    s.q3 = quantile_sorted(sorted, 0.75);
    s.mean = mean_of(sorted);
    s.std = population_std(sorted);
    return s;
}

double median(std::span<const double> values) { return summarize_rounds(values).median; }

}  // namespace kiml::metrics
