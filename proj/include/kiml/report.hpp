#pragma once

// Experiment reports: configuration echo, per-round rows and group summaries.

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kiml/metrics.hpp"

namespace kiml::bench {

struct ResultRow {
    std::string group;  ///< summary key, e.g. "svr/knowledge" or "full/alpha=1"
    std::string model;
    std::string arm;      ///< Level 1: "direct" or "knowledge"
    std::string variant;  ///< Level 2 knowledge variant, "baseline" for the plain MLP
    std::optional<double> alpha;
    int round = 0;
    std::optional<double> nrmse;
    std::optional<double> r2;
    /// Level 3 only.
    std::optional<bool> recovered;
    std::string expression;
    std::string error;
};

struct ExperimentReport {
    std::string level;  ///< "level1", "level2" or "level3"
    nlohmann::json config;
    metrics::MetricConfig metric;
    std::vector<ResultRow> rows;
    std::string started_at;
    std::string finished_at;

    /// NRMSE summaries per group, in first-appearance order of the group.
    [[nodiscard]] std::vector<std::pair<std::string, metrics::RoundStats>> nrmse_stats() const;
    [[nodiscard]] std::vector<std::pair<std::string, metrics::RoundStats>> r2_stats() const;
    [[nodiscard]] std::vector<double> group_nrmse(const std::string& group) const;
    [[nodiscard]] std::vector<double> group_r2(const std::string& group) const;
};

/// UTC, ISO 8601 with seconds.
[[nodiscard]] std::string utc_timestamp();

void to_json(nlohmann::json& j, const ExperimentReport& r);

/// The report body without timestamps; equal for reruns of the same config.
[[nodiscard]] nlohmann::json report_body(const ExperimentReport& r);

/// Flat rows. The NRMSE column carries the metric tag, e.g. `nrmse_range_pct`.
void write_report_csv(const ExperimentReport& r, std::ostream& out);

/// `group,round,nrmse` for every row with an NRMSE.
void write_violin_csv(const ExperimentReport& r, std::ostream& out);

/// Writes <stem>.json and <stem>.csv (and <stem>_violin.csv for Level 2)
/// into `dir` according to `format` ("json", "csv" or "both").
std::vector<std::filesystem::path> write_report_files(const ExperimentReport& r, const std::filesystem::path& dir,
                                                      const std::string& format);

}  // namespace kiml::bench
