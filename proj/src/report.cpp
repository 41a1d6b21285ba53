#include "kiml/report.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <stdexcept>

#include "kiml/physics.hpp"

namespace kiml::bench {

namespace {

std::vector<std::string> group_order(const std::vector<ResultRow>& rows) {
    std::vector<std::string> out;
    for (const auto& r : rows)
        if (std::find(out.begin(), out.end(), r.group) == out.end()) out.push_back(r.group);
    return out;
}

std::string opt_num(const std::optional<double>& v) { return v ? physics::format_double(*v) : std::string(); }

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

nlohmann::json stats_json(const std::vector<std::pair<std::string, metrics::RoundStats>>& stats) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& [g, s] : stats) {
        nlohmann::json e = s;
        e["group"] = g;
        out.push_back(e);
    }
    return out;
}

}  // namespace

std::vector<double> ExperimentReport::group_nrmse(const std::string& group) const {
    std::vector<double> out;
    for (const auto& r : rows)
        if (r.group == group && r.nrmse) out.push_back(*r.nrmse);
    return out;
}

std::vector<double> ExperimentReport::group_r2(const std::string& group) const {
    std::vector<double> out;
    for (const auto& r : rows)
        if (r.group == group && r.r2) out.push_back(*r.r2);
    return out;
}

std::vector<std::pair<std::string, metrics::RoundStats>> ExperimentReport::nrmse_stats() const {
    std::vector<std::pair<std::string, metrics::RoundStats>> out;
    for (const auto& g : group_order(rows)) {
        const auto v = group_nrmse(g);
        if (!v.empty()) out.emplace_back(g, metrics::summarize_rounds(v));
    }
    return out;
}

std::vector<std::pair<std::string, metrics::RoundStats>> ExperimentReport::r2_stats() const {
    std::vector<std::pair<std::string, metrics::RoundStats>> out;
    for (const auto& g : group_order(rows)) {
        const auto v = group_r2(g);
        if (!v.empty()) out.emplace_back(g, metrics::summarize_rounds(v));
    }
    return out;
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

nlohmann::json report_body(const ExperimentReport& r) {
    const std::string tag = r.metric.nrmse_tag();
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows) {
        nlohmann::json e{{"group", row.group}, {"model", row.model}, {"round", row.round}};
        if (!row.arm.empty()) e["arm"] = row.arm;
        if (!row.variant.empty()) e["variant"] = row.variant;
        if (row.alpha) e["alpha"] = *row.alpha;
        e[tag] = row.nrmse ? nlohmann::json(*row.nrmse) : nlohmann::json(nullptr);
        e["r2"] = row.r2 ? nlohmann::json(*row.r2) : nlohmann::json(nullptr);
        if (row.recovered) e["recovered"] = *row.recovered;
        if (!row.expression.empty()) e["expression"] = row.expression;
        if (!row.error.empty()) e["error"] = row.error;
        rows.push_back(e);
    }
    return {{"format", "kiml.report"},
            {"version", 1},
            {"level", r.level},
            {"metric", r.metric},
            {"config", r.config},
            {"rows", rows},
            {"summary", {{tag, stats_json(r.nrmse_stats())}, {"r2", stats_json(r.r2_stats())}}}};
}

void to_json(nlohmann::json& j, const ExperimentReport& r) {
    j = report_body(r);
    j["started_at"] = r.started_at;
    j["finished_at"] = r.finished_at;
}

void write_report_csv(const ExperimentReport& r, std::ostream& out) {
    out << "group,model,arm,variant,alpha,round," << r.metric.nrmse_tag() << ",r2,recovered,expression,error\n";
    for (const auto& row : r.rows) {
        out << csv_field(row.group) << ',' << csv_field(row.model) << ',' << csv_field(row.arm) << ','
            << csv_field(row.variant) << ',' << opt_num(row.alpha) << ',' << row.round << ',' << opt_num(row.nrmse)
            << ',' << opt_num(row.r2) << ',' << (row.recovered ? (*row.recovered ? "true" : "false") : "") << ','
            << csv_field(row.expression) << ',' << csv_field(row.error) << '\n';
    }
}

void write_violin_csv(const ExperimentReport& r, std::ostream& out) {
    out << "group,round,nrmse\n";
    for (const auto& row : r.rows)
        if (row.nrmse) out << csv_field(row.group) << ',' << row.round << ',' << physics::format_double(*row.nrmse) << '\n';
}

std::vector<std::filesystem::path> write_report_files(const ExperimentReport& r, const std::filesystem::path& dir,
                                                      const std::string& format) {
    if (format != "json" && format != "csv" && format != "both")
        throw std::invalid_argument("format must be json, csv or both");
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    auto open = [&](const std::string& name) {
        written.push_back(dir / name);
        std::ofstream f(written.back());
        if (!f) throw std::runtime_error("cannot write " + written.back().string());
        return f;
    };
    if (format != "csv") {
        auto f = open(r.level + "_report.json");
        f << nlohmann::json(r).dump(2) << '\n';
    }
    if (format != "json") {
        auto f = open(r.level + "_report.csv");
        write_report_csv(r, f);
    }
    if (r.level == "level2") {
        auto f = open(r.level + "_violin.csv");
        write_violin_csv(r, f);
    }
    return written;
}

}  // namespace kiml::bench
