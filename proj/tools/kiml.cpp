#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "kiml/bench.hpp"
#include "kiml/metrics.hpp"
#include "kiml/physics.hpp"

namespace fs = std::filesystem;
using namespace kiml;

namespace {

enum Exit { kOk = 0, kBadConfig = 2, kCheckFailed = 3, kBadData = 4 };

// Unreadable or malformed input data.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Global {
    std::uint64_t seed = 7;
    std::string out_dir = ".";
    std::string format = "both";
    std::string normalizer = "range";
    int jobs = 1;
    std::string config;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* normalizer_opt = nullptr;
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.empty()) throw physics::ConfigError("empty item in list '" + s + "'");
        out.push_back(item);
    }
    if (out.empty()) throw physics::ConfigError("empty list");
    return out;
}

std::vector<double> parse_numbers(const std::string& s) {
    std::vector<double> out;
    for (const auto& item : split_list(s)) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size() || !std::isfinite(v)) throw physics::ConfigError("not a number: '" + item + "'");
        out.push_back(v);
    }
    return out;
}

physics::CurrentProfile parse_profile(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw physics::ConfigError("profile must be step:low,high,period or const:v");
    const std::string kind = s.substr(0, colon);
    const auto v = parse_numbers(s.substr(colon + 1));
    if (kind == "const" && v.size() == 1) return physics::ConstantCurrent{v[0]};
    if (kind == "step" && v.size() == 3) {
        if (v[2] != std::floor(v[2])) throw physics::ConfigError("step period must be an integer");
        return physics::StepCycle{v[0], v[1], static_cast<std::int64_t>(v[2])};
    }
    throw physics::ConfigError("profile must be step:low,high,period or const:v");
}

// Resolves `name` under the output directory and refuses paths that leave it.
fs::path inside_out_dir(const Global& g, const std::string& name) {
    const fs::path root = fs::weakly_canonical(fs::absolute(g.out_dir));
    const fs::path p = fs::weakly_canonical(root / name);
    const auto rel = p.lexically_relative(root);
    if (rel.empty() || *rel.begin() == "..") throw physics::ConfigError("output path '" + name + "' lies outside --out-dir");
    return p;
}

physics::Dataset load_data(const std::string& path) {
    try {
        return physics::read_dataset_csv(fs::path(path));
    } catch (const std::exception& e) {
        throw DataError(e.what());
    }
}

// The "config" object of a report, or the file itself when it is a bare config.
nlohmann::json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw physics::ConfigError("cannot open config " + path);
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw physics::ConfigError("config " + path + " is not a JSON object");
    return j.contains("config") ? j.at("config") : j;
}

std::string data_path(const std::string& flag, const nlohmann::json& cfg) {
    if (!flag.empty()) return flag;
    if (cfg.contains("data") && cfg.at("data").contains("path")) return cfg.at("data").at("path").get<std::string>();
    throw physics::ConfigError("--data is required");
}

void finish(const Global& g, bench::ExperimentReport& rep, const std::string& data, const physics::Dataset& ds) {
    rep.config["data"] = {{"path", data}, {"generator", ds.metadata}};
    const auto files = bench::write_report_files(rep, inside_out_dir(g, "."), g.format);
    int errors = 0;
    for (const auto& r : rep.rows) errors += r.error.empty() ? 0 : 1;
    std::cout << rep.level << ": " << rep.rows.size() << " rows, " << errors << " errors -> " << files.front().string()
              << '\n';
}

int check_line(bool ok, const std::string& what) {
    std::cout << (ok ? "check PASS: " : "check FAIL: ") << what << '\n';
    return ok ? 0 : 1;
}

int check_level1(const bench::ExperimentReport& rep, const bench::Level1Config& cfg) {
    int failed = 0;
    for (const auto& m : cfg.models) {
        const std::string d = m.label() + "/direct";
        const std::string k = m.label() + "/knowledge";
        const auto dn = rep.group_nrmse(d);
        const auto kn = rep.group_nrmse(k);
        const auto dr = rep.group_r2(d);
        const auto kr = rep.group_r2(k);
        const bool ok = !dn.empty() && !kn.empty() && metrics::median(kn) < metrics::median(dn) &&
                        metrics::median(kr) > metrics::median(dr);
        failed += check_line(ok, m.label() + " knowledge arm beats direct arm");
    }
    return failed;
}

int check_level2(const bench::ExperimentReport& rep) {
    using pinn::KnowledgeVariant;
    const auto med = [&](const std::string& g) {
        const auto v = rep.group_nrmse(g);
        return v.empty() ? std::nan("") : metrics::median(v);
    };
    const double base = med(bench::kBaselineGroup);
    const double full1 = med(bench::level2_group(KnowledgeVariant::Full, 1.0));
    int failed = 0;
    bool any = false;
    for (double a : {0.5, 1.0}) {
        const std::string g = bench::level2_group(KnowledgeVariant::Full, a);
        const double v = med(g);
        if (std::isnan(v) || std::isnan(base)) continue;
        any = true;
        failed += check_line(v < base, g + " beats baseline");
    }
    const double drop1 = med(bench::level2_group(KnowledgeVariant::DropLog, 1.0));
    if (!std::isnan(drop1) && !std::isnan(full1)) {
        any = true;
        failed += check_line(drop1 > full1, "drop_log/alpha=1 worse than full/alpha=1");
    }
    if (!any) throw physics::ConfigError("--check needs full/alpha=0.5 or 1 with a baseline, or drop_log/alpha=1 with full/alpha=1");
    return failed;
}

int check_level3(const bench::ExperimentReport& rep, int runs) {
    int hits = 0;
    for (const auto& r : rep.rows) hits += r.recovered.value_or(false) ? 1 : 0;
    const int need = (2 * runs + 2) / 3;
    return check_line(hits >= need, std::to_string(hits) + " of " + std::to_string(runs) + " runs recovered (need " +
                                         std::to_string(need) + ")");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Knowledge-integrated ML ladder: data generation and the three benchmark levels"};
    app.require_subcommand(1);
    app.fallthrough();
    Global g;
    g.seed_opt = app.add_option("--seed", g.seed, "Master seed")->capture_default_str();
    app.add_option("--out-dir", g.out_dir, "Directory for every output file")->capture_default_str();
    app.add_option("--format", g.format, "Report format")
        ->check(CLI::IsMember({"json", "csv", "both"}))
        ->capture_default_str();
    g.normalizer_opt = app.add_option("--metric-normalizer", g.normalizer, "NRMSE scale")
                           ->check(CLI::IsMember({"range", "std", "mean"}))
                           ->capture_default_str();
    app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--config", g.config, "Rerun from a report (or bare config) JSON");

    auto* gen = app.add_subcommand("generate", "Write a synthetic Tafel dataset");
    physics::SyntheticConfig sc;
    double hours = 2800;
    std::string b_poly = "50,3.5e-3";
    std::string i0_poly = "1e-7,-1e-11";
    std::string profile = "step:0.5,2,56";
    std::string output = "dataset.csv";
    gen->add_option("--hours", hours, "Duration in hours")->capture_default_str();
    gen->add_option("--step", sc.step_hours, "Sampling step in hours")->capture_default_str();
    gen->add_option("--noise-std", sc.noise_std_mv, "Gaussian noise on eta_act, mV")->capture_default_str();
    gen->add_option("--b-poly", b_poly, "Tafel slope polynomial, constant first")->capture_default_str();
    gen->add_option("--i0-poly", i0_poly, "Exchange current polynomial, constant first")->capture_default_str();
    gen->add_option("--profile", profile, "step:low,high,period or const:v")->capture_default_str();
    gen->add_option("-o,--output", output, "CSV file name under --out-dir")->capture_default_str();

    auto* l1 = app.add_subcommand("level1", "Decomposition-augmented regression");
    std::string l1_data;
    std::size_t period = 0;
    std::size_t window = 0;
    std::string models;
    int l1_rounds = 0;
    std::string cell_source;
    bool l1_check = false;
    l1->add_option("--data", l1_data, "Dataset CSV");
    auto* period_opt = l1->add_option("--period", period, "Seasonal period in rows (default 56)");
    auto* window_opt = l1->add_option("--trend-window", window, "Odd moving-average width (default 57)");
    auto* models_opt = l1->add_option("--models", models, "Comma list of svr, tree, mlp");
    auto* l1_rounds_opt = l1->add_option("--rounds", l1_rounds, "Rounds (default 5)");
    auto* cell_opt = l1->add_option("--cell-voltage", cell_source, "observed, noiseless or omitted")
                         ->check(CLI::IsMember({"observed", "noiseless", "omitted"}));
    l1->add_flag("--check", l1_check, "Exit 3 unless every knowledge arm beats its direct arm");

    auto* l2 = app.add_subcommand("level2", "Physics-informed network vs. plain MLP");
    std::string l2_data;
    std::string alphas;
    std::string variants;
    int l2_rounds = 0;
    int max_epochs = 0;
    bool no_baseline = false;
    bool l2_check = false;
    l2->add_option("--data", l2_data, "Dataset CSV");
    auto* alphas_opt = l2->add_option("--alphas", alphas, "Comma list of loss weights (default 0.1,0.5,1,2,5)");
    auto* variants_opt =
        l2->add_option("--variants", variants, "Comma list of full, drop_log, drop_b, drop_i0, drop_i (default full)");
    auto* l2_rounds_opt = l2->add_option("--rounds", l2_rounds, "Rounds per group (default 20)");
    auto* epochs_opt = l2->add_option("--max-epochs", max_epochs, "Epoch cap per training (default 500)");
    auto* nobase_opt = l2->add_flag("--no-baseline", no_baseline, "Skip the plain MLP group");
    l2->add_flag("--check", l2_check, "Exit 3 unless the PINN-vs-baseline and drop_log directions hold");

    auto* l3 = app.add_subcommand("level3", "Unit-constrained symbolic regression");
    std::string l3_data;
    std::string strategy;
    long budget = 0;
    int runs = 0;
    int batch = 0;
    bool l3_check = false;
    l3->add_option("--data", l3_data, "Dataset CSV");
    auto* strategy_opt = l3->add_option("--strategy", strategy, "random or policy (default random)")
                             ->check(CLI::IsMember({"random", "policy", "constrained_random", "policy_gradient"}));
    auto* budget_opt = l3->add_option("--budget", budget, "Sampling attempts per run (default 200000)");
    auto* runs_opt = l3->add_option("--runs", runs, "Independent runs (default 3)");
    auto* batch_opt = l3->add_option("--batch", batch, "Expressions per batch (default 200)");
    l3->add_flag("--check", l3_check, "Exit 3 unless at least two thirds of the runs recover the Tafel law");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kBadConfig;
    }

    try {
        const nlohmann::json echo = g.config.empty() ? nlohmann::json::object() : load_config(g.config);
        const auto apply_common = [&](std::uint64_t& seed, metrics::MetricConfig& metric) {
            if (*g.seed_opt) seed = g.seed;
            if (*g.normalizer_opt) metric.normalizer = metrics::normalizer_from_string(g.normalizer);
        };

        if (*gen) {
            sc.hours = static_cast<std::int64_t>(hours);
            if (static_cast<double>(sc.hours) != hours) throw physics::ConfigError("--hours must be a whole number");
            sc.b_poly = physics::Poly5::from_list(parse_numbers(b_poly));
            sc.i0_poly = physics::Poly5::from_list(parse_numbers(i0_poly));
            sc.current_profile = parse_profile(profile);
            sc.seed = g.seed;
            sc.validate();
            const fs::path path = inside_out_dir(g, output);
            fs::create_directories(path.parent_path());
            const auto ds = physics::generate_synthetic_dataset(sc);
            physics::write_dataset_csv(ds, path);
            std::cout << "generate: " << ds.size() << " rows -> " << path.string() << '\n';
            return kOk;
        }

        if (*l1) {
            bench::Level1Config cfg = echo.empty() ? bench::Level1Config{} : echo.get<bench::Level1Config>();
            apply_common(cfg.seed, cfg.metric);
            if (*period_opt) cfg.period = period;
            if (*window_opt) cfg.trend_window = window;
            if (*models_opt) {
                cfg.models.clear();
                for (const auto& m : split_list(models)) cfg.models.push_back(learners::default_spec(m));
            }
            if (*l1_rounds_opt) cfg.rounds = l1_rounds;
            if (*cell_opt) cfg.cell_voltage_source = bench::cell_voltage_source_from_string(cell_source);
            const std::string path = data_path(l1_data, echo);
            const auto ds = load_data(path);
            auto rep = bench::run_level1(ds, cfg, g.jobs);
            finish(g, rep, path, ds);
            return l1_check && check_level1(rep, cfg) > 0 ? kCheckFailed : kOk;
        }

        if (*l2) {
            bench::Level2Config cfg = echo.empty() ? bench::Level2Config{} : echo.get<bench::Level2Config>();
            apply_common(cfg.seed, cfg.metric);
            if (*alphas_opt) cfg.alphas = parse_numbers(alphas);
            if (*variants_opt) {
                cfg.variants.clear();
                for (const auto& v : split_list(variants)) cfg.variants.push_back(pinn::variant_from_string(v));
            }
            if (*l2_rounds_opt) cfg.rounds = l2_rounds;
            if (*epochs_opt) cfg.pinn.max_epochs = max_epochs;
            if (*nobase_opt) cfg.baseline = !no_baseline;
            const std::string path = data_path(l2_data, echo);
            const auto ds = load_data(path);
            auto rep = bench::run_level2(ds, cfg, g.jobs);
            finish(g, rep, path, ds);
            return l2_check && check_level2(rep) > 0 ? kCheckFailed : kOk;
        }

        bench::Level3Config cfg = echo.empty() ? bench::Level3Config{} : echo.get<bench::Level3Config>();
        apply_common(cfg.seed, cfg.metric);
        if (*strategy_opt) cfg.search.strategy = symreg::strategy_from_string(strategy);
        if (*budget_opt) cfg.search.budget = budget;
        if (*runs_opt) cfg.runs = runs;
        if (*batch_opt) cfg.search.batch_size = batch;
        cfg.pareto_dir = inside_out_dir(g, ".").string();
        const std::string path = data_path(l3_data, echo);
        const auto ds = load_data(path);
        auto rep = bench::run_level3(ds, cfg, g.jobs);
        finish(g, rep, path, ds);
        return l3_check && check_level3(rep, cfg.runs) > 0 ? kCheckFailed : kOk;
    } catch (const DataError& e) {
        std::cerr << "error: unreadable data: " << e.what() << '\n';
        return kBadData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kBadConfig;
    }
}
