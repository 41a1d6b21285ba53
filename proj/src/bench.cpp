#include "kiml/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <cstdio>
#include <fstream>
#include <memory>
#include <mutex>
#include <thread>

#include "kiml/decomp.hpp"
#include "kiml/rng.hpp"

namespace kiml::bench {

SplitIndices split_indices(std::size_t n, const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw physics::ConfigError("split: train_fraction must lie strictly inside (0, 1)");
    const auto cut = static_cast<std::size_t>(std::ceil(spec.train_fraction * static_cast<double>(n)));
    if (cut == 0 || cut >= n) throw physics::ConfigError("split: fraction leaves one side empty");
    std::vector<std::size_t> order(n);
    for (std::size_t k = 0; k < n; ++k) order[k] = k;
    if (spec.mode == SplitMode::RandomShuffle) {
        Rng rng(spec.seed);
        rng.shuffle(std::span<std::size_t>(order));
    }
    SplitIndices out;
    out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cut));
    out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(cut), order.end());
    if (spec.mode == SplitMode::RandomShuffle) {
        std::sort(out.train.begin(), out.train.end());
        std::sort(out.test.begin(), out.test.end());
    }
    return out;
}

std::pair<physics::Dataset, physics::Dataset> split(const physics::Dataset& ds, const SplitSpec& spec) {
    const auto idx = split_indices(ds.size(), spec);
    return {ds.subset(idx.train), ds.subset(idx.test)};
}

std::string to_string(CellVoltageSource s) {
    switch (s) {
        case CellVoltageSource::Observed: return "observed";
        case CellVoltageSource::Noiseless: return "noiseless";
        case CellVoltageSource::Omitted: return "omitted";
    }
    return "noiseless";
}

CellVoltageSource cell_voltage_source_from_string(const std::string& s) {
    if (s == "observed") return CellVoltageSource::Observed;
    if (s == "noiseless") return CellVoltageSource::Noiseless;
    if (s == "omitted") return CellVoltageSource::Omitted;
    throw physics::ConfigError("unknown cell voltage source '" + s + "'");
}

void parallel_for(int count, int jobs, const std::function<void(int)>& body) {
    if (jobs <= 1 || count <= 1) {
        for (int k = 0; k < count; ++k) body(k);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < std::min(jobs, count); ++w) {
        pool.emplace_back([&] {
            for (int k = next++; k < count; k = next++) {
                try {
                    body(k);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

namespace {

std::string round_label(const char* prefix, int r) { return std::string(prefix) + std::to_string(r); }

Eigen::VectorXd column(const std::vector<double>& v, const std::vector<std::size_t>& rows) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) out[static_cast<Eigen::Index>(k)] = v[rows[k]];
    return out;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(rows[k]));
    return out;
}

void score(ResultRow& row, const Eigen::VectorXd& pred, const Eigen::VectorXd& obs, const metrics::MetricConfig& m) {
    const std::span<const double> p(pred.data(), static_cast<std::size_t>(pred.size()));
    const std::span<const double> o(obs.data(), static_cast<std::size_t>(obs.size()));
    row.nrmse = metrics::nrmse(p, o, m);
    row.r2 = metrics::r_squared(p, o);
}

}  // namespace

void to_json(nlohmann::json& j, const Level1Config& c) {
    j = {{"period", c.period},
         {"trend_window", c.trend_window},
         {"models", c.models},
         {"rounds", c.rounds},
         {"train_fraction", c.train_fraction},
         {"metric", c.metric},
         {"seed", c.seed},
         {"u_nernst_mv", c.u_nernst_mv},
         {"eta_ohm_mv", c.eta_ohm_mv},
         {"eta_mtx_mv", c.eta_mtx_mv},
         {"cell_voltage_source", to_string(c.cell_voltage_source)}};
}

void from_json(const nlohmann::json& j, Level1Config& c) {
    c = Level1Config{};
    c.period = j.value("period", c.period);
    c.trend_window = j.value("trend_window", c.trend_window);
    if (j.contains("models")) c.models = j.at("models").get<std::vector<learners::ModelSpec>>();
    c.rounds = j.value("rounds", c.rounds);
    c.train_fraction = j.value("train_fraction", c.train_fraction);
    if (j.contains("metric")) c.metric = j.at("metric").get<metrics::MetricConfig>();
    c.seed = j.value("seed", c.seed);
    c.u_nernst_mv = j.value("u_nernst_mv", c.u_nernst_mv);
    c.eta_ohm_mv = j.value("eta_ohm_mv", c.eta_ohm_mv);
    c.eta_mtx_mv = j.value("eta_mtx_mv", c.eta_mtx_mv);
    if (j.contains("cell_voltage_source"))
        c.cell_voltage_source = cell_voltage_source_from_string(j.at("cell_voltage_source").get<std::string>());
}

Eigen::MatrixXd level1_features(const physics::Dataset& data, const Level1Config& cfg) {
    const auto n = static_cast<Eigen::Index>(data.size());
    Eigen::MatrixXd x(n, 3);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto k = static_cast<std::size_t>(r);
        double eta = 0.0;
        switch (cfg.cell_voltage_source) {
            case CellVoltageSource::Observed: eta = data.eta_act[k]; break;
            case CellVoltageSource::Noiseless: eta = physics::tafel_activation_loss(data.state(k)); break;
            case CellVoltageSource::Omitted: eta = 0.0; break;
        }
        physics::VoltageBreakdown v;
        v.u_nernst_mv = cfg.u_nernst_mv;
        v.eta_act_mv = eta;
        v.eta_ohm_mv = cfg.eta_ohm_mv;
        v.eta_mtx_mv = cfg.eta_mtx_mv;
        x(r, 0) = data.t_hours[k];
        x(r, 1) = physics::compose_cell_voltage(v);
        x(r, 2) = data.i[k];
    }
    return x;
}

ExperimentReport run_level1(const physics::Dataset& data, const Level1Config& cfg, int jobs) {
    data.validate();
    if (cfg.rounds < 1) throw physics::ConfigError("level1: rounds must be >= 1");
    if (cfg.models.empty()) throw physics::ConfigError("level1: no models");
    for (const auto& m : cfg.models) m.validate();
    ExperimentReport report;
    report.level = "level1";
    report.config = cfg;
    report.metric = cfg.metric;
    report.started_at = utc_timestamp();

    const Eigen::MatrixXd x = level1_features(data, cfg);
    const std::size_t n = data.size();
    std::vector<std::vector<ResultRow>> per_round(static_cast<std::size_t>(cfg.rounds));
    parallel_for(cfg.rounds, jobs, [&](int r) {
        SplitSpec spec{SplitMode::RandomShuffle, derive_seed(cfg.seed, round_label("level1/split/", r)),
                       cfg.train_fraction};
        const auto idx = split_indices(n, spec);
        std::unique_ptr<bool[]> observed(new bool[n]());
        for (auto k : idx.train) observed[k] = true;
        const auto dec = decomp::decompose_partial(data.eta_act, std::span<const bool>(observed.get(), n), cfg.period,
                                                   cfg.trend_window);
        const auto pattern = dec.pattern();

        const Eigen::MatrixXd x_train = take_rows(x, idx.train);
        const Eigen::MatrixXd x_test = take_rows(x, idx.test);
        const Eigen::VectorXd y_train = column(data.eta_act, idx.train);
        const Eigen::VectorXd y_test = column(data.eta_act, idx.test);
        const Eigen::VectorXd trend_train = column(dec.trend, idx.train);

        auto& rows = per_round[static_cast<std::size_t>(r)];
        for (auto spec_m : cfg.models) {
            if (auto* mlp = std::get_if<learners::MlpSpec>(&spec_m.kind))
                mlp->seed = derive_seed(cfg.seed, round_label("level1/mlp/", r));
            const std::string label = spec_m.label();
            for (const char* arm : {"direct", "knowledge"}) {
                ResultRow row;
                row.group = label + "/" + arm;
                row.model = label;
                row.arm = arm;
                row.round = r;
                try {
                    Eigen::VectorXd pred;
                    if (std::string(arm) == "direct") {
                        pred = learners::predict(learners::train(spec_m, x_train, y_train), x_test);
                    } else {
                        pred = learners::predict(learners::train(spec_m, x_train, trend_train), x_test);
                        for (std::size_t k = 0; k < idx.test.size(); ++k)
                            pred[static_cast<Eigen::Index>(k)] *= pattern[idx.test[k] % cfg.period];
                    }
                    score(row, pred, y_test, cfg.metric);
                } catch (const std::exception& e) {
                    row.error = e.what();
                }
                rows.push_back(std::move(row));
            }
        }
    });
    for (auto& rows : per_round)
        for (auto& row : rows) report.rows.push_back(std::move(row));
    report.finished_at = utc_timestamp();
    return report;
}

void to_json(nlohmann::json& j, const Level2Config& c) {
    std::vector<std::string> variants;
    for (auto v : c.variants) variants.push_back(pinn::to_string(v));
    j = {{"alphas", c.alphas},
         {"variants", variants},
         {"baseline", c.baseline},
         {"rounds", c.rounds},
         {"train_fraction", c.train_fraction},
         {"val_fraction", c.val_fraction},
         {"pinn", c.pinn},
         {"metric", c.metric},
         {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, Level2Config& c) {
    c = Level2Config{};
    c.alphas = j.value("alphas", c.alphas);
    if (j.contains("variants")) {
        c.variants.clear();
        for (const auto& v : j.at("variants")) c.variants.push_back(pinn::variant_from_string(v.get<std::string>()));
    }
    c.baseline = j.value("baseline", c.baseline);
    c.rounds = j.value("rounds", c.rounds);
    c.train_fraction = j.value("train_fraction", c.train_fraction);
    c.val_fraction = j.value("val_fraction", c.val_fraction);
    if (j.contains("pinn")) c.pinn = j.at("pinn").get<pinn::PinnConfig>();
    if (j.contains("metric")) c.metric = j.at("metric").get<metrics::MetricConfig>();
    c.seed = j.value("seed", c.seed);
}

std::string level2_group(pinn::KnowledgeVariant v, double alpha) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%g", alpha);
    return pinn::to_string(v) + "/alpha=" + buf;
}

ExperimentReport run_level2(const physics::Dataset& data, const Level2Config& cfg, int jobs) {
    data.validate();
    if (cfg.rounds < 1) throw physics::ConfigError("level2: rounds must be >= 1");
    for (double a : cfg.alphas)
        if (!(a > 0.0)) throw physics::ConfigError("level2: alphas must be positive");
    if ((cfg.alphas.empty() || cfg.variants.empty()) && !cfg.baseline) throw physics::ConfigError("level2: empty grid");
    cfg.pinn.validate();
    ExperimentReport report;
    report.level = "level2";
    report.config = cfg;
    report.metric = cfg.metric;
    report.started_at = utc_timestamp();

    const auto [train, test] = split(data, SplitSpec{SplitMode::Sequential, 0, cfg.train_fraction});
    const Eigen::MatrixXd x_test = pinn::tafel_features(test);
    const Eigen::VectorXd y_test =
        Eigen::Map<const Eigen::VectorXd>(test.eta_act.data(), static_cast<Eigen::Index>(test.size()));

    struct Group {
        std::string name;
        std::optional<pinn::KnowledgeVariant> variant;
        double alpha = 1.0;
    };
    std::vector<Group> groups;
    for (auto v : cfg.variants)
        for (double a : cfg.alphas) groups.push_back({level2_group(v, a), v, a});
    if (cfg.baseline) groups.push_back({kBaselineGroup, std::nullopt, 1.0});

    const int total = static_cast<int>(groups.size()) * cfg.rounds;
    std::vector<ResultRow> rows(static_cast<std::size_t>(total));
    parallel_for(total, jobs, [&](int job) {
        const Group& grp = groups[static_cast<std::size_t>(job / cfg.rounds)];
        const int r = job % cfg.rounds;
        pinn::PinnConfig pc = cfg.pinn;
        pc.alpha = grp.alpha;
        pc.seed = derive_seed(cfg.seed, round_label("level2/round/", r));
        ResultRow& row = rows[static_cast<std::size_t>(job)];
        row.group = grp.name;
        row.round = r;
        try {
            Eigen::VectorXd pred;
            if (grp.variant) {
                pc.variant = *grp.variant;
                row.model = "pinn";
                row.variant = pinn::to_string(*grp.variant);
                row.alpha = grp.alpha;
                pred = pinn::predict_pinn(pinn::train_pinn(pc, train, cfg.val_fraction), x_test);
            } else {
                row.model = "mlp";
                row.variant = kBaselineGroup;
                pred = pinn::predict_vanilla(pinn::train_vanilla(pc, train, cfg.val_fraction), x_test);
            }
            score(row, pred, y_test, cfg.metric);
        } catch (const std::exception& e) {
            row.error = e.what();
        }
    });
    report.rows = std::move(rows);
    report.finished_at = utc_timestamp();
    return report;
}

void to_json(nlohmann::json& j, const Level3Config& c) {
    j = {{"search", c.search}, {"runs", c.runs}, {"seed", c.seed}, {"metric", c.metric}};
}

void from_json(const nlohmann::json& j, Level3Config& c) {
    c = Level3Config{};
    if (j.contains("search")) c.search = j.at("search").get<symreg::SearchConfig>();
    c.runs = j.value("runs", c.runs);
    c.seed = j.value("seed", c.seed);
    if (j.contains("metric")) c.metric = j.at("metric").get<metrics::MetricConfig>();
}

ExperimentReport run_level3(const physics::Dataset& data, const Level3Config& cfg, int jobs,
                            std::vector<std::vector<symreg::ParetoEntry>>* fronts) {
    data.validate();
    if (cfg.runs < 1) throw physics::ConfigError("level3: runs must be >= 1");
    cfg.search.validate();
    ExperimentReport report;
    report.level = "level3";
    report.config = cfg;
    report.metric = cfg.metric;
    report.started_at = utc_timestamp();

    const symreg::EvalData eval = symreg::tafel_eval_data(data);
    const Eigen::ArrayXd target =
        Eigen::Map<const Eigen::ArrayXd>(data.eta_act.data(), static_cast<Eigen::Index>(data.size()));
    std::vector<ResultRow> rows(static_cast<std::size_t>(cfg.runs));
    std::vector<std::vector<symreg::ParetoEntry>> all(static_cast<std::size_t>(cfg.runs));
    parallel_for(cfg.runs, jobs, [&](int r) {
        symreg::SearchConfig sc = cfg.search;
        sc.seed = derive_seed(cfg.seed, round_label("level3/run/", r));
        ResultRow& row = rows[static_cast<std::size_t>(r)];
        row.group = "symreg/" + symreg::to_string(sc.strategy);
        row.model = "symreg";
        row.round = r;
        try {
            const auto res = symreg::search(sc, eval, target);
            const auto pred = symreg::evaluate_raw(res.best.expression, eval, res.best.constants);
            const Eigen::VectorXd p = pred.matrix();
            const Eigen::VectorXd o = target.matrix();
            score(row, p, o, report.metric);
            row.recovered = symreg::check_tafel_recovery(res.best, sc.grammar, eval).recovered();
            row.expression = symreg::to_infix(res.best.expression, sc.grammar, &res.best.constants);
            all[static_cast<std::size_t>(r)] = res.pareto;
            if (!cfg.pareto_dir.empty()) {
                std::filesystem::create_directories(cfg.pareto_dir);
                const std::string stem = cfg.pareto_dir + "/level3_run" + std::to_string(r);
                std::ofstream pj(stem + "_pareto.json");
                pj << nlohmann::json(res.pareto).dump(2) << '\n';
                std::ofstream lc(stem + "_log.csv");
                symreg::write_search_log_csv(res.log, lc);
            }
        } catch (const symreg::EmptySearch& e) {
            row.recovered = false;
            row.error = e.what();
        }
    });
    report.rows = std::move(rows);
    if (fronts) *fronts = std::move(all);
    report.finished_at = utc_timestamp();
    return report;
}

}  // namespace kiml::bench
