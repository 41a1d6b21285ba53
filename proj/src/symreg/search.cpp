#include "kiml/symreg/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <unordered_map>

#include "kiml/physics.hpp"
#include "kiml/symreg/policy.hpp"

namespace kiml::symreg {

std::string to_string(Strategy s) { return s == Strategy::ConstrainedRandom ? "constrained_random" : "policy_gradient"; }

Strategy strategy_from_string(const std::string& s) {
    if (s == "constrained_random" || s == "random" || s == "ConstrainedRandom") return Strategy::ConstrainedRandom;
    if (s == "policy_gradient" || s == "policy" || s == "PolicyGradient") return Strategy::PolicyGradient;
    throw physics::ConfigError("unknown search strategy '" + s + "'");
}

void SearchConfig::validate() const {
    grammar.validate();
    if (batch_size < 1) throw physics::ConfigError("search: batch_size must be >= 1");
    if (budget < 0) throw physics::ConfigError("search: budget must be >= 0");
    if (budget > 0 && budget < batch_size) throw physics::ConfigError("search: budget must be >= batch_size");
    if (!(learning_rate > 0.0)) throw physics::ConfigError("search: learning_rate must be positive");
    if (recurrent_hidden < 1) throw physics::ConfigError("search: recurrent_hidden must be >= 1");
    if (layers != 1) throw physics::ConfigError("search: only one recurrent layer is supported");
    if (!(risk_quantile > 0.0 && risk_quantile < 1.0)) throw physics::ConfigError("search: risk_quantile must lie in (0, 1)");
    if (fit.restarts < 1 || fit.max_iterations < 1) throw physics::ConfigError("search: fit restarts/iterations must be >= 1");
}

void to_json(nlohmann::json& j, const SearchConfig& c) {
    j = {{"strategy", to_string(c.strategy)},
         {"batch_size", c.batch_size},
         {"budget", c.budget},
         {"learning_rate", c.learning_rate},
         {"recurrent_hidden", c.recurrent_hidden},
         {"layers", c.layers},
         {"risk_quantile", c.risk_quantile},
         {"seed", c.seed},
         {"sampler", c.sampler},
         {"fit", c.fit},
         {"grammar", c.grammar}};
}

void from_json(const nlohmann::json& j, SearchConfig& c) {
    c = SearchConfig{};
    if (j.contains("strategy")) c.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    c.batch_size = j.value("batch_size", c.batch_size);
    c.budget = j.value("budget", c.budget);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.recurrent_hidden = j.value("recurrent_hidden", c.recurrent_hidden);
    c.layers = j.value("layers", c.layers);
    c.risk_quantile = j.value("risk_quantile", c.risk_quantile);
    c.seed = j.value("seed", c.seed);
    if (j.contains("sampler")) c.sampler = j.at("sampler").get<SamplerConfig>();
    if (j.contains("fit")) c.fit = j.at("fit").get<FitConfig>();
    if (j.contains("grammar")) c.grammar = j.at("grammar").get<Grammar>();
    c.validate();
}

double r2_of(const Eigen::ArrayXd& pred, const Eigen::ArrayXd& target) {
    if (!pred.isFinite().all()) return -std::numeric_limits<double>::infinity();
    const double ss_tot = (target - target.mean()).square().sum();
    const double ss_res = (pred - target).square().sum();
    return ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity());
}

namespace {

struct Scored {
    FitResult fit;
    double reward = 0.0;
};

}  // namespace

SearchResult search(const SearchConfig& cfg, const EvalData& data, const Eigen::ArrayXd& target) {
    cfg.validate();
    if (data.rows() == 0 || target.size() != data.rows()) throw std::invalid_argument("search: empty or mismatched data");
    if (static_cast<int>(data.columns.size()) != static_cast<int>(cfg.grammar.variables.size()))
        throw std::invalid_argument("search: data columns do not match grammar variables");
    const Grammar& g = cfg.grammar;
    const double ystd = std::sqrt((target - target.mean()).square().mean());
    const double std_ref = ystd > 0.0 ? ystd : 1.0;

    const UnitTable table(g);
    Rng rng(derive_seed(cfg.seed, "sampler"));
    FitConfig fit_cfg = cfg.fit;
    fit_cfg.seed = derive_seed(cfg.seed, "fit");
    std::unique_ptr<LstmPolicy> policy;
    if (cfg.strategy == Strategy::PolicyGradient)
        policy = std::make_unique<LstmPolicy>(g.vocabulary_size(), cfg.recurrent_hidden, derive_seed(cfg.seed, "policy"));

    std::unordered_map<std::string, Scored> cache;
    ParetoFront front;
    SearchResult result;
    long sampled = 0;
    int batch = 0;

    auto score = [&](const Expression& e) -> const Scored& {
        const std::string key = e.key();
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
        Scored s;
        s.fit = fit_constants(e, data, target, fit_cfg);
        s.reward = reward(s.fit.rmse, std_ref);
        if (s.fit.domain_error) {
            ++result.domain_errors;
        } else {
            ParetoEntry entry;
            entry.expression = e;
            entry.expr_infix = to_infix(e, g);
            entry.expr_prefix = to_prefix(e, g);
            entry.complexity = static_cast<int>(e.size());
            entry.rmse = s.fit.rmse;
            entry.r2 = r2_of(evaluate_raw(e, data, s.fit.constants), target);
            entry.constants = s.fit.constants;
            front.offer(entry);
        }
        return cache.emplace(key, std::move(s)).first->second;
    };

    while (sampled < cfg.budget) {
        const long n = std::min<long>(cfg.batch_size, cfg.budget - sampled);
        std::vector<LstmPolicy::Episode> episodes;
        std::vector<double> rewards;
        for (long k = 0; k < n; ++k) {
            ++sampled;
            try {
                if (policy) {
                    auto ep = policy->sample(g, table, cfg.sampler, rng);
                    rewards.push_back(score(ep.expression).reward);
                    episodes.push_back(std::move(ep));
                } else {
                    (void)score(sample_expression(g, table, cfg.sampler, rng));
                }
            } catch (const MaskExhausted&) {
                ++result.mask_exhausted;
            }
        }
        if (policy && !episodes.empty()) {
            std::vector<double> sorted = rewards;
            std::sort(sorted.begin(), sorted.end());
            const auto q = static_cast<std::size_t>(
                std::floor((1.0 - cfg.risk_quantile) * static_cast<double>(sorted.size() - 1)));
            const double threshold = sorted[q];
            std::vector<const LstmPolicy::Episode*> elite;
            std::vector<double> weights;
            for (std::size_t k = 0; k < episodes.size(); ++k) {
                if (rewards[k] < threshold) continue;
                elite.push_back(&episodes[k]);
                weights.push_back(rewards[k] - threshold);
            }
            policy->adam_step(policy->loss_gradient(elite, weights), cfg.learning_rate);
        }
        ++batch;
        SearchLogRow row{batch, 0.0, 0.0, sampled};
        if (!front.empty()) {
            const auto& b = front.best(1e-9 * std_ref);
            row.best_reward = reward(b.rmse, std_ref);
            row.best_r2 = b.r2;
        }
        result.log.push_back(row);
    }
    if (front.empty()) throw EmptySearch();
    result.pareto = front.entries();
    result.best = front.best(1e-9 * std_ref);
    result.distinct_expressions = static_cast<long>(cache.size());
    return result;
}

void write_search_log_csv(const std::vector<SearchLogRow>& log, std::ostream& out) {
    out << "batch,best_reward,best_r2,expressions_sampled\n";
    for (const auto& r : log)
        out << r.batch << ',' << physics::format_double(r.best_reward) << ',' << physics::format_double(r.best_r2) << ','
            << r.expressions_sampled << '\n';
}

RecoveryCheck check_tafel_recovery(const ParetoEntry& entry, const Grammar& g, const EvalData& data) {
    RecoveryCheck c;
    c.r2 = entry.r2;
    const Expression ref = tafel_reference(g);
    try {
        c.symbolic = symbolically_equivalent(entry.expression, entry.constants, ref, {}, g);
    } catch (const std::exception&) {
        c.symbolic = false;
    }
    c.numeric = numerically_equivalent(entry.expression, entry.constants, ref, {}, data_box(data));
    return c;
}

}  // namespace kiml::symreg
