#pragma once

#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kiml/symreg/canonical.hpp"
#include "kiml/symreg/expression.hpp"
#include "kiml/symreg/fit.hpp"
#include "kiml/symreg/grammar.hpp"
#include "kiml/symreg/pareto.hpp"
#include "kiml/symreg/sampler.hpp"

namespace kiml::symreg {

enum class Strategy { ConstrainedRandom, PolicyGradient };
[[nodiscard]] std::string to_string(Strategy s);
[[nodiscard]] Strategy strategy_from_string(const std::string& s);

struct SearchConfig {
    Strategy strategy = Strategy::ConstrainedRandom;
    int batch_size = 200;
    /// Total sampling attempts, dead ends included.
    long budget = 200000;
    double learning_rate = 0.0025;
    int recurrent_hidden = 128;
    int layers = 1;
    double risk_quantile = 0.05;
    std::uint64_t seed = 0;
    SamplerConfig sampler;
    FitConfig fit;
    Grammar grammar = tafel_grammar();

    /// budget 0 is allowed and ends in EmptySearch.
    void validate() const;
};
void to_json(nlohmann::json& j, const SearchConfig& c);
void from_json(const nlohmann::json& j, SearchConfig& c);

struct SearchLogRow {
    int batch = 0;
    double best_reward = 0.0;
    double best_r2 = 0.0;
    long expressions_sampled = 0;
};

struct SearchResult {
    std::vector<ParetoEntry> pareto;
    ParetoEntry best;
    std::vector<SearchLogRow> log;
    long mask_exhausted = 0;
    long domain_errors = 0;
    long distinct_expressions = 0;
};

class EmptySearch : public std::runtime_error {
public:
    EmptySearch() : std::runtime_error("search produced no valid expression within its budget") {}
};

/// Batches of sample -> fit_constants -> reward until the budget is spent.
/// Repeated expressions reuse their first fit. The best entry is the
/// lowest-rmse front member, with rmse differences below 1e-9 * std(target)
/// treated as ties and resolved toward lower complexity.
/// Seeds: sampling derive_seed(seed, "sampler"), constant fitting
/// derive_seed(seed, "fit"), policy weights derive_seed(seed, "policy").
[[nodiscard]] SearchResult search(const SearchConfig& cfg, const EvalData& data, const Eigen::ArrayXd& target);

void write_search_log_csv(const std::vector<SearchLogRow>& log, std::ostream& out);

/// 1 - SS_res / SS_tot; -inf for non-finite predictions.
[[nodiscard]] double r2_of(const Eigen::ArrayXd& pred, const Eigen::ArrayXd& target);

struct RecoveryCheck {
    bool symbolic = false;
    bool numeric = false;
    double r2 = 0.0;
    [[nodiscard]] bool recovered() const { return symbolic && numeric && r2 >= 0.999; }
};

/// Compares an entry with A * log10(i / i0): canonical form, 1000 random
/// points in the data box within 1e-6 relative, and R^2 >= 0.999.
[[nodiscard]] RecoveryCheck check_tafel_recovery(const ParetoEntry& entry, const Grammar& g, const EvalData& data);

}  // namespace kiml::symreg
