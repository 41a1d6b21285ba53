#pragma once

// The three ladder experiments.

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "kiml/learners.hpp"
#include "kiml/metrics.hpp"
#include "kiml/physics.hpp"
#include "kiml/pinn.hpp"
#include "kiml/report.hpp"
#include "kiml/symreg/search.hpp"

namespace kiml::bench {

enum class SplitMode { RandomShuffle, Sequential };

struct SplitSpec {
    SplitMode mode = SplitMode::Sequential;
    std::uint64_t seed = 0;  ///< RandomShuffle only
    double train_fraction = 0.8;
};

/// Row indices of each side. Sequential: first ceil(f * n) rows train.
/// RandomShuffle: the same cut of a seeded permutation, each side sorted.
struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};
[[nodiscard]] SplitIndices split_indices(std::size_t n, const SplitSpec& spec);
[[nodiscard]] std::pair<physics::Dataset, physics::Dataset> split(const physics::Dataset& ds, const SplitSpec& spec);

/// Which activation loss enters the synthesized cell-voltage feature.
enum class CellVoltageSource {
    Observed,   ///< the eta_act column itself
    Noiseless,  ///< b * log10(i / i0) from the row's Tafel state
    Omitted,    ///< offsets only, eta_act contributes nothing
};
[[nodiscard]] std::string to_string(CellVoltageSource s);
[[nodiscard]] CellVoltageSource cell_voltage_source_from_string(const std::string& s);

struct Level1Config {
    std::size_t period = 56;
    std::size_t trend_window = 57;
    std::vector<learners::ModelSpec> models{learners::ModelSpec::svr(), learners::ModelSpec::tree(),
                                            learners::ModelSpec::mlp()};
    int rounds = 5;
    double train_fraction = 0.8;
    metrics::MetricConfig metric;
    std::uint64_t seed = 7;
    double u_nernst_mv = 1230.0;
    double eta_ohm_mv = 100.0;
    double eta_mtx_mv = 50.0;
    CellVoltageSource cell_voltage_source = CellVoltageSource::Noiseless;
};
void to_json(nlohmann::json& j, const Level1Config& c);
void from_json(const nlohmann::json& j, Level1Config& c);

/// Groups are "<model>/direct" and "<model>/knowledge".
/// Round r splits with derive_seed(seed, "level1/split/r"); an MLP in round r
/// is seeded with derive_seed(seed, "level1/mlp/r").
[[nodiscard]] ExperimentReport run_level1(const physics::Dataset& data, const Level1Config& cfg, int jobs = 1);

/// (t, u_cell, i) feature matrix.
[[nodiscard]] Eigen::MatrixXd level1_features(const physics::Dataset& data, const Level1Config& cfg);

struct Level2Config {
    std::vector<double> alphas{0.1, 0.5, 1.0, 2.0, 5.0};
    std::vector<pinn::KnowledgeVariant> variants{pinn::KnowledgeVariant::Full};
    bool baseline = true;
    int rounds = 20;
    double train_fraction = 0.8;
    double val_fraction = 0.1;
    /// Network, optimizer and stopping settings; alpha, variant and seed are overridden.
    pinn::PinnConfig pinn{};
    metrics::MetricConfig metric;
    std::uint64_t seed = 7;
};
void to_json(nlohmann::json& j, const Level2Config& c);
void from_json(const nlohmann::json& j, Level2Config& c);

[[nodiscard]] std::string level2_group(pinn::KnowledgeVariant v, double alpha);
inline constexpr const char* kBaselineGroup = "baseline";

/// One Sequential split shared by every group. Round r of every group trains
/// with seed derive_seed(seed, "level2/round/r"), so groups are paired.
[[nodiscard]] ExperimentReport run_level2(const physics::Dataset& data, const Level2Config& cfg, int jobs = 1);

struct Level3Config {
    symreg::SearchConfig search;
    int runs = 3;
    std::uint64_t seed = 7;
    metrics::MetricConfig metric;
    /// Pareto fronts and search logs are written here when non-empty.
    std::string pareto_dir;
};
void to_json(nlohmann::json& j, const Level3Config& c);
void from_json(const nlohmann::json& j, Level3Config& c);

/// Run r searches with derive_seed(seed, "level3/run/r"). Each row flags
/// whether the selected best expression recovers b*log10(i/i0).
[[nodiscard]] ExperimentReport run_level3(const physics::Dataset& data, const Level3Config& cfg, int jobs = 1,
                                          std::vector<std::vector<symreg::ParetoEntry>>* fronts = nullptr);

/// `jobs` only sets the thread count; results do not depend on it.
/// Runs `count` independent jobs on up to `jobs` threads; results keep job order.
void parallel_for(int count, int jobs, const std::function<void(int)>& body);

}  // namespace kiml::bench
