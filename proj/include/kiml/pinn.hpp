#pragma once

// Physics-informed composite model: a physics-informed head trained on the
// blended data/physics loss and a correction head trained on data alone,
// combined by a weighted sum.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "kiml/mlp.hpp"
#include "kiml/physics.hpp"
#include "kiml/scaler.hpp"

namespace kiml::pinn {

/// How much of the Tafel relation the physics target keeps.
enum class KnowledgeVariant { Full, DropLog, DropB, DropI0, DropI };

[[nodiscard]] std::string to_string(KnowledgeVariant v);
[[nodiscard]] KnowledgeVariant variant_from_string(const std::string& s);
[[nodiscard]] std::vector<KnowledgeVariant> all_variants();

/// Full:    b * log10(i / i0)
/// DropLog: b * (i / i0)
/// DropB:   log10(i / i0)
/// DropI0:  b * log10(i)
/// DropI:   b * log10(1 / i0)
[[nodiscard]] double physics_estimate(KnowledgeVariant variant, const physics::TafelState& state);

/// (MSE(pred, actual) + alpha * MSE(pred, physics)) / (1 + alpha)
[[nodiscard]] double pinn_loss(std::span<const double> pred, std::span<const double> actual,
                               std::span<const double> physics_target, double alpha);

struct PinnConfig {
    double alpha = 1.0;
    KnowledgeVariant variant = KnowledgeVariant::Full;
    std::vector<int> net_layers{3, 10, 10, 10, 1};
    /// Physics-head share of the composite output.
    double combine_weight = 0.5;
    int max_epochs = 500;
    int batch_size = 32;
    double learning_rate = 1e-3;
    int early_stop_patience = 25;
    std::uint64_t seed = 0;

    void validate() const;
};

void to_json(nlohmann::json& j, const PinnConfig& c);
void from_json(const nlohmann::json& j, PinnConfig& c);

struct EpochLog {
    int epoch = 0;
    /// Physics-head loss plus correction-head MSE, averaged over the epoch's batches.
    double total_loss = 0.0;
    /// Composite output vs actual, training rows.
    double data_mse = 0.0;
    /// Physics head vs physics target, training rows.
    double physics_mse = 0.0;
    /// Composite output vs actual, validation rows.
    double val_loss = 0.0;
    /// The blended loss of the physics head alone.
    double physics_head_loss = 0.0;
};

/// All losses are in standardized target units.
struct PinnModel {
    nn::Mlp physics_head;
    nn::Mlp correction_head;
    double combine_weight = 0.5;
    learners::Scaler x_scaler;
    learners::Scaler y_scaler;
    std::vector<EpochLog> log;
    int best_epoch = 0;

    /// Columns (b, i, i0); outputs in mV.
    [[nodiscard]] Eigen::VectorXd physics_head_output(const Eigen::MatrixXd& x) const;
    [[nodiscard]] Eigen::VectorXd correction_head_output(const Eigen::MatrixXd& x) const;
};

void to_json(nlohmann::json& j, const PinnModel& m);
void from_json(const nlohmann::json& j, PinnModel& m);

/// (b, i, i0) feature matrix of a dataset.
[[nodiscard]] Eigen::MatrixXd tafel_features(const physics::Dataset& ds);

/// Trains both heads on the same mini-batches. The last `val_fraction` of the
/// rows (in dataset order) is held out for early stopping: training stops once
/// the composite validation loss has not improved for early_stop_patience
/// epochs and the best-epoch weights are restored.
///
/// Seeds: physics head init derive_seed(seed, "init"), correction head init
/// derive_seed(seed, "correction_init"), batch order derive_seed(seed, "shuffle").
[[nodiscard]] PinnModel train_pinn(const PinnConfig& cfg, const physics::Dataset& train, double val_fraction);

/// w * physics_head + (1 - w) * correction_head, in mV.
[[nodiscard]] Eigen::VectorXd predict_pinn(const PinnModel& model, const Eigen::MatrixXd& x);

/// Plain MSE network with the same layers, seeds, batches and early stopping;
/// the physics head of train_pinn follows exactly this trajectory when the
/// physics target equals the data.
struct VanillaModel {
    nn::Mlp net;
    learners::Scaler x_scaler;
    learners::Scaler y_scaler;
    std::vector<EpochLog> log;
    int best_epoch = 0;
};
[[nodiscard]] VanillaModel train_vanilla(const PinnConfig& cfg, const physics::Dataset& train, double val_fraction);
[[nodiscard]] Eigen::VectorXd predict_vanilla(const VanillaModel& model, const Eigen::MatrixXd& x);

/// The composite training objective on one batch (standardized units):
///   pinn_loss(physics_head(x), y, g, alpha) + MSE(correction_head(x), y)
/// as a function of the concatenated flat parameters [physics; correction].
struct CompositeObjective {
    nn::Mlp physics_head;
    nn::Mlp correction_head;
    Eigen::MatrixXd x;  ///< features x batch
    Eigen::MatrixXd y;  ///< 1 x batch
    Eigen::MatrixXd g;  ///< 1 x batch physics target
    double alpha = 1.0;

    [[nodiscard]] Eigen::VectorXd parameters() const;
    [[nodiscard]] double loss(const Eigen::VectorXd& params) const;
    [[nodiscard]] Eigen::VectorXd gradient(const Eigen::VectorXd& params) const;
};

void write_training_log_csv(const std::vector<EpochLog>& log, std::ostream& out);

}  // namespace kiml::pinn
