#pragma once

// The three Level-1 regressors behind one train/predict contract.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "kiml/mlp.hpp"
#include "kiml/scaler.hpp"
#include "kiml/svr.hpp"
#include "kiml/tree.hpp"

namespace kiml::learners {

struct MlpSpec {
    std::vector<int> hidden_layers{50, 50};
    double learning_rate = 1e-3;
    int batch_size = 32;
    int max_epochs = 1000;
    std::uint64_t seed = 0;
    /// Training stops once the epoch loss has failed to improve on the best
    /// loss by at least `tolerance` for `patience` consecutive epochs.
    double tolerance = 1e-8;
    int patience = 10;
};

struct TreeSpec {
    std::optional<int> max_depth;
    int min_samples_split = 2;
};

struct SvrSpec {
    double c = 1.0;
    double epsilon = 0.1;
    std::optional<double> gamma;  ///< nullopt = "scale"
};

struct ModelSpec {
    std::variant<MlpSpec, TreeSpec, SvrSpec> kind;
    bool scale_inputs = true;
    bool scale_targets = true;

    /// Defaults: inputs and targets standardized for MLP and SVR, never for the tree.
    static ModelSpec mlp(MlpSpec s = {}) { return {s, true, true}; }
    static ModelSpec tree(TreeSpec s = {}) { return {s, false, false}; }
    static ModelSpec svr(SvrSpec s = {}) { return {s, true, true}; }

    /// "mlp", "tree" or "svr".
    [[nodiscard]] std::string label() const;
    void validate() const;
};

/// Parses "mlp", "tree" or "svr" into the default spec of that kind.
[[nodiscard]] ModelSpec default_spec(const std::string& label);

void to_json(nlohmann::json& j, const ModelSpec& s);
void from_json(const nlohmann::json& j, ModelSpec& s);

struct TrainedModel {
    ModelSpec spec;
    int input_dim = 0;
    std::optional<Scaler> x_scaler;
    std::optional<Scaler> y_scaler;
    std::variant<nn::Mlp, RegressionTree, SvrModel> params;
    /// Per-epoch training loss (scaled-target MSE) for the MLP; empty otherwise.
    std::vector<double> loss_curve;
};

/// Throws std::invalid_argument for non-finite inputs or shape errors and
/// SvrConvergenceError if the SVR solver hits its iteration cap.
[[nodiscard]] TrainedModel train(const ModelSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

[[nodiscard]] Eigen::VectorXd predict(const TrainedModel& model, const Eigen::MatrixXd& x);

inline constexpr int kModelFormatVersion = 1;
void to_json(nlohmann::json& j, const TrainedModel& m);
void from_json(const nlohmann::json& j, TrainedModel& m);

/// Mini-batch Adam on MSE. Exposed for the PINN baseline and for tests.
/// Row order for each epoch comes from Rng(derive_seed(seed, "shuffle")),
/// initial weights from derive_seed(seed, "init").
struct MlpFit {
    nn::Mlp model;
    std::vector<double> loss_curve;
};
[[nodiscard]] MlpFit fit_mlp(const MlpSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

}  // namespace kiml::learners
