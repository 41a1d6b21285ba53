#pragma once

#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace kiml::learners {

/// Per-column standardization. Zero-variance columns get mean 0 and std 1,
/// so they pass through unchanged, and are flagged.
struct Scaler {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;
    std::vector<bool> constant;

    [[nodiscard]] Eigen::Index dim() const { return mean.size(); }
    [[nodiscard]] Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
    [[nodiscard]] Eigen::MatrixXd invert(const Eigen::MatrixXd& x) const;
    /// Single-column convenience for target vectors.
    [[nodiscard]] Eigen::VectorXd apply(const Eigen::VectorXd& y) const;
    [[nodiscard]] Eigen::VectorXd invert(const Eigen::VectorXd& y) const;
    [[nodiscard]] double apply(double y) const { return (y - mean[0]) / std[0]; }
    [[nodiscard]] double invert(double y) const { return y * std[0] + mean[0]; }
};

/// Population statistics of each column of x (n >= 1 rows).
[[nodiscard]] Scaler fit_scaler(const Eigen::MatrixXd& x);
[[nodiscard]] Scaler fit_scaler(const Eigen::VectorXd& y);

void to_json(nlohmann::json& j, const Scaler& s);
void from_json(const nlohmann::json& j, Scaler& s);

}  // namespace kiml::learners
