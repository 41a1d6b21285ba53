#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "kiml/symreg/expression.hpp"

namespace kiml::symreg {

struct FitConfig {
    int restarts = 3;
    int max_iterations = 200;
    /// Rows used while optimizing; the final RMSE always uses every row.
    std::size_t max_fit_rows = 256;
    std::uint64_t seed = 0;
};
void to_json(nlohmann::json& j, const FitConfig& c);
void from_json(const nlohmann::json& j, FitConfig& c);

struct FitResult {
    std::vector<double> constants;
    /// On all rows; +inf when the expression is non-finite somewhere.
    double rmse = 0.0;
    bool converged = false;
    bool domain_error = false;
};

/// Levenberg-Marquardt on the squared error with a forward-difference
/// Jacobian. Restart 0 starts from all ones, later restarts from random
/// signed magnitudes 10^U(-2, 2). Returns the best result found.
[[nodiscard]] FitResult fit_constants(const Expression& e, const EvalData& data, const Eigen::ArrayXd& target,
                                      const FitConfig& cfg = {});

/// 1 / (1 + rmse / target_std); 0 for a non-finite rmse.
[[nodiscard]] double reward(double rmse, double target_std);

}  // namespace kiml::symreg
