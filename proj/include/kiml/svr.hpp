#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace kiml::learners {

struct SvrParams {
    double c = 1.0;
    double epsilon = 0.1;
    /// nullopt selects "scale": 1 / (d * variance of all input entries).
    std::optional<double> gamma;
    double tolerance = 1e-3;
};

/// f(x) = sum_k coef_k * exp(-gamma * |x - sv_k|^2) + bias
struct SvrModel {
    Eigen::MatrixXd support_vectors;  ///< one row per support vector
    Eigen::VectorXd coefficients;     ///< alpha - alpha*
    double bias = 0.0;
    double gamma = 1.0;
    std::size_t iterations = 0;

    [[nodiscard]] Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
    [[nodiscard]] std::size_t support_count() const { return static_cast<std::size_t>(coefficients.size()); }
};

class SvrConvergenceError : public std::runtime_error {
public:
    SvrConvergenceError(std::size_t iterations, double duality_gap);
    [[nodiscard]] double duality_gap() const { return gap_; }
    [[nodiscard]] std::size_t iterations() const { return iterations_; }

private:
    std::size_t iterations_;
    double gap_;
};

/// Iteration cap: max(100000, 200 * n).
[[nodiscard]] std::size_t svr_iteration_cap(std::size_t n);

/// epsilon-insensitive RBF regression. The 2n-variable dual is solved by SMO
/// with second-order working-set selection until the maximal KKT violation
/// is below `tolerance`. Throws SvrConvergenceError at the iteration cap,
/// carrying the remaining violation gap.
[[nodiscard]] SvrModel fit_svr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const SvrParams& params);

[[nodiscard]] double scale_gamma(const Eigen::MatrixXd& x);

void to_json(nlohmann::json& j, const SvrModel& m);
void from_json(const nlohmann::json& j, SvrModel& m);

}  // namespace kiml::learners
