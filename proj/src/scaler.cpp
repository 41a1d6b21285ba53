#include "kiml/scaler.hpp"

#include <cmath>
#include <stdexcept>

namespace kiml::learners {

Scaler fit_scaler(const Eigen::MatrixXd& x) {
    if (x.rows() < 1) throw std::invalid_argument("fit_scaler: no rows");
    Scaler s;
    const auto d = x.cols();
    s.mean.resize(d);
    s.std.resize(d);
    s.constant.assign(static_cast<std::size_t>(d), false);
    for (Eigen::Index c = 0; c < d; ++c) {
        const double m = x.col(c).mean();
        const double var = (x.col(c).array() - m).square().mean();
        if (var > 0.0 && std::isfinite(var)) {
            s.mean[c] = m;
            s.std[c] = std::sqrt(var);
        } else {
            s.mean[c] = 0.0;
            s.std[c] = 1.0;
            s.constant[static_cast<std::size_t>(c)] = true;
        }
    }
    return s;
}

Scaler fit_scaler(const Eigen::VectorXd& y) { return fit_scaler(Eigen::MatrixXd(y)); }

Eigen::MatrixXd Scaler::apply(const Eigen::MatrixXd& x) const {
    if (x.cols() != dim()) throw std::invalid_argument("Scaler::apply: column count mismatch");
    return (x.rowwise() - mean.transpose()).array().rowwise() / std.transpose().array();
}

Eigen::MatrixXd Scaler::invert(const Eigen::MatrixXd& x) const {
    if (x.cols() != dim()) throw std::invalid_argument("Scaler::invert: column count mismatch");
    return (x.array().rowwise() * std.transpose().array()).matrix().rowwise() + mean.transpose();
}

Eigen::VectorXd Scaler::apply(const Eigen::VectorXd& y) const {
    if (dim() != 1) throw std::invalid_argument("Scaler::apply: vector form needs a 1-column scaler");
    return (y.array() - mean[0]) / std[0];
}

Eigen::VectorXd Scaler::invert(const Eigen::VectorXd& y) const {
    if (dim() != 1) throw std::invalid_argument("Scaler::invert: vector form needs a 1-column scaler");
    return y.array() * std[0] + mean[0];
}

void to_json(nlohmann::json& j, const Scaler& s) {
    j = {{"mean", std::vector<double>(s.mean.data(), s.mean.data() + s.mean.size())},
         {"std", std::vector<double>(s.std.data(), s.std.data() + s.std.size())},
         {"constant", s.constant}};
}

void from_json(const nlohmann::json& j, Scaler& s) {
    const auto m = j.at("mean").get<std::vector<double>>();
    const auto sd = j.at("std").get<std::vector<double>>();
    if (m.size() != sd.size()) throw std::invalid_argument("Scaler JSON: mean/std length mismatch");
    s.mean = Eigen::Map<const Eigen::VectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
    s.std = Eigen::Map<const Eigen::VectorXd>(sd.data(), static_cast<Eigen::Index>(sd.size()));
    s.constant = j.at("constant").get<std::vector<bool>>();
}

}  // namespace kiml::learners
