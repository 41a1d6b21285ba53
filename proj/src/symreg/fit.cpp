#include "kiml/symreg/fit.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "kiml/rng.hpp"

namespace kiml::symreg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Sum of squared residuals, +inf if any value is non-finite.
double sse(const Expression& e, const EvalData& data, const Eigen::ArrayXd& y, const std::vector<double>& c,
           Eigen::ArrayXd* residual = nullptr) {
    Eigen::ArrayXd r = evaluate_raw(e, data, c) - y;
    if (!r.isFinite().all()) return kInf;
    const double s = r.square().sum();
    if (residual) *residual = std::move(r);
    return s;
}

Eigen::ArrayXd subsample(const Eigen::ArrayXd& y, std::size_t max_rows) {
    const auto n = static_cast<std::size_t>(y.size());
    if (n <= max_rows || max_rows == 0) return y;
    Eigen::ArrayXd s(static_cast<Eigen::Index>(max_rows));
    for (std::size_t k = 0; k < max_rows; ++k) s[static_cast<Eigen::Index>(k)] = y[static_cast<Eigen::Index>(k * n / max_rows)];
    return s;
}

struct Run {
    std::vector<double> c;
    double cost = kInf;
    bool converged = false;
};

Run levenberg_marquardt(const Expression& e, const EvalData& data, const Eigen::ArrayXd& y, std::vector<double> c,
                        int max_iterations) {
    const auto k = static_cast<Eigen::Index>(c.size());
    Run run;
    Eigen::ArrayXd r;
    double cost = sse(e, data, y, c, &r);
    if (!std::isfinite(cost)) return run;
    double lambda = 1e-3;
    Eigen::MatrixXd jac(y.size(), k);
    for (int it = 0; it < max_iterations; ++it) {
        if (cost == 0.0) {
            run.converged = true;
            break;
        }
        bool jac_ok = true;
        for (Eigen::Index j = 0; j < k && jac_ok; ++j) {
            const auto idx = static_cast<std::size_t>(j);
            const double h = 1e-7 * std::max(std::abs(c[idx]), 1e-3);
            std::vector<double> cp = c;
            cp[idx] += h;
            const Eigen::ArrayXd f = evaluate_raw(e, data, cp) - y;
            if (!f.isFinite().all()) jac_ok = false;
            jac.col(j) = ((f - r) / h).matrix();
        }
        if (!jac_ok) break;
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd grad = jac.transpose() * r.matrix();
        bool improved = false;
        for (int tries = 0; tries < 12; ++tries) {
            Eigen::MatrixXd a = jtj;
            for (Eigen::Index j = 0; j < k; ++j) a(j, j) += lambda * std::max(jtj(j, j), 1e-12);
            const Eigen::VectorXd step = a.ldlt().solve(-grad);
            if (!step.allFinite()) {
                lambda *= 10.0;
                continue;
            }
            std::vector<double> cn = c;
            for (Eigen::Index j = 0; j < k; ++j) cn[static_cast<std::size_t>(j)] += step[j];
            Eigen::ArrayXd rn;
            const double cn_cost = sse(e, data, y, cn, &rn);
            if (cn_cost < cost) {
                const double rel = (cost - cn_cost) / cost;
                c = std::move(cn);
                r = std::move(rn);
                cost = cn_cost;
                lambda = std::max(lambda / 3.0, 1e-12);
                improved = true;
                if (rel < 1e-12 || step.norm() < 1e-14 * (1.0 + Eigen::Map<Eigen::VectorXd>(c.data(), k).norm()))
                    run.converged = true;
                break;
            }
            lambda *= 10.0;
        }
        if (!improved) {
            run.converged = true;  // no descent direction left at any damping
            break;
        }
        if (run.converged) break;
    }
    run.c = std::move(c);
    run.cost = cost;
    return run;
}

}  // namespace

void to_json(nlohmann::json& j, const FitConfig& c) {
    j = {{"restarts", c.restarts}, {"max_iterations", c.max_iterations}, {"max_fit_rows", c.max_fit_rows},
         {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, FitConfig& c) {
    c = FitConfig{};
    c.restarts = j.value("restarts", c.restarts);
    c.max_iterations = j.value("max_iterations", c.max_iterations);
    c.max_fit_rows = j.value("max_fit_rows", c.max_fit_rows);
    c.seed = j.value("seed", c.seed);
}

FitResult fit_constants(const Expression& e, const EvalData& data, const Eigen::ArrayXd& target, const FitConfig& cfg) {
    if (target.size() != data.rows()) throw std::invalid_argument("fit_constants: target length mismatch");
    if (target.size() == 0) throw std::invalid_argument("fit_constants: no rows");
    const auto n = static_cast<double>(target.size());
    FitResult out;
    const int k = e.constant_count();
    auto full_rmse = [&](const std::vector<double>& c) {
        const double s = sse(e, data, target, c);
        return std::isfinite(s) ? std::sqrt(s / n) : kInf;
    };
    if (k == 0) {
        out.rmse = full_rmse({});
        out.converged = true;
        out.domain_error = !std::isfinite(out.rmse);
        return out;
    }
    const EvalData sub = data.subsample(cfg.max_fit_rows);
    const Eigen::ArrayXd ysub = subsample(target, cfg.max_fit_rows);
    Rng rng(derive_seed(cfg.seed, e.key()));
    Run best;
    for (int restart = 0; restart < std::max(1, cfg.restarts); ++restart) {
        std::vector<double> c0(static_cast<std::size_t>(k), 1.0);
        if (restart > 0) {
            for (auto& v : c0) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * std::pow(10.0, rng.uniform(-2.0, 2.0));
        }
        Run run = levenberg_marquardt(e, sub, ysub, c0, cfg.max_iterations);
        if (run.cost < best.cost) best = std::move(run);
        if (best.cost == 0.0) break;
    }
    if (best.c.empty()) {
        out.constants.assign(static_cast<std::size_t>(k), 1.0);
        out.rmse = kInf;
        out.domain_error = true;
        return out;
    }
    out.constants = best.c;
    out.converged = best.converged;
    out.rmse = full_rmse(out.constants);
    out.domain_error = !std::isfinite(out.rmse);
    return out;
}

double reward(double rmse, double target_std) {
    if (!(target_std > 0.0)) throw std::invalid_argument("reward: target_std must be positive");
    if (!std::isfinite(rmse)) return 0.0;
    return 1.0 / (1.0 + rmse / target_std);
}

}  // namespace kiml::symreg
