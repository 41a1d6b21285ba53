#include "kiml/svr.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace kiml::learners {

SvrConvergenceError::SvrConvergenceError(std::size_t iterations, double duality_gap)
    : std::runtime_error("SVR did not converge after " + std::to_string(iterations) +
                         " iterations; KKT gap estimate " + std::to_string(duality_gap)),
      iterations_(iterations),
      gap_(duality_gap) {}

std::size_t svr_iteration_cap(std::size_t n) { return std::max<std::size_t>(100000, 200 * n); }

double scale_gamma(const Eigen::MatrixXd& x) {
    const double mean = x.mean();
    const double var = (x.array() - mean).square().mean();
    const double d = static_cast<double>(x.cols());
    return var > 0.0 ? 1.0 / (d * var) : 1.0;
}

Eigen::VectorXd SvrModel::predict(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd out = Eigen::VectorXd::Constant(x.rows(), bias);
    if (support_vectors.rows() == 0) return out;
    if (x.cols() != support_vectors.cols()) throw std::invalid_argument("SvrModel::predict: dimension mismatch");
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const Eigen::VectorXd d2 = (support_vectors.rowwise() - x.row(r)).rowwise().squaredNorm();
        out[r] += coefficients.dot((-gamma * d2.array()).exp().matrix());
    }
    return out;
}

namespace {

// Dual variables beta[0..n) are alpha (sign +1), beta[n..2n) are alpha* (sign -1).
// minimize 0.5 beta'Q beta + p'beta, sign'beta = 0, 0 <= beta <= C,
// Q_ab = s_a s_b K(a mod n, b mod n), p_a = eps - y, p_{a+n} = eps + y.
class SmoSolver {
public:
    SmoSolver(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& y, double c, double eps)
        : k_(kernel), n_(static_cast<std::size_t>(y.size())), c_(c) {
        const std::size_t m = 2 * n_;
        beta_.assign(m, 0.0);
        sign_.assign(m, 1);
        grad_.assign(m, 0.0);
        for (std::size_t a = 0; a < n_; ++a) {
            sign_[a + n_] = -1;
            grad_[a] = eps - y[static_cast<Eigen::Index>(a)];
            grad_[a + n_] = eps + y[static_cast<Eigen::Index>(a)];
        }
    }

    double q(std::size_t a, std::size_t b) const {
        return sign_[a] * sign_[b] * k_(static_cast<Eigen::Index>(a % n_), static_cast<Eigen::Index>(b % n_));
    }
    double qd(std::size_t a) const { return k_(static_cast<Eigen::Index>(a % n_), static_cast<Eigen::Index>(a % n_)); }
    bool at_upper(std::size_t a) const { return beta_[a] >= c_; }
    bool at_lower(std::size_t a) const { return beta_[a] <= 0.0; }

    // Returns false once the maximal violating pair gap is below tol.
    bool select(double tol, std::size_t& out_i, std::size_t& out_j, double& gap) const {
        constexpr double kTau = 1e-12;
        double gmax = -std::numeric_limits<double>::infinity();
        std::size_t imax = SIZE_MAX;
        const std::size_t m = 2 * n_;
        for (std::size_t t = 0; t < m; ++t) {
            if (sign_[t] == 1) {
                if (!at_upper(t) && -grad_[t] >= gmax) {
                    gmax = -grad_[t];
                    imax = t;
                }
            } else if (!at_lower(t) && grad_[t] >= gmax) {
                gmax = grad_[t];
                imax = t;
            }
        }
        double gmax2 = -std::numeric_limits<double>::infinity();
        std::size_t jmin = SIZE_MAX;
        double obj_min = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < m; ++t) {
            if (sign_[t] == 1) {
                if (at_lower(t)) continue;
                const double diff = gmax + grad_[t];
                gmax2 = std::max(gmax2, grad_[t]);
                if (diff > 0.0 && imax != SIZE_MAX) {
                    double quad = qd(imax) + qd(t) - 2.0 * sign_[imax] * q(imax, t);
                    if (quad <= 0.0) quad = kTau;
                    const double obj = -(diff * diff) / quad;
                    if (obj <= obj_min) {
                        obj_min = obj;
                        jmin = t;
                    }
                }
            } else {
                if (at_upper(t)) continue;
                const double diff = gmax - grad_[t];
                gmax2 = std::max(gmax2, -grad_[t]);
                if (diff > 0.0 && imax != SIZE_MAX) {
                    double quad = qd(imax) + qd(t) + 2.0 * sign_[imax] * q(imax, t);
                    if (quad <= 0.0) quad = kTau;
                    const double obj = -(diff * diff) / quad;
                    if (obj <= obj_min) {
                        obj_min = obj;
                        jmin = t;
                    }
                }
            }
        }
        gap = gmax + gmax2;
        if (gap < tol || jmin == SIZE_MAX || imax == SIZE_MAX) return false;
        out_i = imax;
        out_j = jmin;
        return true;
    }

    void update(std::size_t i, std::size_t j) {
        constexpr double kTau = 1e-12;
        const double old_i = beta_[i];
        const double old_j = beta_[j];
        double& ai = beta_[i];
        double& aj = beta_[j];
        const double qij = q(i, j);
        if (sign_[i] != sign_[j]) {
            double quad = qd(i) + qd(j) + 2.0 * qij;
            if (quad <= 0.0) quad = kTau;
            const double delta = (-grad_[i] - grad_[j]) / quad;
            const double diff = ai - aj;
            ai += delta;
            aj += delta;
            if (diff > 0.0) {
                if (aj < 0.0) {
                    aj = 0.0;
                    ai = diff;
                }
            } else if (ai < 0.0) {
                ai = 0.0;
                aj = -diff;
            }
            if (diff > 0.0) {
                if (ai > c_) {
                    ai = c_;
                    aj = c_ - diff;
                }
            } else if (aj > c_) {
                aj = c_;
                ai = c_ + diff;
            }
        } else {
            double quad = qd(i) + qd(j) - 2.0 * qij;
            if (quad <= 0.0) quad = kTau;
            const double delta = (grad_[i] - grad_[j]) / quad;
            const double sum = ai + aj;
            ai -= delta;
            aj += delta;
            if (sum > c_) {
                if (ai > c_) {
                    ai = c_;
                    aj = sum - c_;
                }
            } else if (aj < 0.0) {
                aj = 0.0;
                ai = sum;
            }
            if (sum > c_) {
                if (aj > c_) {
                    aj = c_;
                    ai = sum - c_;
                }
            } else if (ai < 0.0) {
                ai = 0.0;
                aj = sum;
            }
        }
        const double di = ai - old_i;
        const double dj = aj - old_j;
        const std::size_t m = 2 * n_;
        for (std::size_t t = 0; t < m; ++t) grad_[t] += q(i, t) * di + q(j, t) * dj;
    }

    double bias() const {
        double ub = std::numeric_limits<double>::infinity();
        double lb = -std::numeric_limits<double>::infinity();
        double sum_free = 0.0;
        std::size_t free = 0;
        for (std::size_t t = 0; t < 2 * n_; ++t) {
            const double yg = sign_[t] * grad_[t];
            if (at_upper(t)) {
                if (sign_[t] == -1) ub = std::min(ub, yg);
                else lb = std::max(lb, yg);
            } else if (at_lower(t)) {
                if (sign_[t] == 1) ub = std::min(ub, yg);
                else lb = std::max(lb, yg);
            } else {
                ++free;
                sum_free += yg;
            }
        }
        const double rho = free > 0 ? sum_free / static_cast<double>(free) : 0.5 * (ub + lb);
        return -rho;
    }

    double coefficient(std::size_t a) const { return beta_[a] - beta_[a + n_]; }

private:
    const Eigen::MatrixXd& k_;
    std::size_t n_;
    double c_;
    std::vector<double> beta_;
    std::vector<int> sign_;
    std::vector<double> grad_;
};

}  // namespace

SvrModel fit_svr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const SvrParams& params) {
    if (x.rows() != y.size()) throw std::invalid_argument("fit_svr: row count mismatch");
    if (x.rows() < 2) throw std::invalid_argument("fit_svr: need at least two rows");
    if (!(params.c > 0.0)) throw std::invalid_argument("fit_svr: C must be positive");
    if (!(params.epsilon >= 0.0)) throw std::invalid_argument("fit_svr: epsilon must be nonnegative");
    if (params.gamma && !(*params.gamma > 0.0)) throw std::invalid_argument("fit_svr: gamma must be positive");

    SvrModel model;
    model.gamma = params.gamma.value_or(scale_gamma(x));
    const Eigen::Index n = x.rows();
    Eigen::MatrixXd kernel(n, n);
    const Eigen::VectorXd norms = x.rowwise().squaredNorm();
    kernel.noalias() = x * x.transpose();
    for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index b = 0; b < n; ++b) {
            const double d2 = std::max(0.0, norms[a] + norms[b] - 2.0 * kernel(a, b));
            kernel(a, b) = a == b ? 1.0 : std::exp(-model.gamma * d2);
        }
    }

    SmoSolver solver(kernel, y, params.c, params.epsilon);
    const std::size_t cap = svr_iteration_cap(static_cast<std::size_t>(n));
    std::size_t it = 0;
    double gap = 0.0;
    for (;; ++it) {
        std::size_t i = 0;
        std::size_t j = 0;
        if (!solver.select(params.tolerance, i, j, gap)) break;
        if (it >= cap) throw SvrConvergenceError(it, gap);
        solver.update(i, j);
    }
    model.iterations = it;
    model.bias = solver.bias();

    std::vector<Eigen::Index> support;
    for (Eigen::Index a = 0; a < n; ++a) {
        if (solver.coefficient(static_cast<std::size_t>(a)) != 0.0) support.push_back(a);
    }
    model.support_vectors.resize(static_cast<Eigen::Index>(support.size()), x.cols());
    model.coefficients.resize(static_cast<Eigen::Index>(support.size()));
    for (std::size_t k = 0; k < support.size(); ++k) {
        model.support_vectors.row(static_cast<Eigen::Index>(k)) = x.row(support[k]);
        model.coefficients[static_cast<Eigen::Index>(k)] = solver.coefficient(static_cast<std::size_t>(support[k]));
    }
    return model;
}

void to_json(nlohmann::json& j, const SvrModel& m) {
    nlohmann::json table = nlohmann::json::array();
    for (Eigen::Index k = 0; k < m.support_vectors.rows(); ++k) {
        std::vector<double> row(static_cast<std::size_t>(m.support_vectors.cols()));
        for (Eigen::Index c = 0; c < m.support_vectors.cols(); ++c) row[static_cast<std::size_t>(c)] = m.support_vectors(k, c);
        table.push_back({{"coef", m.coefficients[k]}, {"x", row}});
    }
    j = {{"gamma", m.gamma},
         {"bias", m.bias},
         {"input_dim", m.support_vectors.cols()},
         {"iterations", m.iterations},
         {"support_vectors", table}};
}

void from_json(const nlohmann::json& j, SvrModel& m) {
    m.gamma = j.at("gamma").get<double>();
    m.bias = j.at("bias").get<double>();
    m.iterations = j.value("iterations", std::size_t{0});
    const auto d = j.at("input_dim").get<Eigen::Index>();
    const auto& table = j.at("support_vectors");
    m.support_vectors.resize(static_cast<Eigen::Index>(table.size()), d);
    m.coefficients.resize(static_cast<Eigen::Index>(table.size()));
    for (std::size_t k = 0; k < table.size(); ++k) {
        const auto row = table[k].at("x").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(row.size()) != d) throw std::invalid_argument("SVR JSON: support vector width mismatch");
        for (Eigen::Index c = 0; c < d; ++c) m.support_vectors(static_cast<Eigen::Index>(k), c) = row[static_cast<std::size_t>(c)];
        m.coefficients[static_cast<Eigen::Index>(k)] = table[k].at("coef").get<double>();
    }
}

}  // namespace kiml::learners
