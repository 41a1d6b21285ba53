#include "kiml/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "kiml/rng.hpp"

namespace kiml::nn {

Mlp::Mlp(std::vector<int> widths, std::uint64_t seed) : widths_(std::move(widths)) {
    if (widths_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output widths");
    for (int w : widths_) {
        if (w <= 0) throw std::invalid_argument("Mlp: layer widths must be positive");
    }
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        const int fan_in = widths_[l];
        const int fan_out = widths_[l + 1];
        const double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Eigen::MatrixXd w(fan_out, fan_in);
        for (int o = 0; o < fan_out; ++o) {
            for (int i = 0; i < fan_in; ++i) w(o, i) = rng.uniform(-r, r);
        }
        weights_.push_back(std::move(w));
        biases_.push_back(Eigen::VectorXd::Zero(fan_out));
    }
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input) const {
    if (input.rows() != input_dim()) throw std::invalid_argument("Mlp::forward: input dimension mismatch");
    Eigen::MatrixXd a = input;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        Eigen::MatrixXd z = (weights_[l] * a).colwise() + biases_[l];
        a = l + 1 < weights_.size() ? Eigen::MatrixXd(z.cwiseMax(0.0)) : std::move(z);
    }
    return a;
}

Mlp::Cache Mlp::forward_cached(const Eigen::MatrixXd& input) const {
    if (input.rows() != input_dim()) throw std::invalid_argument("Mlp::forward: input dimension mismatch");
    Cache c;
    c.post.push_back(input);
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        c.pre.push_back((weights_[l] * c.post.back()).colwise() + biases_[l]);
        c.post.push_back(l + 1 < weights_.size() ? Eigen::MatrixXd(c.pre.back().cwiseMax(0.0)) : c.pre.back());
    }
    return c;
}

Mlp::Gradients Mlp::backward(const Cache& cache, const Eigen::MatrixXd& d_output) const {
    Gradients g;
    g.weights.resize(weights_.size());
    g.biases.resize(weights_.size());
    Eigen::MatrixXd delta = d_output;
    for (std::size_t l = weights_.size(); l-- > 0;) {
        if (l + 1 < weights_.size()) {
            delta = delta.cwiseProduct((cache.pre[l].array() > 0.0).cast<double>().matrix());
        }
        g.weights[l] = delta * cache.post[l].transpose();
        g.biases[l] = delta.rowwise().sum();
        if (l > 0) delta = weights_[l].transpose() * delta;
    }
    return g;
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) n += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
    return n;
}

Eigen::VectorXd Mlp::parameters() const {
    Gradients g{weights_, biases_};
    return flatten(g);
}

Eigen::VectorXd Mlp::flatten(const Gradients& g) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
        const auto& w = g.weights[l];
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) out[k++] = w(r, c);
        }
        for (Eigen::Index r = 0; r < g.biases[l].size(); ++r) out[k++] = g.biases[l][r];
    }
    return out;
}

void Mlp::set_parameters(const Eigen::VectorXd& flat) {
    if (static_cast<std::size_t>(flat.size()) != parameter_count()) {
        throw std::invalid_argument("Mlp::set_parameters: size mismatch");
    }
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        auto& w = weights_[l];
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = flat[k++];
        }
        for (Eigen::Index r = 0; r < biases_[l].size(); ++r) biases_[l][r] = flat[k++];
    }
}

void to_json(nlohmann::json& j, const Mlp& m) {
    j = nlohmann::json{{"widths", m.widths_}};
    auto& layers = j["layers"] = nlohmann::json::array();
    for (std::size_t l = 0; l < m.weights_.size(); ++l) {
        std::vector<double> w;
        for (Eigen::Index r = 0; r < m.weights_[l].rows(); ++r) {
            for (Eigen::Index c = 0; c < m.weights_[l].cols(); ++c) w.push_back(m.weights_[l](r, c));
        }
        std::vector<double> b(m.biases_[l].data(), m.biases_[l].data() + m.biases_[l].size());
        layers.push_back({{"weights", w}, {"biases", b}});
    }
}

void from_json(const nlohmann::json& j, Mlp& m) {
    m.widths_ = j.at("widths").get<std::vector<int>>();
    const auto& layers = j.at("layers");
    if (layers.size() + 1 != m.widths_.size()) throw std::invalid_argument("Mlp JSON: layer count mismatch");
    m.weights_.clear();
    m.biases_.clear();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto w = layers[l].at("weights").get<std::vector<double>>();
        const auto b = layers[l].at("biases").get<std::vector<double>>();
        const int out = m.widths_[l + 1];
        const int in = m.widths_[l];
        if (w.size() != static_cast<std::size_t>(out * in) || b.size() != static_cast<std::size_t>(out)) {
            throw std::invalid_argument("Mlp JSON: parameter shape mismatch");
        }
        Eigen::MatrixXd wm(out, in);
        for (int r = 0; r < out; ++r) {
            for (int c = 0; c < in; ++c) wm(r, c) = w[static_cast<std::size_t>(r * in + c)];
        }
        m.weights_.push_back(std::move(wm));
        m.biases_.push_back(Eigen::Map<const Eigen::VectorXd>(b.data(), out));
    }
}

Adam::Adam(const Mlp& model, double learning_rate) : lr_(learning_rate) {
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        m_.weights.push_back(Eigen::MatrixXd::Zero(model.weights()[l].rows(), model.weights()[l].cols()));
        m_.biases.push_back(Eigen::VectorXd::Zero(model.biases()[l].size()));
    }
    v_ = m_;
}

void Adam::step(Mlp& model, const Mlp::Gradients& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const double step = lr_ * std::sqrt(c2) / c1;
    const double eps_hat = eps_ * std::sqrt(c2);
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        m_.weights[l] = beta1_ * m_.weights[l] + (1.0 - beta1_) * grads.weights[l];
        v_.weights[l] = beta2_ * v_.weights[l] + (1.0 - beta2_) * grads.weights[l].cwiseAbs2();
        model.weights()[l].array() -= step * m_.weights[l].array() / (v_.weights[l].array().sqrt() + eps_hat);
        m_.biases[l] = beta1_ * m_.biases[l] + (1.0 - beta1_) * grads.biases[l];
        v_.biases[l] = beta2_ * v_.biases[l] + (1.0 - beta2_) * grads.biases[l].cwiseAbs2();
        model.biases()[l].array() -= step * m_.biases[l].array() / (v_.biases[l].array().sqrt() + eps_hat);
    }
}

LossAndGrad mse_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
        throw std::invalid_argument("mse_loss: shape mismatch");
    }
    const double n = static_cast<double>(pred.size());
    const Eigen::MatrixXd diff = pred - target;
    return {diff.squaredNorm() / n, (2.0 / n) * diff};
}

}  // namespace kiml::nn
