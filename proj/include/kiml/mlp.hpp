#pragma once

// Fully connected ReLU network with a linear output layer, trained by
// hand-written backpropagation and Adam.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace kiml::nn {

/// Layer widths include input and output, e.g. {3, 10, 10, 10, 1}.
class Mlp {
public:
    Mlp() = default;
    /// Glorot-uniform weights, U(-r, r) with r = sqrt(6 / (fan_in + fan_out)),
    /// drawn layer by layer in row-major (output, input) order; zero biases.
    Mlp(std::vector<int> widths, std::uint64_t seed);

    [[nodiscard]] const std::vector<int>& widths() const { return widths_; }
    [[nodiscard]] int input_dim() const { return widths_.front(); }
    [[nodiscard]] int output_dim() const { return widths_.back(); }
    [[nodiscard]] std::size_t layer_count() const { return weights_.size(); }

    /// Columns are samples: input (input_dim x batch) -> (output_dim x batch).
    [[nodiscard]] Eigen::MatrixXd forward(const Eigen::MatrixXd& input) const;

    /// Activations kept for backprop. pre[l] is the pre-activation of layer l,
    /// post[0] is the input and post[l+1] the output of layer l.
    struct Cache {
        std::vector<Eigen::MatrixXd> pre;
        std::vector<Eigen::MatrixXd> post;
        [[nodiscard]] const Eigen::MatrixXd& output() const { return post.back(); }
    };
    [[nodiscard]] Cache forward_cached(const Eigen::MatrixXd& input) const;

    struct Gradients {
        std::vector<Eigen::MatrixXd> weights;
        std::vector<Eigen::VectorXd> biases;
    };
    /// Parameter gradients given dLoss/dOutput (output_dim x batch).
    [[nodiscard]] Gradients backward(const Cache& cache, const Eigen::MatrixXd& d_output) const;

    [[nodiscard]] std::size_t parameter_count() const;
    /// Flat view: per layer, W row-major then b.
    [[nodiscard]] Eigen::VectorXd parameters() const;
    void set_parameters(const Eigen::VectorXd& flat);
    [[nodiscard]] Eigen::VectorXd flatten(const Gradients& g) const;

    [[nodiscard]] std::vector<Eigen::MatrixXd>& weights() { return weights_; }
    [[nodiscard]] std::vector<Eigen::VectorXd>& biases() { return biases_; }
    [[nodiscard]] const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
    [[nodiscard]] const std::vector<Eigen::VectorXd>& biases() const { return biases_; }

    friend void to_json(nlohmann::json& j, const Mlp& m);
    friend void from_json(const nlohmann::json& j, Mlp& m);

private:
    std::vector<int> widths_;
    std::vector<Eigen::MatrixXd> weights_;
    std::vector<Eigen::VectorXd> biases_;
};

/// Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8).
class Adam {
public:
    Adam() = default;
    Adam(const Mlp& model, double learning_rate);

    void step(Mlp& model, const Mlp::Gradients& grads);
    [[nodiscard]] double learning_rate() const { return lr_; }

private:
    double lr_ = 1e-3;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    std::int64_t t_ = 0;
    Mlp::Gradients m_;
    Mlp::Gradients v_;
};

/// Mean squared error over a batch and its gradient w.r.t. the output.
struct LossAndGrad {
    double loss = 0.0;
    Eigen::MatrixXd d_output;
};
[[nodiscard]] LossAndGrad mse_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target);

}  // namespace kiml::nn
