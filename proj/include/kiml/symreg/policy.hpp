#pragma once

// Recurrent token policy for risk-seeking policy-gradient search.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "kiml/rng.hpp"
#include "kiml/symreg/sampler.hpp"

namespace kiml::symreg {

/// Single-layer LSTM. The input at each step is one-hot(parent token) followed
/// by one-hot(left sibling token), each with an extra "none" slot; the output
/// is a logit per vocabulary token. Masked tokens get probability zero and the
/// soft length prior is added to the logits in log space.
class LstmPolicy {
public:
    LstmPolicy(int vocabulary, int hidden, std::uint64_t seed);

    struct Step {
        Eigen::VectorXd input;  ///< [x; h_prev]
        Eigen::VectorXd c_prev;
        Eigen::VectorXd i, f, g, o, c, h;
        Eigen::VectorXd probs;
        int action = 0;
    };
    struct Episode {
        std::vector<Step> steps;
        Expression expression;
    };

    /// Throws MaskExhausted on a dead end.
    [[nodiscard]] Episode sample(const Grammar& g, const UnitTable& table, const SamplerConfig& cfg, Rng& rng) const;

    /// Sum over steps of log p(action).
    [[nodiscard]] double log_probability(const Episode& ep) const;

    /// Gradient of -sum_k weights[k] * log p(episode k) / episodes.size(), flattened.
    [[nodiscard]] Eigen::VectorXd loss_gradient(const std::vector<const Episode*>& episodes,
                                                const std::vector<double>& weights) const;

    /// Re-runs the recorded actions through the current weights (needed after
    /// parameters change, e.g. for finite-difference checks).
    [[nodiscard]] Episode replay(const Episode& ep, const Grammar& g, const UnitTable& table,
                                 const SamplerConfig& cfg) const;

    [[nodiscard]] Eigen::VectorXd parameters() const;
    void set_parameters(const Eigen::VectorXd& p);
    [[nodiscard]] Eigen::Index parameter_count() const;

    /// One Adam step (beta 0.9, 0.999) on the loss above.
    void adam_step(const Eigen::VectorXd& grad, double learning_rate);

    [[nodiscard]] int vocabulary() const { return vocab_; }
    [[nodiscard]] int hidden() const { return hidden_; }

private:
    [[nodiscard]] Eigen::VectorXd encode(int parent, int sibling) const;
    void cell(const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev, const Eigen::VectorXd& c_prev, Step& s) const;
    template <class Chooser>
    Episode run(const Grammar& g, const UnitTable& table, const SamplerConfig& cfg, Chooser&& choose) const;

    int vocab_;
    int hidden_;
    Eigen::MatrixXd w_;      ///< 4H x (in + H), gate order i, f, g, o
    Eigen::VectorXd b_;      ///< 4H
    Eigen::MatrixXd w_out_;  ///< V x H
    Eigen::VectorXd b_out_;  ///< V
    Eigen::VectorXd m_, v_;
    std::int64_t t_ = 0;
};

}  // namespace kiml::symreg
