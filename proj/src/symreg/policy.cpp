#include "kiml/symreg/policy.hpp"

#include <cmath>
#include <limits>

namespace kiml::symreg {

namespace {

Eigen::VectorXd sigmoid(const Eigen::VectorXd& z) { return (1.0 / (1.0 + (-z.array()).exp())).matrix(); }

}  // namespace

LstmPolicy::LstmPolicy(int vocabulary, int hidden, std::uint64_t seed) : vocab_(vocabulary), hidden_(hidden) {
    if (vocabulary < 1 || hidden < 1) throw std::invalid_argument("LstmPolicy: sizes must be positive");
    const int in = 2 * (vocabulary + 1);
    Rng rng(derive_seed(seed, "policy_init"));
    const double r = 1.0 / std::sqrt(static_cast<double>(hidden));
    auto fill = [&](Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols) {
        m.resize(rows, cols);
        for (Eigen::Index a = 0; a < rows; ++a)
            for (Eigen::Index b = 0; b < cols; ++b) m(a, b) = rng.uniform(-r, r);
    };
    fill(w_, 4 * hidden, in + hidden);
    Eigen::MatrixXd b;
    fill(b, 4 * hidden, 1);
    b_ = b.col(0);
    fill(w_out_, vocabulary, hidden);
    fill(b, vocabulary, 1);
    b_out_ = b.col(0);
    m_ = Eigen::VectorXd::Zero(parameter_count());
    v_ = Eigen::VectorXd::Zero(parameter_count());
}

Eigen::Index LstmPolicy::parameter_count() const { return w_.size() + b_.size() + w_out_.size() + b_out_.size(); }

Eigen::VectorXd LstmPolicy::parameters() const {
    Eigen::VectorXd p(parameter_count());
    p << Eigen::Map<const Eigen::VectorXd>(w_.data(), w_.size()), b_,
        Eigen::Map<const Eigen::VectorXd>(w_out_.data(), w_out_.size()), b_out_;
    return p;
}

void LstmPolicy::set_parameters(const Eigen::VectorXd& p) {
    if (p.size() != parameter_count()) throw std::invalid_argument("LstmPolicy: parameter size mismatch");
    Eigen::Index o = 0;
    w_ = Eigen::Map<const Eigen::MatrixXd>(p.data() + o, w_.rows(), w_.cols());
    o += w_.size();
    b_ = p.segment(o, b_.size());
    o += b_.size();
    w_out_ = Eigen::Map<const Eigen::MatrixXd>(p.data() + o, w_out_.rows(), w_out_.cols());
    o += w_out_.size();
    b_out_ = p.segment(o, b_out_.size());
}

Eigen::VectorXd LstmPolicy::encode(int parent, int sibling) const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(2 * (vocab_ + 1));
    x[parent + 1] = 1.0;
    x[vocab_ + 1 + sibling + 1] = 1.0;
    return x;
}

void LstmPolicy::cell(const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev, const Eigen::VectorXd& c_prev,
                      Step& s) const {
    s.input.resize(x.size() + h_prev.size());
    s.input << x, h_prev;
    const Eigen::VectorXd z = w_ * s.input + b_;
    const Eigen::Index h = hidden_;
    s.i = sigmoid(z.segment(0, h));
    s.f = sigmoid(z.segment(h, h));
    s.g = z.segment(2 * h, h).array().tanh().matrix();
    s.o = sigmoid(z.segment(3 * h, h));
    s.c_prev = c_prev;
    s.c = (s.f.array() * c_prev.array() + s.i.array() * s.g.array()).matrix();
    s.h = (s.o.array() * s.c.array().tanh()).matrix();
}

template <class Chooser>
LstmPolicy::Episode LstmPolicy::run(const Grammar& g, const UnitTable& table, const SamplerConfig& cfg,
                                    Chooser&& choose) const {
    Episode ep;
    SamplerState state(g, table);
    Eigen::VectorXd h = Eigen::VectorXd::Zero(hidden_);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(hidden_);
    while (!state.complete()) {
        Step s;
        cell(encode(state.parent_token(), state.sibling_token()), h, c, s);
        Eigen::VectorXd logits = w_out_ * s.h + b_out_;
        double top = -std::numeric_limits<double>::infinity();
        std::vector<bool> legal(static_cast<std::size_t>(vocab_));
        for (int t = 0; t < vocab_; ++t) {
            legal[static_cast<std::size_t>(t)] = state.is_legal(t);
            if (!legal[static_cast<std::size_t>(t)]) continue;
            logits[t] += std::log(std::max(length_prior_factor(cfg, state.is_terminal(t), state.length() + state.open_slots()), 1e-300));
            top = std::max(top, logits[t]);
        }
        if (!std::isfinite(top)) throw MaskExhausted();
        s.probs = Eigen::VectorXd::Zero(vocab_);
        for (int t = 0; t < vocab_; ++t)
            if (legal[static_cast<std::size_t>(t)]) s.probs[t] = std::exp(logits[t] - top);
        s.probs /= s.probs.sum();
        s.action = choose(s.probs, ep.steps.size());
        state.push(s.action);
        h = s.h;
        c = s.c;
        ep.steps.push_back(std::move(s));
    }
    ep.expression = state.expression();
    return ep;
}

LstmPolicy::Episode LstmPolicy::sample(const Grammar& g, const UnitTable& table, const SamplerConfig& cfg,
                                       Rng& rng) const {
    return run(g, table, cfg, [&](const Eigen::VectorXd& probs, std::size_t) {
        double u = rng.uniform();
        int pick = -1;
        for (int t = 0; t < probs.size(); ++t) {
            if (probs[t] <= 0.0) continue;
            pick = t;
            u -= probs[t];
            if (u < 0.0) break;
        }
        return pick;
    });
}

LstmPolicy::Episode LstmPolicy::replay(const Episode& ep, const Grammar& g, const UnitTable& table,
                                       const SamplerConfig& cfg) const {
    return run(g, table, cfg, [&](const Eigen::VectorXd&, std::size_t k) { return ep.steps.at(k).action; });
}

double LstmPolicy::log_probability(const Episode& ep) const {
    double s = 0.0;
    for (const auto& st : ep.steps) s += std::log(st.probs[st.action]);
    return s;
}

Eigen::VectorXd LstmPolicy::loss_gradient(const std::vector<const Episode*>& episodes,
                                          const std::vector<double>& weights) const {
    const Eigen::Index h = hidden_;
    Eigen::MatrixXd dw = Eigen::MatrixXd::Zero(w_.rows(), w_.cols());
    Eigen::VectorXd db = Eigen::VectorXd::Zero(b_.size());
    Eigen::MatrixXd dw_out = Eigen::MatrixXd::Zero(w_out_.rows(), w_out_.cols());
    Eigen::VectorXd db_out = Eigen::VectorXd::Zero(b_out_.size());
    const double scale = episodes.empty() ? 0.0 : 1.0 / static_cast<double>(episodes.size());
    for (std::size_t e = 0; e < episodes.size(); ++e) {
        const auto& steps = episodes[e]->steps;
        const double wgt = weights.at(e) * scale;
        Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(h);
        Eigen::VectorXd dc_next = Eigen::VectorXd::Zero(h);
        for (std::size_t k = steps.size(); k-- > 0;) {
            const Step& s = steps[k];
            // d(-w log p_a)/dlogits = w (p - onehot(a)); masked entries have p = 0.
            Eigen::VectorXd dlogits = wgt * s.probs;
            dlogits[s.action] -= wgt;
            dw_out += dlogits * s.h.transpose();
            db_out += dlogits;
            const Eigen::VectorXd dh = w_out_.transpose() * dlogits + dh_next;
            const Eigen::ArrayXd tc = s.c.array().tanh();
            const Eigen::ArrayXd dc = dc_next.array() + dh.array() * s.o.array() * (1.0 - tc.square());
            Eigen::VectorXd dz(4 * h);
            dz.segment(0, h) = (dc * s.g.array() * s.i.array() * (1.0 - s.i.array())).matrix();
            dz.segment(h, h) = (dc * s.c_prev.array() * s.f.array() * (1.0 - s.f.array())).matrix();
            dz.segment(2 * h, h) = (dc * s.i.array() * (1.0 - s.g.array().square())).matrix();
            dz.segment(3 * h, h) = (dh.array() * tc * s.o.array() * (1.0 - s.o.array())).matrix();
            dw += dz * s.input.transpose();
            db += dz;
            dh_next = (w_.transpose() * dz).tail(h);
            dc_next = (dc * s.f.array()).matrix();
        }
    }
    Eigen::VectorXd grad(parameter_count());
    grad << Eigen::Map<const Eigen::VectorXd>(dw.data(), dw.size()), db,
        Eigen::Map<const Eigen::VectorXd>(dw_out.data(), dw_out.size()), db_out;
    return grad;
}

void LstmPolicy::adam_step(const Eigen::VectorXd& grad, double learning_rate) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++t_;
    m_ = b1 * m_ + (1.0 - b1) * grad;
    v_ = b2 * v_ + (1.0 - b2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    const Eigen::VectorXd step =
        (learning_rate * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps)).matrix();
    set_parameters(parameters() - step);
}

}  // namespace kiml::symreg
