#include "kiml/learners.hpp"

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>

#include "kiml/rng.hpp"

namespace kiml::learners {

std::string ModelSpec::label() const {
    switch (kind.index()) {
        case 0: return "mlp";
        case 1: return "tree";
        default: return "svr";
    }
}

void ModelSpec::validate() const {
    if (const auto* m = std::get_if<MlpSpec>(&kind)) {
        for (int w : m->hidden_layers) {
            if (w <= 0) throw std::invalid_argument("MLP layer widths must be positive");
        }
        if (!(m->learning_rate > 0.0)) throw std::invalid_argument("MLP learning rate must be positive");
        if (m->batch_size <= 0) throw std::invalid_argument("MLP batch size must be positive");
        if (m->max_epochs <= 0) throw std::invalid_argument("MLP max_epochs must be positive");
    } else if (const auto* t = std::get_if<TreeSpec>(&kind)) {
        if (t->min_samples_split < 2) throw std::invalid_argument("tree min_samples_split must be >= 2");
        if (t->max_depth && *t->max_depth < 0) throw std::invalid_argument("tree max_depth must be nonnegative");
    } else {
        const auto& s = std::get<SvrSpec>(kind);
        if (!(s.c > 0.0)) throw std::invalid_argument("SVR C must be positive");
        if (!(s.epsilon >= 0.0)) throw std::invalid_argument("SVR epsilon must be nonnegative");
        if (s.gamma && !(*s.gamma > 0.0)) throw std::invalid_argument("SVR gamma must be positive");
    }
}

ModelSpec default_spec(const std::string& label) {
    if (label == "mlp") return ModelSpec::mlp();
    if (label == "tree") return ModelSpec::tree();
    if (label == "svr") return ModelSpec::svr();
    throw std::invalid_argument("unknown model '" + label + "' (expected mlp, tree or svr)");
}

void to_json(nlohmann::json& j, const ModelSpec& s) {
    j = {{"kind", s.label()}, {"scale_inputs", s.scale_inputs}, {"scale_targets", s.scale_targets}};
    if (const auto* m = std::get_if<MlpSpec>(&s.kind)) {
        j["hidden_layers"] = m->hidden_layers;
        j["activation"] = "relu";
        j["learning_rate"] = m->learning_rate;
        j["batch_size"] = m->batch_size;
        j["max_epochs"] = m->max_epochs;
        j["seed"] = m->seed;
        j["tolerance"] = m->tolerance;
        j["patience"] = m->patience;
    } else if (const auto* t = std::get_if<TreeSpec>(&s.kind)) {
        j["max_depth"] = t->max_depth ? nlohmann::json(*t->max_depth) : nlohmann::json(nullptr);
        j["min_samples_split"] = t->min_samples_split;
    } else {
        const auto& v = std::get<SvrSpec>(s.kind);
        j["c"] = v.c;
        j["epsilon"] = v.epsilon;
        j["gamma"] = v.gamma ? nlohmann::json(*v.gamma) : nlohmann::json("scale");
    }
}

void from_json(const nlohmann::json& j, ModelSpec& s) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "mlp") {
        MlpSpec m;
        m.hidden_layers = j.at("hidden_layers").get<std::vector<int>>();
        m.learning_rate = j.at("learning_rate").get<double>();
        m.batch_size = j.at("batch_size").get<int>();
        m.max_epochs = j.at("max_epochs").get<int>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.tolerance = j.value("tolerance", 1e-8);
        m.patience = j.value("patience", 10);
        s.kind = m;
    } else if (kind == "tree") {
        TreeSpec t;
        if (!j.at("max_depth").is_null()) t.max_depth = j.at("max_depth").get<int>();
        t.min_samples_split = j.at("min_samples_split").get<int>();
        s.kind = t;
    } else if (kind == "svr") {
        SvrSpec v;
        v.c = j.at("c").get<double>();
        v.epsilon = j.at("epsilon").get<double>();
        if (j.at("gamma").is_number()) v.gamma = j.at("gamma").get<double>();
        s.kind = v;
    } else {
        throw std::invalid_argument("unknown model kind '" + kind + "'");
    }
    s.scale_inputs = j.at("scale_inputs").get<bool>();
    s.scale_targets = j.at("scale_targets").get<bool>();
}

MlpFit fit_mlp(const MlpSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    const auto n = x.rows();
    if (n != y.size()) throw std::invalid_argument("fit_mlp: row count mismatch");
    if (n < 1) throw std::invalid_argument("fit_mlp: no rows");
    std::vector<int> widths{static_cast<int>(x.cols())};
    widths.insert(widths.end(), spec.hidden_layers.begin(), spec.hidden_layers.end());
    widths.push_back(1);
    MlpFit fit{nn::Mlp(widths, derive_seed(spec.seed, "init")), {}};
    nn::Adam adam(fit.model, spec.learning_rate);
    Rng shuffle(derive_seed(spec.seed, "shuffle"));

    const Eigen::MatrixXd xt = x.transpose();
    const Eigen::Index batch = std::min<Eigen::Index>(spec.batch_size, n);
    double best = std::numeric_limits<double>::infinity();
    int stale = 0;
    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    for (int epoch = 0; epoch < spec.max_epochs; ++epoch) {
        for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
        shuffle.shuffle(std::span<std::size_t>(order));
        double epoch_loss = 0.0;
        for (Eigen::Index start = 0; start < n; start += batch) {
            const Eigen::Index m = std::min(batch, n - start);
            Eigen::MatrixXd xb(xt.rows(), m);
            Eigen::MatrixXd yb(1, m);
            for (Eigen::Index k = 0; k < m; ++k) {
                const auto r = static_cast<Eigen::Index>(order[static_cast<std::size_t>(start + k)]);
                xb.col(k) = xt.col(r);
                yb(0, k) = y[r];
            }
            const auto cache = fit.model.forward_cached(xb);
            const auto lg = nn::mse_loss(cache.output(), yb);
            adam.step(fit.model, fit.model.backward(cache, lg.d_output));
            epoch_loss += lg.loss * static_cast<double>(m);
        }
        epoch_loss /= static_cast<double>(n);
        fit.loss_curve.push_back(epoch_loss);
        if (!std::isfinite(epoch_loss)) break;
        if (epoch_loss > best - spec.tolerance) {
            if (++stale >= spec.patience) break;
        } else {
            stale = 0;
        }
        best = std::min(best, epoch_loss);
    }
    return fit;
}

namespace {

void check_finite(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    if (!x.allFinite() || !y.allFinite()) throw std::invalid_argument("train: non-finite input values");
}

}  // namespace

TrainedModel train(const ModelSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    spec.validate();
    if (x.rows() != y.size()) throw std::invalid_argument("train: row count mismatch");
    if (x.rows() < 2) throw std::invalid_argument("train: need at least two rows");
    check_finite(x, y);

    TrainedModel m;
    m.spec = spec;
    m.input_dim = static_cast<int>(x.cols());
    Eigen::MatrixXd xs = x;
    Eigen::VectorXd ys = y;
    if (spec.scale_inputs) {
        m.x_scaler = fit_scaler(x);
        xs = m.x_scaler->apply(x);
    }
    if (spec.scale_targets) {
        m.y_scaler = fit_scaler(y);
        ys = m.y_scaler->apply(y);
    }
    if (const auto* ms = std::get_if<MlpSpec>(&spec.kind)) {
        auto fit = fit_mlp(*ms, xs, ys);
        m.params = std::move(fit.model);
        m.loss_curve = std::move(fit.loss_curve);
    } else if (const auto* ts = std::get_if<TreeSpec>(&spec.kind)) {
        m.params = fit_tree(xs, ys, TreeParams{ts->max_depth, ts->min_samples_split});
    } else {
        const auto& ss = std::get<SvrSpec>(spec.kind);
        m.params = fit_svr(xs, ys, SvrParams{ss.c, ss.epsilon, ss.gamma, 1e-3});
    }
    return m;
}

Eigen::VectorXd predict(const TrainedModel& model, const Eigen::MatrixXd& x) {
    if (x.cols() != model.input_dim) throw std::invalid_argument("predict: input dimension mismatch");
    const Eigen::MatrixXd xs = model.x_scaler ? model.x_scaler->apply(x) : x;
    Eigen::VectorXd out;
    if (const auto* mlp = std::get_if<nn::Mlp>(&model.params)) {
        out = mlp->forward(xs.transpose()).row(0).transpose();
    } else if (const auto* tree = std::get_if<RegressionTree>(&model.params)) {
        out = tree->predict(xs);
    } else {
        out = std::get<SvrModel>(model.params).predict(xs);
    }
    return model.y_scaler ? model.y_scaler->invert(out) : out;
}

void to_json(nlohmann::json& j, const TrainedModel& m) {
    j = {{"format", "kiml.model"}, {"version", kModelFormatVersion}, {"spec", m.spec}, {"input_dim", m.input_dim}};
    j["x_scaler"] = m.x_scaler ? nlohmann::json(*m.x_scaler) : nlohmann::json(nullptr);
    j["y_scaler"] = m.y_scaler ? nlohmann::json(*m.y_scaler) : nlohmann::json(nullptr);
    if (const auto* mlp = std::get_if<nn::Mlp>(&m.params)) {
        j["mlp"] = *mlp;
    } else if (const auto* tree = std::get_if<RegressionTree>(&m.params)) {
        j["tree"] = *tree;
    } else {
        j["svr"] = std::get<SvrModel>(m.params);
    }
    j["loss_curve"] = m.loss_curve;
}

void from_json(const nlohmann::json& j, TrainedModel& m) {
    if (j.at("format") != "kiml.model") throw std::invalid_argument("not a kiml model document");
    if (j.at("version").get<int>() != kModelFormatVersion) throw std::invalid_argument("unsupported model format version");
    m.spec = j.at("spec").get<ModelSpec>();
    m.input_dim = j.at("input_dim").get<int>();
    m.x_scaler.reset();
    m.y_scaler.reset();
    if (!j.at("x_scaler").is_null()) m.x_scaler = j.at("x_scaler").get<Scaler>();
    if (!j.at("y_scaler").is_null()) m.y_scaler = j.at("y_scaler").get<Scaler>();
    if (j.contains("mlp")) {
        m.params = j.at("mlp").get<nn::Mlp>();
    } else if (j.contains("tree")) {
        m.params = j.at("tree").get<RegressionTree>();
    } else {
        m.params = j.at("svr").get<SvrModel>();
    }
    m.loss_curve = j.at("loss_curve").get<std::vector<double>>();
}

}  // namespace kiml::learners
