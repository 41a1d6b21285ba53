#include "kiml/pinn.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "kiml/physics.hpp"
#include "kiml/rng.hpp"

namespace kiml::pinn {

namespace {

struct VariantName {
    KnowledgeVariant v;
    const char* name;
};
constexpr VariantName kVariantNames[] = {
    {KnowledgeVariant::Full, "full"},     {KnowledgeVariant::DropLog, "drop_log"},
    {KnowledgeVariant::DropB, "drop_b"},  {KnowledgeVariant::DropI0, "drop_i0"},
    {KnowledgeVariant::DropI, "drop_i"},
};

double mean_sq(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).squaredNorm() / static_cast<double>(a.size());
}

}  // namespace

std::string to_string(KnowledgeVariant v) {
    for (const auto& e : kVariantNames)
        if (e.v == v) return e.name;
    throw std::invalid_argument("unknown knowledge variant");
}

KnowledgeVariant variant_from_string(const std::string& s) {
    std::string key;
    for (char c : s) {
        if (c == '-') c = '_';
        key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    if (key == "droplog") key = "drop_log";
    if (key == "dropb") key = "drop_b";
    if (key == "dropi0") key = "drop_i0";
    if (key == "dropi") key = "drop_i";
    for (const auto& e : kVariantNames)
        if (key == e.name) return e.v;
    throw std::invalid_argument("unknown knowledge variant '" + s + "'");
}

std::vector<KnowledgeVariant> all_variants() {
    return {KnowledgeVariant::Full, KnowledgeVariant::DropLog, KnowledgeVariant::DropB, KnowledgeVariant::DropI0,
            KnowledgeVariant::DropI};
}

double physics_estimate(KnowledgeVariant variant, const physics::TafelState& s) {
    s.validate();
    switch (variant) {
        case KnowledgeVariant::Full: return s.b_mv_per_dec * std::log10(s.i / s.i0);
        case KnowledgeVariant::DropLog: return s.b_mv_per_dec * (s.i / s.i0);
        case KnowledgeVariant::DropB: return std::log10(s.i / s.i0);
        case KnowledgeVariant::DropI0: return s.b_mv_per_dec * std::log10(s.i);
        case KnowledgeVariant::DropI: return s.b_mv_per_dec * std::log10(1.0 / s.i0);
    }
    throw std::invalid_argument("unknown knowledge variant");
}

double pinn_loss(std::span<const double> pred, std::span<const double> actual, std::span<const double> physics_target,
                 double alpha) {
    if (pred.size() != actual.size() || pred.size() != physics_target.size())
        throw std::invalid_argument("pinn_loss: length mismatch");
    if (pred.empty()) throw std::invalid_argument("pinn_loss: empty input");
    if (!(alpha > 0.0)) throw std::invalid_argument("pinn_loss: alpha must be positive");
    double da = 0.0;
    double dg = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        da += (pred[k] - actual[k]) * (pred[k] - actual[k]);
        dg += (pred[k] - physics_target[k]) * (pred[k] - physics_target[k]);
    }
    const auto n = static_cast<double>(pred.size());
    return (da / n + alpha * (dg / n)) / (1.0 + alpha);
}

void PinnConfig::validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw physics::ConfigError("pinn: alpha must be positive");
    if (net_layers.size() < 2 || net_layers.front() != 3 || net_layers.back() != 1)
        throw physics::ConfigError("pinn: net_layers must start at 3 and end at 1");
    for (int w : net_layers)
        if (w < 1) throw physics::ConfigError("pinn: layer widths must be positive");
    if (!(combine_weight >= 0.0 && combine_weight <= 1.0))
        throw physics::ConfigError("pinn: combine_weight must lie in [0, 1]");
    if (max_epochs < 1) throw physics::ConfigError("pinn: max_epochs must be >= 1");
    if (batch_size < 1) throw physics::ConfigError("pinn: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw physics::ConfigError("pinn: learning_rate must be positive");
    if (early_stop_patience < 1) throw physics::ConfigError("pinn: early_stop_patience must be >= 1");
}

void to_json(nlohmann::json& j, const PinnConfig& c) {
    j = {{"alpha", c.alpha},
         {"variant", to_string(c.variant)},
         {"net_layers", c.net_layers},
         {"activation", "relu"},
         {"combine_weight", c.combine_weight},
         {"max_epochs", c.max_epochs},
         {"batch_size", c.batch_size},
         {"learning_rate", c.learning_rate},
         {"early_stop_patience", c.early_stop_patience},
         {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, PinnConfig& c) {
    c = PinnConfig{};
    c.alpha = j.value("alpha", c.alpha);
    if (j.contains("variant")) c.variant = variant_from_string(j.at("variant").get<std::string>());
    c.net_layers = j.value("net_layers", c.net_layers);
    if (j.value("activation", std::string("relu")) != "relu") throw physics::ConfigError("pinn: only relu activation");
    c.combine_weight = j.value("combine_weight", c.combine_weight);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
    c.seed = j.value("seed", c.seed);
    c.validate();
}

Eigen::MatrixXd tafel_features(const physics::Dataset& ds) {
    const auto n = static_cast<Eigen::Index>(ds.size());
    Eigen::MatrixXd x(n, 3);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto k = static_cast<std::size_t>(r);
        x(r, 0) = ds.b[k];
        x(r, 1) = ds.i[k];
        x(r, 2) = ds.i0[k];
    }
    return x;
}

Eigen::VectorXd PinnModel::physics_head_output(const Eigen::MatrixXd& x) const {
    if (x.cols() != 3) throw std::invalid_argument("pinn: expected 3 input columns (b, i, i0)");
    const Eigen::VectorXd out = physics_head.forward(x_scaler.apply(x).transpose()).row(0).transpose();
    return y_scaler.invert(out);
}

Eigen::VectorXd PinnModel::correction_head_output(const Eigen::MatrixXd& x) const {
    if (x.cols() != 3) throw std::invalid_argument("pinn: expected 3 input columns (b, i, i0)");
    const Eigen::VectorXd out = correction_head.forward(x_scaler.apply(x).transpose()).row(0).transpose();
    return y_scaler.invert(out);
}

Eigen::VectorXd predict_pinn(const PinnModel& model, const Eigen::MatrixXd& x) {
    const double w = model.combine_weight;
    return w * model.physics_head_output(x) + (1.0 - w) * model.correction_head_output(x);
}

namespace {

struct Prepared {
    learners::Scaler x_scaler;
    learners::Scaler y_scaler;
    Eigen::MatrixXd x_fit;  // 3 x n_fit, standardized
    Eigen::MatrixXd y_fit;  // 1 x n_fit
    Eigen::MatrixXd g_fit;  // 1 x n_fit
    Eigen::MatrixXd x_val;
    Eigen::MatrixXd y_val;
};

Prepared prepare(const PinnConfig& cfg, const physics::Dataset& train, double val_fraction) {
    cfg.validate();
    train.validate();
    if (!(val_fraction > 0.0 && val_fraction < 0.5))
        throw std::invalid_argument("train_pinn: val_fraction must lie in (0, 0.5)");
    const auto n = static_cast<Eigen::Index>(train.size());
    const auto n_val = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::floor(val_fraction * n)));
    const Eigen::Index n_fit = n - n_val;
    if (n_fit < 1) throw std::invalid_argument("train_pinn: too few rows for a validation tail");

    const Eigen::MatrixXd x = tafel_features(train);
    Eigen::VectorXd y(n);
    Eigen::VectorXd g(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        y[r] = train.eta_act[static_cast<std::size_t>(r)];
        g[r] = physics_estimate(cfg.variant, train.state(static_cast<std::size_t>(r)));
    }
    if (!x.allFinite() || !y.allFinite()) throw std::invalid_argument("train_pinn: non-finite input values");

    Prepared p;
    p.x_scaler = learners::fit_scaler(x);
    p.y_scaler = learners::fit_scaler(y);
    const Eigen::MatrixXd xs = p.x_scaler.apply(x).transpose();
    const Eigen::RowVectorXd ys = p.y_scaler.apply(y).transpose();
    const Eigen::RowVectorXd gs = p.y_scaler.apply(g).transpose();
    p.x_fit = xs.leftCols(n_fit);
    p.y_fit = ys.leftCols(n_fit);
    p.g_fit = gs.leftCols(n_fit);
    p.x_val = xs.rightCols(n_val);
    p.y_val = ys.rightCols(n_val);
    return p;
}

// dLoss/dPred of pinn_loss over a batch.
Eigen::MatrixXd pinn_loss_grad(const Eigen::MatrixXd& p, const Eigen::MatrixXd& y, const Eigen::MatrixXd& g,
                               double alpha) {
    const double s = 2.0 / static_cast<double>(p.size());
    return (s * (p - y) + alpha * (s * (p - g))) / (1.0 + alpha);
}

double batch_pinn_loss(const Eigen::MatrixXd& p, const Eigen::MatrixXd& y, const Eigen::MatrixXd& g, double alpha) {
    return (mean_sq(p, y) + alpha * mean_sq(p, g)) / (1.0 + alpha);
}

// Trains `phys` (and `corr` when given) with early stopping on the validation
// tail. Without `corr` the physics head is trained on plain MSE.
int run_training(const PinnConfig& cfg, const Prepared& data, nn::Mlp& phys, nn::Mlp* corr,
                 std::vector<EpochLog>& log) {
    const Eigen::Index n = data.x_fit.cols();
    const Eigen::Index batch = std::min<Eigen::Index>(cfg.batch_size, n);
    const double w = corr ? cfg.combine_weight : 1.0;
    nn::Adam adam_p(phys, cfg.learning_rate);
    nn::Adam adam_c;
    if (corr) adam_c = nn::Adam(*corr, cfg.learning_rate);
    Rng shuffle(derive_seed(cfg.seed, "shuffle"));

    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    int stale = 0;
    Eigen::VectorXd best_p = phys.parameters();
    Eigen::VectorXd best_c = corr ? corr->parameters() : Eigen::VectorXd();
    std::vector<std::size_t> order(static_cast<std::size_t>(n));

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
        shuffle.shuffle(std::span<std::size_t>(order));
        EpochLog e;
        e.epoch = epoch;
        for (Eigen::Index start = 0; start < n; start += batch) {
            const Eigen::Index m = std::min(batch, n - start);
            Eigen::MatrixXd xb(data.x_fit.rows(), m);
            Eigen::MatrixXd yb(1, m);
            Eigen::MatrixXd gb(1, m);
            for (Eigen::Index k = 0; k < m; ++k) {
                const auto r = static_cast<Eigen::Index>(order[static_cast<std::size_t>(start + k)]);
                xb.col(k) = data.x_fit.col(r);
                yb(0, k) = data.y_fit(0, r);
                gb(0, k) = data.g_fit(0, r);
            }
            const auto weight = static_cast<double>(m);
            const auto cp = phys.forward_cached(xb);
            const Eigen::MatrixXd& p = cp.output();
            double head_loss = 0.0;
            if (corr) {
                head_loss = batch_pinn_loss(p, yb, gb, cfg.alpha);
                const auto cc = corr->forward_cached(xb);
                const auto lc = nn::mse_loss(cc.output(), yb);
                const Eigen::MatrixXd composite = w * p + (1.0 - w) * cc.output();
                e.total_loss += (head_loss + lc.loss) * weight;
                e.data_mse += mean_sq(composite, yb) * weight;
                e.physics_mse += mean_sq(p, gb) * weight;
                adam_p.step(phys, phys.backward(cp, pinn_loss_grad(p, yb, gb, cfg.alpha)));
                adam_c.step(*corr, corr->backward(cc, lc.d_output));
            } else {
                const auto lp = nn::mse_loss(p, yb);
                head_loss = lp.loss;
                e.total_loss += lp.loss * weight;
                e.data_mse += lp.loss * weight;
                adam_p.step(phys, phys.backward(cp, lp.d_output));
            }
            e.physics_head_loss += head_loss * weight;
        }
        const auto nd = static_cast<double>(n);
        e.total_loss /= nd;
        e.data_mse /= nd;
        e.physics_mse /= nd;
        e.physics_head_loss /= nd;

        Eigen::MatrixXd val_pred = phys.forward(data.x_val);
        if (corr) val_pred = w * val_pred + (1.0 - w) * corr->forward(data.x_val);
        e.val_loss = mean_sq(val_pred, data.y_val);
        log.push_back(e);

        if (!std::isfinite(e.val_loss)) break;
        if (e.val_loss < best_val) {
            best_val = e.val_loss;
            best_epoch = epoch;
            best_p = phys.parameters();
            if (corr) best_c = corr->parameters();
            stale = 0;
        } else if (++stale >= cfg.early_stop_patience) {
            break;
        }
    }
    if (best_epoch > 0) {
        phys.set_parameters(best_p);
        if (corr) corr->set_parameters(best_c);
    }
    return best_epoch;
}

}  // namespace

PinnModel train_pinn(const PinnConfig& cfg, const physics::Dataset& train, double val_fraction) {
    const Prepared data = prepare(cfg, train, val_fraction);
    PinnModel m;
    m.physics_head = nn::Mlp(cfg.net_layers, derive_seed(cfg.seed, "init"));
    m.correction_head = nn::Mlp(cfg.net_layers, derive_seed(cfg.seed, "correction_init"));
    m.combine_weight = cfg.combine_weight;
    m.x_scaler = data.x_scaler;
    m.y_scaler = data.y_scaler;
    m.best_epoch = run_training(cfg, data, m.physics_head, &m.correction_head, m.log);
    return m;
}

VanillaModel train_vanilla(const PinnConfig& cfg, const physics::Dataset& train, double val_fraction) {
    const Prepared data = prepare(cfg, train, val_fraction);
    VanillaModel m;
    m.net = nn::Mlp(cfg.net_layers, derive_seed(cfg.seed, "init"));
    m.x_scaler = data.x_scaler;
    m.y_scaler = data.y_scaler;
    m.best_epoch = run_training(cfg, data, m.net, nullptr, m.log);
    return m;
}

Eigen::VectorXd predict_vanilla(const VanillaModel& model, const Eigen::MatrixXd& x) {
    if (x.cols() != 3) throw std::invalid_argument("predict_vanilla: expected 3 input columns (b, i, i0)");
    const Eigen::VectorXd out = model.net.forward(model.x_scaler.apply(x).transpose()).row(0).transpose();
    return model.y_scaler.invert(out);
}

Eigen::VectorXd CompositeObjective::parameters() const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(physics_head.parameter_count() + correction_head.parameter_count()));
    out << physics_head.parameters(), correction_head.parameters();
    return out;
}

double CompositeObjective::loss(const Eigen::VectorXd& params) const {
    const auto np = static_cast<Eigen::Index>(physics_head.parameter_count());
    nn::Mlp p = physics_head;
    nn::Mlp c = correction_head;
    p.set_parameters(params.head(np));
    c.set_parameters(params.tail(params.size() - np));
    return batch_pinn_loss(p.forward(x), y, g, alpha) + mean_sq(c.forward(x), y);
}

Eigen::VectorXd CompositeObjective::gradient(const Eigen::VectorXd& params) const {
    const auto np = static_cast<Eigen::Index>(physics_head.parameter_count());
    nn::Mlp p = physics_head;
    nn::Mlp c = correction_head;
    p.set_parameters(params.head(np));
    c.set_parameters(params.tail(params.size() - np));
    const auto cp = p.forward_cached(x);
    const auto cc = c.forward_cached(x);
    Eigen::VectorXd out(params.size());
    out << p.flatten(p.backward(cp, pinn_loss_grad(cp.output(), y, g, alpha))),
        c.flatten(c.backward(cc, nn::mse_loss(cc.output(), y).d_output));
    return out;
}

void to_json(nlohmann::json& j, const PinnModel& m) {
    nlohmann::json log = nlohmann::json::array();
    for (const auto& e : m.log)
        log.push_back({e.epoch, e.total_loss, e.data_mse, e.physics_mse, e.val_loss, e.physics_head_loss});
    j = {{"format", "kiml.pinn"},
         {"version", 1},
         {"physics_head", m.physics_head},
         {"correction_head", m.correction_head},
         {"combine_weight", m.combine_weight},
         {"x_scaler", m.x_scaler},
         {"y_scaler", m.y_scaler},
         {"best_epoch", m.best_epoch},
         {"log_columns", {"epoch", "total_loss", "data_mse", "physics_mse", "val_loss", "physics_head_loss"}},
         {"log", log}};
}

void from_json(const nlohmann::json& j, PinnModel& m) {
    if (j.value("format", std::string()) != "kiml.pinn") throw std::invalid_argument("not a kiml.pinn document");
    if (j.value("version", 0) != 1) throw std::invalid_argument("unsupported kiml.pinn version");
    m.physics_head = j.at("physics_head").get<nn::Mlp>();
    m.correction_head = j.at("correction_head").get<nn::Mlp>();
    m.combine_weight = j.at("combine_weight").get<double>();
    m.x_scaler = j.at("x_scaler").get<learners::Scaler>();
    m.y_scaler = j.at("y_scaler").get<learners::Scaler>();
    m.best_epoch = j.at("best_epoch").get<int>();
    m.log.clear();
    for (const auto& row : j.at("log")) {
        EpochLog e;
        e.epoch = row.at(0).get<int>();
        e.total_loss = row.at(1).get<double>();
        e.data_mse = row.at(2).get<double>();
        e.physics_mse = row.at(3).get<double>();
        e.val_loss = row.at(4).get<double>();
        e.physics_head_loss = row.at(5).get<double>();
        m.log.push_back(e);
    }
}

void write_training_log_csv(const std::vector<EpochLog>& log, std::ostream& out) {
    out << "epoch,total_loss,data_mse,physics_mse,val_loss\n";
    for (const auto& e : log) {
        out << e.epoch << ',' << physics::format_double(e.total_loss) << ',' << physics::format_double(e.data_mse)
            << ',' << physics::format_double(e.physics_mse) << ',' << physics::format_double(e.val_loss) << '\n';
    }
}

}  // namespace kiml::pinn
