#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "kiml/pinn.hpp"
#include "kiml/rng.hpp"

using namespace kiml;
using namespace kiml::pinn;

namespace {

physics::Dataset small_dataset(double noise, std::int64_t hours = 300) {
    physics::SyntheticConfig cfg;
    cfg.hours = hours;
    cfg.noise_std_mv = noise;
    return physics::generate_synthetic_dataset(cfg);
}

PinnConfig quick_config() {
    PinnConfig c;
    c.net_layers = {3, 6, 6, 1};
    c.max_epochs = 30;
    c.early_stop_patience = 1000;
    c.seed = 3;
    return c;
}

}  // namespace

TEST_SUITE("pinn") {

TEST_CASE("physics estimate examples") {
    const physics::TafelState s{50.0, 1.0, 1e-7};
    CHECK(physics_estimate(KnowledgeVariant::Full, s) == doctest::Approx(350.0).epsilon(1e-12));
    CHECK(physics_estimate(KnowledgeVariant::DropLog, {50.0, 2.0, 1.0}) == doctest::Approx(100.0));
    CHECK(physics_estimate(KnowledgeVariant::Full, {50.0, 1e-7, 1e-7}) == 0.0);
    CHECK(physics_estimate(KnowledgeVariant::DropB, s) == doctest::Approx(7.0).epsilon(1e-12));
    CHECK(physics_estimate(KnowledgeVariant::DropI0, {50.0, 10.0, 1e-7}) == doctest::Approx(50.0));
    CHECK(physics_estimate(KnowledgeVariant::DropI, s) == doctest::Approx(350.0).epsilon(1e-12));
}

TEST_CASE("variant names round trip") {
    for (auto v : all_variants()) CHECK(variant_from_string(to_string(v)) == v);
    CHECK(all_variants().size() == 5);
    CHECK_THROWS((void)variant_from_string("drop_everything"));
}

TEST_CASE("pinn loss examples") {
    const std::vector<double> a{1.0, 2.0, 3.0};
    CHECK(pinn_loss(a, a, a, 1.0) == 0.0);
    const std::vector<double> p{0.0, 0.0};
    const std::vector<double> y{1.0, 1.0};
    const std::vector<double> g{2.0, 2.0};
    CHECK(pinn_loss(p, y, g, 1.0) == doctest::Approx(2.5));
    CHECK(pinn_loss(p, y, g, 0.5) == doctest::Approx(2.0));
    CHECK(pinn_loss(p, y, g, 2.0) == doctest::Approx(3.0));
    CHECK(pinn_loss(p, y, y, 0.5) == doctest::Approx(1.0));
    const std::vector<double> four{2.0, 2.0};
    const std::vector<double> two{std::sqrt(2.0), -std::sqrt(2.0)};
    CHECK(pinn_loss(p, four, two, 0.5) == doctest::Approx(10.0 / 3.0).epsilon(1e-12));
    const std::vector<double> short_vec{1.0};
    CHECK_THROWS((void)pinn_loss(p, short_vec, g, 1.0));
    CHECK_THROWS((void)pinn_loss(p, y, g, -1.0));
    CHECK_THROWS((void)pinn_loss(p, y, g, 0.0));
}

TEST_CASE("pinn loss is a convex blend symmetric in data and physics") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.uniform_index(10);
        std::vector<double> p(n), y(n), g(n);
        for (std::size_t k = 0; k < n; ++k) {
            p[k] = rng.normal();
            y[k] = rng.normal();
            g[k] = rng.normal();
        }
        const double alpha = rng.uniform(0.01, 5.0);
        const double lhs = pinn_loss(p, y, g, alpha);
        CHECK(lhs == doctest::Approx(pinn_loss(p, g, y, 1.0 / alpha)).epsilon(1e-9));
        const double d = pinn_loss(p, y, y, 1.0);
        const double f = pinn_loss(p, g, g, 1.0);
        CHECK(lhs >= std::min(d, f) - 1e-12);
        CHECK(lhs <= std::max(d, f) + 1e-12);
    }
}

TEST_CASE("composite objective gradient matches central differences") {
    Rng rng(11);
    CompositeObjective obj;
    obj.physics_head = nn::Mlp({3, 5, 4, 1}, 1);
    obj.correction_head = nn::Mlp({3, 4, 1}, 2);
    obj.x.resize(3, 9);
    obj.y.resize(1, 9);
    obj.g.resize(1, 9);
    for (Eigen::Index k = 0; k < 9; ++k) {
        for (Eigen::Index r = 0; r < 3; ++r) obj.x(r, k) = rng.normal();
        obj.y(0, k) = rng.normal();
        obj.g(0, k) = rng.normal();
    }
    obj.alpha = 0.7;
    Eigen::VectorXd params = obj.parameters();
    for (auto& v : params) v = rng.normal(0.0, 0.5);
    const Eigen::VectorXd analytic = obj.gradient(params);
    REQUIRE(analytic.size() == params.size());
    const double h = 1e-5;
    for (Eigen::Index k = 0; k < params.size(); ++k) {
        const double keep = params[k];
        params[k] = keep + h;
        const double up = obj.loss(params);
        params[k] = keep - h;
        const double down = obj.loss(params);
        params[k] = keep;
        const double numeric = (up - down) / (2 * h);
        const double scale = std::max({std::abs(numeric), std::abs(analytic[k]), 1e-6});
        CHECK(std::abs(numeric - analytic[k]) / scale < 1e-4);
    }
}

TEST_CASE("physics head follows the plain network when the physics target is the data") {
    const auto ds = small_dataset(0.0);
    const auto cfg = quick_config();
    const auto pinn = train_pinn(cfg, ds, 0.2);
    const auto vanilla = train_vanilla(cfg, ds, 0.2);
    REQUIRE(pinn.log.size() == vanilla.log.size());
    for (std::size_t k = 0; k < pinn.log.size(); ++k) {
        CHECK(std::abs(pinn.log[k].physics_head_loss - vanilla.log[k].total_loss) < 1e-9);
        CHECK(pinn.log[k].physics_mse == doctest::Approx(pinn.log[k].physics_head_loss).epsilon(1e-9));
    }
}

TEST_CASE("combine weight selects heads") {
    const auto ds = small_dataset(1.0);
    const Eigen::MatrixXd x = tafel_features(ds);
    for (double w : {0.0, 0.3, 1.0}) {
        auto cfg = quick_config();
        cfg.max_epochs = 5;
        cfg.combine_weight = w;
        const auto m = train_pinn(cfg, ds, 0.2);
        const Eigen::VectorXd out = predict_pinn(m, x);
        const Eigen::VectorXd blend = w * m.physics_head_output(x) + (1.0 - w) * m.correction_head_output(x);
        CHECK((out - blend).cwiseAbs().maxCoeff() < 1e-12);
        if (w == 1.0) CHECK((out - m.physics_head_output(x)).cwiseAbs().maxCoeff() < 1e-12);
        if (w == 0.0) CHECK((out - m.correction_head_output(x)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("restored weights belong to the best validation epoch") {
    const auto ds = small_dataset(1.0);
    auto cfg = quick_config();
    cfg.max_epochs = 60;
    cfg.early_stop_patience = 5;
    const auto m = train_pinn(cfg, ds, 0.2);
    REQUIRE(m.best_epoch >= 1);
    REQUIRE(static_cast<std::size_t>(m.best_epoch) <= m.log.size());
    const double best = m.log[static_cast<std::size_t>(m.best_epoch - 1)].val_loss;
    for (const auto& e : m.log) CHECK(e.val_loss >= best);
    CHECK(m.log.size() <= static_cast<std::size_t>(m.best_epoch + cfg.early_stop_patience));

    const auto n = static_cast<Eigen::Index>(ds.size());
    const auto n_val = static_cast<Eigen::Index>(std::floor(0.2 * static_cast<double>(n)));
    const Eigen::MatrixXd x = tafel_features(ds).bottomRows(n_val);
    Eigen::VectorXd y(n_val);
    for (Eigen::Index k = 0; k < n_val; ++k) y[k] = ds.eta_act[static_cast<std::size_t>(n - n_val + k)];
    const Eigen::VectorXd pred = m.y_scaler.apply(predict_pinn(m, x));
    const double val = (pred - m.y_scaler.apply(y)).squaredNorm() / static_cast<double>(n_val);
    CHECK(val == doctest::Approx(best).epsilon(1e-9));
}

TEST_CASE("training is deterministic and seed sensitive") {
    const auto ds = small_dataset(1.0);
    auto cfg = quick_config();
    cfg.max_epochs = 5;
    const Eigen::MatrixXd x = tafel_features(ds);
    const auto a = predict_pinn(train_pinn(cfg, ds, 0.2), x);
    const auto b = predict_pinn(train_pinn(cfg, ds, 0.2), x);
    CHECK(a == b);
    cfg.seed = 4;
    CHECK(a != predict_pinn(train_pinn(cfg, ds, 0.2), x));
}

TEST_CASE("config validation") {
    PinnConfig c;
    CHECK_NOTHROW(c.validate());
    c.alpha = -0.1;
    CHECK_THROWS(c.validate());
    c = {};
    c.combine_weight = 1.5;
    CHECK_THROWS(c.validate());
    c = {};
    c.net_layers = {2, 10, 1};
    CHECK_THROWS(c.validate());
    c = {};
    CHECK_THROWS((void)train_pinn(c, small_dataset(1.0), 0.0));
}

TEST_CASE("config and model json round trip") {
    auto cfg = quick_config();
    cfg.variant = KnowledgeVariant::DropI0;
    cfg.alpha = 0.25;
    const nlohmann::json jc = cfg;
    const auto back = jc.get<PinnConfig>();
    CHECK(nlohmann::json(back) == jc);

    cfg.max_epochs = 3;
    const auto ds = small_dataset(1.0);
    const auto m = train_pinn(cfg, ds, 0.2);
    const auto m2 = nlohmann::json(m).get<PinnModel>();
    const Eigen::MatrixXd x = tafel_features(ds);
    CHECK(predict_pinn(m2, x) == predict_pinn(m, x));
}

TEST_CASE("training log csv") {
    const auto m = train_pinn(quick_config(), small_dataset(1.0), 0.2);
    std::ostringstream out;
    write_training_log_csv(m.log, out);
    const std::string s = out.str();
    CHECK(std::count(s.begin(), s.end(), '\n') == static_cast<long>(m.log.size() + 1));
    CHECK(s.rfind("epoch,", 0) == 0);
}

}
