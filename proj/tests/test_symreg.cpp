#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "kiml/rng.hpp"
#include "kiml/symreg/canonical.hpp"
#include "kiml/symreg/fit.hpp"
#include "kiml/symreg/pareto.hpp"
#include "kiml/symreg/policy.hpp"
#include "kiml/symreg/sampler.hpp"
#include "kiml/symreg/search.hpp"

using namespace kiml;
using namespace kiml::symreg;
using units::OperatorKind;

namespace {

EvalData columns(std::vector<double> a, std::vector<double> i, std::vector<double> i0) {
    EvalData d;
    for (auto* v : {&a, &i, &i0}) d.columns.push_back(Eigen::Map<Eigen::ArrayXd>(v->data(), static_cast<Eigen::Index>(v->size())));
    return d;
}

EvalData tafel_rows(std::size_t n, double b = 50.0) {
    std::vector<double> a(n, b), i(n), i0(n);
    for (std::size_t k = 0; k < n; ++k) {
        i[k] = 0.5 + 1.5 * static_cast<double>(k) / static_cast<double>(n);
        i0[k] = 1e-7 * (1.0 - 1e-4 * static_cast<double>(k));
    }
    return columns(a, i, i0);
}

std::set<std::string> keys(const std::vector<Expression>& v) {
    std::set<std::string> out;
    for (const auto& e : v) out.insert(e.key() + "|" + [&] {
        std::string u;
        for (const auto& c : e.constant_units) u += c.str() + ";";
        return u;
    }());
    return out;
}

Grammar small_grammar() {
    Grammar g = tafel_grammar();
    g.operators = {OperatorKind::Mul, OperatorKind::Div, OperatorKind::Log10};
    g.priors.max_length = 7;
    return g;
}

ParetoEntry entry(int complexity, double rmse) {
    ParetoEntry e;
    e.complexity = complexity;
    e.rmse = rmse;
    e.expr_prefix = std::to_string(complexity) + "/" + std::to_string(rmse);
    return e;
}

}  // namespace

TEST_SUITE("symreg") {

TEST_CASE("evaluation examples") {
    const auto g = tafel_grammar();
    const auto d = columns({50.0}, {2.0}, {1e-7});
    CHECK(eval_expression(parse_prefix("i", g), d, {})[0] == 2.0);
    CHECK(eval_expression(parse_prefix("mul A log10 div i i0", g), columns({50.0}, {1.0}, {1e-7}), {})[0] ==
          doctest::Approx(350.0).epsilon(1e-12));
    CHECK(eval_expression(parse_prefix("add c1 c2", g), d, {3.0, 4.0})[0] == 7.0);
    CHECK_THROWS_AS((void)eval_expression(parse_prefix("log10 sub i i", g), d, {}), DomainError);
    CHECK(std::isnan(evaluate_raw(parse_prefix("sqrt sub i0 i", g), d, {})[0]));
}

TEST_CASE("prefix parsing and printing") {
    const auto g = tafel_grammar();
    const auto e = parse_prefix("mul A log10 div i i0", g);
    CHECK(e.size() == 6);
    CHECK(to_prefix(e, g) == "mul A log10 div i i0");
    CHECK(to_infix(e, g) == "A * log10(i / i0)");
    CHECK(expression_units(e, g) == units::UnitVector::volt());
    CHECK_FALSE(grammar_violation(e, g).has_value());
    CHECK(e == tafel_reference(g));
    CHECK_THROWS_AS((void)parse_prefix("mul A", g), std::invalid_argument);
    CHECK_THROWS_AS((void)parse_prefix("mul A log10 div i i0 i", g), std::invalid_argument);
    CHECK_THROWS_AS((void)parse_prefix("pow A i", g), std::invalid_argument);
    CHECK(grammar_violation(parse_prefix("log10 i", g), g).has_value());
    CHECK(grammar_violation(parse_prefix("add A i", g), g).has_value());
}

TEST_CASE("constant fitting oracles") {
    const auto g = tafel_grammar();
    const auto d = tafel_rows(200);
    const Eigen::ArrayXd target = eval_expression(tafel_reference(g), d, {});
    const auto r = fit_constants(parse_prefix("mul c1 log10 div i i0", g), d, target);
    REQUIRE(r.constants.size() == 1);
    CHECK(r.constants[0] == doctest::Approx(50.0).epsilon(0.002));
    CHECK(r.rmse < 1e-6);

    const auto sum = fit_constants(parse_prefix("add c1 c2", g), d, Eigen::ArrayXd::Constant(d.rows(), 7.0));
    CHECK(sum.constants[0] + sum.constants[1] == doctest::Approx(7.0).epsilon(1e-6));
    CHECK(sum.rmse < 1e-6);

    const auto bad = fit_constants(parse_prefix("log10 sub i i", g), d, target);
    CHECK(bad.domain_error);
    CHECK(std::isinf(bad.rmse));
}

TEST_CASE("reward examples") {
    CHECK(reward(0.0, 5.0) == 1.0);
    CHECK(reward(5.0, 5.0) == 0.5);
    CHECK(reward(15.0, 5.0) == 0.25);
    CHECK(reward(std::numeric_limits<double>::infinity(), 5.0) == 0.0);
    CHECK(reward(std::nan(""), 5.0) == 0.0);
}

TEST_CASE("sampler masks") {
    const auto g = tafel_grammar();
    const UnitTable table(g);
    SamplerState s(g, table);
    const int log_token = g.operator_token(OperatorKind::Log10);
    const int i_token = g.variable_index("i");
    CHECK_FALSE(s.is_legal(log_token));
    s.push(g.operator_token(OperatorKind::Mul));
    s.push(log_token);
    CHECK_FALSE(s.is_legal(i_token));
    CHECK_THROWS_AS(s.push(i_token), std::invalid_argument);

    Grammar tight = g;
    tight.priors.max_length = 1;
    const UnitTable tight_table(tight);
    SamplerState t(tight, tight_table);
    const auto mask = t.legal_mask();
    for (int k = 0; k < tight.vocabulary_size(); ++k) CHECK(mask[static_cast<std::size_t>(k)] == (k == g.variable_index("A") || k == g.constant_token()));

    Rng rng(1);
    const SamplerConfig cfg;
    int sampled = 0;
    for (int k = 0; k < 10000; ++k) {
        try {
            const auto e = sample_expression(g, table, cfg, rng);
            CHECK(e.size() <= 35);
            for (std::size_t p = 0; p + 1 < e.tokens.size(); ++p)
                if (e.tokens[p].kind == Token::Kind::Operator && e.tokens[p].op == OperatorKind::Log10)
                    CHECK_FALSE((e.tokens[p + 1].kind == Token::Kind::Variable && e.tokens[p + 1].index == i_token));
            ++sampled;
        } catch (const MaskExhausted&) {
        }
    }
    CHECK(sampled > 5000);
}

TEST_CASE("every sampled expression satisfies the grammar") {
    const auto g = tafel_grammar();
    const UnitTable table(g);
    Rng rng(2);
    const SamplerConfig cfg;
    long violations = 0;
    long unit_errors = 0;
    for (int k = 0; k < 100000; ++k) {
        Expression e;
        try {
            e = sample_expression(g, table, cfg, rng);
        } catch (const MaskExhausted&) {
            continue;
        }
        if (grammar_violation(e, g)) ++violations;
        try {
            if (!(expression_units(e, g) == g.target_unit)) ++unit_errors;
        } catch (const units::UnitError&) {
            ++unit_errors;
        }
    }
    CHECK(violations == 0);
    CHECK(unit_errors == 0);
}

TEST_CASE("masks admit exactly the valid short expressions") {
    const auto g = small_grammar();
    const UnitTable table(g);
    const auto legal = enumerate_legal(g, table);
    const auto valid = enumerate_valid(g);
    CHECK(!valid.empty());
    CHECK(keys(legal) == keys(valid));
    CHECK(legal.size() == keys(legal).size());
    CHECK(keys(legal).count(tafel_reference(g).key() + "|") == 1);
}

TEST_CASE("pareto front stays non-dominated and sorted") {
    Rng rng(3);
    ParetoFront front;
    std::vector<ParetoEntry> offered;
    for (int k = 0; k < 500; ++k) {
        const auto e = entry(1 + static_cast<int>(rng.uniform_index(30)), std::round(rng.uniform(0.0, 100.0)));
        front.offer(e);
        offered.push_back(e);
    }
    const auto& es = front.entries();
    REQUIRE_FALSE(es.empty());
    for (std::size_t k = 1; k < es.size(); ++k) {
        CHECK(es[k - 1].complexity < es[k].complexity);
        CHECK(es[k - 1].rmse > es[k].rmse);
    }
    for (const auto& o : offered) {
        bool covered = false;
        for (const auto& e : es) covered = covered || (e.complexity <= o.complexity && e.rmse <= o.rmse);
        CHECK(covered);
    }
    ParetoFront f;
    CHECK(f.offer(entry(5, 1.0)));
    CHECK_FALSE(f.offer(entry(6, 1.0)));
    CHECK(f.offer(entry(3, 1.0)));
    CHECK(f.entries().size() == 1);
    CHECK(f.offer(entry(9, 1.0 - 1e-12)));
    CHECK(f.best().complexity == 9);
    CHECK(f.best(1e-9).complexity == 3);
}

TEST_CASE("canonical equivalence") {
    const auto g = tafel_grammar();
    const auto ref = tafel_reference(g);
    const auto box = data_box(tafel_rows(50));
    const auto same = [&](const std::string& text, std::vector<double> c) {
        const auto e = parse_prefix(text, g);
        return symbolically_equivalent(e, c, ref, {}, g) && numerically_equivalent(e, c, ref, {}, box);
    };
    CHECK(same("mul A log10 div i i0", {}));
    CHECK(same("sub mul A log10 i mul A log10 i0", {}));
    CHECK(same("mul log10 div i i0 A", {}));
    CHECK(same("div mul A log10 div i i0 c1", {1.0}));
    CHECK(same("mul A sub log10 i log10 i0", {}));
    CHECK_FALSE(same("mul A log10 div i0 i", {}));
    CHECK_FALSE(same("mul c1 mul A log10 div i i0", {2.0}));
    CHECK_FALSE(same("mul A log10 mul div i i0 c1", {3.0}));
}

TEST_CASE("recovery check") {
    const auto g = tafel_grammar();
    const auto d = tafel_rows(100);
    ParetoEntry e;
    e.expression = tafel_reference(g);
    e.r2 = 1.0;
    CHECK(check_tafel_recovery(e, g, d).recovered());
    e.r2 = 0.99;
    CHECK_FALSE(check_tafel_recovery(e, g, d).recovered());
    e.r2 = 1.0;
    e.expression = parse_prefix("mul c1 A", g);
    e.expression.constant_units[0] = units::UnitVector::dimensionless();
    e.constants = {7.0};
    CHECK_FALSE(check_tafel_recovery(e, g, d).recovered());
}

TEST_CASE("empty budget") {
    SearchConfig cfg;
    cfg.budget = 0;
    const auto d = tafel_rows(50);
    CHECK_THROWS_AS((void)search(cfg, d, eval_expression(tafel_reference(cfg.grammar), d, {})), EmptySearch);
}

TEST_CASE("small constrained search is deterministic and logs batches") {
    SearchConfig cfg;
    cfg.budget = 1000;
    cfg.batch_size = 100;
    cfg.seed = 4;
    const auto d = tafel_rows(60);
    const Eigen::ArrayXd target = eval_expression(tafel_reference(cfg.grammar), d, {});
    const auto a = search(cfg, d, target);
    const auto b = search(cfg, d, target);
    CHECK(a.log.size() == 10);
    CHECK(a.log.back().expressions_sampled == 1000);
    CHECK(a.best.expr_prefix == b.best.expr_prefix);
    CHECK(a.pareto.size() == b.pareto.size());
    for (std::size_t k = 1; k < a.log.size(); ++k) CHECK(a.log[k].best_reward >= a.log[k - 1].best_reward - 1e-9);
    std::ostringstream out;
    write_search_log_csv(a.log, out);
    const std::string csv = out.str();
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 11);
}

TEST_CASE("policy gradient matches central differences") {
    const auto g = tafel_grammar();
    const UnitTable table(g);
    const SamplerConfig cfg;
    LstmPolicy policy(g.vocabulary_size(), 6, 9);
    Rng rng(9);
    std::vector<LstmPolicy::Episode> eps;
    while (eps.size() < 3) {
        try {
            eps.push_back(policy.sample(g, table, cfg, rng));
        } catch (const MaskExhausted&) {
        }
    }
    const std::vector<double> w{0.7, -0.2, 1.3};
    std::vector<const LstmPolicy::Episode*> ptrs;
    for (const auto& e : eps) ptrs.push_back(&e);
    const Eigen::VectorXd analytic = policy.loss_gradient(ptrs, w);
    Eigen::VectorXd p = policy.parameters();
    REQUIRE(analytic.size() == p.size());
    const auto loss = [&](const Eigen::VectorXd& q) {
        LstmPolicy copy = policy;
        copy.set_parameters(q);
        double s = 0.0;
        for (std::size_t k = 0; k < eps.size(); ++k) s -= w[k] * copy.log_probability(copy.replay(eps[k], g, table, cfg));
        return s / static_cast<double>(eps.size());
    };
    const double h = 1e-5;
    int failures = 0;
    for (Eigen::Index k = 0; k < p.size(); ++k) {
        const double keep = p[k];
        p[k] = keep + h;
        const double up = loss(p);
        p[k] = keep - h;
        const double down = loss(p);
        p[k] = keep;
        const double numeric = (up - down) / (2 * h);
        const double scale = std::max({std::abs(numeric), std::abs(analytic[k]), 1e-6});
        if (std::abs(numeric - analytic[k]) / scale >= 1e-4) ++failures;
    }
    CHECK(failures == 0);
}

TEST_CASE("policy gradient search runs") {
    SearchConfig cfg;
    cfg.strategy = Strategy::PolicyGradient;
    cfg.budget = 400;
    cfg.batch_size = 100;
    cfg.recurrent_hidden = 16;
    const auto d = tafel_rows(60);
    const auto r = search(cfg, d, eval_expression(tafel_reference(cfg.grammar), d, {}));
    CHECK(r.log.size() == 4);
    CHECK_FALSE(r.pareto.empty());
    CHECK_FALSE(grammar_violation(r.best.expression, cfg.grammar).has_value());
    CHECK(strategy_from_string(to_string(Strategy::PolicyGradient)) == Strategy::PolicyGradient);
}

}
