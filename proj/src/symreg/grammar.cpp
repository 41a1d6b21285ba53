#include "kiml/symreg/grammar.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "kiml/physics.hpp"

namespace kiml::symreg {

using units::OperatorKind;

std::vector<OperatorKind> all_operators() {
    std::vector<OperatorKind> out;
    for (std::size_t k = 0; k < units::kOperatorCount; ++k) out.push_back(static_cast<OperatorKind>(k));
    return out;
}

void Grammar::validate() const {
    if (variables.empty()) throw physics::ConfigError("grammar: no variables");
    std::set<std::string> names;
    for (const auto& v : variables) {
        if (v.name.empty()) throw physics::ConfigError("grammar: empty variable name");
        if (v.name[0] == 'c' && v.name.size() > 1 &&
            std::all_of(v.name.begin() + 1, v.name.end(), [](char c) { return c >= '0' && c <= '9'; }))
            throw physics::ConfigError("grammar: variable name '" + v.name + "' clashes with constant names");
        if (units::operator_from_name(v.name)) throw physics::ConfigError("grammar: variable named like an operator");
        if (!names.insert(v.name).second) throw physics::ConfigError("grammar: duplicate variable '" + v.name + "'");
    }
    std::set<OperatorKind> ops(operators.begin(), operators.end());
    if (ops.size() != operators.size()) throw physics::ConfigError("grammar: duplicate operator");
    const auto& p = priors;
    if (p.max_length < 1) throw physics::ConfigError("grammar: max_length must be >= 1");
    if (p.min_length < 1 || p.min_length > p.max_length)
        throw physics::ConfigError("grammar: min_length must lie in [1, max_length]");
    if (p.max_constants < 0 || p.max_log10 < 0 || p.max_exp < 0 || p.max_trig < 0)
        throw physics::ConfigError("grammar: negative cap");
    if (p.max_unit_exponent < 1) throw physics::ConfigError("grammar: max_unit_exponent must be >= 1");
}

int Grammar::vocabulary_size() const {
    return static_cast<int>(variables.size()) + (has_constants() ? 1 : 0) + static_cast<int>(operators.size());
}

int Grammar::constant_token() const { return has_constants() ? static_cast<int>(variables.size()) : -1; }

int Grammar::operator_token(OperatorKind op) const {
    const auto it = std::find(operators.begin(), operators.end(), op);
    if (it == operators.end()) return -1;
    return static_cast<int>(variables.size()) + (has_constants() ? 1 : 0) + static_cast<int>(it - operators.begin());
}

int Grammar::variable_index(const std::string& name) const {
    for (std::size_t k = 0; k < variables.size(); ++k)
        if (variables[k].name == name) return static_cast<int>(k);
    return -1;
}

void to_json(nlohmann::json& j, const Priors& p) {
    j = {{"min_length", p.min_length},       {"max_length", p.max_length},
         {"max_constants", p.max_constants}, {"max_log10", p.max_log10},
         {"max_exp", p.max_exp},             {"max_trig", p.max_trig},
         {"no_nested_trig", p.no_nested_trig}, {"no_double_inv", p.no_double_inv},
         {"max_unit_exponent", p.max_unit_exponent}};
}

void from_json(const nlohmann::json& j, Priors& p) {
    p = Priors{};
    p.min_length = j.value("min_length", p.min_length);
    p.max_length = j.value("max_length", p.max_length);
    p.max_constants = j.value("max_constants", p.max_constants);
    p.max_log10 = j.value("max_log10", p.max_log10);
    p.max_exp = j.value("max_exp", p.max_exp);
    p.max_trig = j.value("max_trig", p.max_trig);
    p.no_nested_trig = j.value("no_nested_trig", p.no_nested_trig);
    p.no_double_inv = j.value("no_double_inv", p.no_double_inv);
    p.max_unit_exponent = j.value("max_unit_exponent", p.max_unit_exponent);
}

void to_json(nlohmann::json& j, const Grammar& g) {
    nlohmann::json vars = nlohmann::json::array();
    for (const auto& v : g.variables) vars.push_back({{"name", v.name}, {"unit", v.unit}});
    std::vector<std::string> ops;
    for (auto op : g.operators) ops.emplace_back(units::name(op));
    j = {{"variables", vars}, {"target_unit", g.target_unit}, {"operators", ops}, {"priors", g.priors}};
}

void from_json(const nlohmann::json& j, Grammar& g) {
    g = Grammar{};
    for (const auto& v : j.at("variables"))
        g.variables.push_back({v.at("name").get<std::string>(), v.at("unit").get<units::UnitVector>()});
    if (j.contains("target_unit")) g.target_unit = j.at("target_unit").get<units::UnitVector>();
    for (const auto& name : j.at("operators")) {
        const auto op = units::operator_from_name(name.get<std::string>());
        if (!op) throw physics::ConfigError("grammar: unknown operator '" + name.get<std::string>() + "'");
        g.operators.push_back(*op);
    }
    if (j.contains("priors")) g.priors = j.at("priors").get<Priors>();
    g.validate();
}

Grammar tafel_grammar() {
    Grammar g;
    g.variables = {{"A", units::UnitVector::volt()},
                   {"i", units::UnitVector::ampere_per_square_meter()},
                   {"i0", units::UnitVector::ampere_per_square_meter()}};
    g.target_unit = units::UnitVector::volt();
    g.operators = all_operators();
    return g;
}

}  // namespace kiml::symreg
