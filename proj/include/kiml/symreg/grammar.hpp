#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kiml/units.hpp"

namespace kiml::symreg {

struct Variable {
    std::string name;
    units::UnitVector unit;
};

struct Priors {
    int min_length = 1;
    int max_length = 35;
    int max_constants = 2;
    int max_log10 = 2;
    int max_exp = 2;
    /// sin and cos together.
    int max_trig = 2;
    bool no_nested_trig = true;
    bool no_double_inv = true;
    /// Bound on |exponent| for the unit of every node. Keeps the set of
    /// reachable units finite.
    int max_unit_exponent = 12;
};

void to_json(nlohmann::json& j, const Priors& p);
void from_json(const nlohmann::json& j, Priors& p);

/// Token vocabulary: variables first, then one constant token (when
/// max_constants > 0), then the allowed operators in the listed order.
struct Grammar {
    std::vector<Variable> variables;
    units::UnitVector target_unit = units::UnitVector::volt();
    std::vector<units::OperatorKind> operators;
    Priors priors;

    void validate() const;

    [[nodiscard]] int vocabulary_size() const;
    [[nodiscard]] bool has_constants() const { return priors.max_constants > 0; }
    [[nodiscard]] int constant_token() const;  ///< -1 without constants
    [[nodiscard]] int operator_token(units::OperatorKind op) const;  ///< -1 if not allowed
    [[nodiscard]] int variable_index(const std::string& name) const;  ///< -1 if unknown
};

void to_json(nlohmann::json& j, const Grammar& g);
void from_json(const nlohmann::json& j, Grammar& g);

/// Variables A (Volt), i and i0 (A m^-2); target Volt; all eleven operators.
[[nodiscard]] Grammar tafel_grammar();

[[nodiscard]] std::vector<units::OperatorKind> all_operators();

}  // namespace kiml::symreg
