#pragma once

// Prefix-encoded expression trees over a grammar's variables, constants and
// operators.

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kiml/physics.hpp"
#include "kiml/symreg/grammar.hpp"
#include "kiml/units.hpp"

namespace kiml::symreg {

struct Token {
    enum class Kind { Variable, Constant, Operator };
    Kind kind = Kind::Variable;
    /// Variable index into the grammar, or constant index in order of appearance.
    int index = 0;
    units::OperatorKind op = units::OperatorKind::Add;

    static Token variable(int i) { return {Kind::Variable, i, units::OperatorKind::Add}; }
    static Token constant(int i) { return {Kind::Constant, i, units::OperatorKind::Add}; }
    static Token operation(units::OperatorKind op) { return {Kind::Operator, 0, op}; }
    [[nodiscard]] int arity() const { return kind == Kind::Operator ? units::arity(op) : 0; }

    friend bool operator==(const Token&, const Token&) = default;
};

struct Expression {
    std::vector<Token> tokens;
    /// Unit adopted by each constant, indexed like the constants.
    std::vector<units::UnitVector> constant_units;

    [[nodiscard]] std::size_t size() const { return tokens.size(); }
    [[nodiscard]] int constant_count() const { return static_cast<int>(constant_units.size()); }
    /// Stable key for caching: token kinds, indices and operators.
    [[nodiscard]] std::string key() const;

    friend bool operator==(const Expression&, const Expression&) = default;
};

/// True when `tokens` encodes exactly one complete tree.
[[nodiscard]] bool is_complete_prefix(const std::vector<Token>& tokens);

/// Throws std::invalid_argument for an incomplete or malformed sequence or
/// unknown names. Constants are written c1, c2, ... (dimensionless when parsed).
[[nodiscard]] Expression parse_prefix(const std::string& text, const Grammar& g);

/// Space-separated prefix form, e.g. "mul A log10 div i i0".
[[nodiscard]] std::string to_prefix(const Expression& e, const Grammar& g);

/// Infix form with c1, c2, ... or, when given, the constant values.
[[nodiscard]] std::string to_infix(const Expression& e, const Grammar& g,
                                   const std::vector<double>* constants = nullptr);

/// Bottom-up unit of the whole tree with the recorded constant units.
/// Throws units::UnitError when any node is inconsistent.
[[nodiscard]] units::UnitVector expression_units(const Expression& e, const Grammar& g);

/// Every Grammar invariant: complete, length bounds, constant count, unit
/// consistency reaching the target unit, exponent cap, nesting and occurrence
/// priors. Returns the first violation, or nullopt.
[[nodiscard]] std::optional<std::string> grammar_violation(const Expression& e, const Grammar& g);

/// Column per grammar variable, in grammar order.
struct EvalData {
    std::vector<Eigen::ArrayXd> columns;
    [[nodiscard]] Eigen::Index rows() const { return columns.empty() ? 0 : columns.front().size(); }
    [[nodiscard]] EvalData subsample(std::size_t max_rows) const;
};

/// Columns A = b (mV per decade), i and i0 (A cm^-2) of a dataset.
[[nodiscard]] EvalData tafel_eval_data(const physics::Dataset& ds);

class DomainError : public std::runtime_error {
public:
    DomainError(std::size_t bad_rows, std::size_t rows);
    [[nodiscard]] std::size_t bad_rows() const { return bad_; }

private:
    std::size_t bad_;
};

/// Pointwise values; non-finite entries are left as they fall.
[[nodiscard]] Eigen::ArrayXd evaluate_raw(const Expression& e, const EvalData& data, const std::vector<double>& constants);

/// As evaluate_raw, but throws DomainError when any row is non-finite.
[[nodiscard]] Eigen::ArrayXd eval_expression(const Expression& e, const EvalData& data,
                                             const std::vector<double>& constants);

}  // namespace kiml::symreg
