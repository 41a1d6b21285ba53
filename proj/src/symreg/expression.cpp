#include "kiml/symreg/expression.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace kiml::symreg {

using units::OperatorKind;
using units::UnitVector;

namespace {

struct Tree {
    std::vector<std::vector<int>> children;
    std::vector<int> parent;
};

// Throws std::invalid_argument when the sequence is not one complete tree.
Tree build_tree(const std::vector<Token>& tokens) {
    Tree t;
    t.children.resize(tokens.size());
    t.parent.assign(tokens.size(), -1);
    std::vector<int> open;  // nodes still waiting for children
    for (std::size_t k = 0; k < tokens.size(); ++k) {
        if (k > 0) {
            if (open.empty()) throw std::invalid_argument("expression: tokens after a complete tree");
            const int p = open.back();
            t.parent[k] = p;
            t.children[static_cast<std::size_t>(p)].push_back(static_cast<int>(k));
            if (static_cast<int>(t.children[static_cast<std::size_t>(p)].size()) ==
                tokens[static_cast<std::size_t>(p)].arity())
                open.pop_back();
        }
        if (tokens[k].arity() > 0) open.push_back(static_cast<int>(k));
    }
    if (tokens.empty() || !open.empty()) throw std::invalid_argument("expression: incomplete prefix sequence");
    return t;
}

const char* infix_symbol(OperatorKind op) {
    switch (op) {
        case OperatorKind::Add: return " + ";
        case OperatorKind::Sub: return " - ";
        case OperatorKind::Mul: return " * ";
        case OperatorKind::Div: return " / ";
        default: return "";
    }
}

int precedence(const Token& t) {
    if (t.kind != Token::Kind::Operator) return 3;
    switch (t.op) {
        case OperatorKind::Add:
        case OperatorKind::Sub: return 1;
        case OperatorKind::Mul:
        case OperatorKind::Div: return 2;
        default: return 3;
    }
}

std::string format_constant(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace

std::string Expression::key() const {
    std::string out;
    out.reserve(tokens.size() * 2);
    for (const auto& t : tokens) {
        switch (t.kind) {
            case Token::Kind::Variable: out += 'v'; out += std::to_string(t.index); break;
            case Token::Kind::Constant: out += 'c'; break;
            case Token::Kind::Operator: out += 'o'; out += std::to_string(static_cast<int>(t.op)); break;
        }
        out += '.';
    }
    return out;
}

bool is_complete_prefix(const std::vector<Token>& tokens) {
    if (tokens.empty()) return false;
    long open = 1;
    for (const auto& t : tokens) {
        if (open == 0) return false;
        open += t.arity() - 1;
    }
    return open == 0;
}

Expression parse_prefix(const std::string& text, const Grammar& g) {
    Expression e;
    std::istringstream in(text);
    std::string word;
    std::vector<int> seen_constants;
    while (in >> word) {
        if (const int v = g.variable_index(word); v >= 0) {
            e.tokens.push_back(Token::variable(v));
        } else if (auto op = units::operator_from_name(word)) {
            e.tokens.push_back(Token::operation(*op));
        } else if (word.size() > 1 && word[0] == 'c') {
            const int n = std::stoi(word.substr(1));
            if (n < 1) throw std::invalid_argument("parse_prefix: constants are numbered from c1");
            e.tokens.push_back(Token::constant(n - 1));
            seen_constants.push_back(n - 1);
        } else {
            throw std::invalid_argument("parse_prefix: unknown token '" + word + "'");
        }
    }
    for (std::size_t k = 0; k < seen_constants.size(); ++k)
        if (seen_constants[k] != static_cast<int>(k))
            throw std::invalid_argument("parse_prefix: constants must appear as c1, c2, ... in order");
    if (!is_complete_prefix(e.tokens)) throw std::invalid_argument("parse_prefix: incomplete expression '" + text + "'");
    e.constant_units.assign(seen_constants.size(), UnitVector::dimensionless());
    return e;
}

std::string to_prefix(const Expression& e, const Grammar& g) {
    std::string out;
    for (const auto& t : e.tokens) {
        if (!out.empty()) out += ' ';
        switch (t.kind) {
            case Token::Kind::Variable: out += g.variables.at(static_cast<std::size_t>(t.index)).name; break;
            case Token::Kind::Constant: out += 'c' + std::to_string(t.index + 1); break;
            case Token::Kind::Operator: out += units::name(t.op); break;
        }
    }
    return out;
}

std::string to_infix(const Expression& e, const Grammar& g, const std::vector<double>* constants) {
    const Tree tree = build_tree(e.tokens);
    auto render = [&](auto&& self, int node) -> std::string {
        const Token& t = e.tokens[static_cast<std::size_t>(node)];
        const auto& kids = tree.children[static_cast<std::size_t>(node)];
        switch (t.kind) {
            case Token::Kind::Variable: return g.variables.at(static_cast<std::size_t>(t.index)).name;
            case Token::Kind::Constant:
                if (constants && static_cast<std::size_t>(t.index) < constants->size())
                    return format_constant((*constants)[static_cast<std::size_t>(t.index)]);
                return 'c' + std::to_string(t.index + 1);
            case Token::Kind::Operator: break;
        }
        if (t.arity() == 1) return std::string(units::name(t.op)) + "(" + self(self, kids[0]) + ")";
        const Token& lt = e.tokens[static_cast<std::size_t>(kids[0])];
        const Token& rt = e.tokens[static_cast<std::size_t>(kids[1])];
        std::string lhs = self(self, kids[0]);
        std::string rhs = self(self, kids[1]);
        const int p = precedence(t);
        if (precedence(lt) < p) lhs = "(" + lhs + ")";
        const bool right_tight = t.op == OperatorKind::Sub || t.op == OperatorKind::Div;
        if (precedence(rt) < p || (right_tight && precedence(rt) == p)) rhs = "(" + rhs + ")";
        return lhs + infix_symbol(t.op) + rhs;
    };
    return render(render, 0);
}

UnitVector expression_units(const Expression& e, const Grammar& g) {
    const Tree tree = build_tree(e.tokens);
    std::vector<UnitVector> unit(e.tokens.size());
    for (std::size_t k = e.tokens.size(); k-- > 0;) {
        const Token& t = e.tokens[k];
        switch (t.kind) {
            case Token::Kind::Variable: unit[k] = g.variables.at(static_cast<std::size_t>(t.index)).unit; break;
            case Token::Kind::Constant: unit[k] = e.constant_units.at(static_cast<std::size_t>(t.index)); break;
            case Token::Kind::Operator: {
                std::vector<UnitVector> kids;
                for (int c : tree.children[k]) kids.push_back(unit[static_cast<std::size_t>(c)]);
                unit[k] = units::propagate_units(t.op, kids);
                break;
            }
        }
    }
    return unit[0];
}

std::optional<std::string> grammar_violation(const Expression& e, const Grammar& g) {
    if (!is_complete_prefix(e.tokens)) return "incomplete prefix sequence";
    const Tree tree = build_tree(e.tokens);
    const auto& p = g.priors;
    const auto n = static_cast<int>(e.tokens.size());
    if (n > p.max_length) return "longer than max_length";
    if (n < p.min_length) return "shorter than min_length";
    int constants = 0;
    int logs = 0;
    int exps = 0;
    int trigs = 0;
    for (std::size_t k = 0; k < e.tokens.size(); ++k) {
        const Token& t = e.tokens[k];
        if (t.kind == Token::Kind::Variable &&
            (t.index < 0 || t.index >= static_cast<int>(g.variables.size())))
            return "unknown variable";
        if (t.kind == Token::Kind::Constant) {
            if (t.index != constants) return "constants out of order";
            ++constants;
        }
        if (t.kind != Token::Kind::Operator) continue;
        if (g.operator_token(t.op) < 0) return "operator not in grammar";
        logs += t.op == OperatorKind::Log10;
        exps += t.op == OperatorKind::Exp;
        trigs += units::is_trig(t.op);
        const int parent = tree.parent[k];
        if (p.no_double_inv && t.op == OperatorKind::Inv && parent >= 0 &&
            e.tokens[static_cast<std::size_t>(parent)].kind == Token::Kind::Operator &&
            e.tokens[static_cast<std::size_t>(parent)].op == OperatorKind::Inv)
            return "inv directly under inv";
        if (p.no_nested_trig && units::is_trig(t.op)) {
            for (int a = parent; a >= 0; a = tree.parent[static_cast<std::size_t>(a)]) {
                const Token& at = e.tokens[static_cast<std::size_t>(a)];
                if (at.kind == Token::Kind::Operator && units::is_trig(at.op)) return "trig nested under trig";
            }
        }
    }
    if (constants > p.max_constants) return "too many constants";
    if (constants != e.constant_count()) return "constant unit table size mismatch";
    if (logs > p.max_log10) return "log10 occurrence cap";
    if (exps > p.max_exp) return "exp occurrence cap";
    if (trigs > p.max_trig) return "trig occurrence cap";

    std::vector<UnitVector> unit(e.tokens.size());
    for (std::size_t k = e.tokens.size(); k-- > 0;) {
        const Token& t = e.tokens[k];
        if (t.kind == Token::Kind::Variable) {
            unit[k] = g.variables[static_cast<std::size_t>(t.index)].unit;
        } else if (t.kind == Token::Kind::Constant) {
            unit[k] = e.constant_units[static_cast<std::size_t>(t.index)];
        } else {
            std::vector<UnitVector> kids;
            for (int c : tree.children[k]) kids.push_back(unit[static_cast<std::size_t>(c)]);
            auto u = units::try_propagate_units(t.op, kids);
            if (!u) return "unit inconsistency at token " + std::to_string(k);
            unit[k] = *u;
        }
        if (unit[k].max_abs_exponent() > p.max_unit_exponent) return "unit exponent cap exceeded";
    }
    if (unit[0] != g.target_unit) return "root unit differs from the target unit";
    return std::nullopt;
}

EvalData EvalData::subsample(std::size_t max_rows) const {
    const auto n = static_cast<std::size_t>(rows());
    if (n <= max_rows || max_rows == 0) return *this;
    EvalData out;
    for (const auto& c : columns) {
        Eigen::ArrayXd s(static_cast<Eigen::Index>(max_rows));
        for (std::size_t k = 0; k < max_rows; ++k) s[static_cast<Eigen::Index>(k)] = c[static_cast<Eigen::Index>(k * n / max_rows)];
        out.columns.push_back(std::move(s));
    }
    return out;
}

EvalData tafel_eval_data(const physics::Dataset& ds) {
    auto col = [](const std::vector<double>& v) {
        return Eigen::ArrayXd(Eigen::Map<const Eigen::ArrayXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    };
    return EvalData{{col(ds.b), col(ds.i), col(ds.i0)}};
}

DomainError::DomainError(std::size_t bad_rows, std::size_t rows)
    : std::runtime_error("expression is non-finite on " + std::to_string(bad_rows) + " of " + std::to_string(rows) +
                         " rows"),
      bad_(bad_rows) {}

Eigen::ArrayXd evaluate_raw(const Expression& e, const EvalData& data, const std::vector<double>& constants) {
    const Eigen::Index n = data.rows();
    std::vector<Eigen::ArrayXd> stack;
    stack.reserve(e.tokens.size());
    for (std::size_t k = e.tokens.size(); k-- > 0;) {
        const Token& t = e.tokens[k];
        if (t.kind == Token::Kind::Variable) {
            stack.push_back(data.columns.at(static_cast<std::size_t>(t.index)));
            continue;
        }
        if (t.kind == Token::Kind::Constant) {
            stack.push_back(Eigen::ArrayXd::Constant(n, constants.at(static_cast<std::size_t>(t.index))));
            continue;
        }
        if (t.arity() == 2) {
            Eigen::ArrayXd a = std::move(stack.back());
            stack.pop_back();
            Eigen::ArrayXd& b = stack.back();
            switch (t.op) {
                case OperatorKind::Add: b = a + b; break;
                case OperatorKind::Sub: b = a - b; break;
                case OperatorKind::Mul: b = a * b; break;
                default: b = a / b; break;
            }
            continue;
        }
        Eigen::ArrayXd& a = stack.back();
        switch (t.op) {
            case OperatorKind::Inv: a = a.inverse(); break;
            case OperatorKind::Square: a = a.square(); break;
            case OperatorKind::Sqrt: a = a.sqrt(); break;
            case OperatorKind::Exp: a = a.exp(); break;
            case OperatorKind::Log10: a = a.log10(); break;
            case OperatorKind::Sin: a = a.sin(); break;
            case OperatorKind::Cos: a = a.cos(); break;
            default: throw std::logic_error("evaluate: bad unary operator");
        }
    }
    if (stack.size() != 1) throw std::invalid_argument("evaluate: incomplete expression");
    return std::move(stack.back());
}

Eigen::ArrayXd eval_expression(const Expression& e, const EvalData& data, const std::vector<double>& constants) {
    if (static_cast<int>(constants.size()) != e.constant_count())
        throw std::invalid_argument("eval_expression: constant count mismatch");
    Eigen::ArrayXd out = evaluate_raw(e, data, constants);
    const auto bad = static_cast<std::size_t>((!out.isFinite()).count());
    if (bad > 0) throw DomainError(bad, static_cast<std::size_t>(out.size()));
    return out;
}

}  // namespace kiml::symreg
