#include "kiml/symreg/canonical.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "kiml/rng.hpp"

namespace kiml::symreg {

using units::OperatorKind;

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

// (coef * m)^(num/den); throws when an exponent stops being an integer.
Polynomial monomial_power(const Monomial& m, double coef, int num, int den) {
    Monomial out;
    for (const auto& [atom, e] : m) {
        if ((e * num) % den != 0) throw std::domain_error("non-integer exponent");
        out[atom] = e * num / den;
    }
    return Polynomial::term(out, std::pow(coef, static_cast<double>(num) / den));
}

std::string bracket(const char* fn, const Polynomial& p) { return std::string(fn) + "[" + p.str() + "]"; }

Polynomial inverse(const Polynomial& p) {
    if (p.is_monomial()) {
        const auto& [m, c] = *p.terms().begin();
        return monomial_power(m, c, -1, 1);
    }
    return Polynomial::atom(bracket("inv", p));
}

Polynomial log10_of(const Polynomial& p) {
    if (p.is_monomial()) {
        const auto& [m, c] = *p.terms().begin();
        if (c > 0.0) {
            Polynomial out = Polynomial::constant(std::log10(c));
            for (const auto& [atom, e] : m)
                out = out + Polynomial::constant(static_cast<double>(e)) * Polynomial::atom("log10[" + atom + "]");
            return out;
        }
    }
    return Polynomial::atom(bracket("log10", p));
}

Polynomial sqrt_of(const Polynomial& p) {
    if (p.is_monomial()) {
        const auto& [m, c] = *p.terms().begin();
        if (c > 0.0) {
            try {
                return monomial_power(m, c, 1, 2);
            } catch (const std::domain_error&) {
            }
        }
    }
    return Polynomial::atom(bracket("sqrt", p));
}

}  // namespace

Polynomial Polynomial::constant(double c) {
    Polynomial p;
    p.add_term({}, c);
    return p;
}

Polynomial Polynomial::term(const Monomial& m, double c) {
    Polynomial p;
    p.add_term(m, c);
    return p;
}

Polynomial Polynomial::atom(const std::string& name) {
    Polynomial p;
    p.add_term({{name, 1}}, 1.0);
    return p;
}

void Polynomial::add_term(const Monomial& m, double c) {
    if (c == 0.0) return;
    auto it = terms_.find(m);
    if (it == terms_.end()) {
        terms_.emplace(m, c);
        return;
    }
    it->second += c;
    if (it->second == 0.0) terms_.erase(it);
}

std::string Polynomial::str() const {
    if (terms_.empty()) return "0";
    std::string out;
    for (const auto& [m, c] : terms_) {
        if (!out.empty()) out += " + ";
        out += fmt(c);
        for (const auto& [atom, e] : m) out += "*" + atom + (e == 1 ? "" : "^" + std::to_string(e));
    }
    return out;
}

Polynomial operator+(const Polynomial& a, const Polynomial& b) {
    Polynomial out = a;
    for (const auto& [m, c] : b.terms_) out.add_term(m, c);
    return out;
}

Polynomial operator-(const Polynomial& a, const Polynomial& b) {
    Polynomial out = a;
    for (const auto& [m, c] : b.terms_) out.add_term(m, -c);
    return out;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    Polynomial out;
    for (const auto& [ma, ca] : a.terms_) {
        for (const auto& [mb, cb] : b.terms_) {
            Monomial m = ma;
            for (const auto& [atom, e] : mb) {
                const int v = (m[atom] += e);
                if (v == 0) m.erase(atom);
            }
            out.add_term(m, ca * cb);
        }
    }
    return out;
}

Polynomial canonicalize(const Expression& e, const Grammar& g, const std::vector<double>& constants) {
    if (static_cast<int>(constants.size()) != e.constant_count())
        throw std::invalid_argument("canonicalize: constant count mismatch");
    std::vector<Polynomial> stack;
    for (std::size_t k = e.tokens.size(); k-- > 0;) {
        const Token& t = e.tokens[k];
        if (t.kind == Token::Kind::Variable) {
            stack.push_back(Polynomial::atom(g.variables.at(static_cast<std::size_t>(t.index)).name));
            continue;
        }
        if (t.kind == Token::Kind::Constant) {
            stack.push_back(Polynomial::constant(constants.at(static_cast<std::size_t>(t.index))));
            continue;
        }
        if (t.arity() == 2) {
            Polynomial a = std::move(stack.back());
            stack.pop_back();
            Polynomial& b = stack.back();
            switch (t.op) {
                case OperatorKind::Add: b = a + b; break;
                case OperatorKind::Sub: b = a - b; break;
                case OperatorKind::Mul: b = a * b; break;
                default: b = a * inverse(b); break;
            }
            continue;
        }
        Polynomial& a = stack.back();
        switch (t.op) {
            case OperatorKind::Inv: a = inverse(a); break;
            case OperatorKind::Square: a = a * a; break;
            case OperatorKind::Sqrt: a = sqrt_of(a); break;
            case OperatorKind::Log10: a = log10_of(a); break;
            case OperatorKind::Exp: a = Polynomial::atom(bracket("exp", a)); break;
            case OperatorKind::Sin: a = Polynomial::atom(bracket("sin", a)); break;
            case OperatorKind::Cos: a = Polynomial::atom(bracket("cos", a)); break;
            default: throw std::logic_error("canonicalize: bad unary operator");
        }
    }
    if (stack.size() != 1) throw std::invalid_argument("canonicalize: incomplete expression");
    return stack.back();
}

bool symbolically_equivalent(const Expression& a, const std::vector<double>& ca, const Expression& b,
                             const std::vector<double>& cb, const Grammar& g, double rel_tol) {
    const Polynomial pa = canonicalize(a, g, ca);
    const Polynomial pb = canonicalize(b, g, cb);
    double scale = 0.0;
    for (const auto& [m, c] : pa.terms()) scale = std::max(scale, std::abs(c));
    for (const auto& [m, c] : pb.terms()) scale = std::max(scale, std::abs(c));
    for (const auto& [m, c] : (pa - pb).terms())
        if (!(std::abs(c) <= rel_tol * scale)) return false;
    return true;
}

bool numerically_equivalent(const Expression& a, const std::vector<double>& ca, const Expression& b,
                            const std::vector<double>& cb, const std::vector<VariableRange>& box, int points,
                            double rel_tol, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "equivalence"));
    EvalData data;
    for (const auto& r : box) {
        Eigen::ArrayXd col(points);
        for (int k = 0; k < points; ++k) {
            col[k] = r.log_uniform ? std::pow(10.0, rng.uniform(std::log10(r.lo), std::log10(r.hi)))
                                   : rng.uniform(r.lo, r.hi);
        }
        data.columns.push_back(std::move(col));
    }
    const Eigen::ArrayXd va = evaluate_raw(a, data, ca);
    const Eigen::ArrayXd vb = evaluate_raw(b, data, cb);
    for (int k = 0; k < points; ++k) {
        const bool fa = std::isfinite(va[k]);
        const bool fb = std::isfinite(vb[k]);
        if (fa != fb) return false;
        if (!fa) continue;
        if (!(std::abs(va[k] - vb[k]) <= rel_tol * std::max(std::abs(va[k]), std::abs(vb[k])))) return false;
    }
    return true;
}

std::vector<VariableRange> data_box(const EvalData& data) {
    std::vector<VariableRange> box;
    for (const auto& c : data.columns) {
        const double lo = c.minCoeff();
        const double hi = c.maxCoeff();
        const double pad = 0.1 * (hi - lo);
        VariableRange r{lo - pad, hi + pad, false};
        if (lo > 0.0) {
            r.lo = lo / 1.1;
            r.hi = hi * 1.1;
            r.log_uniform = true;
        }
        if (r.lo == r.hi) r.hi = r.lo + 1.0;
        box.push_back(r);
    }
    return box;
}

Expression tafel_reference(const Grammar& g) { return parse_prefix("mul A log10 div i i0", g); }

}  // namespace kiml::symreg
