#pragma once

// Equivalence oracle: a canonical sum-of-monomials rewrite plus a numeric
// agreement check on random points.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "kiml/symreg/expression.hpp"

namespace kiml::symreg {

/// Product of atoms with integer exponents; atoms are variable names or
/// rendered opaque subterms such as "log10[i]" or "exp[...]".
using Monomial = std::map<std::string, int>;

/// Sum of coefficient * monomial. Constants are substituted numerically.
/// Rewrites: products are distributed, monomial quotients become negative
/// exponents, log10 of a positive monomial expands into log10 atoms of its
/// factors, sqrt of a monomial with even exponents is taken exactly.
class Polynomial {
public:
    Polynomial() = default;
    static Polynomial constant(double c);
    static Polynomial atom(const std::string& name);
    static Polynomial term(const Monomial& m, double c);

    [[nodiscard]] const std::map<Monomial, double>& terms() const { return terms_; }
    [[nodiscard]] bool is_monomial() const { return terms_.size() == 1; }
    [[nodiscard]] std::string str() const;

    friend Polynomial operator+(const Polynomial& a, const Polynomial& b);
    friend Polynomial operator-(const Polynomial& a, const Polynomial& b);
    friend Polynomial operator*(const Polynomial& a, const Polynomial& b);

private:
    void add_term(const Monomial& m, double c);
    std::map<Monomial, double> terms_;
};

[[nodiscard]] Polynomial canonicalize(const Expression& e, const Grammar& g, const std::vector<double>& constants);

/// Coefficients of the difference are all within rel_tol of the largest coefficient.
[[nodiscard]] bool symbolically_equivalent(const Expression& a, const std::vector<double>& ca, const Expression& b,
                                           const std::vector<double>& cb, const Grammar& g, double rel_tol = 1e-6);

/// Sampling box per grammar variable; log_uniform draws 10^U(log lo, log hi).
struct VariableRange {
    double lo = 0.0;
    double hi = 1.0;
    bool log_uniform = false;
};

/// |a - b| <= rel_tol * max(|a|, |b|) at every one of `points` random points.
[[nodiscard]] bool numerically_equivalent(const Expression& a, const std::vector<double>& ca, const Expression& b,
                                          const std::vector<double>& cb, const std::vector<VariableRange>& box,
                                          int points = 1000, double rel_tol = 1e-6, std::uint64_t seed = 0);

/// Ranges spanning the data of each variable, widened by 10 %.
[[nodiscard]] std::vector<VariableRange> data_box(const EvalData& data);

/// A * log10(i / i0) in the Tafel grammar.
[[nodiscard]] Expression tafel_reference(const Grammar& g);

}  // namespace kiml::symreg
