#include "kiml/units.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <sstream>

namespace kiml::units {

Rational::Rational(std::int64_t num, std::int64_t den) {
    if (den == 0) throw std::invalid_argument("Rational: zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
    num_ = g == 0 ? 0 : num / g;
    den_ = g == 0 ? 1 : den / g;
}

std::string Rational::str() const { return std::to_string(num_) + "/" + std::to_string(den_); }

Rational Rational::parse(std::string_view text) {
    const auto slash = text.find('/');
    const std::string num_text(text.substr(0, slash));
    const std::string den_text = slash == std::string_view::npos ? "1" : std::string(text.substr(slash + 1));
    std::size_t used_num = 0;
    std::size_t used_den = 0;
    const long long num = std::stoll(num_text, &used_num);
    const long long den = std::stoll(den_text, &used_den);
    if (used_num != num_text.size() || used_den != den_text.size()) {
        throw std::invalid_argument("Rational: cannot parse '" + std::string(text) + "'");
    }
    return {num, den};
}

Rational operator+(Rational a, Rational b) { return {a.num_ * b.den_ + b.num_ * a.den_, a.den_ * b.den_}; }
Rational operator-(Rational a, Rational b) { return {a.num_ * b.den_ - b.num_ * a.den_, a.den_ * b.den_}; }
Rational operator*(Rational a, Rational b) { return {a.num_ * b.num_, a.den_ * b.den_}; }

UnitVector::UnitVector(std::initializer_list<std::int64_t> integer_exponents) {
    if (integer_exponents.size() > kBaseCount) throw std::invalid_argument("UnitVector: more than 7 exponents");
    std::size_t k = 0;
    for (auto v : integer_exponents) e_[k++] = Rational(v);
}

bool UnitVector::is_dimensionless() const {
    return std::all_of(e_.begin(), e_.end(), [](const Rational& r) { return r.is_zero(); });
}

double UnitVector::max_abs_exponent() const {
    double m = 0.0;
    for (const auto& r : e_) m = std::max(m, std::abs(r.to_double()));
    return m;
}

std::int64_t UnitVector::max_denominator() const {
    std::int64_t d = 1;
    for (const auto& r : e_) d = std::max(d, r.den());
    return d;
}

UnitVector operator+(const UnitVector& a, const UnitVector& b) {
    UnitVector r;
    for (std::size_t k = 0; k < kBaseCount; ++k) r.e_[k] = a.e_[k] + b.e_[k];
    return r;
}

UnitVector operator-(const UnitVector& a, const UnitVector& b) {
    UnitVector r;
    for (std::size_t k = 0; k < kBaseCount; ++k) r.e_[k] = a.e_[k] - b.e_[k];
    return r;
}

UnitVector operator-(const UnitVector& a) {
    UnitVector r;
    for (std::size_t k = 0; k < kBaseCount; ++k) r.e_[k] = -a.e_[k];
    return r;
}

UnitVector operator*(Rational s, const UnitVector& u) {
    UnitVector r;
    for (std::size_t k = 0; k < kBaseCount; ++k) r.e_[k] = s * u.e_[k];
    return r;
}

std::string UnitVector::str() const {
    static constexpr std::array<const char*, kBaseCount> symbols{"m", "kg", "s", "A", "K", "mol", "cd"};
    std::ostringstream out;
    bool first = true;
    for (std::size_t k = 0; k < kBaseCount; ++k) {
        if (e_[k].is_zero()) continue;
        if (!first) out << ' ';
        first = false;
        out << symbols[k];
        if (!(e_[k] == Rational(1))) {
            out << '^';
            if (e_[k].den() == 1) {
                out << e_[k].num();
            } else {
                out << '(' << e_[k].num() << '/' << e_[k].den() << ')';
            }
        }
    }
    return first ? "1" : out.str();
}

void to_json(nlohmann::json& j, const UnitVector& u) {
    j = nlohmann::json::array();
    for (const auto& r : u.exponents()) j.push_back(r.str());
}

void from_json(const nlohmann::json& j, UnitVector& u) {
    if (!j.is_array() || j.size() != kBaseCount) throw std::invalid_argument("UnitVector JSON must be a 7-element array");
    std::array<Rational, kBaseCount> e{};
    for (std::size_t k = 0; k < kBaseCount; ++k) e[k] = Rational::parse(j[k].get<std::string>());
    u = UnitVector(e);
}

namespace {

constexpr std::array<std::string_view, kOperatorCount> kNames{
    "add", "sub", "mul", "div", "inv", "square", "sqrt", "exp", "log10", "sin", "cos"};

}  // namespace

int arity(OperatorKind op) {
    switch (op) {
        case OperatorKind::Add:
        case OperatorKind::Sub:
        case OperatorKind::Mul:
        case OperatorKind::Div: return 2;
        default: return 1;
    }
}

std::string_view name(OperatorKind op) { return kNames[static_cast<std::size_t>(op)]; }

std::optional<OperatorKind> operator_from_name(std::string_view text) {
    for (std::size_t k = 0; k < kNames.size(); ++k) {
        if (kNames[k] == text) return static_cast<OperatorKind>(k);
    }
    return std::nullopt;
}

bool is_transcendental(OperatorKind op) {
    return op == OperatorKind::Exp || op == OperatorKind::Log10 || op == OperatorKind::Sin || op == OperatorKind::Cos;
}

bool is_trig(OperatorKind op) { return op == OperatorKind::Sin || op == OperatorKind::Cos; }

UnitError::UnitError(UnitErrorKind kind, std::string context, std::vector<UnitVector> child_units)
    : std::runtime_error([&] {
          std::string msg = context + " [";
          for (std::size_t k = 0; k < child_units.size(); ++k) {
              if (k) msg += ", ";
              msg += child_units[k].str();
          }
          return msg + "]";
      }()),
      kind_(kind),
      context_(std::move(context)),
      children_(std::move(child_units)) {}

namespace {

enum class Failure { None, Arity, Mismatch, NonDimensionless, Fractional };

Failure propagate_impl(OperatorKind op, std::span<const UnitVector> c, UnitVector& out) {
    if (static_cast<int>(c.size()) != arity(op)) return Failure::Arity;
    switch (op) {
        case OperatorKind::Add:
        case OperatorKind::Sub:
            if (!(c[0] == c[1])) return Failure::Mismatch;
            out = c[0];
            return Failure::None;
        case OperatorKind::Mul: out = c[0] + c[1]; break;
        case OperatorKind::Div: out = c[0] - c[1]; break;
        case OperatorKind::Inv: out = -c[0]; break;
        case OperatorKind::Square: out = Rational(2) * c[0]; break;
        case OperatorKind::Sqrt: out = Rational(1, 2) * c[0]; break;
        case OperatorKind::Exp:
        case OperatorKind::Log10:
        case OperatorKind::Sin:
        case OperatorKind::Cos:
            if (!c[0].is_dimensionless()) return Failure::NonDimensionless;
            out = UnitVector::dimensionless();
            return Failure::None;
    }
    if (out.max_denominator() > Rational::kMaxDenominator) return Failure::Fractional;
    return Failure::None;
}

}  // namespace

UnitVector propagate_units(OperatorKind op, std::span<const UnitVector> child_units) {
    UnitVector out;
    const std::vector<UnitVector> children(child_units.begin(), child_units.end());
    const std::string ctx(name(op));
    switch (propagate_impl(op, child_units, out)) {
        case Failure::None: return out;
        case Failure::Arity:
            throw UnitError(UnitErrorKind::Arity, ctx + ": expected " + std::to_string(arity(op)) + " children", children);
        case Failure::Mismatch: throw UnitError(UnitErrorKind::Mismatch, ctx + ": operand units differ", children);
        case Failure::NonDimensionless:
            throw UnitError(UnitErrorKind::NonDimensionlessArgument, ctx + ": argument must be dimensionless", children);
        case Failure::Fractional:
            throw UnitError(UnitErrorKind::FractionalOverflow, ctx + ": exponent denominator exceeds 4", children);
    }
    return out;
}

std::optional<UnitVector> try_propagate_units(OperatorKind op, std::span<const UnitVector> child_units) {
    UnitVector out;
    if (propagate_impl(op, child_units, out) != Failure::None) return std::nullopt;
    return out;
}

UnitVector pow_units(const UnitVector& u, Rational p) {
    UnitVector out = p * u;
    if (out.max_denominator() > Rational::kMaxDenominator) {
        throw UnitError(UnitErrorKind::FractionalOverflow, "pow " + p.str() + ": exponent denominator exceeds 4", {u});
    }
    return out;
}

}  // namespace kiml::units
