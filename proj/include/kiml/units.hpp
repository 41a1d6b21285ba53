#pragma once

// Dimensional arithmetic over the seven SI base quantities.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace kiml::units {

/// Exact rational exponent. Always normalized: den > 0, gcd(|num|, den) == 1.
class Rational {
public:
    constexpr Rational() = default;
    Rational(std::int64_t num, std::int64_t den = 1);

    static constexpr int kMaxDenominator = 4;

    [[nodiscard]] std::int64_t num() const { return num_; }
    [[nodiscard]] std::int64_t den() const { return den_; }
    [[nodiscard]] bool is_zero() const { return num_ == 0; }
    [[nodiscard]] double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

    /// "num/den", e.g. "-3/2" or "1/1".
    [[nodiscard]] std::string str() const;
    static Rational parse(std::string_view text);

    friend Rational operator+(Rational a, Rational b);
    friend Rational operator-(Rational a, Rational b);
    friend Rational operator*(Rational a, Rational b);
    friend Rational operator-(Rational a) { return Rational(-a.num_, a.den_); }
    friend bool operator==(const Rational&, const Rational&) = default;
    friend auto operator<=>(const Rational& a, const Rational& b) {
        return a.num_ * b.den_ <=> b.num_ * a.den_;
    }

private:
    std::int64_t num_ = 0;
    std::int64_t den_ = 1;
};

enum class BaseQuantity : int { Length, Mass, Time, Current, Temperature, Amount, Luminosity };
inline constexpr std::size_t kBaseCount = 7;

/// Exponent vector ordered [L, M, T, I, Theta, N, J].
class UnitVector {
public:
    UnitVector() = default;
    explicit UnitVector(std::array<Rational, kBaseCount> exponents) : e_(exponents) {}
    UnitVector(std::initializer_list<std::int64_t> integer_exponents);

    static UnitVector dimensionless() { return {}; }
    static UnitVector meter() { return {1}; }
    static UnitVector kilogram() { return {0, 1}; }
    static UnitVector second() { return {0, 0, 1}; }
    static UnitVector ampere() { return {0, 0, 0, 1}; }
    /// kg m^2 s^-3 A^-1
    static UnitVector volt() { return {2, 1, -3, -1}; }
    /// A m^-2
    static UnitVector ampere_per_square_meter() { return {-2, 0, 0, 1}; }

    [[nodiscard]] const Rational& operator[](std::size_t k) const { return e_[k]; }
    [[nodiscard]] const Rational& operator[](BaseQuantity q) const { return e_[static_cast<std::size_t>(q)]; }
    [[nodiscard]] const std::array<Rational, kBaseCount>& exponents() const { return e_; }
    [[nodiscard]] bool is_dimensionless() const;
    /// Largest |exponent| over the seven components.
    [[nodiscard]] double max_abs_exponent() const;
    [[nodiscard]] std::int64_t max_denominator() const;

    friend UnitVector operator+(const UnitVector& a, const UnitVector& b);
    friend UnitVector operator-(const UnitVector& a, const UnitVector& b);
    friend UnitVector operator-(const UnitVector& a);
    friend UnitVector operator*(Rational s, const UnitVector& u);
    friend bool operator==(const UnitVector&, const UnitVector&) = default;
    friend auto operator<=>(const UnitVector&, const UnitVector&) = default;

    /// Human readable, e.g. "m^2 kg s^-3 A^-1"; "1" when dimensionless.
    [[nodiscard]] std::string str() const;

private:
    std::array<Rational, kBaseCount> e_{};
};

void to_json(nlohmann::json& j, const UnitVector& u);
void from_json(const nlohmann::json& j, UnitVector& u);

enum class OperatorKind : std::uint8_t { Add, Sub, Mul, Div, Inv, Square, Sqrt, Exp, Log10, Sin, Cos };
inline constexpr std::size_t kOperatorCount = 11;

[[nodiscard]] int arity(OperatorKind op);
[[nodiscard]] std::string_view name(OperatorKind op);
[[nodiscard]] std::optional<OperatorKind> operator_from_name(std::string_view name);
/// exp, log10, sin, cos: dimensionless in, dimensionless out.
[[nodiscard]] bool is_transcendental(OperatorKind op);
[[nodiscard]] bool is_trig(OperatorKind op);

enum class UnitErrorKind { Mismatch, NonDimensionlessArgument, FractionalOverflow, Arity };

class UnitError : public std::runtime_error {
public:
    UnitError(UnitErrorKind kind, std::string context, std::vector<UnitVector> child_units);

    [[nodiscard]] UnitErrorKind kind() const { return kind_; }
    [[nodiscard]] const std::string& context() const { return context_; }
    [[nodiscard]] const std::vector<UnitVector>& child_units() const { return children_; }

private:
    UnitErrorKind kind_;
    std::string context_;
    std::vector<UnitVector> children_;
};

/// Result unit of applying `op` to children with the given units.
/// Throws UnitError on mismatch, non-dimensionless transcendental argument,
/// a denominator above 4, or a wrong child count.
[[nodiscard]] UnitVector propagate_units(OperatorKind op, std::span<const UnitVector> child_units);

/// Non-throwing variant for hot paths; nullopt exactly when propagate_units throws.
[[nodiscard]] std::optional<UnitVector> try_propagate_units(OperatorKind op, std::span<const UnitVector> child_units);

/// u^p for a rational power p.
[[nodiscard]] UnitVector pow_units(const UnitVector& u, Rational p);

}  // namespace kiml::units

template <>
struct std::hash<kiml::units::UnitVector> {
    std::size_t operator()(const kiml::units::UnitVector& u) const noexcept {
        std::size_t h = 1469598103934665603ULL;
        for (const auto& r : u.exponents()) {
            h ^= static_cast<std::size_t>(r.num() * 8 + r.den());
            h *= 1099511628211ULL;
        }
        return h;
    }
};
