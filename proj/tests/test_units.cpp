#include <doctest.h>

#include <array>
#include <optional>
#include <vector>

#include "kiml/units.hpp"

using namespace kiml::units;

namespace {

// Independent oracle: exponents held as integer multiples of 1/4.
using Quarters = std::array<int, 7>;

Quarters quarters(const UnitVector& u) {
    Quarters q{};
    for (std::size_t k = 0; k < 7; ++k) q[k] = static_cast<int>(u[k].num() * 4 / u[k].den());
    return q;
}

std::optional<Quarters> oracle(OperatorKind op, const Quarters& a, const Quarters* b) {
    Quarters r{};
    const bool zero_a = a == Quarters{};
    switch (op) {
        case OperatorKind::Add:
        case OperatorKind::Sub:
            if (a != *b) return std::nullopt;
            return a;
        case OperatorKind::Mul:
            for (int k = 0; k < 7; ++k) r[k] = a[k] + (*b)[k];
            return r;
        case OperatorKind::Div:
            for (int k = 0; k < 7; ++k) r[k] = a[k] - (*b)[k];
            return r;
        case OperatorKind::Inv:
            for (int k = 0; k < 7; ++k) r[k] = -a[k];
            return r;
        case OperatorKind::Square:
            for (int k = 0; k < 7; ++k) r[k] = 2 * a[k];
            return r;
        case OperatorKind::Sqrt:
            for (int k = 0; k < 7; ++k) {
                if (a[k] % 2 != 0) return std::nullopt;  // would need eighths
                r[k] = a[k] / 2;
            }
            return r;
        default:
            if (!zero_a) return std::nullopt;
            return Quarters{};
    }
}

const std::vector<OperatorKind> kAll{OperatorKind::Add,  OperatorKind::Sub,   OperatorKind::Mul, OperatorKind::Div,
                                     OperatorKind::Inv,  OperatorKind::Square, OperatorKind::Sqrt, OperatorKind::Exp,
                                     OperatorKind::Log10, OperatorKind::Sin,  OperatorKind::Cos};

}  // namespace

TEST_SUITE("units") {

TEST_CASE("rational arithmetic stays normalized") {
    CHECK(Rational(2, 4) == Rational(1, 2));
    CHECK(Rational(3, -6) == Rational(-1, 2));
    CHECK((Rational(1, 2) + Rational(1, 4)) == Rational(3, 4));
    CHECK((Rational(1, 2) * Rational(2)) == Rational(1));
    CHECK(Rational::parse("-3/2") == Rational(-3, 2));
    CHECK(Rational(-3, 2).str() == "-3/2");
    CHECK(Rational(5).str() == "5/1");
    CHECK_THROWS(Rational(1, 0));
}

TEST_CASE("propagate_units examples") {
    const auto apm2 = UnitVector::ampere_per_square_meter();
    const std::vector<UnitVector> same{apm2, apm2};
    CHECK(propagate_units(OperatorKind::Div, same).is_dimensionless());

    const std::vector<UnitVector> one{UnitVector::dimensionless()};
    CHECK(propagate_units(OperatorKind::Log10, one).is_dimensionless());

    const std::vector<UnitVector> mixed{UnitVector::volt(), apm2};
    try {
        (void)propagate_units(OperatorKind::Add, mixed);
        FAIL("expected a mismatch");
    } catch (const UnitError& e) {
        CHECK(e.kind() == UnitErrorKind::Mismatch);
        REQUIRE(e.child_units().size() == 2);
        CHECK(e.child_units()[0] == UnitVector::volt());
        CHECK(e.child_units()[1] == apm2);
    }

    const std::vector<UnitVector> area{UnitVector{2}};
    CHECK(propagate_units(OperatorKind::Sqrt, area) == UnitVector::meter());
}

TEST_CASE("error kinds") {
    const std::vector<UnitVector> volt{UnitVector::volt()};
    try {
        (void)propagate_units(OperatorKind::Exp, volt);
        FAIL("expected an error");
    } catch (const UnitError& e) {
        CHECK(e.kind() == UnitErrorKind::NonDimensionlessArgument);
        CHECK(e.child_units().size() == 1);
    }
    const std::vector<UnitVector> quarter{pow_units(UnitVector::meter(), Rational(1, 4))};
    try {
        (void)propagate_units(OperatorKind::Sqrt, quarter);
        FAIL("expected an error");
    } catch (const UnitError& e) {
        CHECK(e.kind() == UnitErrorKind::FractionalOverflow);
    }
    const std::vector<UnitVector> two{UnitVector::meter(), UnitVector::meter()};
    CHECK_THROWS_AS((void)propagate_units(OperatorKind::Sqrt, two), UnitError);
    CHECK_FALSE(try_propagate_units(OperatorKind::Sqrt, two).has_value());
}

TEST_CASE("identity, commutativity and self-division") {
    const std::vector<UnitVector> samples{UnitVector::volt(), UnitVector::ampere_per_square_meter(),
                                          UnitVector{1, -2, 3, 0, 1, 0, -1},
                                          pow_units(UnitVector::volt(), Rational(1, 2))};
    for (const auto& u : samples) {
        const std::vector<UnitVector> with_one{u, UnitVector::dimensionless()};
        CHECK(propagate_units(OperatorKind::Mul, with_one) == u);
        const std::vector<UnitVector> self{u, u};
        CHECK(propagate_units(OperatorKind::Div, self).is_dimensionless());
        for (const auto& w : samples) {
            const std::vector<UnitVector> uw{u, w};
            const std::vector<UnitVector> wu{w, u};
            CHECK(propagate_units(OperatorKind::Mul, uw) == propagate_units(OperatorKind::Mul, wu));
        }
    }
}

TEST_CASE("brute force against an exponent oracle") {
    // Every vector with exponents in {-2..2} on L, M, T, I; the remaining
    // components are carried identically by the component-wise rules.
    std::vector<UnitVector> grid;
    for (int l = -2; l <= 2; ++l)
        for (int m = -2; m <= 2; ++m)
            for (int t = -2; t <= 2; ++t)
                for (int i = -2; i <= 2; ++i) grid.push_back(UnitVector{l, m, t, i});
    grid.push_back(pow_units(UnitVector{1, 0, -1}, Rational(1, 2)));
    grid.push_back(pow_units(UnitVector{0, 1}, Rational(1, 4)));

    long mismatches = 0;
    for (const auto& a : grid) {
        const Quarters qa = quarters(a);
        for (auto op : kAll) {
            if (arity(op) != 1) continue;
            const std::vector<UnitVector> c{a};
            const auto got = try_propagate_units(op, c);
            const auto want = oracle(op, qa, nullptr);
            if (got.has_value() != want.has_value() || (got && quarters(*got) != *want)) ++mismatches;
        }
        for (const auto& b : grid) {
            const Quarters qb = quarters(b);
            for (auto op : kAll) {
                if (arity(op) != 2) continue;
                const std::vector<UnitVector> c{a, b};
                const auto got = try_propagate_units(op, c);
                const auto want = oracle(op, qa, &qb);
                if (got.has_value() != want.has_value() || (got && quarters(*got) != *want)) ++mismatches;
            }
        }
    }
    CHECK(mismatches == 0);
}

TEST_CASE("json round trip uses num/den strings") {
    const auto u = pow_units(UnitVector::volt(), Rational(1, 2));
    const nlohmann::json j = u;
    REQUIRE(j.is_array());
    CHECK(j.size() == 7);
    CHECK(j[0] == "1/1");
    CHECK(j[2] == "-3/2");
    CHECK(j.get<UnitVector>() == u);
}

TEST_CASE("operator names") {
    for (auto op : kAll) CHECK(operator_from_name(name(op)) == op);
    CHECK_FALSE(operator_from_name("tan").has_value());
    CHECK(is_transcendental(OperatorKind::Log10));
    CHECK_FALSE(is_transcendental(OperatorKind::Sqrt));
    CHECK(is_trig(OperatorKind::Cos));
}

}
