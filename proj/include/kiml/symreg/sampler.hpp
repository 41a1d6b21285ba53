#pragma once

// Token-by-token expression sampling under length, unit and structural masks.

#include <limits>
#include <memory>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "kiml/rng.hpp"
#include "kiml/symreg/expression.hpp"
#include "kiml/symreg/grammar.hpp"

namespace kiml::symreg {

inline constexpr int kUnreachable = std::numeric_limits<int>::max() / 4;

/// Shortest constant-free subtree producing each unit, over the grammar's
/// variables and operators, honoring the exponent cap on every node.
class UnitTable {
public:
    explicit UnitTable(const Grammar& g);

    /// kUnreachable when no tree within max_length produces `u`.
    [[nodiscard]] int min_length(const units::UnitVector& u) const;
    [[nodiscard]] bool within_cap(const units::UnitVector& u) const;
    [[nodiscard]] std::size_t reachable_count() const { return min_len_.size(); }

private:
    std::unordered_map<units::UnitVector, int> min_len_;
    int cap_;
};

class MaskExhausted : public std::runtime_error {
public:
    MaskExhausted() : std::runtime_error("no legal token for the next position") {}
};

/// A partially built prefix sequence. Slots carry a unit requirement: Fixed(u)
/// or Free. The root is Fixed(target). The first child of mul and div is Free;
/// the second is then fixed by the parent's requirement when that is fixed.
/// A constant adopts the unit of a fixed slot and is dimensionless in a free one.
class SamplerState {
public:
    SamplerState(const Grammar& g, const UnitTable& table);

    /// legal[t] for every vocabulary token t. A token is legal when the
    /// structural priors allow it, its unit fits the slot, every subtree it
    /// closes is consistent, and a lower bound on the tokens still needed fits
    /// into max_length.
    [[nodiscard]] std::vector<bool> legal_mask() const;
    [[nodiscard]] bool is_legal(int token) const;

    /// Appends a token; throws std::invalid_argument when it is not legal.
    void push(int token);

    [[nodiscard]] bool complete() const { return complete_; }
    [[nodiscard]] int length() const { return static_cast<int>(tokens_.size()); }
    /// Slots still to fill; length() + open_slots() bounds the final length from below.
    [[nodiscard]] int open_slots() const;
    [[nodiscard]] Expression expression() const;

    /// Vocabulary ids of the parent and left sibling of the next slot (-1 if none).
    [[nodiscard]] int parent_token() const;
    [[nodiscard]] int sibling_token() const;
    [[nodiscard]] bool is_terminal(int token) const;

private:
    struct Requirement {
        bool fixed = false;
        units::UnitVector unit;
    };
    struct Frame {
        int token = -1;
        units::OperatorKind op{};
        int arity = 0;
        Requirement req;
        std::vector<units::UnitVector> child_units;
        std::vector<int> child_tokens;
    };

    [[nodiscard]] std::optional<Requirement> next_requirement(const std::vector<Frame>& frames) const;
    [[nodiscard]] int lower_bound(const Requirement& r, int constants_left) const;
    [[nodiscard]] int pending_lower_bound(const std::vector<Frame>& frames, int constants_left) const;
    // Closes subtrees after a terminal of unit `u`; false on any inconsistency.
    [[nodiscard]] bool close_cascade(std::vector<Frame>& frames, units::UnitVector u, int token) const;
    [[nodiscard]] bool check_token(int token, std::vector<Frame>* frames_out, units::UnitVector* const_unit) const;

    const Grammar* g_;
    const UnitTable* table_;
    std::vector<int> tokens_;
    std::vector<Frame> frames_;
    std::vector<units::UnitVector> constant_units_;
    int log_count_ = 0;
    int exp_count_ = 0;
    int trig_count_ = 0;
    bool complete_ = false;
};

/// Relative token weights for constrained random sampling, plus a soft
/// length prior on m = tokens placed + open slots (the shortest possible
/// final length): while m < length_loc terminal weights, otherwise operator
/// weights, are scaled by exp(-(m - loc)^2 / (2 scale^2)).
struct SamplerConfig {
    double variable_weight = 3.0;
    double constant_weight = 1.0;
    double binary_weight = 1.0;
    double unary_weight = 0.2;
    double transcendental_weight = 1.0;
    double length_loc = 5.0;
    double length_scale = 2.0;
    bool soft_length_prior = true;
};
void to_json(nlohmann::json& j, const SamplerConfig& c);
void from_json(const nlohmann::json& j, SamplerConfig& c);

/// Weight of each vocabulary token before masking and the length prior.
[[nodiscard]] std::vector<double> base_token_weights(const Grammar& g, const SamplerConfig& c);

/// Multiplier from the soft length prior.
[[nodiscard]] double length_prior_factor(const SamplerConfig& c, bool terminal, int min_final_length);

/// Draws one expression. Throws MaskExhausted on a dead end.
[[nodiscard]] Expression sample_expression(const Grammar& g, const UnitTable& table, const SamplerConfig& cfg,
                                           Rng& rng);

/// Every complete sequence reachable through the sampler's masks (depth-first).
/// Intended for small max_length.
[[nodiscard]] std::vector<Expression> enumerate_legal(const Grammar& g, const UnitTable& table);

/// Brute force: every complete prefix sequence over the vocabulary up to
/// max_length whose constants take their slot units and which passes
/// grammar_violation.
[[nodiscard]] std::vector<Expression> enumerate_valid(const Grammar& g);

}  // namespace kiml::symreg
