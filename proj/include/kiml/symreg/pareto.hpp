#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kiml/symreg/expression.hpp"

namespace kiml::symreg {

struct ParetoEntry {
    Expression expression;
    std::string expr_infix;
    std::string expr_prefix;
    int complexity = 0;  ///< token count
    double rmse = 0.0;
    double r2 = 0.0;
    std::vector<double> constants;
};

/// JSON: {expr_infix, expr_prefix, complexity, rmse, r2, constants: [{index, value, unit}]}
/// with constants numbered from 1 as in the infix form.
void to_json(nlohmann::json& j, const ParetoEntry& e);

/// Non-dominated set in (complexity, rmse), kept sorted by complexity with
/// strictly decreasing rmse.
class ParetoFront {
public:
    /// Inserts unless an entry with complexity <= and rmse <= exists; drops
    /// entries the new one dominates. Returns whether it was inserted.
    bool offer(const ParetoEntry& e);

    [[nodiscard]] const std::vector<ParetoEntry>& entries() const { return entries_; }
    [[nodiscard]] bool empty() const { return entries_.empty(); }

    /// Lowest-rmse entry. RMSE values within `tie_tolerance` of the minimum
    /// count as equal and the least complex of them is returned.
    [[nodiscard]] const ParetoEntry& best(double tie_tolerance = 0.0) const;

private:
    std::vector<ParetoEntry> entries_;
};

}  // namespace kiml::symreg
