#include "kiml/symreg/pareto.hpp"

#include <algorithm>
#include <stdexcept>

namespace kiml::symreg {

void to_json(nlohmann::json& j, const ParetoEntry& e) {
    nlohmann::json constants = nlohmann::json::array();
    for (std::size_t k = 0; k < e.constants.size(); ++k) {
        nlohmann::json unit = k < e.expression.constant_units.size() ? nlohmann::json(e.expression.constant_units[k])
                                                                     : nlohmann::json(units::UnitVector{});
        constants.push_back({{"index", k + 1}, {"value", e.constants[k]}, {"unit", unit}});
    }
    j = {{"expr_infix", e.expr_infix}, {"expr_prefix", e.expr_prefix}, {"complexity", e.complexity},
         {"rmse", e.rmse},             {"r2", e.r2},                   {"constants", constants}};
}

bool ParetoFront::offer(const ParetoEntry& e) {
    for (const auto& x : entries_)
        if (x.complexity <= e.complexity && x.rmse <= e.rmse) return false;
    std::erase_if(entries_, [&](const ParetoEntry& x) { return x.complexity >= e.complexity && x.rmse >= e.rmse; });
    const auto pos = std::lower_bound(entries_.begin(), entries_.end(), e.complexity,
                                      [](const ParetoEntry& x, int c) { return x.complexity < c; });
    entries_.insert(pos, e);
    return true;
}

const ParetoEntry& ParetoFront::best(double tie_tolerance) const {
    if (entries_.empty()) throw std::logic_error("ParetoFront::best on an empty front");
    const double min_rmse = entries_.back().rmse;
    for (const auto& x : entries_)
        if (x.rmse <= min_rmse + tie_tolerance) return x;
    return entries_.back();
}

}  // namespace kiml::symreg
