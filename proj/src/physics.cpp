#include "kiml/physics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "kiml/rng.hpp"

namespace kiml::physics {

void TafelState::validate() const {
    const auto ok = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!ok(b_mv_per_dec) || !ok(i) || !ok(i0)) {
        throw std::domain_error("TafelState requires finite b > 0, i > 0, i0 > 0");
    }
}

double tafel_activation_loss(const TafelState& state) {
    state.validate();
    const double ratio = state.i / state.i0;
    if (!(ratio > 0.0)) throw std::domain_error("tafel_activation_loss: i/i0 must be positive");
    return state.b_mv_per_dec * std::log10(ratio);
}

double compose_cell_voltage(const VoltageBreakdown& v) {
    return v.u_nernst_mv + v.eta_act_mv + v.eta_ohm_mv + v.eta_mtx_mv;
}

Poly5 Poly5::from_list(std::span<const double> c) {
    if (c.size() > 6) throw ConfigError("polynomial has more than 6 coefficients (degree > 5)");
    Poly5 p;
    for (std::size_t k = 0; k < c.size(); ++k) p.coeffs[k] = c[k];
    return p;
}

double Poly5::operator()(double t) const { return eval_poly5(*this, t); }

double eval_poly5(const Poly5& p, double t) {
    double acc = p.coeffs[5];
    for (int k = 4; k >= 0; --k) acc = acc * t + p.coeffs[static_cast<std::size_t>(k)];
    return acc;
}

double current_at_step(const CurrentProfile& profile, std::int64_t step) {
    if (const auto* c = std::get_if<ConstantCurrent>(&profile)) return c->value;
    const auto& s = std::get<StepCycle>(profile);
    const std::int64_t phase = step % s.period_steps;
    return phase < s.period_steps / 2 ? s.low : s.high;
}

std::size_t SyntheticConfig::row_count() const {
    if (hours <= 0 || !(step_hours > 0.0)) return 0;
    return static_cast<std::size_t>(std::floor(static_cast<double>(hours) / step_hours));
}

void SyntheticConfig::validate() const {
    if (hours <= 0) throw ConfigError("hours must be a positive integer");
    if (!(step_hours > 0.0) || !std::isfinite(step_hours)) throw ConfigError("step_hours must be positive");
    if (!(noise_std_mv >= 0.0) || !std::isfinite(noise_std_mv)) throw ConfigError("noise_std_mv must be nonnegative");
    if (row_count() == 0) throw ConfigError("configuration produces no rows (step_hours > hours)");
    if (const auto* c = std::get_if<ConstantCurrent>(&current_profile)) {
        if (!(c->value > 0.0) || !std::isfinite(c->value)) throw ConfigError("constant current must be positive");
    } else {
        const auto& s = std::get<StepCycle>(current_profile);
        if (!(s.low > 0.0) || !(s.high > 0.0) || !std::isfinite(s.low) || !std::isfinite(s.high)) {
            throw ConfigError("step-cycle currents must be positive");
        }
        if (s.period_steps < 2) throw ConfigError("step-cycle period must be at least 2 steps");
    }
    const std::size_t n = row_count();
    auto check_positive = [&](const Poly5& p, const char* what) {
        for (std::size_t k = 0; k <= n; ++k) {
            const double t = k < n ? static_cast<double>(k) * step_hours : static_cast<double>(hours);
            const double v = eval_poly5(p, t);
            if (!(v > 0.0) || !std::isfinite(v)) {
                throw ConfigError(std::string(what) + " polynomial is not strictly positive at t=" + format_double(t));
            }
        }
    };
    check_positive(b_poly, "b");
    check_positive(i0_poly, "i0");
}

void to_json(nlohmann::json& j, const SyntheticConfig& cfg) {
    j = nlohmann::json{{"hours", cfg.hours},
                       {"step_hours", cfg.step_hours},
                       {"b_poly", cfg.b_poly.coeffs},
                       {"i0_poly", cfg.i0_poly.coeffs},
                       {"noise_std_mv", cfg.noise_std_mv},
                       {"seed", cfg.seed}};
    if (const auto* c = std::get_if<ConstantCurrent>(&cfg.current_profile)) {
        j["current_profile"] = {{"kind", "constant"}, {"value", c->value}};
    } else {
        const auto& s = std::get<StepCycle>(cfg.current_profile);
        j["current_profile"] = {{"kind", "step"}, {"low", s.low}, {"high", s.high}, {"period_steps", s.period_steps}};
    }
}

void from_json(const nlohmann::json& j, SyntheticConfig& cfg) {
    cfg.hours = j.at("hours").get<std::int64_t>();
    cfg.step_hours = j.at("step_hours").get<double>();
    cfg.b_poly = Poly5::from_list(j.at("b_poly").get<std::vector<double>>());
    cfg.i0_poly = Poly5::from_list(j.at("i0_poly").get<std::vector<double>>());
    cfg.noise_std_mv = j.at("noise_std_mv").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    const auto& p = j.at("current_profile");
    if (p.at("kind") == "constant") {
        cfg.current_profile = ConstantCurrent{p.at("value").get<double>()};
    } else if (p.at("kind") == "step") {
        cfg.current_profile =
            StepCycle{p.at("low").get<double>(), p.at("high").get<double>(), p.at("period_steps").get<std::int64_t>()};
    } else {
        throw ConfigError("unknown current profile kind");
    }
}

void Dataset::validate() const {
    const std::size_t n = t_hours.size();
    if (i.size() != n || b.size() != n || i0.size() != n || eta_act.size() != n) {
        throw std::invalid_argument("Dataset columns have unequal lengths");
    }
    for (std::size_t k = 1; k < n; ++k) {
        if (!(t_hours[k] > t_hours[k - 1])) throw std::invalid_argument("Dataset time column is not strictly increasing");
    }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.metadata = metadata;
    for (auto* col : {&out.t_hours, &out.i, &out.b, &out.i0, &out.eta_act}) col->reserve(rows.size());
    for (std::size_t r : rows) {
        out.t_hours.push_back(t_hours.at(r));
        out.i.push_back(i[r]);
        out.b.push_back(b[r]);
        out.i0.push_back(i0[r]);
        out.eta_act.push_back(eta_act[r]);
    }
    return out;
}

Dataset generate_synthetic_dataset(const SyntheticConfig& cfg) {
    cfg.validate();
    const std::size_t n = cfg.row_count();
    Dataset ds;
    for (auto* col : {&ds.t_hours, &ds.i, &ds.b, &ds.i0, &ds.eta_act}) col->resize(n);
    Rng rng(cfg.seed);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * cfg.step_hours;
        ds.t_hours[k] = t;
        ds.b[k] = eval_poly5(cfg.b_poly, t);
        ds.i0[k] = eval_poly5(cfg.i0_poly, t);
        ds.i[k] = current_at_step(cfg.current_profile, static_cast<std::int64_t>(k));
        const double clean = tafel_activation_loss({ds.b[k], ds.i[k], ds.i0[k]});
        // Draw even when sigma is zero so the stream position depends only on the row.
        const double z = rng.normal();
        ds.eta_act[k] = cfg.noise_std_mv == 0.0 ? clean : clean + cfg.noise_std_mv * z;
    }
    ds.metadata = cfg;
    return ds;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_dataset_csv(const Dataset& ds, std::ostream& out) {
    ds.validate();
    out << kDatasetHeader << '\n';
    for (std::size_t k = 0; k < ds.size(); ++k) {
        out << format_double(ds.t_hours[k]) << ',' << format_double(ds.i[k]) << ',' << format_double(ds.b[k]) << ','
            << format_double(ds.i0[k]) << ',' << format_double(ds.eta_act[k]) << '\n';
    }
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
    return std::filesystem::path(csv_path.string() + ".json");
}

void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_dataset_csv(ds, out);
    std::ofstream side(sidecar_path(path), std::ios::binary);
    if (!side) throw std::runtime_error("cannot open sidecar for " + path.string());
    side << nlohmann::json{{"generator", ds.metadata}}.dump(2) << '\n';
}

Dataset read_dataset_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("dataset CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kDatasetHeader) throw std::runtime_error("unexpected dataset CSV header: " + line);
    Dataset ds;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::array<double, 5> v{};
        std::stringstream ss(line);
        std::string cell;
        std::size_t k = 0;
        while (std::getline(ss, cell, ',')) {
            if (k >= v.size()) throw std::runtime_error("too many fields on line " + std::to_string(line_no));
            std::size_t used = 0;
            try {
                v[k] = std::stod(cell, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != cell.size() || cell.empty()) {
                throw std::runtime_error("malformed number on line " + std::to_string(line_no));
            }
            ++k;
        }
        if (k != v.size()) throw std::runtime_error("expected 5 fields on line " + std::to_string(line_no));
        ds.t_hours.push_back(v[0]);
        ds.i.push_back(v[1]);
        ds.b.push_back(v[2]);
        ds.i0.push_back(v[3]);
        ds.eta_act.push_back(v[4]);
    }
    ds.validate();
    return ds;
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    Dataset ds = read_dataset_csv(in);
    std::ifstream side(sidecar_path(path));
    if (side) {
        const auto j = nlohmann::json::parse(side, nullptr, false);
        if (!j.is_discarded() && j.contains("generator")) ds.metadata = j["generator"];
    }
    return ds;
}

}  // namespace kiml::physics
