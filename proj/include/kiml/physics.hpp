#pragma once

// Tafel kinetics, cell-voltage composition and the synthetic degradation
// data generator.
//
// Canonical units: millivolt for every voltage term, mV/decade for the Tafel
// slope, A/cm^2 for current densities, hours for time.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace kiml::physics {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct TafelState {
    double b_mv_per_dec = 0.0;
    double i = 0.0;   ///< current density, A/cm^2
    double i0 = 0.0;  ///< exchange current density, A/cm^2

    /// Throws std::domain_error unless b, i, i0 are all finite and positive.
    void validate() const;
};

struct VoltageBreakdown {
    double u_nernst_mv = 0.0;
    double eta_act_mv = 0.0;
    double eta_ohm_mv = 0.0;
    double eta_mtx_mv = 0.0;
};

/// b * log10(i / i0), in mV.
[[nodiscard]] double tafel_activation_loss(const TafelState& state);

[[nodiscard]] double compose_cell_voltage(const VoltageBreakdown& v);

/// Fifth-degree polynomial in time (hours), constant term first.
struct Poly5 {
    std::array<double, 6> coeffs{};

    /// Pads shorter lists with zeros; more than six coefficients is an error.
    static Poly5 from_list(std::span<const double> c);
    [[nodiscard]] double operator()(double t) const;
};

/// Horner evaluation of sum c_k t^k.
[[nodiscard]] double eval_poly5(const Poly5& p, double t);

struct ConstantCurrent {
    double value = 1.0;
};

/// Square wave: `low` for the first floor(period/2) steps of each period,
/// `high` for the rest.
struct StepCycle {
    double low = 0.5;
    double high = 2.0;
    std::int64_t period_steps = 56;
};

using CurrentProfile = std::variant<ConstantCurrent, StepCycle>;

[[nodiscard]] double current_at_step(const CurrentProfile& profile, std::int64_t step);

struct SyntheticConfig {
    std::int64_t hours = 2800;
    double step_hours = 1.0;
    Poly5 b_poly{{50.0, 3.5e-3, 0.0, 0.0, 0.0, 0.0}};
    Poly5 i0_poly{{1e-7, -1e-11, 0.0, 0.0, 0.0, 0.0}};
    CurrentProfile current_profile = StepCycle{};
    double noise_std_mv = 1.0;
    std::uint64_t seed = 7;

    [[nodiscard]] std::size_t row_count() const;
    /// Throws ConfigError on non-positive hours/step, negative noise, a bad
    /// current profile, or b/i0 polynomials that are not strictly positive
    /// at every sample time and at t = hours.
    void validate() const;
};

void to_json(nlohmann::json& j, const SyntheticConfig& cfg);
void from_json(const nlohmann::json& j, SyntheticConfig& cfg);

/// Column store of time-indexed Tafel records.
struct Dataset {
    std::vector<double> t_hours;
    std::vector<double> i;
    std::vector<double> b;
    std::vector<double> i0;
    std::vector<double> eta_act;
    /// Generator config echo, or the string "external".
    nlohmann::json metadata = "external";

    [[nodiscard]] std::size_t size() const { return t_hours.size(); }
    [[nodiscard]] bool empty() const { return t_hours.empty(); }
    /// Equal column lengths and strictly increasing time.
    void validate() const;
    /// Rows in the given order (no time-order check on the result).
    [[nodiscard]] Dataset subset(std::span<const std::size_t> rows) const;
    [[nodiscard]] TafelState state(std::size_t row) const { return {b[row], i[row], i0[row]}; }
};

/// One row per step, t_k = k * step_hours for k < floor(hours / step_hours).
/// eta_act = Tafel loss + N(0, noise_std_mv) from Rng(cfg.seed); the noise
/// stream is the only use of the seed.
[[nodiscard]] Dataset generate_synthetic_dataset(const SyntheticConfig& cfg);

inline constexpr const char* kDatasetHeader = "t_hours,i_a_per_cm2,b_mv_per_dec,i0_a_per_cm2,eta_act_mv";

void write_dataset_csv(const Dataset& ds, std::ostream& out);
void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path);
[[nodiscard]] Dataset read_dataset_csv(std::istream& in);
/// Also loads the sidecar (see sidecar_path) as metadata when it exists.
[[nodiscard]] Dataset read_dataset_csv(const std::filesystem::path& path);
/// `d.csv` -> `d.csv.json`.
[[nodiscard]] std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

/// printf "%.17g": enough digits for an exact round trip.
[[nodiscard]] std::string format_double(double v);

}  // namespace kiml::physics
