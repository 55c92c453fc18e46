#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "shelab/covariance.hpp"
#include "shelab/paths.hpp"

namespace shelab {

inline constexpr int kSchemaVersion = 1;

struct TemporalConfig {
    std::string kind = "dirac";  // dirac | power_law | fractional
    double alpha0 = 0.5;
    double c0 = 1.0;
    double C0 = 1.0;
    double hurst = 0.75;
};

struct SpatialConfig {
    std::string kind = "dirac";  // dirac | riesz | fractional_product
    double alpha = 0.5;
    double coefficient = 1.0;
    int dim = 1;
    std::vector<double> hurst{0.75};
};

struct InitialConfig {
    std::string kind = "constant";  // constant | gaussian_bump
    double value = 1.0;
    double amplitude = 1.0;
    double variance = 1.0;
};

struct BudgetConfig {
    std::size_t n_fields = 256;   // ensemble size (independent noise fields)
    std::size_t n_paths = 256;    // Brownian paths per field
    std::size_t n_mc = 20000;     // path Monte Carlo samples for moments and Z statistics
    std::size_t chaos_order = 6;
    std::size_t max_k = 4;
};

struct LatticeConfig {
    double dt = 0.0;  // 0: desk default
    double dx = 0.0;
    double L = 0.0;
};

struct RegularizationConfig {
    std::size_t steps = 0;  // 0: default for each t
    double dx = 0.0;
};

struct DensityConfig {
    std::string mode = "ensemble";  // ensemble | injected_normal
    std::size_t n_injected = 100000;
    std::size_t eval_points = 64;
};

struct ExperimentConfig {
    int schema_version = kSchemaVersion;
    TemporalConfig temporal;
    SpatialConfig spatial;
    double amplitude = 1.0;
    InitialConfig initial;
    std::vector<double> times{0.25};
    std::vector<std::vector<double>> points{{0.0}};
    SmoothingParams smoothing;
    BudgetConfig budgets;
    LatticeConfig lattice;
    RegularizationConfig regularization;
    double intensity = 1.0;
    double rho = 0.0;  // 0: (4 - a) / (2 - a)
    std::vector<double> malliavin_times{0.05, 0.1, 0.2, 0.4};
    DensityConfig density;
    std::uint64_t seed = 20240101;
    std::string output_dir = "out";

    void validate() const;  // throws "invalid-config"
};

nlohmann::json to_json(const ExperimentConfig& c);
// Rejects unknown keys and schema mismatches ("invalid-config").
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

CovarianceSpec make_spec(const ExperimentConfig& c);
InitialDatum make_initial(const ExperimentConfig& c);

// FNV-1a of the canonical JSON serialization.
std::uint64_t config_hash(const ExperimentConfig& c);

}  // namespace shelab
