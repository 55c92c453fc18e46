#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "shelab/config.hpp"
#include "shelab/covariance.hpp"
#include "shelab/gaussian_field.hpp"

namespace shelab {

inline constexpr const char* kVersion = "0.3.0";

struct RunOptions {
    std::string out_dir;                 // empty: config output_dir
    std::optional<std::uint64_t> seed;   // overrides the config seed
    int threads = 1;
    double budget_scale = 1.0;
};

struct SeedEntry {
    std::string label;
    std::uint64_t seed = 0;
};

struct CommandResult {
    std::string command;
    std::vector<std::string> csv_paths;
    std::vector<SeedEntry> seeds;
    std::vector<std::string> warnings;
    bool ok = true;  // false iff a domination or inequality flag failed
    double wall_seconds = 0.0;
};

// Runs one verb (moments | tails | density | malliavin | validate), writes its
// CSVs and manifest.json into the output directory.
CommandResult run_command(const std::string& verb, const ExperimentConfig& config, const RunOptions& opt);

CommandResult run_moments(const ExperimentConfig& config, const RunOptions& opt);
CommandResult run_tails(const ExperimentConfig& config, const RunOptions& opt);
CommandResult run_density(const ExperimentConfig& config, const RunOptions& opt);
CommandResult run_malliavin(const ExperimentConfig& config, const RunOptions& opt);
CommandResult run_validate(const ExperimentConfig& config, const RunOptions& opt);

// Decimal with 17 significant digits; non-finite values print as nan / inf / -inf.
std::string format_double(double v);

// ---- deterministic checks shared by validate and the acceptance suite --------------------

struct UniformBoundCheck {
    double worst_ratio = 0.0;  // max over the grid of smoothed / unsmoothed (mass for dirac factors)
    double worst_time_lag = 0.0;
    double worst_space_lag = 0.0;
    bool ok = true;
};

// q_smoothed(0, s, 0, y) <= gamma0(s) gamma(y) on a grid x grid lag grid s, |y| in (0, max_lag];
// dirac factors compare the total mass of the smoothed factor with 1.
UniformBoundCheck uniform_covariance_check(const CovarianceSpec& spec, const SmoothingParams& sp,
                                           std::size_t grid = 64, double max_lag = 1.0, double rel_tol = 1e-6);

// Largest KL eigenvalue of the smoothed base white covariance on the lattice.
double kl_max_eigenvalue(const CovarianceSpec& spec, const SmoothingParams& sp, const LatticeSpec& lattice);

// Field lattice for horizon t from the config (desk default when unset).
LatticeSpec lattice_for(const ExperimentConfig& config, double t);

}  // namespace shelab
