#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "corrfactor/crw_engine.hpp"
#include "corrfactor/ising.hpp"
#include "corrfactor/mu_engine.hpp"

namespace corrfactor {

/// f = (1 + <cos>) / (1 - <cos>); 0 at <cos> = -1, 1 at 0, divergent
/// toward +1. Throws std::domain_error outside [-1, 1).
double correlation_factor(double avg_cos);

/// <cos theta> = sum over N <= n_max, neighbors k of P_k^(N) cos(theta_k).
/// Uncaptured mass is simply excluded (truncated-sum semantics).
double average_cosine(const PropagationResult& arrivals, const LatticeSpec& spec,
                      const SiteRef& tracer, const Vec3& flow);

struct CorrelationEstimate {
    double avg_cos = 0.0;
    double f = 1.0;
    std::map<int, double> per_n;  // per-N contribution to <cos>
    double captured_mass = 0.0;
    std::optional<double> stderr_f;  // stochastic engines only
    std::string engine;
    int n_max = 0;
};

/// Builds the estimate from arrival masses truncated at n_max. For
/// stochastic estimates pass the walker count to propagate uncertainty
/// (delta method: stderr_f = 2 stderr_c / (1-c)^2).
CorrelationEstimate estimate_correlation(const PropagationResult& arrivals,
                                         const LatticeSpec& spec, const SiteRef& tracer,
                                         const Vec3& flow, const std::string& engine, int n_max,
                                         std::optional<std::uint64_t> walkers = std::nullopt);

enum class Engine { Mu, Crw, Anneal, Oracle };
std::string engine_name(Engine e);
std::optional<Engine> engine_from_name(const std::string& name);

struct EngineOptions {
    std::uint64_t seed = 0;
    std::uint64_t walkers = 10'000'000;  // CRW default sized for se(f) < 0.001 at n_max = 12
    std::uint64_t restarts = 20'000;
    std::uint64_t stall_window = 50;
    AnnealSchedule schedule;
    double penalty = 0.0;  // 0 = calibrated default
    unsigned workers = 0;
    int anneal_max_n = 8;  // annealing rows beyond this are refused
    FieldMode mu_mode = FieldMode::Weight;
};

struct TableRow {
    int n_max = 0;
    std::string engine;
    std::optional<double> f;         // absent on dash/refused rows
    double captured_mass = 0.0;
    std::optional<double> stderr_f;
    bool parity_dash = false;        // no new arrivals at this exact N
    std::optional<std::string> refusal;
};

/// One row per requested N_max, f truncated at that N_max. Engine
/// infeasibility (enumeration guard, annealing size cap) refuses the
/// affected rows explicitly instead of failing the table.
std::vector<TableRow> convergence_table(const LatticeSpec& spec, const HopModel& model,
                                        const SiteRef& start, const SiteRef& tracer,
                                        const Vec3& flow, Engine engine,
                                        const std::vector<int>& n_list,
                                        const EngineOptions& options = {});

/// Arrivals for a single n_max via the chosen engine (shared by compute
/// and table paths). Throws InfeasibleError when the engine cannot reach
/// n_max.
PropagationResult engine_arrivals(const LatticeSpec& spec, const HopModel& model,
                                  const SiteRef& start, const SiteRef& tracer, Engine engine,
                                  int n_max, const EngineOptions& options,
                                  std::optional<std::uint64_t>* walkers_out = nullptr);

struct DropoutOptions {
    /// Only trajectories with at least one same-length equal-weight partner
    /// are eligible to be dropped.
    bool only_degenerate = true;
    /// Preserve each N's total arrival mass, letting dropout perturb only
    /// the directional ratios (the per-N masses are exact engine output;
    /// the table contributes the direction distribution).
    bool renormalize_per_n = true;
};

struct DropoutResult {
    double full_f = 0.0;
    double mean_bias = 0.0;      // mean relative bias, signed
    double mean_abs_bias = 0.0;  // mean |relative bias|
    double stddev = 0.0;         // spread of the per-trial relative bias
    std::vector<double> per_trial_f;
};

/// Drops trajectories independently with probability `rate` over `trials`
/// repetitions and reports the f bias against the full table.
DropoutResult dropout_sensitivity(const std::vector<TrajectoryRecord>& records, double rate,
                                  std::uint64_t seed, int trials, DropoutOptions options = {});

/// f computed directly from explicit trajectory records.
double f_from_records(const std::vector<TrajectoryRecord>& records);

}  // namespace corrfactor
