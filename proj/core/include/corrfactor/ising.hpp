#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "corrfactor/lattice.hpp"
#include "corrfactor/mu_engine.hpp"

namespace corrfactor {

/// Binary quadratic encoding of fixed-length first-passage trajectories.
/// One variable per (site, step) pair; the energy of a complete assignment
/// is
///
///   sum_i sum_(a->b) t[a->b] q(a,i) q(b,i+1)
///   + L * [ per-step one-hot violations squared
///           + (q(S,1)-1)^2 + (sum_{1<i<N} q(T,i))^2 + (q(T,N)-1)^2 ]
///
/// expanded to linear + quadratic binary form. Hop couplings t = ln p(b|a)
/// exist only between neighbor pairs at consecutive steps; valid N-step
/// trajectories have zero penalty and energy equal to the log of their
/// path probability.
class IsingProblem {
public:
    int n_steps = 0;
    std::size_t n_sites = 0;
    double penalty = 0.0;          // L, shared by all constraint terms
    double constant_offset = 0.0;  // energy of the all-zero assignment
    double max_abs_t = 0.0;
    std::string lattice_name;
    SiteRef start, tracer;

    std::vector<double> linear;  // indexed by variable id
    // ordered unique pairs (i < j) with coefficients
    std::vector<std::pair<std::pair<std::uint32_t, std::uint32_t>, double>> quadratic;

    std::size_t num_variables() const { return n_sites * static_cast<std::size_t>(n_steps); }
    /// Variable id of (site, step), step in [1, n_steps].
    std::size_t var_of(const LatticeSpec& spec, const SiteRef& site, int step) const;
    std::pair<std::size_t, int> site_step_of(std::size_t var) const;  // (site index, step)

    // CSR adjacency built on demand for annealing / fast energy deltas
    struct Csr {
        std::vector<std::size_t> row;
        std::vector<std::uint32_t> col;
        std::vector<double> val;
    };
    const Csr& csr() const;

private:
    mutable Csr csr_;
    mutable bool csr_built_ = false;
};

/// Complete spin assignment (one bit per variable).
struct SpinConfig {
    std::vector<std::uint8_t> bits;
};

enum class Violation { MultiOccupancy, EmptyStep, BadEndpoint, EarlyCoalescence, NonAdjacentHop };
std::string violation_name(Violation v);

struct DecodedTrajectory {
    bool valid = false;
    std::vector<SiteRef> sites;  // length n_steps when valid
    std::optional<Violation> violation;
};

/// Builds the encoding for trajectories of exactly n steps. `penalty` = 0
/// picks the calibrated default L = 1 + 2*n*max|t|, which separates every
/// constraint-violating assignment from every valid trajectory.
IsingProblem build_ising(const LatticeSpec& spec, const HopModel& model, const SiteRef& start,
                         const SiteRef& tracer, int n, double penalty = 0.0);

/// Exact energy of a complete assignment. Throws std::domain_error when the
/// bit vector does not cover every variable.
double energy(const IsingProblem& problem, const SpinConfig& config);

/// Reads the occupied site per step and validates the trajectory
/// constraints. Invalidity is data, not an error.
DecodedTrajectory decode(const LatticeSpec& spec, const IsingProblem& problem,
                         const SpinConfig& config);

/// Exhaustive ground-state scan (Gray-code sweep). Guarded at 24 variables.
struct GroundSet {
    double energy = 0.0;
    std::vector<SpinConfig> configs;
};
GroundSet brute_force_ground(const IsingProblem& problem);

struct AnnealSchedule {
    double t_hot = 0.0;   // 0 = auto (hop-coupling scale)
    double t_cold = 0.0;  // 0 = auto (|t| / 20)
    int sweeps = 300;
};

struct AnnealResult {
    std::vector<std::vector<SiteRef>> trajectories;  // distinct, lexicographically sorted
    std::uint64_t restarts_used = 0;
    std::uint64_t valid_hits = 0;
};

/// Repeated single-bit-flip Metropolis annealing. Each restart cools one
/// random start, decodes the final configuration, and accumulates distinct
/// valid trajectories; stops early when `stall_window` consecutive restarts
/// produce nothing new. Restart RNG streams are counter-based, so the
/// result is independent of the worker count.
AnnealResult anneal(const LatticeSpec& spec, const IsingProblem& problem,
                    const AnnealSchedule& schedule, std::uint64_t restarts, std::uint64_t seed,
                    std::uint64_t stall_window = 50, unsigned workers = 0);

}  // namespace corrfactor
