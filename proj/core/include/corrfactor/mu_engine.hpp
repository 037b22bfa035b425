#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "corrfactor/lattice.hpp"

namespace corrfactor {

/// Exact path counts; 128 bits keep uniform-square counts exact to N ~ 64.
using BigCount = unsigned __int128;
std::string big_count_to_string(BigCount v);

enum class FieldMode { Weight, Count, Log };

/// Trajectory mass per site at a propagation step. Weight mode stores
/// probability mass, count mode exact path counts, log mode log-mass
/// (guards against underflow on very deep runs).
class FieldState {
public:
    FieldState(const LatticeSpec& spec, FieldMode mode);

    FieldMode mode() const { return mode_; }
    int step() const { return step_; }
    /// Total probability mass currently on the lattice (weight/log modes).
    double total_mass() const;
    /// Mass absorbed into the tracer so far.
    double absorbed() const { return absorbed_; }

    double mass(const SiteRef& s) const;
    BigCount count(const SiteRef& s) const;
    double log_mass(const SiteRef& s) const;

    void deposit(const SiteRef& s, double mass_or_log, BigCount count = 1);

    const LatticeSpec& spec() const { return *spec_; }

    // dense storage, indexed by LatticeSpec::site_index
    std::vector<double> w;
    std::vector<BigCount> c;

private:
    friend struct PropagationKernel;
    const LatticeSpec* spec_;
    FieldMode mode_;
    int step_ = 0;
    double absorbed_ = 0.0;
    // active bounding box (cells with nonzero mass), grown one hop per step
    std::array<int, 3> box_lo_{0, 0, 0}, box_hi_{0, 0, 0};
    bool box_valid_ = false;
    // swap buffers reused across sweeps
    std::vector<double> w_scratch_;
    std::vector<BigCount> c_scratch_;
};

/// Field with mass 1 (count 1, log-mass 0) at `start`, zero elsewhere.
FieldState init_field(const LatticeSpec& spec, const SiteRef& start,
                      FieldMode mode = FieldMode::Weight);

/// Mass that hopped into the tracer this step, broken down by the tracer
/// neighbor it came from (indexed like neighbors(tracer)).
struct StepArrivals {
    std::vector<double> mass;
    std::vector<BigCount> counts;
    double total = 0.0;
};

/// One propagation sweep: new mass at b = sum over neighbors a of
/// p(b|a) * old mass at a; hops into the tracer are recorded as arrivals
/// and the tracer site is zeroed before the state is stored.
StepArrivals propagate_step(FieldState& field, const HopTable& hops, const SiteRef& tracer);
StepArrivals propagate_step(FieldState& field, const HopModel& model, const SiteRef& tracer);

/// First-passage arrival masses P_k^(N): per step N, per tracer neighbor k,
/// the probability mass of vacancy paths that first reach the tracer at
/// step N coming from k. In count mode, masses hold exact path counts.
struct PropagationResult {
    int n_max = 0;
    FieldMode mode = FieldMode::Weight;
    SiteRef tracer, start;
    std::vector<SiteRef> neighbor_sites;       // tracer neighbors, stencil order
    std::vector<std::string> neighbor_labels;  // matching direction labels
    std::map<int, std::vector<double>> arrivals;     // N -> mass per neighbor
    std::map<int, std::vector<BigCount>> counts;     // count mode only
    double captured_mass = 0.0;

    double mass_at(int n, const SiteRef& neighbor) const;
    double total_at(int n) const;
};

/// Exact stepwise propagation from `start` (which must be adjacent to
/// `tracer`) up to first-passage step n_max. Deterministic.
PropagationResult run_mu(const LatticeSpec& spec, const HopModel& model, const SiteRef& start,
                         const SiteRef& tracer, int n_max, FieldMode mode = FieldMode::Weight);

/// An explicit first-passage path: sites[0] = start at step 1, back() =
/// tracer at step N; weight is the product of hop probabilities; theta_cos
/// is the arrival projection cos(theta_k) for the canonical flow axis.
struct TrajectoryRecord {
    std::vector<SiteRef> sites;
    double weight = 0.0;
    SiteRef final_neighbor;
    double theta_cos = 0.0;
};

/// Exhaustive DFS over all first-passage paths with N <= n_max. Guarded:
/// refuses when the Z^(n_max-1) search space is infeasible (hard cap
/// n_max = 16; reached at Z = 4).
std::vector<TrajectoryRecord> enumerate_trajectories(const LatticeSpec& spec, const HopModel& model,
                                                     const SiteRef& start, const SiteRef& tracer,
                                                     int n_max);

/// Same DFS, aggregated on the fly into arrival masses (no record storage).
PropagationResult oracle_arrivals(const LatticeSpec& spec, const HopModel& model,
                                  const SiteRef& start, const SiteRef& tracer, int n_max);

/// Aggregates explicit trajectory records into arrival masses.
PropagationResult aggregate_trajectories(const LatticeSpec& spec,
                                         const std::vector<TrajectoryRecord>& records,
                                         const SiteRef& start, const SiteRef& tracer, int n_max);

/// Builds a TrajectoryRecord (weight, arrival cosine) from a raw site path.
TrajectoryRecord make_record(const LatticeSpec& spec, const HopModel& model,
                             const std::vector<SiteRef>& sites, const SiteRef& tracer);

/// JSON rendering of a propagation result (arrivals keyed by direction
/// label and step).
std::string serialize_propagation(const LatticeSpec& spec, const PropagationResult& result);

}  // namespace corrfactor
