#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "corrfactor/mu_engine.hpp"

namespace corrfactor {

struct WalkConfig {
    int n_max = 2;
    std::uint64_t num_walkers = 1;
    std::uint64_t seed = 0;
    std::uint64_t batch = 1 << 16;  // walkers per work chunk
    unsigned workers = 0;           // 0 = auto (capped by CORRFACTOR_THREADS)
};

/// First-passage hit counts from stochastic vacancy walks.
struct FirstPassageTally {
    int n_max = 0;
    std::uint64_t walkers = 0;
    std::uint64_t censored = 0;  // walks that did not return within n_max
    std::uint64_t seed = 0;
    SiteRef tracer, start;
    std::vector<SiteRef> neighbor_sites;
    std::vector<std::string> neighbor_labels;
    // hits[N][k]: first arrival at step N via tracer neighbor k
    std::map<int, std::vector<std::uint64_t>> hits;

    std::uint64_t hits_at(int n, const SiteRef& neighbor) const;
    std::uint64_t total_hits() const;
};

/// Runs config.num_walkers independent vacancy walks from `start`, each
/// absorbed on first tracer contact or censored after n_max-1 hops.
/// Walker streams are counter-based (stream id = walker index), so tallies
/// are bit-identical for a given seed regardless of worker count.
FirstPassageTally simulate(const LatticeSpec& spec, const HopModel& model, const SiteRef& start,
                           const SiteRef& tracer, const WalkConfig& config);

/// Arrival estimate with binomial standard errors per entry.
struct ArrivalEstimate {
    PropagationResult arrivals;                      // P_hat = hits / walkers
    std::map<int, std::vector<double>> stderrs;      // aligned with arrivals
    double captured = 0.0;
};

ArrivalEstimate tally_to_arrivals(const FirstPassageTally& tally);

/// JSON rendering of a tally including seed and config for audit.
std::string serialize_tally(const LatticeSpec& spec, const FirstPassageTally& tally);

}  // namespace corrfactor
