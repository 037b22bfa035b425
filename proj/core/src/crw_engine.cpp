#include "corrfactor/crw_engine.hpp"

#include <cmath>
#include <mutex>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "corrfactor/rng.hpp"
#include "corrfactor/threads.hpp"

namespace corrfactor {

std::uint64_t FirstPassageTally::hits_at(int n, const SiteRef& neighbor) const {
    auto it = hits.find(n);
    if (it == hits.end()) return 0;
    for (std::size_t k = 0; k < neighbor_sites.size(); ++k)
        if (neighbor_sites[k] == neighbor) return it->second[k];
    return 0;
}

std::uint64_t FirstPassageTally::total_hits() const {
    std::uint64_t t = 0;
    for (const auto& [n, row] : hits)
        for (auto v : row) t += v;
    return t;
}

namespace {

/// Flattened per-site hop targets and cumulative probabilities. Sites keep
/// their full neighbor lists; clipped boundary sites of explicit lattices
/// get renormalized rows like everywhere else.
struct WalkTables {
    int z_max = 0;
    std::vector<int> degree;                 // per site
    std::vector<std::uint32_t> target;       // site*z_max + j
    std::vector<double> cum;                 // cumulative probability
    std::uint32_t tracer_idx = 0;

    WalkTables(const LatticeSpec& spec, const HopModel& model, const SiteRef& tracer) {
        HopTable hops(spec, model);
        const std::size_t n = spec.site_count();
        for (int s = 0; s < spec.num_sublattices(); ++s)
            z_max = std::max(z_max, spec.coordination(s));
        degree.assign(n, 0);
        target.assign(n * z_max, 0);
        cum.assign(n * z_max, 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            const SiteRef site = spec.site_at(i);
            const auto nbs = spec.neighbors(site);
            const auto dist = hops.at_site(site);
            degree[i] = static_cast<int>(nbs.size());
            double acc = 0.0;
            for (std::size_t j = 0; j < nbs.size(); ++j) {
                acc += dist[j];
                target[i * z_max + j] = static_cast<std::uint32_t>(spec.site_index(nbs[j].site));
                cum[i * z_max + j] = acc;
            }
            if (!nbs.empty()) cum[i * z_max + nbs.size() - 1] = 1.0;
        }
        tracer_idx = static_cast<std::uint32_t>(spec.site_index(tracer));
    }
};

struct LocalTally {
    std::vector<std::uint64_t> hits;  // (n-2)*Z + k
    std::uint64_t censored = 0;
};

}  // namespace

FirstPassageTally simulate(const LatticeSpec& spec, const HopModel& model, const SiteRef& start,
                           const SiteRef& tracer, const WalkConfig& config) {
    if (config.num_walkers == 0) throw std::domain_error("num_walkers must be >= 1");
    if (config.n_max < 2) throw std::domain_error("n_max must be >= 2");
    if (spec.entry_to(start, tracer) < 0)
        throw std::domain_error("vacancy start site must be adjacent to the tracer");

    FirstPassageTally tally;
    tally.n_max = config.n_max;
    tally.walkers = config.num_walkers;
    tally.seed = config.seed;
    tally.tracer = tracer;
    tally.start = start;
    for (const auto& nb : spec.neighbors(tracer)) {
        tally.neighbor_sites.push_back(nb.site);
        tally.neighbor_labels.push_back(spec.stencil[tracer.sublattice][nb.entry].label);
    }
    const std::size_t zt = tally.neighbor_sites.size();

    const WalkTables tables(spec, model, tracer);
    // slot of each tracer neighbor in the arrival row
    std::vector<int> slot_of(spec.site_count(), -1);
    for (std::size_t k = 0; k < zt; ++k)
        slot_of[spec.site_index(tally.neighbor_sites[k])] = static_cast<int>(k);

    const std::uint32_t start_idx = static_cast<std::uint32_t>(spec.site_index(start));
    const int max_hops = config.n_max - 1;
    const std::uint64_t batch = std::max<std::uint64_t>(1, config.batch);
    const std::uint64_t num_batches = (config.num_walkers + batch - 1) / batch;

    const std::size_t rows = static_cast<std::size_t>(config.n_max - 1) * zt;
    LocalTally global;
    global.hits.assign(rows, 0);
    std::mutex merge_mutex;

    auto run_batch = [&](std::size_t b) {
        LocalTally local;
        local.hits.assign(rows, 0);
        const std::uint64_t w_lo = b * batch;
        const std::uint64_t w_hi = std::min(config.num_walkers, w_lo + batch);
        for (std::uint64_t w = w_lo; w < w_hi; ++w) {
            Philox4x32 rng(config.seed, w);
            std::uint32_t site = start_idx;
            bool absorbed = false;
            for (int hop = 1; hop <= max_hops; ++hop) {
                const double u = rng.next_double();
                const int deg = tables.degree[site];
                const double* row = &tables.cum[static_cast<std::size_t>(site) * tables.z_max];
                int j = 0;
                while (j + 1 < deg && u > row[j]) ++j;
                const std::uint32_t next =
                    tables.target[static_cast<std::size_t>(site) * tables.z_max + j];
                if (next == tables.tracer_idx) {
                    const int n = hop + 1;
                    local.hits[static_cast<std::size_t>(n - 2) * zt + slot_of[site]] += 1;
                    absorbed = true;
                    break;
                }
                site = next;
            }
            if (!absorbed) local.censored += 1;
        }
        std::lock_guard<std::mutex> lock(merge_mutex);
        for (std::size_t i = 0; i < rows; ++i) global.hits[i] += local.hits[i];
        global.censored += local.censored;
    };

    parallel_batches(num_batches, worker_count(config.workers), run_batch);

    tally.censored = global.censored;
    for (int n = 2; n <= config.n_max; ++n) {
        std::vector<std::uint64_t> row(zt, 0);
        for (std::size_t k = 0; k < zt; ++k)
            row[k] = global.hits[static_cast<std::size_t>(n - 2) * zt + k];
        tally.hits[n] = std::move(row);
    }
    return tally;
}

ArrivalEstimate tally_to_arrivals(const FirstPassageTally& tally) {
    if (tally.walkers == 0) throw std::domain_error("tally has no walkers");
    ArrivalEstimate est;
    PropagationResult& r = est.arrivals;
    r.n_max = tally.n_max;
    r.mode = FieldMode::Weight;
    r.tracer = tally.tracer;
    r.start = tally.start;
    r.neighbor_sites = tally.neighbor_sites;
    r.neighbor_labels = tally.neighbor_labels;
    const double w = static_cast<double>(tally.walkers);
    for (int n = 2; n <= tally.n_max; ++n) {
        std::vector<double> mass(tally.neighbor_sites.size(), 0.0);
        std::vector<double> se(tally.neighbor_sites.size(), 0.0);
        auto it = tally.hits.find(n);
        for (std::size_t k = 0; it != tally.hits.end() && k < mass.size(); ++k) {
            const double p = static_cast<double>(it->second[k]) / w;
            mass[k] = p;
            se[k] = std::sqrt(p * (1.0 - p) / w);
            r.captured_mass += p;
        }
        r.arrivals[n] = std::move(mass);
        est.stderrs[n] = std::move(se);
    }
    est.captured = r.captured_mass;
    return est;
}

std::string serialize_tally(const LatticeSpec& spec, const FirstPassageTally& tally) {
    nlohmann::json j;
    j["n_max"] = tally.n_max;
    j["walkers"] = tally.walkers;
    j["censored"] = tally.censored;
    j["seed"] = tally.seed;
    j["tracer"] = spec.site_label(tally.tracer);
    j["start"] = spec.site_label(tally.start);
    nlohmann::json hits = nlohmann::json::object();
    for (const auto& [n, row] : tally.hits) {
        nlohmann::json per_n = nlohmann::json::object();
        for (std::size_t k = 0; k < row.size(); ++k)
            if (row[k] != 0) per_n[tally.neighbor_labels[k]] = row[k];
        hits[std::to_string(n)] = std::move(per_n);
    }
    j["hits"] = std::move(hits);
    return j.dump(2);
}

}  // namespace corrfactor
