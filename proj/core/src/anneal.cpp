#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>
#include <vector>

#include "corrfactor/ising.hpp"
#include "corrfactor/rng.hpp"
#include "corrfactor/threads.hpp"

namespace corrfactor {

namespace {

struct RestartOutcome {
    bool valid = false;
    std::vector<SiteRef> sites;
};

RestartOutcome run_restart(const LatticeSpec& spec, const IsingProblem& problem,
                           const AnnealSchedule& sched, std::uint64_t seed, std::uint64_t restart) {
    const auto& csr = problem.csr();
    const std::size_t n = problem.num_variables();
    Philox4x32 rng(seed, restart);

    std::vector<std::uint8_t> q(n, 0);
    std::vector<double> phi(problem.linear);

    auto set_bit = [&](std::size_t i) {
        q[i] = 1;
        for (std::size_t k = csr.row[i]; k < csr.row[i + 1]; ++k) phi[csr.col[k]] += csr.val[k];
    };

    // Start from a one-hot chain: pinned endpoints, interior steps seeded by
    // a tracer-avoiding random walk. Uniform teleport starts almost never
    // self-organize into adjacent chains under single-bit flips (every
    // occupancy transfer crosses a +L barrier), so restarts are seeded on
    // the valid manifold's geometry and the anneal mixes and repairs from
    // there.
    set_bit(problem.var_of(spec, problem.start, 1));
    set_bit(problem.var_of(spec, problem.tracer, problem.n_steps));
    SiteRef walk = problem.start;
    for (int i = 2; i <= problem.n_steps - 1; ++i) {
        const auto nbs = spec.neighbors(walk);
        SiteRef next = walk;
        for (int attempt = 0; attempt < 8; ++attempt) {
            next = nbs[rng.next_below(static_cast<std::uint32_t>(nbs.size()))].site;
            if (next != problem.tracer) break;
        }
        if (next == problem.tracer) next = walk;
        walk = next;
        set_bit(problem.var_of(spec, walk, i));
    }

    // Hot end sits at the hop-coupling scale, well below the penalty: hotter
    // schedules teleport occupancies off the seeded chain faster than
    // single-bit dynamics can re-order them.
    const double t_hot = sched.t_hot > 0.0 ? sched.t_hot : 1.1 * std::max(1.0, problem.max_abs_t);
    const double t_cold =
        sched.t_cold > 0.0 ? sched.t_cold : std::max(1e-3, problem.max_abs_t / 20.0);
    const int sweeps = std::max(1, sched.sweeps);
    const double ratio = (sweeps > 1) ? std::pow(t_cold / t_hot, 1.0 / (sweeps - 1)) : 1.0;

    auto flip = [&](std::size_t i) {
        const double delta = q[i] ? -1.0 : 1.0;
        q[i] ^= 1;
        for (std::size_t k = csr.row[i]; k < csr.row[i + 1]; ++k)
            phi[csr.col[k]] += delta * csr.val[k];
    };

    double temp = t_hot;
    for (int s = 0; s < sweeps; ++s, temp *= ratio) {
        const double inv_t = 1.0 / temp;
        for (std::size_t i = 0; i < n; ++i) {
            const double de = (q[i] ? -1.0 : 1.0) * phi[i];
            if (de <= 0.0 || rng.next_double() < std::exp(-de * inv_t)) flip(i);
        }
    }
    // strict-descent polish so the state settles into a local minimum
    for (int pass = 0; pass < 100; ++pass) {
        bool moved = false;
        for (std::size_t i = 0; i < n; ++i) {
            const double de = (q[i] ? -1.0 : 1.0) * phi[i];
            if (de < 0.0) {
                flip(i);
                moved = true;
            }
        }
        if (!moved) break;
    }

    SpinConfig cfg;
    cfg.bits = std::move(q);
    DecodedTrajectory dec = decode(spec, problem, cfg);
    RestartOutcome out;
    out.valid = dec.valid;
    if (dec.valid) out.sites = std::move(dec.sites);
    return out;
}

}  // namespace

AnnealResult anneal(const LatticeSpec& spec, const IsingProblem& problem,
                    const AnnealSchedule& schedule, std::uint64_t restarts, std::uint64_t seed,
                    std::uint64_t stall_window, unsigned workers) {
    if (restarts < 1) throw std::domain_error("anneal needs restarts >= 1");
    problem.csr();  // build once before workers share it

    // fixed batch size keeps the stall decision independent of worker count
    constexpr std::uint64_t kBatch = 32;
    std::set<std::vector<SiteRef>> found;
    AnnealResult result;
    std::uint64_t last_new = 0;
    std::uint64_t done = 0;

    const unsigned nw = worker_count(workers);
    while (done < restarts) {
        const std::uint64_t hi = std::min(restarts, done + kBatch);
        std::vector<RestartOutcome> outcomes(hi - done);
        parallel_batches(hi - done, nw, [&](std::size_t j) {
            outcomes[j] = run_restart(spec, problem, schedule, seed, done + j);
        });
        for (std::uint64_t j = 0; j < hi - done; ++j) {
            const std::uint64_t idx = done + j;
            if (!outcomes[j].valid) continue;
            ++result.valid_hits;
            if (found.insert(std::move(outcomes[j].sites)).second) last_new = idx;
        }
        done = hi;
        // The stall window scales with the observed degeneracy: the wait for
        // the last of D equally likely ground states grows with D, so a flat
        // window would routinely stop one state short.
        const std::uint64_t window = std::max<std::uint64_t>(stall_window, 8 * found.size());
        if (!found.empty() && done - last_new >= window) break;
        if (found.empty() && done >= 10 * stall_window) break;
    }

    result.restarts_used = done;
    result.trajectories.assign(found.begin(), found.end());
    return result;
}

}  // namespace corrfactor
