#include "corrfactor/ising.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace corrfactor {

std::size_t IsingProblem::var_of(const LatticeSpec& spec, const SiteRef& site, int step) const {
    if (step < 1 || step > n_steps) throw std::domain_error("step outside [1, n_steps]");
    return static_cast<std::size_t>(step - 1) * n_sites + spec.site_index(site);
}

std::pair<std::size_t, int> IsingProblem::site_step_of(std::size_t var) const {
    return {var % n_sites, static_cast<int>(var / n_sites) + 1};
}

const IsingProblem::Csr& IsingProblem::csr() const {
    if (csr_built_) return csr_;
    const std::size_t n = num_variables();
    std::vector<std::size_t> deg(n, 0);
    for (const auto& [ij, v] : quadratic) {
        (void)v;
        ++deg[ij.first];
        ++deg[ij.second];
    }
    csr_.row.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) csr_.row[i + 1] = csr_.row[i] + deg[i];
    csr_.col.assign(csr_.row[n], 0);
    csr_.val.assign(csr_.row[n], 0.0);
    std::vector<std::size_t> fill(csr_.row.begin(), csr_.row.end() - 1);
    for (const auto& [ij, v] : quadratic) {
        csr_.col[fill[ij.first]] = ij.second;
        csr_.val[fill[ij.first]++] = v;
        csr_.col[fill[ij.second]] = ij.first;
        csr_.val[fill[ij.second]++] = v;
    }
    csr_built_ = true;
    return csr_;
}

std::string violation_name(Violation v) {
    switch (v) {
        case Violation::MultiOccupancy: return "multi-occupancy";
        case Violation::EmptyStep: return "empty-step";
        case Violation::BadEndpoint: return "bad-endpoint";
        case Violation::EarlyCoalescence: return "early-coalescence";
        case Violation::NonAdjacentHop: return "non-adjacent-hop";
    }
    return "unknown";
}

IsingProblem build_ising(const LatticeSpec& spec, const HopModel& model, const SiteRef& start,
                         const SiteRef& tracer, int n, double penalty) {
    if (n < 2) throw std::domain_error("trajectory length n must be >= 2");
    if (spec.entry_to(start, tracer) < 0)
        throw std::domain_error("vacancy start site must be adjacent to the tracer");

    IsingProblem p;
    p.n_steps = n;
    p.n_sites = spec.site_count();
    p.lattice_name = spec.name;
    p.start = start;
    p.tracer = tracer;

    HopTable hops(spec, model);
    double max_abs_t = 0.0;
    for (std::size_t i = 0; i < p.n_sites; ++i) {
        const SiteRef site = spec.site_at(i);
        for (double prob : hops.at_site(site)) max_abs_t = std::max(max_abs_t, -std::log(prob));
    }
    p.max_abs_t = max_abs_t;
    p.penalty = penalty > 0.0 ? penalty : 1.0 + 2.0 * n * max_abs_t;
    const double L = p.penalty;

    const std::size_t nv = p.num_variables();
    p.linear.assign(nv, 0.0);
    std::map<std::pair<std::uint32_t, std::uint32_t>, double> quad;
    auto add_quad = [&](std::size_t a, std::size_t b, double v) {
        if (a == b) {
            p.linear[a] += v;  // q^2 = q for binaries
            return;
        }
        const auto ia = static_cast<std::uint32_t>(a);
        const auto ib = static_cast<std::uint32_t>(b);
        quad[{std::min(ia, ib), std::max(ia, ib)}] += v;
    };

    // hop terms: t[a->b] q(a,i) q(b,i+1) for neighbor pairs, i = 1..n-1
    for (std::size_t si = 0; si < p.n_sites; ++si) {
        const SiteRef a = spec.site_at(si);
        const auto nbs = spec.neighbors(a);
        const auto dist = hops.at_site(a);
        for (std::size_t j = 0; j < nbs.size(); ++j) {
            const double t = std::log(dist[j]);
            const std::size_t bi = spec.site_index(nbs[j].site);
            for (int i = 1; i <= n - 1; ++i)
                add_quad(static_cast<std::size_t>(i - 1) * p.n_sites + si,
                         static_cast<std::size_t>(i) * p.n_sites + bi, t);
        }
    }

    // one vacancy per step: L * (sum_a q(a,i) - 1)^2
    for (int i = 1; i <= n; ++i) {
        const std::size_t base = static_cast<std::size_t>(i - 1) * p.n_sites;
        for (std::size_t a = 0; a < p.n_sites; ++a) {
            p.linear[base + a] += -L;
            for (std::size_t b = a + 1; b < p.n_sites; ++b) add_quad(base + a, base + b, 2.0 * L);
        }
        p.constant_offset += L;
    }

    // endpoints: L (q(S,1)-1)^2 + L (q(T,N)-1)^2
    const std::size_t s1 = spec.site_index(start);
    const std::size_t tN = static_cast<std::size_t>(n - 1) * p.n_sites + spec.site_index(tracer);
    p.linear[s1] += -L;
    p.constant_offset += L;
    p.linear[tN] += -L;
    p.constant_offset += L;

    // no early coalescence: L (sum_{i=2..n-1} q(T,i))^2
    std::vector<std::size_t> mid;
    for (int i = 2; i <= n - 1; ++i)
        mid.push_back(static_cast<std::size_t>(i - 1) * p.n_sites + spec.site_index(tracer));
    for (std::size_t a = 0; a < mid.size(); ++a) {
        p.linear[mid[a]] += L;
        for (std::size_t b = a + 1; b < mid.size(); ++b) add_quad(mid[a], mid[b], 2.0 * L);
    }

    p.quadratic.reserve(quad.size());
    for (const auto& [ij, v] : quad)
        if (v != 0.0) p.quadratic.emplace_back(ij, v);
    return p;
}

double energy(const IsingProblem& problem, const SpinConfig& config) {
    if (config.bits.size() != problem.num_variables())
        throw std::domain_error("spin configuration does not cover every variable");
    double e = problem.constant_offset;
    for (std::size_t i = 0; i < problem.linear.size(); ++i)
        if (config.bits[i]) e += problem.linear[i];
    for (const auto& [ij, v] : problem.quadratic)
        if (config.bits[ij.first] && config.bits[ij.second]) e += v;
    return e;
}

DecodedTrajectory decode(const LatticeSpec& spec, const IsingProblem& problem,
                         const SpinConfig& config) {
    if (config.bits.size() != problem.num_variables())
        throw std::domain_error("spin configuration does not cover every variable");
    DecodedTrajectory out;
    std::vector<SiteRef> sites(problem.n_steps);
    for (int i = 1; i <= problem.n_steps; ++i) {
        const std::size_t base = static_cast<std::size_t>(i - 1) * problem.n_sites;
        int found = 0;
        for (std::size_t a = 0; a < problem.n_sites; ++a)
            if (config.bits[base + a]) {
                if (++found > 1) {
                    out.violation = Violation::MultiOccupancy;
                    return out;
                }
                sites[i - 1] = spec.site_at(a);
            }
        if (found == 0) {
            out.violation = Violation::EmptyStep;
            return out;
        }
    }
    if (sites.front() != problem.start || sites.back() != problem.tracer) {
        out.violation = Violation::BadEndpoint;
        return out;
    }
    for (int i = 2; i <= problem.n_steps - 1; ++i)
        if (sites[i - 1] == problem.tracer) {
            out.violation = Violation::EarlyCoalescence;
            return out;
        }
    for (int i = 0; i + 1 < problem.n_steps; ++i)
        if (spec.entry_to(sites[i], sites[i + 1]) < 0) {
            out.violation = Violation::NonAdjacentHop;
            return out;
        }
    out.valid = true;
    out.sites = std::move(sites);
    return out;
}

GroundSet brute_force_ground(const IsingProblem& problem) {
    const std::size_t n = problem.num_variables();
    if (n > 24)
        throw InfeasibleError("brute-force ground scan refused: " + std::to_string(n) +
                              " variables (guard: 24)");
    const auto& csr = problem.csr();

    SpinConfig cfg;
    cfg.bits.assign(n, 0);
    // phi[i] = dE of flipping i on from the current configuration
    std::vector<double> phi(problem.linear);
    double e = problem.constant_offset;

    GroundSet gs;
    gs.energy = e;
    gs.configs.push_back(cfg);

    const double tie_eps = 1e-9;
    const std::uint64_t total = 1ull << n;
    for (std::uint64_t g = 1; g < total; ++g) {
        const int bit = __builtin_ctzll(g);  // Gray-code flip position
        const double sign = cfg.bits[bit] ? -1.0 : 1.0;
        e += sign * phi[bit];
        cfg.bits[bit] ^= 1;
        const double delta = sign;
        for (std::size_t k = csr.row[bit]; k < csr.row[bit + 1]; ++k)
            phi[csr.col[k]] += delta * csr.val[k];
        if (e < gs.energy - tie_eps) {
            gs.energy = e;
            gs.configs.clear();
            gs.configs.push_back(cfg);
        } else if (e <= gs.energy + tie_eps) {
            gs.configs.push_back(cfg);
        }
    }
    // second pass tightens ties around the final minimum
    std::vector<SpinConfig> kept;
    for (auto& c : gs.configs)
        if (energy(problem, c) <= gs.energy + tie_eps) kept.push_back(std::move(c));
    gs.configs = std::move(kept);
    return gs;
}

}  // namespace corrfactor
