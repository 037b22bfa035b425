#include "corrfactor/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "corrfactor/rng.hpp"

namespace corrfactor {

double correlation_factor(double avg_cos) {
    if (!(avg_cos >= -1.0 && avg_cos < 1.0))
        throw std::domain_error("correlation factor diverges: <cos> must lie in [-1, 1), got " +
                                std::to_string(avg_cos));
    return (1.0 + avg_cos) / (1.0 - avg_cos);
}

double average_cosine(const PropagationResult& arrivals, const LatticeSpec& spec,
                      const SiteRef& tracer, const Vec3& flow) {
    double c = 0.0;
    std::vector<double> cosines(arrivals.neighbor_sites.size());
    for (std::size_t k = 0; k < cosines.size(); ++k)
        cosines[k] = cos_theta(spec, tracer, arrivals.neighbor_sites[k], flow);
    for (const auto& [n, mass] : arrivals.arrivals)
        for (std::size_t k = 0; k < mass.size(); ++k) c += mass[k] * cosines[k];
    return c;
}

CorrelationEstimate estimate_correlation(const PropagationResult& arrivals,
                                         const LatticeSpec& spec, const SiteRef& tracer,
                                         const Vec3& flow, const std::string& engine, int n_max,
                                         std::optional<std::uint64_t> walkers) {
    CorrelationEstimate est;
    est.engine = engine;
    est.n_max = n_max;
    std::vector<double> cosines(arrivals.neighbor_sites.size());
    for (std::size_t k = 0; k < cosines.size(); ++k)
        cosines[k] = cos_theta(spec, tracer, arrivals.neighbor_sites[k], flow);

    double sum_cos2 = 0.0;
    for (const auto& [n, mass] : arrivals.arrivals) {
        if (n > n_max) continue;
        double cn = 0.0, mn = 0.0;
        for (std::size_t k = 0; k < mass.size(); ++k) {
            cn += mass[k] * cosines[k];
            mn += mass[k];
            sum_cos2 += mass[k] * cosines[k] * cosines[k];
        }
        est.per_n[n] = cn;
        est.avg_cos += cn;
        est.captured_mass += mn;
    }
    est.f = correlation_factor(est.avg_cos);
    if (walkers && *walkers > 0) {
        // per-walker variance of the absorbed cosine (censored walks count 0)
        const double var = std::max(0.0, sum_cos2 - est.avg_cos * est.avg_cos);
        const double se_c = std::sqrt(var / static_cast<double>(*walkers));
        const double d = 1.0 - est.avg_cos;
        est.stderr_f = 2.0 * se_c / (d * d);
    }
    return est;
}

std::string engine_name(Engine e) {
    switch (e) {
        case Engine::Mu: return "mu";
        case Engine::Crw: return "crw";
        case Engine::Anneal: return "anneal";
        case Engine::Oracle: return "oracle";
    }
    return "?";
}

std::optional<Engine> engine_from_name(const std::string& name) {
    if (name == "mu") return Engine::Mu;
    if (name == "crw") return Engine::Crw;
    if (name == "anneal") return Engine::Anneal;
    if (name == "oracle") return Engine::Oracle;
    return std::nullopt;
}

namespace {

/// Anneal-backed arrivals: one problem per trajectory length, distinct
/// valid trajectories weighted by their path probability.
PropagationResult anneal_arrivals(const LatticeSpec& spec, const HopModel& model,
                                  const SiteRef& start, const SiteRef& tracer, int n_max,
                                  const EngineOptions& opt) {
    const std::size_t vars = spec.site_count() * static_cast<std::size_t>(n_max);
    if (n_max > opt.anneal_max_n || vars > 20000)
        throw InfeasibleError("annealing engine refused at n_max=" + std::to_string(n_max) +
                              " (" + std::to_string(vars) + " variables; guard: n_max <= " +
                              std::to_string(opt.anneal_max_n) + " and <= 20000 variables)");
    std::vector<TrajectoryRecord> records;
    for (int n = 2; n <= n_max; ++n) {
        if (bipartite_parity_forbidden(spec, start, tracer, n)) continue;
        IsingProblem problem = build_ising(spec, model, start, tracer, n, opt.penalty);
        AnnealResult res = anneal(spec, problem, opt.schedule, opt.restarts,
                                  opt.seed + static_cast<std::uint64_t>(n) * 0x9E3779B97F4A7C15ull,
                                  opt.stall_window, opt.workers);
        for (const auto& sites : res.trajectories)
            records.push_back(make_record(spec, model, sites, tracer));
    }
    return aggregate_trajectories(spec, records, start, tracer, n_max);
}

}  // namespace

PropagationResult engine_arrivals(const LatticeSpec& spec, const HopModel& model,
                                  const SiteRef& start, const SiteRef& tracer, Engine engine,
                                  int n_max, const EngineOptions& options,
                                  std::optional<std::uint64_t>* walkers_out) {
    if (walkers_out) walkers_out->reset();
    switch (engine) {
        case Engine::Mu:
            return run_mu(spec, model, start, tracer, n_max, options.mu_mode);
        case Engine::Oracle:
            return oracle_arrivals(spec, model, start, tracer, n_max);
        case Engine::Anneal:
            return anneal_arrivals(spec, model, start, tracer, n_max, options);
        case Engine::Crw: {
            WalkConfig cfg;
            cfg.n_max = n_max;
            cfg.num_walkers = options.walkers;
            cfg.seed = options.seed;
            cfg.workers = options.workers;
            FirstPassageTally tally = simulate(spec, model, start, tracer, cfg);
            if (walkers_out) *walkers_out = tally.walkers;
            return tally_to_arrivals(tally).arrivals;
        }
    }
    throw std::logic_error("unreachable engine");
}

std::vector<TableRow> convergence_table(const LatticeSpec& spec, const HopModel& model,
                                        const SiteRef& start, const SiteRef& tracer,
                                        const Vec3& flow, Engine engine,
                                        const std::vector<int>& n_list,
                                        const EngineOptions& options) {
    std::vector<TableRow> rows;
    if (n_list.empty()) return rows;

    // Find the largest feasible horizon, compute once, truncate per row.
    std::vector<int> sorted(n_list);
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() < 2) throw std::domain_error("table n_max entries must be >= 2");

    int horizon = 0;
    std::string refusal_msg;
    PropagationResult arrivals;
    std::optional<std::uint64_t> walkers;
    for (auto it = sorted.rbegin(); it != sorted.rend(); ++it) {
        try {
            arrivals = engine_arrivals(spec, model, start, tracer, engine, *it, options, &walkers);
            horizon = *it;
            break;
        } catch (const InfeasibleError& e) {
            if (refusal_msg.empty()) refusal_msg = e.what();
        }
    }

    for (int n : n_list) {
        TableRow row;
        row.n_max = n;
        row.engine = engine_name(engine);
        if (n > horizon) {
            row.refusal = refusal_msg.empty() ? "infeasible" : refusal_msg;
            rows.push_back(std::move(row));
            continue;
        }
        CorrelationEstimate est = estimate_correlation(arrivals, spec, tracer, flow,
                                                       engine_name(engine), n, walkers);
        row.captured_mass = est.captured_mass;
        if (arrivals.total_at(n) == 0.0 && n > 2) {
            row.parity_dash = true;  // no new arrivals at exactly this N
        } else {
            row.f = est.f;
            row.stderr_f = est.stderr_f;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

double f_from_records(const std::vector<TrajectoryRecord>& records) {
    double c = 0.0;
    for (const auto& r : records) c += r.weight * r.theta_cos;
    return correlation_factor(c);
}

DropoutResult dropout_sensitivity(const std::vector<TrajectoryRecord>& records, double rate,
                                  std::uint64_t seed, int trials, DropoutOptions options) {
    if (records.empty()) throw std::domain_error("dropout sensitivity needs a nonempty table");
    if (!(rate >= 0.0 && rate < 1.0)) throw std::domain_error("dropout rate must lie in [0, 1)");
    if (trials < 1) throw std::domain_error("dropout sensitivity needs trials >= 1");

    DropoutResult out;
    out.full_f = f_from_records(records);

    // degeneracy groups: same length, same weight (within rounding)
    const std::size_t m = records.size();
    std::vector<char> eligible(m, 1);
    if (options.only_degenerate) {
        std::vector<std::size_t> order(m);
        for (std::size_t i = 0; i < m; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (records[a].sites.size() != records[b].sites.size())
                return records[a].sites.size() < records[b].sites.size();
            return records[a].weight < records[b].weight;
        });
        std::fill(eligible.begin(), eligible.end(), 0);
        std::size_t g0 = 0;
        auto same_group = [&](std::size_t a, std::size_t b) {
            return records[a].sites.size() == records[b].sites.size() &&
                   std::abs(records[a].weight - records[b].weight) <=
                       1e-12 * std::max(records[a].weight, records[b].weight);
        };
        for (std::size_t i = 1; i <= m; ++i) {
            if (i == m || !same_group(order[g0], order[i])) {
                if (i - g0 >= 2)
                    for (std::size_t j = g0; j < i; ++j) eligible[order[j]] = 1;
                g0 = i;
            }
        }
    }

    std::map<int, double> full_mass_per_n;
    for (const auto& r : records) full_mass_per_n[static_cast<int>(r.sites.size())] += r.weight;

    double sum = 0.0, sum_sq = 0.0, sum_abs = 0.0;
    out.per_trial_f.reserve(trials);
    for (int t = 0; t < trials; ++t) {
        Philox4x32 rng(seed, static_cast<std::uint64_t>(t));
        std::vector<char> kept(m, 1);
        for (std::size_t i = 0; i < m; ++i)
            if (eligible[i] && rng.next_double() < rate) kept[i] = 0;

        double c = 0.0;
        if (options.renormalize_per_n) {
            std::map<int, double> surv_mass, surv_cos;
            for (std::size_t i = 0; i < m; ++i) {
                if (!kept[i]) continue;
                const int n = static_cast<int>(records[i].sites.size());
                surv_mass[n] += records[i].weight;
                surv_cos[n] += records[i].weight * records[i].theta_cos;
            }
            for (const auto& [n, mass] : surv_mass)
                if (mass > 0.0) c += surv_cos[n] * (full_mass_per_n[n] / mass);
        } else {
            for (std::size_t i = 0; i < m; ++i)
                if (kept[i]) c += records[i].weight * records[i].theta_cos;
        }
        const double f = correlation_factor(std::min(c, 1.0 - 1e-15));
        out.per_trial_f.push_back(f);
        const double bias = (f - out.full_f) / out.full_f;
        sum += bias;
        sum_abs += std::abs(bias);
        sum_sq += bias * bias;
    }
    out.mean_bias = sum / trials;
    out.mean_abs_bias = sum_abs / trials;
    out.stddev = std::sqrt(std::max(0.0, sum_sq / trials - out.mean_bias * out.mean_bias));
    return out;
}

}  // namespace corrfactor
