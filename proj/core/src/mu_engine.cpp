#include "corrfactor/mu_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace corrfactor {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double hi = std::max(a, b), lo = std::min(a, b);
    return hi + std::log1p(std::exp(lo - hi));
}

}  // namespace

std::string big_count_to_string(BigCount v) {
    if (v == 0) return "0";
    std::string out;
    while (v > 0) {
        out.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
        v /= 10;
    }
    std::reverse(out.begin(), out.end());
    return out;
}

FieldState::FieldState(const LatticeSpec& spec, FieldMode mode) : spec_(&spec), mode_(mode) {
    if (!spec.extent.defined) throw ConfigError("field over a lattice with undefined extent");
    if (mode == FieldMode::Count)
        c.assign(spec.site_count(), 0);
    else
        w.assign(spec.site_count(), mode == FieldMode::Log ? kNegInf : 0.0);
}

double FieldState::total_mass() const {
    if (mode_ == FieldMode::Count) {
        double t = 0.0;
        for (auto v : c) t += static_cast<double>(v);
        return t;
    }
    if (mode_ == FieldMode::Log) {
        double acc = kNegInf;
        for (double v : w) acc = log_add(acc, v);
        return std::exp(acc);
    }
    double t = 0.0;
    for (double v : w) t += v;
    return t;
}

double FieldState::mass(const SiteRef& s) const {
    const std::size_t i = spec_->site_index(s);
    if (mode_ == FieldMode::Count) return static_cast<double>(c[i]);
    if (mode_ == FieldMode::Log) return std::exp(w[i]);
    return w[i];
}

BigCount FieldState::count(const SiteRef& s) const {
    if (mode_ != FieldMode::Count) throw std::logic_error("count() on a non-count field");
    return c[spec_->site_index(s)];
}

double FieldState::log_mass(const SiteRef& s) const {
    if (mode_ != FieldMode::Log) throw std::logic_error("log_mass() on a non-log field");
    return w[spec_->site_index(s)];
}

void FieldState::deposit(const SiteRef& s, double mass_or_log, BigCount count) {
    const std::size_t i = spec_->site_index(s);
    if (mode_ == FieldMode::Count)
        c[i] += count;
    else if (mode_ == FieldMode::Log)
        w[i] = log_add(w[i], mass_or_log);
    else
        w[i] += mass_or_log;
    for (int a = 0; a < 3; ++a) {
        if (!box_valid_) {
            box_lo_[a] = box_hi_[a] = s.cell[a];
        } else {
            box_lo_[a] = std::min(box_lo_[a], s.cell[a]);
            box_hi_[a] = std::max(box_hi_[a], s.cell[a]);
        }
    }
    box_valid_ = true;
}

FieldState init_field(const LatticeSpec& spec, const SiteRef& start, FieldMode mode) {
    if (!spec.contains(start)) throw BoundsError("init_field: start site outside lattice extent");
    FieldState f(spec, mode);
    f.deposit(start, mode == FieldMode::Log ? 0.0 : 1.0, 1);
    return f;
}

/// Scatter sweep shared by the three field modes.
struct PropagationKernel {
    template <FieldMode M>
    static StepArrivals sweep(FieldState& field, const HopTable& hops, const SiteRef& tracer) {
        const LatticeSpec& spec = *field.spec_;
        if (!spec.contains(tracer)) throw BoundsError("propagate_step: tracer outside extent");
        const std::size_t tracer_idx = spec.site_index(tracer);
        const auto tracer_nb = spec.neighbors(tracer);

        StepArrivals arr;
        arr.mass.assign(tracer_nb.size(), 0.0);
        arr.counts.assign(tracer_nb.size(), 0);

        // slot of an incoming hop: (source sublattice, source stencil entry) -> k
        const int ns = spec.num_sublattices();
        std::vector<std::vector<int>> rslot(ns);
        for (int s = 0; s < ns; ++s) rslot[s].assign(spec.coordination(s), -1);
        for (std::size_t k = 0; k < tracer_nb.size(); ++k) {
            const SiteRef& src = tracer_nb[k].site;
            const int e = spec.entry_to(src, tracer);
            rslot[src.sublattice][e] = static_cast<int>(k);
        }

        const auto& lo = spec.extent.lo;
        const auto& hi = spec.extent.hi;
        const std::size_t nx = static_cast<std::size_t>(hi[0] - lo[0] + 1);
        const std::size_t nxy = nx * static_cast<std::size_t>(hi[1] - lo[1] + 1);
        const std::size_t ncells = nxy * static_cast<std::size_t>(hi[2] - lo[2] + 1);

        // linear index delta per (sublattice, entry)
        std::vector<std::vector<std::ptrdiff_t>> delta(ns);
        for (int s = 0; s < ns; ++s) {
            delta[s].resize(spec.coordination(s));
            for (int e = 0; e < spec.coordination(s); ++e) {
                const auto& st = spec.stencil[s][e];
                delta[s][e] = st.cell_offset[0] + st.cell_offset[1] * static_cast<std::ptrdiff_t>(nx) +
                              st.cell_offset[2] * static_cast<std::ptrdiff_t>(nxy) +
                              (st.to_sublattice - s) * static_cast<std::ptrdiff_t>(ncells);
            }
        }

        std::vector<double>& wnew = field.w_scratch_;
        std::vector<BigCount>& cnew = field.c_scratch_;
        if constexpr (M == FieldMode::Count)
            cnew.assign(field.c.size(), 0);
        else
            wnew.assign(field.w.size(), M == FieldMode::Log ? kNegInf : 0.0);

        // Tracer mass is zero by invariant; enforce before the sweep so it
        // never acts as a source.
        if constexpr (M == FieldMode::Count)
            field.c[tracer_idx] = 0;
        else
            field.w[tracer_idx] = (M == FieldMode::Log) ? kNegInf : 0.0;

        std::array<int, 3> blo = field.box_lo_, bhi = field.box_hi_;
        if (!field.box_valid_) return arr;
        for (int a = 0; a < 3; ++a) {
            blo[a] = std::max(blo[a], lo[a]);
            bhi[a] = std::min(bhi[a], hi[a]);
        }

        for (int s = 0; s < ns; ++s) {
            const double* p = hops.interior(s).data();
            const double* lp = hops.interior_log(s).data();
            const auto& d = delta[s];
            const int z_entries = spec.coordination(s);
            const std::size_t sub_base = static_cast<std::size_t>(s) * ncells;
            for (int cz = blo[2]; cz <= bhi[2]; ++cz)
                for (int cy = blo[1]; cy <= bhi[1]; ++cy) {
                    std::size_t idx = sub_base + static_cast<std::size_t>(cz - lo[2]) * nxy +
                                      static_cast<std::size_t>(cy - lo[1]) * nx +
                                      static_cast<std::size_t>(blo[0] - lo[0]);
                    for (int cx = blo[0]; cx <= bhi[0]; ++cx, ++idx) {
                        if constexpr (M == FieldMode::Count) {
                            const BigCount m = field.c[idx];
                            if (m == 0) continue;
                            const SiteRef site{{cx, cy, cz}, s};
                            if (spec.is_interior(site)) {
                                for (int e = 0; e < z_entries; ++e) {
                                    const std::size_t tgt = idx + d[e];
                                    if (tgt == tracer_idx)
                                        arr.counts[rslot[s][e]] += m;
                                    else
                                        cnew[tgt] += m;
                                }
                            } else {
                                for (const auto& nb : spec.neighbors(site)) {
                                    const std::size_t tgt = spec.site_index(nb.site);
                                    if (tgt == tracer_idx)
                                        arr.counts[rslot[s][nb.entry]] += m;
                                    else
                                        cnew[tgt] += m;
                                }
                            }
                        } else {
                            const double m = field.w[idx];
                            if (M == FieldMode::Log ? (m == kNegInf) : (m == 0.0)) continue;
                            const SiteRef site{{cx, cy, cz}, s};
                            if (spec.is_interior(site)) {
                                for (int e = 0; e < z_entries; ++e) {
                                    const std::size_t tgt = idx + d[e];
                                    if constexpr (M == FieldMode::Log) {
                                        if (tgt == tracer_idx)
                                            arr.mass[rslot[s][e]] += std::exp(lp[e] + m);
                                        else
                                            wnew[tgt] = log_add(wnew[tgt], lp[e] + m);
                                    } else {
                                        if (tgt == tracer_idx)
                                            arr.mass[rslot[s][e]] += p[e] * m;
                                        else
                                            wnew[tgt] += p[e] * m;
                                    }
                                }
                            } else {
                                const auto nbs = spec.neighbors(site);
                                const auto dist = hops.at_site(site);
                                for (std::size_t i = 0; i < nbs.size(); ++i) {
                                    const std::size_t tgt = spec.site_index(nbs[i].site);
                                    if constexpr (M == FieldMode::Log) {
                                        if (tgt == tracer_idx)
                                            arr.mass[rslot[s][nbs[i].entry]] +=
                                                std::exp(std::log(dist[i]) + m);
                                        else
                                            wnew[tgt] = log_add(wnew[tgt], std::log(dist[i]) + m);
                                    } else {
                                        if (tgt == tracer_idx)
                                            arr.mass[rslot[s][nbs[i].entry]] += dist[i] * m;
                                        else
                                            wnew[tgt] += dist[i] * m;
                                    }
                                }
                            }
                        }
                    }
                }
        }

        if constexpr (M == FieldMode::Count) {
            field.c.swap(cnew);
            for (std::size_t k = 0; k < arr.counts.size(); ++k) {
                arr.mass[k] = static_cast<double>(arr.counts[k]);
                arr.total += arr.mass[k];
            }
        } else {
            field.w.swap(wnew);
            for (double v : arr.mass) arr.total += v;
        }
        field.absorbed_ += arr.total;
        field.step_ += 1;

        // grow the active box by the maximal stencil reach
        for (int a = 0; a < 3; ++a) {
            int grow_lo = 0, grow_hi = 0;
            for (int s = 0; s < ns; ++s)
                for (const auto& e : spec.stencil[s]) {
                    grow_lo = std::max(grow_lo, -e.cell_offset[a]);
                    grow_hi = std::max(grow_hi, e.cell_offset[a]);
                }
            field.box_lo_[a] = std::max(field.box_lo_[a] - grow_lo, lo[a]);
            field.box_hi_[a] = std::min(field.box_hi_[a] + grow_hi, hi[a]);
        }
        return arr;
    }
};

StepArrivals propagate_step(FieldState& field, const HopTable& hops, const SiteRef& tracer) {
    switch (field.mode()) {
        case FieldMode::Count:
            return PropagationKernel::sweep<FieldMode::Count>(field, hops, tracer);
        case FieldMode::Log:
            return PropagationKernel::sweep<FieldMode::Log>(field, hops, tracer);
        default:
            return PropagationKernel::sweep<FieldMode::Weight>(field, hops, tracer);
    }
}

StepArrivals propagate_step(FieldState& field, const HopModel& model, const SiteRef& tracer) {
    HopTable hops(field.spec(), model);
    return propagate_step(field, hops, tracer);
}

double PropagationResult::mass_at(int n, const SiteRef& neighbor) const {
    auto it = arrivals.find(n);
    if (it == arrivals.end()) return 0.0;
    for (std::size_t k = 0; k < neighbor_sites.size(); ++k)
        if (neighbor_sites[k] == neighbor) return it->second[k];
    return 0.0;
}

double PropagationResult::total_at(int n) const {
    auto it = arrivals.find(n);
    if (it == arrivals.end()) return 0.0;
    double t = 0.0;
    for (double v : it->second) t += v;
    return t;
}

namespace {

PropagationResult make_result_shell(const LatticeSpec& spec, const SiteRef& start,
                                    const SiteRef& tracer, int n_max, FieldMode mode) {
    if (n_max < 2) throw std::domain_error("n_max must be >= 2");
    if (spec.entry_to(start, tracer) < 0)
        throw std::domain_error("vacancy start site must be adjacent to the tracer");
    PropagationResult r;
    r.n_max = n_max;
    r.mode = mode;
    r.tracer = tracer;
    r.start = start;
    for (const auto& nb : spec.neighbors(tracer)) {
        r.neighbor_sites.push_back(nb.site);
        r.neighbor_labels.push_back(spec.stencil[tracer.sublattice][nb.entry].label);
    }
    for (int n = 2; n <= n_max; ++n) {
        r.arrivals[n] = std::vector<double>(r.neighbor_sites.size(), 0.0);
        if (mode == FieldMode::Count)
            r.counts[n] = std::vector<BigCount>(r.neighbor_sites.size(), 0);
    }
    return r;
}

}  // namespace

PropagationResult run_mu(const LatticeSpec& spec, const HopModel& model, const SiteRef& start,
                         const SiteRef& tracer, int n_max, FieldMode mode) {
    PropagationResult result = make_result_shell(spec, start, tracer, n_max, mode);
    if (mode == FieldMode::Count) {
        // exact path counts overflow 128 bits beyond Z^(n_max-1) ~ 2^126
        double bits = 0.0;
        for (int s = 0; s < spec.num_sublattices(); ++s)
            bits = std::max(bits, (n_max - 1) * std::log2(static_cast<double>(spec.coordination(s))));
        if (bits > 126.0)
            throw InfeasibleError("count mode would overflow 128-bit path counts at n_max=" +
                                  std::to_string(n_max) + "; use weight or log mode");
    }

    // On uniform constant-Z lattices, counts convert exactly to weights:
    // every (N-1)-hop path carries probability Z^-(N-1).
    bool exact_count_weights = mode == FieldMode::Count && model.uniform &&
                               spec.boundary == BoundaryPolicy::AutoSized;
    for (int s = 1; exact_count_weights && s < spec.num_sublattices(); ++s)
        if (spec.coordination(s) != spec.coordination(0)) exact_count_weights = false;

    HopTable hops(spec, model);
    FieldState field = init_field(spec, start, mode);
    double count_factor = 1.0;  // Z^-(n-1), built multiplicatively (exact for Z = 2^m)
    for (int k = 1; k < n_max; ++k) {
        StepArrivals arr = propagate_step(field, hops, tracer);
        const int n = k + 1;
        if (mode == FieldMode::Count) {
            result.counts[n] = arr.counts;
            if (exact_count_weights) {
                count_factor /= spec.coordination(0);
                for (auto& v : arr.mass) v *= count_factor;
                arr.total = 0.0;
                for (double v : arr.mass) arr.total += v;
            }
        }
        result.arrivals[n] = arr.mass;
        result.captured_mass += arr.total;
    }
    return result;
}

namespace {

/// DFS over first-passage paths; calls visit(path_sites, weight, slot) for
/// every path whose final site is the tracer.
template <typename Visitor>
void first_passage_dfs(const LatticeSpec& spec, const HopTable& hops, const SiteRef& start,
                       const SiteRef& tracer, int n_max, Visitor&& visit) {
    std::vector<SiteRef> path{start};
    std::vector<int> tracer_slot(spec.site_count(), -1);
    const auto tnb = spec.neighbors(tracer);
    for (std::size_t k = 0; k < tnb.size(); ++k) tracer_slot[spec.site_index(tnb[k].site)] = static_cast<int>(k);

    struct Rec {
        const LatticeSpec& spec;
        const HopTable& hops;
        const SiteRef& tracer;
        int n_max;
        std::vector<SiteRef>& path;
        const std::vector<int>& tracer_slot;
        Visitor& visit;

        void step(const SiteRef& target, double w, const SiteRef& from) {
            if (target == tracer) {
                path.push_back(tracer);
                visit(path, w, tracer_slot[spec.site_index(from)]);
                path.pop_back();
            } else if (static_cast<int>(path.size()) + 1 <= n_max - 1) {
                path.push_back(target);
                (*this)(target, w);
                path.pop_back();
            }
        }

        void operator()(const SiteRef& site, double weight) {
            if (spec.is_interior(site)) {
                const auto& entries = spec.stencil[site.sublattice];
                const auto& dist = hops.interior(site.sublattice);
                for (std::size_t i = 0; i < entries.size(); ++i)
                    step(spec.offset_site(site, entries[i]), weight * dist[i], site);
            } else {
                const auto nbs = spec.neighbors(site);
                const auto dist = hops.at_site(site);
                for (std::size_t i = 0; i < nbs.size(); ++i)
                    step(nbs[i].site, weight * dist[i], site);
            }
        }
    } rec{spec, hops, tracer, n_max, path, tracer_slot, visit};

    rec(start, 1.0);
}

void check_enumeration_guard(const LatticeSpec& spec, int n_max) {
    if (n_max < 2) throw std::domain_error("n_max must be >= 2");
    int z_max = 0;
    for (int s = 0; s < spec.num_sublattices(); ++s) z_max = std::max(z_max, spec.coordination(s));
    const double nodes = std::pow(static_cast<double>(z_max), n_max - 1);
    if (n_max > 16 || nodes > 1.1e9)
        throw InfeasibleError("exhaustive enumeration refused: ~Z^(n_max-1) = " +
                              std::to_string(nodes) + " paths at Z=" + std::to_string(z_max) +
                              ", n_max=" + std::to_string(n_max) +
                              " (guard: n_max <= 16 and Z^(n_max-1) <= 1.1e9)");
}

}  // namespace

TrajectoryRecord make_record(const LatticeSpec& spec, const HopModel& model,
                             const std::vector<SiteRef>& sites, const SiteRef& tracer) {
    if (sites.size() < 2) throw std::domain_error("trajectory needs at least two sites");
    if (sites.back() != tracer) throw std::domain_error("trajectory must end at the tracer");
    for (std::size_t i = 0; i + 1 < sites.size(); ++i)
        if (sites[i] == tracer) throw std::domain_error("trajectory touches the tracer before its end");
    TrajectoryRecord rec;
    rec.sites = sites;
    rec.weight = 1.0;
    for (std::size_t i = 0; i + 1 < sites.size(); ++i) {
        const auto nbs = spec.neighbors(sites[i]);
        const auto dist = hop_probabilities(spec, model, sites[i]);
        bool found = false;
        for (std::size_t k = 0; k < nbs.size(); ++k)
            if (nbs[k].site == sites[i + 1]) {
                rec.weight *= dist[k];
                found = true;
                break;
            }
        if (!found) throw std::domain_error("trajectory contains a non-adjacent hop");
    }
    rec.final_neighbor = sites[sites.size() - 2];
    rec.theta_cos = cos_theta(spec, tracer, rec.final_neighbor,
                              flow_from(spec, sites.front(), tracer));
    return rec;
}

std::vector<TrajectoryRecord> enumerate_trajectories(const LatticeSpec& spec, const HopModel& model,
                                                     const SiteRef& start, const SiteRef& tracer,
                                                     int n_max) {
    check_enumeration_guard(spec, n_max);
    if (spec.entry_to(start, tracer) < 0)
        throw std::domain_error("vacancy start site must be adjacent to the tracer");
    HopTable hops(spec, model);
    const Vec3 flow = flow_from(spec, start, tracer);
    std::vector<TrajectoryRecord> out;
    first_passage_dfs(spec, hops, start, tracer, n_max,
                      [&](const std::vector<SiteRef>& path, double w, int /*slot*/) {
                          TrajectoryRecord rec;
                          rec.sites = path;
                          rec.weight = w;
                          rec.final_neighbor = path[path.size() - 2];
                          rec.theta_cos = cos_theta(spec, tracer, rec.final_neighbor, flow);
                          out.push_back(std::move(rec));
                      });
    return out;
}

PropagationResult oracle_arrivals(const LatticeSpec& spec, const HopModel& model,
                                  const SiteRef& start, const SiteRef& tracer, int n_max) {
    check_enumeration_guard(spec, n_max);
    PropagationResult result = make_result_shell(spec, start, tracer, n_max, FieldMode::Weight);
    HopTable hops(spec, model);
    first_passage_dfs(spec, hops, start, tracer, n_max,
                      [&](const std::vector<SiteRef>& path, double w, int slot) {
                          result.arrivals[static_cast<int>(path.size())][slot] += w;
                          result.captured_mass += w;
                      });
    return result;
}

PropagationResult aggregate_trajectories(const LatticeSpec& spec,
                                         const std::vector<TrajectoryRecord>& records,
                                         const SiteRef& start, const SiteRef& tracer, int n_max) {
    PropagationResult result = make_result_shell(spec, start, tracer, n_max, FieldMode::Weight);
    for (const auto& rec : records) {
        const int n = static_cast<int>(rec.sites.size());
        if (n > n_max) continue;
        bool found = false;
        for (std::size_t k = 0; k < result.neighbor_sites.size(); ++k)
            if (result.neighbor_sites[k] == rec.final_neighbor) {
                result.arrivals[n][k] += rec.weight;
                found = true;
                break;
            }
        if (!found) throw std::domain_error("trajectory arrives from a non-neighbor site");
        result.captured_mass += rec.weight;
    }
    return result;
}

std::string serialize_propagation(const LatticeSpec& spec, const PropagationResult& result) {
    nlohmann::json j;
    j["n_max"] = result.n_max;
    j["mode"] = result.mode == FieldMode::Count ? "count"
                : result.mode == FieldMode::Log ? "log"
                                                : "weight";
    j["tracer"] = spec.site_label(result.tracer);
    j["start"] = spec.site_label(result.start);
    j["captured_mass"] = result.captured_mass;
    nlohmann::json arrivals = nlohmann::json::object();
    for (const auto& [n, mass] : result.arrivals) {
        nlohmann::json per_n = nlohmann::json::object();
        for (std::size_t k = 0; k < mass.size(); ++k) {
            if (mass[k] == 0.0) continue;
            per_n[result.neighbor_labels[k]] = mass[k];
            if (result.mode == FieldMode::Count)
                per_n[result.neighbor_labels[k] + "_count"] =
                    big_count_to_string(result.counts.at(n)[k]);
        }
        arrivals[std::to_string(n)] = std::move(per_n);
    }
    j["per_step_arrivals"] = std::move(arrivals);
    return j.dump(2);
}

}  // namespace corrfactor
