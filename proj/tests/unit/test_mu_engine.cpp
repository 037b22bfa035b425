#include <doctest.h>

#include <cmath>
#include <limits>
#include <map>

#include "corrfactor/mu_engine.hpp"

using namespace corrfactor;

namespace {

struct Setup {
    LatticeSpec spec;
    HopModel model;
    SiteRef tracer, start;
};

Setup square(int n_max) {
    Setup s{build_builtin("square", n_max), {}, {}, {}};
    s.tracer = default_tracer(s.spec);
    s.start = default_start(s.spec, s.tracer);
    return s;
}

// arrivals keyed by (N, final neighbor) from explicit records
std::map<std::pair<int, SiteRef>, double> by_arrival(const std::vector<TrajectoryRecord>& recs) {
    std::map<std::pair<int, SiteRef>, double> out;
    for (const auto& r : recs) out[{static_cast<int>(r.sites.size()), r.final_neighbor}] += r.weight;
    return out;
}

}  // namespace

TEST_SUITE("mu_engine") {

TEST_CASE("init_field places unit mass at the vacancy start") {
    auto s = square(4);
    FieldState f = init_field(s.spec, s.start);
    CHECK(f.mass(s.start) == 1.0);
    CHECK(f.mass(s.tracer) == 0.0);
    CHECK(f.total_mass() == 1.0);
    CHECK(f.step() == 0);

    FieldState lg = init_field(s.spec, s.start, FieldMode::Log);
    CHECK(lg.log_mass(s.start) == 0.0);
    CHECK(lg.log_mass(s.tracer) == -std::numeric_limits<double>::infinity());

    CHECK_THROWS_AS(init_field(s.spec, SiteRef{{99, 0, 0}, 0}), BoundsError);
}

TEST_CASE("initial field matches the central-1 matrix on an explicit 5x5 patch") {
    LatticeSpec patch = builtin_family("square");
    patch.extent.lo = {0, 0, 0};
    patch.extent.hi = {4, 4, 0};
    patch.extent.defined = true;
    patch.finalize();
    FieldState f = init_field(patch, SiteRef{{2, 2, 0}, 0});
    for (std::size_t i = 0; i < patch.site_count(); ++i) {
        const SiteRef site = patch.site_at(i);
        CHECK(f.mass(site) == (site == SiteRef{{2, 2, 0}, 0} ? 1.0 : 0.0));
    }
}

TEST_CASE("one step from the start: 1/Z absorbed, rest spread over Z-1 sites") {
    auto s = square(2);
    FieldState f = init_field(s.spec, s.start);
    StepArrivals arr = propagate_step(f, s.model, s.tracer);
    REQUIRE(arr.mass.size() == 4);
    double absorbed = 0.0;
    for (double v : arr.mass) absorbed += v;
    CHECK(absorbed == 0.25);
    CHECK(f.total_mass() == 0.75);
    int carrying = 0;
    for (std::size_t i = 0; i < s.spec.site_count(); ++i)
        if (f.mass(s.spec.site_at(i)) != 0.0) {
            CHECK(f.mass(s.spec.site_at(i)) == 0.25);
            ++carrying;
        }
    CHECK(carrying == 3);
    // the absorbed mass arrived from the start site
    for (std::size_t k = 0; k < arr.mass.size(); ++k) {
        const auto nb = s.spec.neighbors(s.tracer);
        if (nb[k].site == s.start)
            CHECK(arr.mass[k] == 0.25);
        else
            CHECK(arr.mass[k] == 0.0);
    }
}

TEST_CASE("mass far from the tracer propagates without arrivals") {
    auto s = square(4);
    FieldState f = init_field(s.spec, SiteRef{{3, 3, 0}, 0});
    StepArrivals arr = propagate_step(f, s.model, s.tracer);
    CHECK(arr.total == 0.0);
    CHECK(f.total_mass() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("count mode: one count lands on each neighbor") {
    auto s = square(2);
    FieldState f = init_field(s.spec, s.start, FieldMode::Count);
    StepArrivals arr = propagate_step(f, s.model, s.tracer);
    std::uint64_t absorbed = 0;
    for (auto c : arr.counts) absorbed += static_cast<std::uint64_t>(c);
    CHECK(absorbed == 1);
    int carrying = 0;
    for (std::size_t i = 0; i < s.spec.site_count(); ++i)
        if (f.count(s.spec.site_at(i)) != 0) {
            CHECK(static_cast<std::uint64_t>(f.count(s.spec.site_at(i))) == 1);
            ++carrying;
        }
    CHECK(carrying == 3);
}

TEST_CASE("run: n_max=2 captures exactly the direct exchange") {
    auto s = square(2);
    PropagationResult r = run_mu(s.spec, s.model, s.start, s.tracer, 2);
    CHECK(r.mass_at(2, s.start) == 0.25);
    CHECK(r.captured_mass == 0.25);
}

TEST_CASE("run: n_max=4 arrival pattern is 3/64 backward, 1/64 per perpendicular") {
    auto s = square(4);
    PropagationResult r = run_mu(s.spec, s.model, s.start, s.tracer, 4);
    CHECK(r.mass_at(4, s.start) == 3.0 / 64.0);
    CHECK(r.mass_at(4, SiteRef{{0, 1, 0}, 0}) == 1.0 / 64.0);
    CHECK(r.mass_at(4, SiteRef{{0, -1, 0}, 0}) == 1.0 / 64.0);
    CHECK(r.mass_at(4, SiteRef{{-1, 0, 0}, 0}) == 0.0);
    CHECK(r.captured_mass == doctest::Approx(0.25 + 5.0 / 64.0).epsilon(1e-15));
}

TEST_CASE("run rejects a start that is not a tracer neighbor") {
    auto s = square(4);
    CHECK_THROWS_AS(run_mu(s.spec, s.model, SiteRef{{2, 0, 0}, 0}, s.tracer, 4),
                    std::domain_error);
    CHECK_THROWS_AS(run_mu(s.spec, s.model, s.start, s.tracer, 1), std::domain_error);
}

TEST_CASE("bipartite lattices have zero arrivals at odd N") {
    for (const auto& name : {"square", "honeycomb", "sc", "bcc", "diamond"}) {
        LatticeSpec spec = build_builtin(name, 7);
        HopModel model;
        const SiteRef tracer = default_tracer(spec);
        const SiteRef start = default_start(spec, tracer);
        PropagationResult r = run_mu(spec, model, start, tracer, 7);
        for (int n : {3, 5, 7}) CHECK(r.total_at(n) == 0.0);
        for (int n : {2, 4, 6}) CHECK(r.total_at(n) > 0.0);
    }
}

TEST_CASE("honeycomb n_max=3: the N=3 arrival row exists and is empty") {
    LatticeSpec spec = build_builtin("honeycomb", 3);
    HopModel model;
    const SiteRef tracer = default_tracer(spec);
    const SiteRef start = default_start(spec, tracer);
    PropagationResult r = run_mu(spec, model, start, tracer, 3);
    REQUIRE(r.arrivals.count(3) == 1);
    CHECK(r.total_at(3) == 0.0);
}

TEST_CASE("mass conservation at every step") {
    for (const auto& name : {"square", "honeycomb", "triangular"}) {
        LatticeSpec spec = build_builtin(name, 8);
        HopModel model;
        const SiteRef tracer = default_tracer(spec);
        const SiteRef start = default_start(spec, tracer);
        HopTable hops(spec, model);
        FieldState f = init_field(spec, start);
        for (int k = 1; k < 8; ++k) {
            propagate_step(f, hops, tracer);
            CHECK(f.total_mass() + f.absorbed() == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("captured mass is nondecreasing in the horizon and bounded by 1") {
    auto s = square(12);
    PropagationResult r = run_mu(s.spec, s.model, s.start, s.tracer, 12);
    double acc = 0.0;
    for (int n = 2; n <= 12; ++n) {
        const double t = r.total_at(n);
        CHECK(t >= 0.0);
        acc += t;
    }
    CHECK(acc == doctest::Approx(r.captured_mass).epsilon(1e-12));
    CHECK(r.captured_mass <= 1.0);
}

TEST_CASE("arrivals are independent of the sizing horizon") {
    auto s4 = square(4);
    auto s9 = square(9);
    PropagationResult r4 = run_mu(s4.spec, s4.model, s4.start, s4.tracer, 4);
    PropagationResult r9 = run_mu(s9.spec, s9.model, s9.start, s9.tracer, 9);
    for (int n : {2, 3, 4})
        for (std::size_t k = 0; k < r4.neighbor_sites.size(); ++k)
            CHECK(r4.arrivals.at(n)[k] == r9.mass_at(n, r4.neighbor_sites[k]));
}

TEST_CASE("count and weight modes agree exactly on the square lattice") {
    auto s = square(12);
    PropagationResult w = run_mu(s.spec, s.model, s.start, s.tracer, 12, FieldMode::Weight);
    PropagationResult c = run_mu(s.spec, s.model, s.start, s.tracer, 12, FieldMode::Count);
    for (int n = 2; n <= 12; ++n)
        for (std::size_t k = 0; k < w.neighbor_sites.size(); ++k)
            CHECK(w.arrivals.at(n)[k] == c.arrivals.at(n)[k]);  // Z=4: exact powers of two
    // raw counts at N=4 are 3,1,1
    std::uint64_t back = 0;
    for (std::size_t k = 0; k < c.neighbor_sites.size(); ++k)
        if (c.neighbor_sites[k] == s.start) back = static_cast<std::uint64_t>(c.counts.at(4)[k]);
    CHECK(back == 3);
}

TEST_CASE("count mode refuses horizons that overflow 128-bit counts") {
    auto s = square(2);
    LatticeSpec big = build_builtin("square", 80);
    CHECK_THROWS_AS(run_mu(big, s.model, default_start(big, default_tracer(big)),
                           default_tracer(big), 80, FieldMode::Count),
                    InfeasibleError);
}

TEST_CASE("log mode matches weight mode within rounding") {
    auto s = square(8);
    PropagationResult w = run_mu(s.spec, s.model, s.start, s.tracer, 8, FieldMode::Weight);
    PropagationResult lg = run_mu(s.spec, s.model, s.start, s.tracer, 8, FieldMode::Log);
    for (int n = 2; n <= 8; ++n)
        for (std::size_t k = 0; k < w.neighbor_sites.size(); ++k)
            CHECK(lg.arrivals.at(n)[k] == doctest::Approx(w.arrivals.at(n)[k]).epsilon(1e-12));
}

TEST_CASE("perpendicular arrivals are mirror-symmetric under uniform hopping") {
    auto s = square(8);
    PropagationResult r = run_mu(s.spec, s.model, s.start, s.tracer, 8);
    for (int n : {4, 6, 8})
        CHECK(r.mass_at(n, SiteRef{{0, 1, 0}, 0}) == r.mass_at(n, SiteRef{{0, -1, 0}, 0}));
}

TEST_CASE("enumeration: 1 + 5 records through n_max=4, and the direct path first") {
    auto s = square(4);
    auto recs = enumerate_trajectories(s.spec, s.model, s.start, s.tracer, 4);
    REQUIRE(recs.size() == 6);
    int n2 = 0, n4 = 0;
    for (const auto& r : recs) {
        if (r.sites.size() == 2) {
            ++n2;
            CHECK(r.sites.front() == s.start);
            CHECK(r.sites.back() == s.tracer);
            CHECK(r.weight == 0.25);
            CHECK(r.theta_cos == doctest::Approx(-1.0).epsilon(1e-14));
        } else {
            CHECK(r.sites.size() == 4);
            CHECK(r.weight == 1.0 / 64.0);
            ++n4;
        }
    }
    CHECK(n2 == 1);
    CHECK(n4 == 5);
}

TEST_CASE("n_max=2 always yields the single direct record of weight 1/Z") {
    for (const auto& name : {"square", "honeycomb", "fcc"}) {
        LatticeSpec spec = build_builtin(name, 2);
        HopModel model;
        const SiteRef tracer = default_tracer(spec);
        const SiteRef start = default_start(spec, tracer);
        auto recs = enumerate_trajectories(spec, model, start, tracer, 2);
        REQUIRE(recs.size() == 1);
        CHECK(recs[0].weight == doctest::Approx(1.0 / spec.coordination(0)).epsilon(1e-14));
    }
}

TEST_CASE("record invariants hold for every enumerated trajectory") {
    auto s = square(6);
    auto recs = enumerate_trajectories(s.spec, s.model, s.start, s.tracer, 6);
    for (const auto& r : recs) {
        REQUIRE(r.sites.size() >= 2);
        CHECK(r.sites.front() == s.start);
        CHECK(r.sites.back() == s.tracer);
        for (std::size_t i = 0; i + 1 < r.sites.size(); ++i) {
            CHECK(r.sites[i] != s.tracer);
            CHECK(s.spec.entry_to(r.sites[i], r.sites[i + 1]) >= 0);
        }
        // weight equals the recomputed product of hop probabilities
        TrajectoryRecord rebuilt = make_record(s.spec, s.model, r.sites, s.tracer);
        CHECK(r.weight == doctest::Approx(rebuilt.weight).epsilon(1e-14));
        CHECK(r.final_neighbor == rebuilt.final_neighbor);
    }
}

TEST_CASE("oracle equals propagation through n_max=10 on square and honeycomb") {
    for (const auto& name : {"square", "honeycomb"}) {
        LatticeSpec spec = build_builtin(name, 10);
        HopModel model;
        const SiteRef tracer = default_tracer(spec);
        const SiteRef start = default_start(spec, tracer);
        PropagationResult mu = run_mu(spec, model, start, tracer, 10);
        auto recs = enumerate_trajectories(spec, model, start, tracer, 10);
        auto agg = by_arrival(recs);
        for (int n = 2; n <= 10; ++n)
            for (std::size_t k = 0; k < mu.neighbor_sites.size(); ++k) {
                auto it = agg.find({n, mu.neighbor_sites[k]});
                const double oracle = it == agg.end() ? 0.0 : it->second;
                CHECK(mu.arrivals.at(n)[k] == doctest::Approx(oracle).epsilon(1e-12));
            }
        // the dedicated aggregate DFS agrees as well
        PropagationResult fast = oracle_arrivals(spec, model, start, tracer, 10);
        for (int n = 2; n <= 10; ++n)
            for (std::size_t k = 0; k < mu.neighbor_sites.size(); ++k)
                CHECK(fast.arrivals.at(n)[k] == doctest::Approx(mu.arrivals.at(n)[k]).epsilon(1e-12));
    }
}

TEST_CASE("anisotropic hopping: weights differ per path but aggregate to the propagation") {
    LatticeSpec spec = build_builtin("square", 6);
    HopModel model;
    model.uniform = false;
    model.temperature = 1.0;
    model.barriers = {{"+x", 0.0}, {"-x", 0.35}, {"+y", 0.1}, {"-y", 0.6}};
    const SiteRef tracer = default_tracer(spec);
    const SiteRef start = default_start(spec, tracer);
    auto recs = enumerate_trajectories(spec, model, start, tracer, 6);
    bool weights_differ = false;
    for (const auto& a : recs)
        for (const auto& b : recs)
            if (a.sites.size() == b.sites.size() &&
                std::abs(a.weight - b.weight) > 1e-9 * a.weight)
                weights_differ = true;
    CHECK(weights_differ);
    PropagationResult mu = run_mu(spec, model, start, tracer, 6);
    auto agg = by_arrival(recs);
    for (int n = 2; n <= 6; ++n)
        for (std::size_t k = 0; k < mu.neighbor_sites.size(); ++k) {
            auto it = agg.find({n, mu.neighbor_sites[k]});
            const double oracle = it == agg.end() ? 0.0 : it->second;
            CHECK(mu.arrivals.at(n)[k] == doctest::Approx(oracle).epsilon(1e-12));
        }
}

TEST_CASE("enumeration guard refuses infeasible horizons with a cost message") {
    auto s = square(2);
    CHECK_THROWS_WITH_AS(
        (void)enumerate_trajectories(s.spec, s.model, s.start, s.tracer, 17),
        doctest::Contains("refused"), InfeasibleError);
    LatticeSpec fcc = build_builtin("fcc", 12);
    HopModel model;
    CHECK_THROWS_AS((void)enumerate_trajectories(fcc, model, default_start(fcc, default_tracer(fcc)),
                                                 default_tracer(fcc), 12),
                    InfeasibleError);
}

TEST_CASE("propagation JSON names arrivals by direction label") {
    auto s = square(2);
    PropagationResult r = run_mu(s.spec, s.model, s.start, s.tracer, 2);
    const std::string j = serialize_propagation(s.spec, r);
    CHECK(j.find("\"per_step_arrivals\"") != std::string::npos);
    CHECK(j.find("\"+x\"") != std::string::npos);
    CHECK(j.find("0.25") != std::string::npos);
}

TEST_CASE("128-bit count rendering") {
    CHECK(big_count_to_string(0) == "0");
    CHECK(big_count_to_string(1234567890123456789ull) == "1234567890123456789");
    BigCount big = 1;
    for (int i = 0; i < 40; ++i) big *= 10;
    CHECK(big_count_to_string(big) == "1" + std::string(40, '0'));
}

}  // TEST_SUITE
