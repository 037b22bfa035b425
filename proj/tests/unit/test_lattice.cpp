#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "corrfactor/lattice.hpp"
#include "corrfactor/lattice_io.hpp"

using namespace corrfactor;

namespace {

const std::map<std::string, int> kExpectedZ = {{"honeycomb", 3}, {"square", 4}, {"triangular", 6},
                                               {"diamond", 4},   {"sc", 6},     {"bcc", 8},
                                               {"fcc", 12}};

LatticeConfig chain_config() {
    // 1-D chain embedded in 2-D: the smallest lattice with two directions
    LatticeConfig c;
    c.spec.name = "chain";
    c.spec.dimension = 2;
    c.spec.basis = {{1, 0, 0}, {0, 1, 0}};
    c.spec.sublattice_offsets = {{0, 0, 0}};
    StencilEntry plus, minus;
    plus.cell_offset = {1, 0, 0};
    plus.label = "+x";
    minus.cell_offset = {-1, 0, 0};
    minus.label = "-x";
    c.spec.stencil = {{plus, minus}};
    c.spec.extent.lo = {-4, 0, 0};
    c.spec.extent.hi = {4, 0, 0};
    c.spec.extent.defined = true;
    c.spec.finalize();
    return c;
}

}  // namespace

TEST_SUITE("lattice") {

TEST_CASE("built-in families have the expected coordination") {
    for (const auto& [name, z] : kExpectedZ) {
        LatticeSpec spec = build_builtin(name, 2);
        CHECK(spec.coordination(0) == z);
        for (int s = 1; s < spec.num_sublattices(); ++s) CHECK(spec.coordination(s) == z);
    }
    CHECK(build_builtin("honeycomb", 2).num_sublattices() == 2);
    CHECK(build_builtin("diamond", 2).num_sublattices() == 2);
    CHECK(build_builtin("fcc", 2).num_sublattices() == 1);
}

TEST_CASE("unknown family raises a configuration error") {
    CHECK_THROWS_AS(build_builtin("kagome", 4), ConfigError);
    CHECK_THROWS_AS(build_builtin("square", 1), std::domain_error);
}

TEST_CASE("auto-sizing keeps every depth-limited walk off the boundary") {
    for (const auto& [name, z] : kExpectedZ) {
        (void)z;
        const int n_max = 5;
        LatticeSpec spec = build_builtin(name, n_max);
        // side length comfortably exceeds n_max + 3
        for (int a = 0; a < spec.dimension; ++a)
            CHECK(spec.extent.hi[a] - spec.extent.lo[a] + 1 >= n_max + 3);

        // BFS to depth n_max-1 from the vacancy start: every visited site is
        // in-extent, and any site visited with hops to spare is interior.
        const SiteRef tracer = default_tracer(spec);
        const SiteRef start = default_start(spec, tracer);
        std::set<SiteRef> frontier{start}, seen{start};
        for (int depth = 1; depth <= n_max - 1; ++depth) {
            std::set<SiteRef> next;
            for (const auto& site : frontier)
                for (const auto& e : spec.stencil[site.sublattice]) {
                    const SiteRef t = spec.offset_site(site, e);
                    REQUIRE(spec.contains(t));
                    if (depth < n_max - 1) REQUIRE(spec.is_interior(t));
                    if (seen.insert(t).second) next.insert(t);
                }
            frontier = std::move(next);
        }
    }
}

TEST_CASE("neighbor lists match the stencil on interior sites") {
    LatticeSpec square = build_builtin("square", 4);
    const SiteRef tracer = default_tracer(square);
    auto nb = square.neighbors(tracer);
    REQUIRE(nb.size() == 4);
    std::set<std::pair<int, int>> cells;
    for (const auto& n : nb) cells.insert({n.site.cell[0], n.site.cell[1]});
    CHECK(cells == std::set<std::pair<int, int>>{{1, 0}, {-1, 0}, {0, 1}, {0, -1}});

    LatticeSpec honeycomb = build_builtin("honeycomb", 4);
    auto hnb = honeycomb.neighbors(default_tracer(honeycomb));
    REQUIRE(hnb.size() == 3);
    for (const auto& n : hnb) CHECK(n.site.sublattice == 1);

    LatticeSpec sc = build_builtin("sc", 4);
    auto snb = sc.neighbors(default_tracer(sc));
    REQUIRE(snb.size() == 6);
    for (const auto& n : snb) {
        int manhattan = std::abs(n.site.cell[0]) + std::abs(n.site.cell[1]) + std::abs(n.site.cell[2]);
        CHECK(manhattan == 1);
    }

    CHECK_THROWS_AS(square.neighbors(SiteRef{{99, 0, 0}, 0}), BoundsError);
}

TEST_CASE("neighbor relation is symmetric on every built-in") {
    for (const auto& [name, z] : kExpectedZ) {
        (void)z;
        LatticeSpec spec = build_builtin(name, 2);
        for (std::size_t i = 0; i < spec.site_count(); ++i) {
            const SiteRef a = spec.site_at(i);
            for (const auto& nb : spec.neighbors(a)) {
                bool back = false;
                for (const auto& r : spec.neighbors(nb.site))
                    if (r.site == a) back = true;
                REQUIRE(back);
            }
        }
    }
}

TEST_CASE("fcc neighbors sit along face diagonals") {
    LatticeSpec fcc = build_builtin("fcc", 2);
    for (const auto& e : fcc.stencil[0]) {
        CHECK(e.bond_length == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
        // unit direction with components (+-1, +-1, 0)/sqrt(2) up to permutation
        double sum_abs = std::abs(e.direction[0]) + std::abs(e.direction[1]) + std::abs(e.direction[2]);
        CHECK(sum_abs == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    }
}

TEST_CASE("uniform hop probabilities are exactly 1/Z") {
    LatticeSpec square = build_builtin("square", 4);
    HopModel uniform;
    auto p = hop_probabilities(square, uniform, default_tracer(square));
    REQUIRE(p.size() == 4);
    for (double v : p) CHECK(v == 0.25);

    LatticeSpec sc = build_builtin("sc", 4);
    auto p6 = hop_probabilities(sc, uniform, default_tracer(sc));
    REQUIRE(p6.size() == 6);
    for (double v : p6) CHECK(v == 1.0 / 6.0);
}

TEST_CASE("barrier softmax: dE = {0, T ln 3} on a Z=2 chain gives {0.75, 0.25}") {
    LatticeConfig chain = chain_config();
    chain.model.uniform = false;
    chain.model.temperature = 1.7;
    chain.model.barriers = {{"+x", 0.0}, {"-x", 1.7 * std::log(3.0)}};
    auto p = hop_probabilities(chain.spec, chain.model, SiteRef{{0, 0, 0}, 0});
    REQUIRE(p.size() == 2);
    CHECK(p[0] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(p[0] + p[1] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("hop distribution is invariant under a constant barrier shift") {
    LatticeSpec square = build_builtin("square", 3);
    HopModel a, b;
    a.uniform = b.uniform = false;
    a.temperature = b.temperature = 0.8;
    a.barriers = {{"+x", 0.1}, {"-x", 0.5}, {"+y", 0.3}, {"-y", 0.9}};
    for (const auto& [k, v] : a.barriers) b.barriers[k] = v + 7.25;
    auto pa = hop_probabilities(square, a, default_tracer(square));
    auto pb = hop_probabilities(square, b, default_tracer(square));
    for (std::size_t i = 0; i < pa.size(); ++i)
        CHECK(pa[i] == doctest::Approx(pb[i]).epsilon(1e-12));
}

TEST_CASE("missing barrier entry is a configuration error; wildcard fills gaps") {
    LatticeSpec square = build_builtin("square", 3);
    HopModel m;
    m.uniform = false;
    m.barriers = {{"+x", 0.1}};
    CHECK_THROWS_AS(hop_probabilities(square, m, default_tracer(square)), ConfigError);
    m.barriers["*"] = 0.2;
    auto p = hop_probabilities(square, m, default_tracer(square));
    CHECK(p.size() == 4);
}

TEST_CASE("cos_theta: pull-back is -1, perpendicular 0, fcc face diagonal 1/sqrt 2") {
    LatticeSpec square = build_builtin("square", 4);
    const SiteRef tracer = default_tracer(square);
    const SiteRef start = default_start(square, tracer);
    const Vec3 flow = flow_from(square, start, tracer);
    CHECK(cos_theta(square, tracer, start, flow) == doctest::Approx(-1.0).epsilon(1e-14));
    const SiteRef perp{{0, 1, 0}, 0};
    CHECK(cos_theta(square, tracer, perp, flow) == doctest::Approx(0.0).epsilon(1e-14));

    LatticeSpec fcc = build_builtin("fcc", 2);
    // +d3 bond points along (1,1,0)/sqrt(2)
    const SiteRef k{{0, 0, 1}, 0};
    CHECK(cos_theta(fcc, default_tracer(fcc), k, Vec3{1, 0, 0}) ==
          doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));

    CHECK_THROWS_AS(cos_theta(square, tracer, SiteRef{{2, 2, 0}, 0}, flow), std::domain_error);
    CHECK_THROWS_AS(cos_theta(square, tracer, start, Vec3{1.0, 1.0, 0.0}), std::domain_error);
}

TEST_CASE("neighbor cosines sum to zero for every built-in stencil") {
    const Vec3 flow2{0.6, 0.8, 0.0};
    const Vec3 flow3{0.48, 0.6, 0.64};
    for (const auto& [name, z] : kExpectedZ) {
        (void)z;
        LatticeSpec spec = build_builtin(name, 2);
        const SiteRef tracer = default_tracer(spec);
        const Vec3 flow = spec.dimension == 2 ? flow2 : flow3;
        double sum = 0.0;
        for (const auto& nb : spec.neighbors(tracer)) sum += cos_theta(spec, tracer, nb.site, flow);
        CHECK(sum == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("bipartite parity detection") {
    for (const auto& name : {"square", "honeycomb", "sc", "bcc", "diamond"}) {
        LatticeSpec spec = build_builtin(name, 3);
        const SiteRef tracer = default_tracer(spec);
        const SiteRef start = default_start(spec, tracer);
        CHECK(bipartite_parity_forbidden(spec, start, tracer, 3));
        CHECK_FALSE(bipartite_parity_forbidden(spec, start, tracer, 4));
    }
    for (const auto& name : {"triangular", "fcc"}) {
        LatticeSpec spec = build_builtin(name, 3);
        const SiteRef tracer = default_tracer(spec);
        const SiteRef start = default_start(spec, tracer);
        CHECK_FALSE(bipartite_parity_forbidden(spec, start, tracer, 3));
    }
}

TEST_CASE("lattice JSON round trip preserves the spec") {
    for (const auto& [name, z] : kExpectedZ) {
        LatticeConfig config = builtin_config(name);
        LatticeConfig back = lattice_config_from_json(lattice_config_to_json(config));
        CHECK(back.spec.name == name);
        CHECK(back.spec.dimension == config.spec.dimension);
        REQUIRE(back.spec.stencil.size() == config.spec.stencil.size());
        for (std::size_t s = 0; s < config.spec.stencil.size(); ++s) {
            REQUIRE(back.spec.stencil[s].size() == config.spec.stencil[s].size());
            CHECK(static_cast<int>(back.spec.stencil[s].size()) == z);
            for (std::size_t e = 0; e < config.spec.stencil[s].size(); ++e) {
                CHECK(back.spec.stencil[s][e].cell_offset == config.spec.stencil[s][e].cell_offset);
                CHECK(back.spec.stencil[s][e].label == config.spec.stencil[s][e].label);
            }
        }
        CHECK(back.model.uniform);
    }
}

TEST_CASE("user lattice config parses with barriers and temperature") {
    LatticeConfig chain = chain_config();
    chain.model.uniform = false;
    chain.model.temperature = 2.0;
    chain.model.barriers = {{"+x", 0.0}, {"-x", 0.5}};
    LatticeConfig back = lattice_config_from_json(lattice_config_to_json(chain));
    CHECK_FALSE(back.model.uniform);
    CHECK(back.model.temperature == 2.0);
    CHECK(back.model.barriers.at("-x") == 0.5);
    CHECK(back.spec.extent.defined);
    CHECK(back.spec.site_count() == 9);
    CHECK_THROWS_AS(lattice_config_from_json("{not json"), ConfigError);
}

TEST_CASE("clipped boundary sites renormalize over available neighbors") {
    LatticeConfig chain = chain_config();
    HopModel uniform;
    auto p_end = hop_probabilities(chain.spec, uniform, SiteRef{{-4, 0, 0}, 0});
    REQUIRE(p_end.size() == 1);
    CHECK(p_end[0] == 1.0);
    auto p_mid = hop_probabilities(chain.spec, uniform, SiteRef{{0, 0, 0}, 0});
    REQUIRE(p_mid.size() == 2);
    CHECK(p_mid[0] == 0.5);
}

}  // TEST_SUITE
