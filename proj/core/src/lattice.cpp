#include "corrfactor/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace corrfactor {

namespace {

Vec3 add(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

StencilEntry entry(std::array<int, 3> off, int to, std::string label) {
    StencilEntry e;
    e.cell_offset = off;
    e.to_sublattice = to;
    e.label = std::move(label);
    return e;
}

}  // namespace

void LatticeSpec::finalize() {
    if (dimension != 2 && dimension != 3)
        throw ConfigError("lattice dimension must be 2 or 3, got " + std::to_string(dimension));
    if (static_cast<int>(basis.size()) != dimension)
        throw ConfigError("lattice '" + name + "': expected " + std::to_string(dimension) +
                          " basis vectors, got " + std::to_string(basis.size()));
    if (sublattice_offsets.empty()) sublattice_offsets.push_back({0.0, 0.0, 0.0});
    if (stencil.size() != sublattice_offsets.size())
        throw ConfigError("lattice '" + name + "': stencil count " + std::to_string(stencil.size()) +
                          " does not match sublattice count " +
                          std::to_string(sublattice_offsets.size()));

    const int ns = num_sublattices();
    for (int s = 0; s < ns; ++s) {
        if (coordination(s) < 2)
            throw ConfigError("lattice '" + name + "': sublattice " + std::to_string(s) +
                              " has coordination < 2");
        for (auto& e : stencil[s]) {
            if (e.to_sublattice < 0 || e.to_sublattice >= ns)
                throw ConfigError("lattice '" + name + "': stencil entry '" + e.label +
                                  "' targets invalid sublattice " +
                                  std::to_string(e.to_sublattice));
            for (int a = dimension; a < 3; ++a)
                if (e.cell_offset[a] != 0)
                    throw ConfigError("lattice '" + name + "': stencil entry '" + e.label +
                                      "' uses axis beyond the lattice dimension");
            Vec3 delta = sub(sublattice_offsets[e.to_sublattice], sublattice_offsets[s]);
            for (int a = 0; a < dimension; ++a)
                delta = add(delta, {basis[a][0] * e.cell_offset[a], basis[a][1] * e.cell_offset[a],
                                    basis[a][2] * e.cell_offset[a]});
            e.bond_length = norm(delta);
            if (e.bond_length <= 0.0)
                throw ConfigError("lattice '" + name + "': stencil entry '" + e.label +
                                  "' has zero bond length");
            e.direction = {delta[0] / e.bond_length, delta[1] / e.bond_length,
                           delta[2] / e.bond_length};
        }
    }

    // Symmetric neighbor relation: each entry must have a reverse entry.
    for (int s = 0; s < ns; ++s)
        for (const auto& e : stencil[s]) {
            bool found = false;
            for (const auto& r : stencil[e.to_sublattice])
                if (r.to_sublattice == s && r.cell_offset[0] == -e.cell_offset[0] &&
                    r.cell_offset[1] == -e.cell_offset[1] && r.cell_offset[2] == -e.cell_offset[2]) {
                    found = true;
                    break;
                }
            if (!found)
                throw ConfigError("lattice '" + name + "': neighbor relation is not symmetric at '" +
                                  e.label + "'");
        }

    reach_neg_.assign(ns, {0, 0, 0});
    reach_pos_.assign(ns, {0, 0, 0});
    for (int s = 0; s < ns; ++s)
        for (const auto& e : stencil[s])
            for (int a = 0; a < 3; ++a) {
                reach_pos_[s][a] = std::max(reach_pos_[s][a], e.cell_offset[a]);
                reach_neg_[s][a] = std::max(reach_neg_[s][a], -e.cell_offset[a]);
            }

    if (extent.defined) {
        num_cells_ = 1;
        for (int a = 0; a < 3; ++a) {
            if (a < dimension && extent.hi[a] < extent.lo[a])
                throw ConfigError("lattice '" + name + "': empty extent on axis " + std::to_string(a));
            if (a >= dimension) {
                extent.lo[a] = 0;
                extent.hi[a] = 0;
            }
            num_cells_ *= static_cast<std::size_t>(extent.hi[a] - extent.lo[a] + 1);
        }
        strides_ = {1, static_cast<std::size_t>(extent.hi[0] - extent.lo[0] + 1), 0};
        strides_[2] = strides_[1] * static_cast<std::size_t>(extent.hi[1] - extent.lo[1] + 1);
    } else {
        num_cells_ = 0;
    }
}

Vec3 LatticeSpec::position(const SiteRef& s) const {
    Vec3 p = sublattice_offsets.at(s.sublattice);
    for (int a = 0; a < dimension; ++a)
        p = add(p, {basis[a][0] * s.cell[a], basis[a][1] * s.cell[a], basis[a][2] * s.cell[a]});
    return p;
}

bool LatticeSpec::contains(const SiteRef& s) const {
    if (!extent.defined) return false;
    if (s.sublattice < 0 || s.sublattice >= num_sublattices()) return false;
    for (int a = 0; a < 3; ++a)
        if (s.cell[a] < extent.lo[a] || s.cell[a] > extent.hi[a]) return false;
    return true;
}

bool LatticeSpec::is_interior(const SiteRef& s) const {
    if (!contains(s)) return false;
    for (int a = 0; a < 3; ++a)
        if (s.cell[a] - extent.lo[a] < reach_neg_[s.sublattice][a] ||
            extent.hi[a] - s.cell[a] < reach_pos_[s.sublattice][a])
            return false;
    return true;
}

std::size_t LatticeSpec::site_index(const SiteRef& s) const {
    if (!contains(s)) throw BoundsError("site outside lattice extent");
    const std::size_t cell = static_cast<std::size_t>(s.cell[0] - extent.lo[0]) +
                             static_cast<std::size_t>(s.cell[1] - extent.lo[1]) * strides_[1] +
                             static_cast<std::size_t>(s.cell[2] - extent.lo[2]) * strides_[2];
    return static_cast<std::size_t>(s.sublattice) * num_cells_ + cell;
}

SiteRef LatticeSpec::site_at(std::size_t index) const {
    SiteRef s;
    s.sublattice = static_cast<int>(index / num_cells_);
    std::size_t cell = index % num_cells_;
    s.cell[2] = extent.lo[2] + static_cast<int>(cell / strides_[2]);
    cell %= strides_[2];
    s.cell[1] = extent.lo[1] + static_cast<int>(cell / strides_[1]);
    s.cell[0] = extent.lo[0] + static_cast<int>(cell % strides_[1]);
    return s;
}

std::vector<LatticeSpec::Neighbor> LatticeSpec::neighbors(const SiteRef& site) const {
    if (!contains(site)) throw BoundsError("neighbors() of a site outside the lattice extent");
    std::vector<Neighbor> out;
    const auto& entries = stencil[site.sublattice];
    out.reserve(entries.size());
    for (int i = 0; i < static_cast<int>(entries.size()); ++i) {
        SiteRef t = offset_site(site, entries[i]);
        if (contains(t)) out.push_back({t, i});
    }
    return out;
}

int LatticeSpec::entry_to(const SiteRef& from, const SiteRef& to) const {
    const auto& entries = stencil.at(from.sublattice);
    for (int i = 0; i < static_cast<int>(entries.size()); ++i) {
        const auto& e = entries[i];
        if (e.to_sublattice == to.sublattice && from.cell[0] + e.cell_offset[0] == to.cell[0] &&
            from.cell[1] + e.cell_offset[1] == to.cell[1] &&
            from.cell[2] + e.cell_offset[2] == to.cell[2])
            return i;
    }
    return -1;
}

std::string LatticeSpec::site_label(const SiteRef& s) const {
    char buf[96];
    if (dimension == 2)
        std::snprintf(buf, sizeof buf, "(%d,%d)", s.cell[0], s.cell[1]);
    else
        std::snprintf(buf, sizeof buf, "(%d,%d,%d)", s.cell[0], s.cell[1], s.cell[2]);
    std::string out = buf;
    if (num_sublattices() > 1) out += "/" + std::to_string(s.sublattice);
    return out;
}

const std::vector<std::string>& builtin_families() {
    static const std::vector<std::string> names = {"honeycomb", "square", "triangular",
                                                   "diamond",   "sc",     "bcc",
                                                   "fcc"};
    return names;
}

bool is_builtin_family(const std::string& name) {
    const auto& fams = builtin_families();
    return std::find(fams.begin(), fams.end(), name) != fams.end();
}

const std::map<std::string, BuiltinReference>& builtin_references() {
    static const std::map<std::string, BuiltinReference> refs = {
        {"honeycomb", {1.0 / 3.0, "1/3"}},
        {"square", {0.467, "0.467"}},
        {"triangular", {0.56006, "0.56006"}},
        {"diamond", {0.5, "1/2"}},
        {"sc", {0.6531, "0.6531"}},
        {"bcc", {0.7272, "0.7272 (0.72149)"}},
        {"fcc", {0.7815, "0.7815"}},
    };
    return refs;
}

LatticeSpec builtin_family(const std::string& name) {
    const double h = std::sqrt(3.0) / 2.0;
    LatticeSpec s;
    s.name = name;
    if (name == "square") {
        s.dimension = 2;
        s.basis = {{1, 0, 0}, {0, 1, 0}};
        s.sublattice_offsets = {{0, 0, 0}};
        s.stencil = {{entry({1, 0, 0}, 0, "+x"), entry({-1, 0, 0}, 0, "-x"),
                      entry({0, 1, 0}, 0, "+y"), entry({0, -1, 0}, 0, "-y")}};
    } else if (name == "triangular") {
        s.dimension = 2;
        s.basis = {{1, 0, 0}, {0.5, h, 0}};
        s.sublattice_offsets = {{0, 0, 0}};
        s.stencil = {{entry({1, 0, 0}, 0, "+a"), entry({-1, 0, 0}, 0, "-a"),
                      entry({0, 1, 0}, 0, "+b"), entry({0, -1, 0}, 0, "-b"),
                      entry({-1, 1, 0}, 0, "+c"), entry({1, -1, 0}, 0, "-c")}};
    } else if (name == "honeycomb") {
        s.dimension = 2;
        s.basis = {{1.5, h, 0}, {1.5, -h, 0}};
        s.sublattice_offsets = {{0, 0, 0}, {1, 0, 0}};
        s.stencil = {{entry({0, 0, 0}, 1, "e1"), entry({-1, 0, 0}, 1, "e2"),
                      entry({0, -1, 0}, 1, "e3")},
                     {entry({0, 0, 0}, 0, "-e1"), entry({1, 0, 0}, 0, "-e2"),
                      entry({0, 1, 0}, 0, "-e3")}};
    } else if (name == "sc") {
        s.dimension = 3;
        s.basis = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
        s.sublattice_offsets = {{0, 0, 0}};
        s.stencil = {{entry({1, 0, 0}, 0, "+x"), entry({-1, 0, 0}, 0, "-x"),
                      entry({0, 1, 0}, 0, "+y"), entry({0, -1, 0}, 0, "-y"),
                      entry({0, 0, 1}, 0, "+z"), entry({0, 0, -1}, 0, "-z")}};
    } else if (name == "bcc") {
        s.dimension = 3;
        s.basis = {{-0.5, 0.5, 0.5}, {0.5, -0.5, 0.5}, {0.5, 0.5, -0.5}};
        s.sublattice_offsets = {{0, 0, 0}};
        s.stencil = {{entry({1, 0, 0}, 0, "+c1"), entry({-1, 0, 0}, 0, "-c1"),
                      entry({0, 1, 0}, 0, "+c2"), entry({0, -1, 0}, 0, "-c2"),
                      entry({0, 0, 1}, 0, "+c3"), entry({0, 0, -1}, 0, "-c3"),
                      entry({1, 1, 1}, 0, "+c4"), entry({-1, -1, -1}, 0, "-c4")}};
    } else if (name == "fcc") {
        s.dimension = 3;
        s.basis = {{0, 0.5, 0.5}, {0.5, 0, 0.5}, {0.5, 0.5, 0}};
        s.sublattice_offsets = {{0, 0, 0}};
        s.stencil = {{entry({1, 0, 0}, 0, "+d1"), entry({-1, 0, 0}, 0, "-d1"),
                      entry({0, 1, 0}, 0, "+d2"), entry({0, -1, 0}, 0, "-d2"),
                      entry({0, 0, 1}, 0, "+d3"), entry({0, 0, -1}, 0, "-d3"),
                      entry({1, -1, 0}, 0, "+d4"), entry({-1, 1, 0}, 0, "-d4"),
                      entry({0, 1, -1}, 0, "+d5"), entry({0, -1, 1}, 0, "-d5"),
                      entry({1, 0, -1}, 0, "+d6"), entry({-1, 0, 1}, 0, "-d6")}};
    } else if (name == "diamond") {
        s.dimension = 3;
        s.basis = {{0, 0.5, 0.5}, {0.5, 0, 0.5}, {0.5, 0.5, 0}};
        s.sublattice_offsets = {{0, 0, 0}, {0.25, 0.25, 0.25}};
        s.stencil = {{entry({0, 0, 0}, 1, "t1"), entry({-1, 0, 0}, 1, "t2"),
                      entry({0, -1, 0}, 1, "t3"), entry({0, 0, -1}, 1, "t4")},
                     {entry({0, 0, 0}, 0, "-t1"), entry({1, 0, 0}, 0, "-t2"),
                      entry({0, 1, 0}, 0, "-t3"), entry({0, 0, 1}, 0, "-t4")}};
    } else {
        throw ConfigError("unknown lattice family '" + name + "' (expected one of honeycomb, square, triangular, diamond, sc, bcc, fcc)");
    }
    return s;
}

void auto_size(LatticeSpec& spec, int n_max) {
    if (n_max < 2) throw std::domain_error("n_max must be >= 2");
    for (int a = 0; a < 3; ++a) {
        spec.extent.lo[a] = (a < spec.dimension) ? -n_max : 0;
        spec.extent.hi[a] = (a < spec.dimension) ? n_max : 0;
    }
    spec.extent.defined = true;
    spec.boundary = BoundaryPolicy::AutoSized;
}

LatticeSpec build_builtin(const std::string& name, int n_max) {
    LatticeSpec spec = builtin_family(name);
    auto_size(spec, n_max);
    spec.finalize();
    return spec;
}

SiteRef default_tracer(const LatticeSpec& spec) {
    if (!spec.extent.defined) throw ConfigError("default_tracer needs a sized lattice");
    SiteRef s;
    for (int a = 0; a < 3; ++a) s.cell[a] = (spec.extent.lo[a] + spec.extent.hi[a]) / 2;
    return s;
}

SiteRef default_start(const LatticeSpec& spec, const SiteRef& tracer) {
    auto nb = spec.neighbors(tracer);
    if (nb.empty()) throw ConfigError("tracer site has no in-extent neighbors");
    return nb.front().site;
}

Vec3 flow_from(const LatticeSpec& spec, const SiteRef& start, const SiteRef& tracer) {
    const int e = spec.entry_to(start, tracer);
    if (e < 0) throw std::domain_error("flow_from: start is not adjacent to tracer");
    return spec.stencil[start.sublattice][e].direction;
}

double cos_theta(const LatticeSpec& spec, const SiteRef& tracer, const SiteRef& vacancy_neighbor,
                 const Vec3& flow) {
    const double n = norm(flow);
    if (std::abs(n - 1.0) > 1e-9) throw std::domain_error("cos_theta: flow must be a unit vector");
    const int e = spec.entry_to(tracer, vacancy_neighbor);
    if (e < 0) throw std::domain_error("cos_theta: sites are not lattice neighbors");
    return dot(flow, spec.stencil[tracer.sublattice][e].direction);
}

bool bipartite_parity_forbidden(const LatticeSpec& spec, const SiteRef& start,
                                const SiteRef& tracer, int n) {
    // 2-color the site graph by BFS from the tracer
    std::vector<signed char> color(spec.site_count(), -1);
    std::vector<std::size_t> queue{spec.site_index(tracer)};
    color[queue[0]] = 0;
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const std::size_t cur = queue[head];
        const signed char next_color = color[cur] ^ 1;
        for (const auto& nb : spec.neighbors(spec.site_at(cur))) {
            const std::size_t ni = spec.site_index(nb.site);
            if (color[ni] < 0) {
                color[ni] = next_color;
                queue.push_back(ni);
            } else if (color[ni] == color[cur]) {
                return false;  // odd cycle: both parities reachable
            }
        }
    }
    // start and tracer are adjacent (opposite colors); n-1 hops must flip
    // the color an odd number of times
    (void)start;
    return (n - 1) % 2 == 0;
}

namespace {

double barrier_for(const HopModel& model, const std::string& label) {
    auto it = model.barriers.find(label);
    if (it != model.barriers.end()) return it->second;
    it = model.barriers.find("*");
    if (it != model.barriers.end()) return it->second;
    throw ConfigError("no barrier energy for hop direction '" + label + "' and no '*' wildcard");
}

/// Softmax of -dE/T over a set of stencil entries.
std::vector<double> boltzmann(const LatticeSpec& spec, const HopModel& model, int sublattice,
                              const std::vector<int>& entries) {
    if (model.temperature <= 0.0) throw ConfigError("hop model temperature must be > 0");
    std::vector<double> p(entries.size());
    if (model.uniform) {
        std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(entries.size()));
        return p;
    }
    std::vector<double> de(entries.size());
    double de_min = 0.0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        de[i] = barrier_for(model, spec.stencil[sublattice][entries[i]].label);
        de_min = (i == 0) ? de[i] : std::min(de_min, de[i]);
    }
    double z = 0.0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        p[i] = std::exp(-(de[i] - de_min) / model.temperature);
        z += p[i];
    }
    for (auto& v : p) v /= z;
    return p;
}

}  // namespace

std::vector<double> hop_probabilities(const LatticeSpec& spec, const HopModel& model,
                                      const SiteRef& site) {
    auto nb = spec.neighbors(site);
    std::vector<int> entries;
    entries.reserve(nb.size());
    for (const auto& n : nb) entries.push_back(n.entry);
    return boltzmann(spec, model, site.sublattice, entries);
}

HopTable::HopTable(const LatticeSpec& spec, const HopModel& model) : spec_(&spec), model_(model) {
    const int ns = spec.num_sublattices();
    interior_.resize(ns);
    interior_log_.resize(ns);
    interior_cum_.resize(ns);
    for (int s = 0; s < ns; ++s) {
        std::vector<int> all(spec.coordination(s));
        for (int i = 0; i < static_cast<int>(all.size()); ++i) all[i] = i;
        interior_[s] = boltzmann(spec, model, s, all);
        interior_log_[s].resize(all.size());
        interior_cum_[s].resize(all.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < all.size(); ++i) {
            interior_log_[s][i] = std::log(interior_[s][i]);
            acc += interior_[s][i];
            interior_cum_[s][i] = acc;
        }
        interior_cum_[s].back() = 1.0;
    }
}

std::vector<double> HopTable::at_site(const SiteRef& s) const {
    if (spec_->is_interior(s)) {
        // expand to stencil order (identical: all entries available)
        return interior_[s.sublattice];
    }
    auto nb = spec_->neighbors(s);
    std::vector<int> entries;
    entries.reserve(nb.size());
    for (const auto& n : nb) entries.push_back(n.entry);
    return boltzmann(*spec_, model_, s.sublattice, entries);
}

}  // namespace corrfactor
