#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "corrfactor/errors.hpp"

namespace corrfactor {

using Vec3 = std::array<double, 3>;

/// A lattice site: integer cell coordinates plus a sublattice index.
/// Unused axes (beyond the spec dimension) stay zero.
struct SiteRef {
    std::array<int, 3> cell{0, 0, 0};
    int sublattice = 0;

    friend bool operator==(const SiteRef&, const SiteRef&) = default;
    friend auto operator<=>(const SiteRef&, const SiteRef&) = default;
};

/// One neighbor relation of a sublattice: hop into `cell_offset` relative
/// cell, landing on `to_sublattice`. `direction` is the unit Cartesian bond
/// vector, filled in by LatticeSpec::finalize().
struct StencilEntry {
    std::array<int, 3> cell_offset{0, 0, 0};
    int to_sublattice = 0;
    std::string label;
    Vec3 direction{0.0, 0.0, 0.0};
    double bond_length = 0.0;
};

/// Inclusive per-axis cell bounds. Sites outside are not part of the lattice.
struct Extent {
    std::array<int, 3> lo{0, 0, 0};
    std::array<int, 3> hi{0, 0, 0};
    bool defined = false;
};

enum class BoundaryPolicy { Open, AutoSized };

/// Lattice topology: translation cell, sublattice basis, neighbor stencils,
/// and a finite extent. Immutable after finalize(); safe to share across
/// threads.
class LatticeSpec {
public:
    std::string name;
    int dimension = 2;
    std::vector<Vec3> basis;                // dimension vectors
    std::vector<Vec3> sublattice_offsets;   // Cartesian offsets within a cell
    std::vector<std::vector<StencilEntry>> stencil;  // per sublattice
    Extent extent;
    BoundaryPolicy boundary = BoundaryPolicy::Open;

    /// Validates the invariants (symmetric neighbor relation, coordination
    /// >= 2, consistent sublattice indices), computes bond directions and
    /// indexing strides. Throws ConfigError on violation.
    void finalize();

    int num_sublattices() const { return static_cast<int>(stencil.size()); }
    int coordination(int sublattice) const { return static_cast<int>(stencil.at(sublattice).size()); }

    Vec3 position(const SiteRef& s) const;

    bool contains(const SiteRef& s) const;
    /// True when every stencil target of `s` lies inside the extent.
    bool is_interior(const SiteRef& s) const;

    std::size_t site_count() const { return num_cells_ * stencil.size(); }
    std::size_t site_index(const SiteRef& s) const;
    SiteRef site_at(std::size_t index) const;

    struct Neighbor {
        SiteRef site;
        int entry;  // index into stencil[origin.sublattice]
    };
    /// In-extent neighbors of `site`, in stencil order. Throws BoundsError
    /// if `site` itself is outside the extent.
    std::vector<Neighbor> neighbors(const SiteRef& site) const;

    /// Index of the stencil entry hopping `from` -> `to`, or -1 if the two
    /// sites are not adjacent.
    int entry_to(const SiteRef& from, const SiteRef& to) const;

    SiteRef offset_site(const SiteRef& from, const StencilEntry& e) const {
        return SiteRef{{from.cell[0] + e.cell_offset[0], from.cell[1] + e.cell_offset[1],
                        from.cell[2] + e.cell_offset[2]},
                       e.to_sublattice};
    }

    /// Renders a site as "(x,y)" or "(x,y,z)", with "/s" appended when the
    /// lattice has more than one sublattice.
    std::string site_label(const SiteRef& s) const;

private:
    std::array<std::size_t, 3> strides_{1, 1, 1};
    std::size_t num_cells_ = 0;
    // per sublattice, per axis: max negative / positive stencil reach
    std::vector<std::array<int, 3>> reach_neg_, reach_pos_;
    friend void auto_size(LatticeSpec&, int);
};

/// The seven built-in lattice families.
const std::vector<std::string>& builtin_families();
bool is_builtin_family(const std::string& name);

/// Exact correlation-factor reference values for the built-in families,
/// rendered as strings (bcc carries two published constants).
struct BuiltinReference {
    double f;
    std::string display;
};
const std::map<std::string, BuiltinReference>& builtin_references();

/// Stencil/basis definition of a built-in family with no extent attached.
LatticeSpec builtin_family(const std::string& name);

/// Sizes `spec` so that every trajectory of at most n_max-1 hops launched
/// from a neighbor of the central cell stays strictly inside the extent:
/// cells [-n_max, n_max] per axis (side 2*n_max + 1 >= n_max + 3).
void auto_size(LatticeSpec& spec, int n_max);

/// builtin_family + auto_size + finalize. Throws ConfigError for unknown
/// names, std::domain_error for n_max < 2.
LatticeSpec build_builtin(const std::string& name, int n_max);

/// Canonical tracer site: the central cell, sublattice 0.
SiteRef default_tracer(const LatticeSpec& spec);
/// Canonical vacancy start: the tracer's first stencil neighbor (the site
/// the tracer hopped away from).
SiteRef default_start(const LatticeSpec& spec, const SiteRef& tracer);

/// Unit vector of the initial tracer hop, start -> tracer. The direct
/// pull-back from `start` then sits at angle pi.
Vec3 flow_from(const LatticeSpec& spec, const SiteRef& start, const SiteRef& tracer);

/// Projection of the tracer->vacancy_neighbor bond onto `flow` (unit
/// vector). Throws std::domain_error when the pair is not adjacent or flow
/// is not unit length.
double cos_theta(const LatticeSpec& spec, const SiteRef& tracer,
                 const SiteRef& vacancy_neighbor, const Vec3& flow);

/// True when the site graph is two-colorable and an n-step first-passage
/// path start -> tracer is impossible by parity (start adjacent to tracer,
/// so n must be even on bipartite lattices).
bool bipartite_parity_forbidden(const LatticeSpec& spec, const SiteRef& start,
                                const SiteRef& tracer, int n);

/// Thermally activated hop rates. Barriers are keyed by stencil direction
/// label; "*" acts as a wildcard default. Temperature absorbs k_B.
struct HopModel {
    bool uniform = true;
    double temperature = 1.0;
    std::map<std::string, double> barriers;
};

/// Next-hop distribution at `site`, aligned with LatticeSpec::neighbors():
/// p(b|a) = exp(-dE[a->b]/T) / sum_g exp(-dE[a->g]/T) over the available
/// neighbors. The uniform shortcut yields exactly 1/Z.
std::vector<double> hop_probabilities(const LatticeSpec& spec, const HopModel& model,
                                      const SiteRef& site);

/// Precomputed per-sublattice hop distributions for interior sites, with a
/// slow path for boundary-clipped sites of explicitly sized lattices.
class HopTable {
public:
    HopTable(const LatticeSpec& spec, const HopModel& model);

    /// Distribution over the full stencil of sublattice `s` (interior sites).
    const std::vector<double>& interior(int s) const { return interior_[s]; }
    const std::vector<double>& interior_log(int s) const { return interior_log_[s]; }
    const std::vector<double>& interior_cumulative(int s) const { return interior_cum_[s]; }

    /// Distribution at an arbitrary site, aligned with neighbors(site).
    std::vector<double> at_site(const SiteRef& s) const;

    const LatticeSpec& spec() const { return *spec_; }

private:
    const LatticeSpec* spec_;
    HopModel model_;
    std::vector<std::vector<double>> interior_, interior_log_, interior_cum_;
};

}  // namespace corrfactor
