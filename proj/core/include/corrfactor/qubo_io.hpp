#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "corrfactor/ising.hpp"
#include "corrfactor/lattice_io.hpp"

namespace corrfactor {

/// Writes a problem as
///   (1) a QUBO coefficient file: header `p qubo 0 <vars> <linear> <quadratic>`
///       then `i i value` linear lines and `i j value` (i < j) quadratic
///       lines, 17 significant digits;
///   (2) a JSON sidecar mapping variable ids to (site, step) plus penalty,
///       constant offset and the full lattice config, enough to decode
///       externally produced samples.
void export_qubo(const LatticeConfig& config, const IsingProblem& problem,
                 const std::string& qubo_path, const std::string& sidecar_path);

struct ParsedQubo {
    std::size_t num_vars = 0;
    std::vector<std::pair<std::uint32_t, double>> linear;
    std::vector<std::pair<std::pair<std::uint32_t, std::uint32_t>, double>> quadratic;

    /// Energy without the constant offset (the file does not carry it).
    double energy(const SpinConfig& config) const;
};

ParsedQubo parse_qubo_file(const std::string& path);

/// Sidecar contents: the reconstructed lattice config plus the problem
/// parameters needed to rebuild or decode.
struct SidecarInfo {
    LatticeConfig config;  // finalized (extent included)
    int n_steps = 0;
    double penalty = 0.0;
    double constant_offset = 0.0;
    std::size_t num_variables = 0;
    SiteRef start, tracer;
};

SidecarInfo load_sidecar(const std::string& path);

/// Rebuilds the Ising problem a sidecar describes (bit-identical variable
/// order; construction is deterministic).
IsingProblem problem_from_sidecar(const SidecarInfo& info);

/// Parses a sample line of '0'/'1' characters (whitespace ignored) into a
/// SpinConfig. Throws ConfigError when characters or length are wrong.
SpinConfig parse_sample_line(const std::string& line, std::size_t num_vars);

}  // namespace corrfactor
