#pragma once

#include <string>

#include "corrfactor/lattice.hpp"

namespace corrfactor {

/// A lattice description plus its hop model, as stored in the JSON config
/// format (basis_vectors, sublattice_offsets, stencil, barriers,
/// temperature, optional extent).
struct LatticeConfig {
    LatticeSpec spec;
    HopModel model;
};

std::string lattice_config_to_json(const LatticeConfig& config, int indent = 2);

/// Parses a config; the spec is finalized when it carries an extent.
/// Specs without an extent must be auto_size()d (then finalized) before use.
LatticeConfig lattice_config_from_json(const std::string& text);

LatticeConfig load_lattice_config(const std::string& path);
void save_lattice_config(const LatticeConfig& config, const std::string& path);

/// Built-in family with a uniform hop model and no extent attached.
LatticeConfig builtin_config(const std::string& name);

/// Whole-file helpers (atomic write: temp file + rename).
std::string read_text_file(const std::string& path);
void write_text_file_atomic(const std::string& path, const std::string& content);

}  // namespace corrfactor
