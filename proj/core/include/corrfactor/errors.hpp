#pragma once

#include <stdexcept>
#include <string>

namespace corrfactor {

/// Bad user input: unknown lattice family, malformed config file,
/// missing barrier entry, inconsistent stencil.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A requested computation exceeds a feasibility guard (enumeration cost,
/// brute-force variable count, annealing problem size).
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A site reference outside the lattice extent. Under auto-sizing these are
/// unreachable; seeing one thrown from an engine is an internal sizing bug.
class BoundsError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

}  // namespace corrfactor
