#pragma once

// Internal nlohmann-based helpers shared by the I/O translation units.
// Public headers stay free of the vendored JSON dependency.

#include <nlohmann/json.hpp>

#include "corrfactor/lattice_io.hpp"

namespace corrfactor::detail {

nlohmann::json vec_to_json(const Vec3& v, int dimension);
Vec3 vec_from_json(const nlohmann::json& j);

nlohmann::json site_to_json(const SiteRef& s, int dimension);
SiteRef site_from_json(const nlohmann::json& j);

nlohmann::json config_to_json(const LatticeConfig& config);
LatticeConfig config_from_json(const nlohmann::json& j);

}  // namespace corrfactor::detail
