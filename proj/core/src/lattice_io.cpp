#include "corrfactor/lattice_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json_util.hpp"

namespace corrfactor {

namespace detail {

nlohmann::json vec_to_json(const Vec3& v, int dimension) {
    nlohmann::json out = nlohmann::json::array();
    for (int a = 0; a < dimension; ++a) out.push_back(v[a]);
    return out;
}

Vec3 vec_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() < 1 || j.size() > 3)
        throw ConfigError("expected a vector of 1..3 components");
    Vec3 v{0.0, 0.0, 0.0};
    for (std::size_t a = 0; a < j.size(); ++a) v[a] = j[a].get<double>();
    return v;
}

nlohmann::json site_to_json(const SiteRef& s, int dimension) {
    nlohmann::json out;
    out["cell"] = nlohmann::json::array();
    for (int a = 0; a < dimension; ++a) out["cell"].push_back(s.cell[a]);
    out["sublattice"] = s.sublattice;
    return out;
}

SiteRef site_from_json(const nlohmann::json& j) {
    SiteRef s;
    const auto& cell = j.at("cell");
    for (std::size_t a = 0; a < cell.size() && a < 3; ++a) s.cell[a] = cell[a].get<int>();
    s.sublattice = j.value("sublattice", 0);
    return s;
}

nlohmann::json config_to_json(const LatticeConfig& config) {
    const LatticeSpec& spec = config.spec;
    nlohmann::json j;
    j["name"] = spec.name;
    j["dimension"] = spec.dimension;
    j["basis_vectors"] = nlohmann::json::array();
    for (const auto& b : spec.basis) j["basis_vectors"].push_back(vec_to_json(b, spec.dimension));
    j["sublattice_offsets"] = nlohmann::json::array();
    for (const auto& o : spec.sublattice_offsets)
        j["sublattice_offsets"].push_back(vec_to_json(o, spec.dimension));
    j["stencil"] = nlohmann::json::array();
    for (const auto& entries : spec.stencil) {
        nlohmann::json per_subl = nlohmann::json::array();
        for (const auto& e : entries) {
            nlohmann::json je;
            je["cell_offset"] = nlohmann::json::array();
            for (int a = 0; a < spec.dimension; ++a) je["cell_offset"].push_back(e.cell_offset[a]);
            je["to_sublattice"] = e.to_sublattice;
            je["label"] = e.label;
            per_subl.push_back(std::move(je));
        }
        j["stencil"].push_back(std::move(per_subl));
    }
    if (spec.extent.defined) {
        nlohmann::json ext;
        ext["lo"] = nlohmann::json::array();
        ext["hi"] = nlohmann::json::array();
        for (int a = 0; a < spec.dimension; ++a) {
            ext["lo"].push_back(spec.extent.lo[a]);
            ext["hi"].push_back(spec.extent.hi[a]);
        }
        j["extent"] = std::move(ext);
    }
    j["boundary"] = spec.boundary == BoundaryPolicy::AutoSized ? "auto-sized" : "open";
    nlohmann::json model;
    model["uniform"] = config.model.uniform;
    model["temperature"] = config.model.temperature;
    if (!config.model.barriers.empty()) {
        nlohmann::json barriers = nlohmann::json::object();
        for (const auto& [label, de] : config.model.barriers) barriers[label] = de;
        model["barriers"] = std::move(barriers);
    }
    j["hop_model"] = std::move(model);
    return j;
}

LatticeConfig config_from_json(const nlohmann::json& j) {
    LatticeConfig config;
    LatticeSpec& spec = config.spec;
    try {
        spec.name = j.value("name", "custom");
        spec.dimension = j.at("dimension").get<int>();
        for (const auto& b : j.at("basis_vectors")) spec.basis.push_back(vec_from_json(b));
        if (j.contains("sublattice_offsets"))
            for (const auto& o : j.at("sublattice_offsets"))
                spec.sublattice_offsets.push_back(vec_from_json(o));
        for (const auto& per_subl : j.at("stencil")) {
            std::vector<StencilEntry> entries;
            for (const auto& je : per_subl) {
                StencilEntry e;
                const auto& off = je.at("cell_offset");
                for (std::size_t a = 0; a < off.size() && a < 3; ++a)
                    e.cell_offset[a] = off[a].get<int>();
                e.to_sublattice = je.value("to_sublattice", 0);
                e.label = je.at("label").get<std::string>();
                entries.push_back(std::move(e));
            }
            spec.stencil.push_back(std::move(entries));
        }
        if (j.contains("extent")) {
            const auto& ext = j.at("extent");
            const auto& lo = ext.at("lo");
            const auto& hi = ext.at("hi");
            for (std::size_t a = 0; a < lo.size() && a < 3; ++a) {
                spec.extent.lo[a] = lo[a].get<int>();
                spec.extent.hi[a] = hi[a].get<int>();
            }
            spec.extent.defined = true;
        }
        const std::string boundary = j.value("boundary", "open");
        spec.boundary =
            boundary == "auto-sized" ? BoundaryPolicy::AutoSized : BoundaryPolicy::Open;
        if (j.contains("hop_model")) {
            const auto& model = j.at("hop_model");
            config.model.uniform = model.value("uniform", true);
            config.model.temperature = model.value("temperature", 1.0);
            if (model.contains("barriers"))
                for (const auto& [label, de] : model.at("barriers").items())
                    config.model.barriers[label] = de.get<double>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed lattice config: ") + e.what());
    }
    if (spec.extent.defined) spec.finalize();
    return config;
}

}  // namespace detail

std::string lattice_config_to_json(const LatticeConfig& config, int indent) {
    return detail::config_to_json(config).dump(indent);
}

LatticeConfig lattice_config_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
    return detail::config_from_json(j);
}

LatticeConfig load_lattice_config(const std::string& path) {
    return lattice_config_from_json(read_text_file(path));
}

void save_lattice_config(const LatticeConfig& config, const std::string& path) {
    write_text_file_atomic(path, lattice_config_to_json(config) + "\n");
}

LatticeConfig builtin_config(const std::string& name) {
    LatticeConfig config;
    config.spec = builtin_family(name);
    config.model.uniform = true;
    config.model.temperature = 1.0;
    return config;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write file: " + tmp);
        out << content;
        if (!out.good()) {
            out.close();
            std::remove(tmp.c_str());
            throw std::runtime_error("write failed: " + tmp);
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw std::runtime_error("cannot move output into place: " + path);
    }
}

}  // namespace corrfactor
