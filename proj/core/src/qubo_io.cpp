#include "corrfactor/qubo_io.hpp"

#include <cctype>
#include <cstdio>
#include <sstream>

#include "json_util.hpp"

namespace corrfactor {

namespace {

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void export_qubo(const LatticeConfig& config, const IsingProblem& problem,
                 const std::string& qubo_path, const std::string& sidecar_path) {
    const LatticeSpec& spec = config.spec;
    std::ostringstream body;
    std::size_t num_linear = 0;
    for (double v : problem.linear)
        if (v != 0.0) ++num_linear;

    body << "p qubo 0 " << problem.num_variables() << ' ' << num_linear << ' '
         << problem.quadratic.size() << '\n';
    for (std::size_t i = 0; i < problem.linear.size(); ++i)
        if (problem.linear[i] != 0.0) body << i << ' ' << i << ' ' << fmt17(problem.linear[i]) << '\n';
    for (const auto& [ij, v] : problem.quadratic)
        body << ij.first << ' ' << ij.second << ' ' << fmt17(v) << '\n';

    nlohmann::json side;
    side["format"] = "corrfactor-qubo-sidecar";
    side["version"] = 1;
    side["lattice"] = problem.lattice_name;
    side["n_steps"] = problem.n_steps;
    side["num_variables"] = problem.num_variables();
    side["penalty"] = problem.penalty;
    side["constant_offset"] = problem.constant_offset;
    side["start"] = detail::site_to_json(problem.start, spec.dimension);
    side["tracer"] = detail::site_to_json(problem.tracer, spec.dimension);
    nlohmann::json vars = nlohmann::json::array();
    for (std::size_t v = 0; v < problem.num_variables(); ++v) {
        const auto [site_idx, step] = problem.site_step_of(v);
        const SiteRef site = spec.site_at(site_idx);
        nlohmann::json jv;
        jv["id"] = v;
        jv["site"] = spec.site_label(site);
        jv["cell"] = nlohmann::json::array();
        for (int a = 0; a < spec.dimension; ++a) jv["cell"].push_back(site.cell[a]);
        jv["sublattice"] = site.sublattice;
        jv["step"] = step;
        vars.push_back(std::move(jv));
    }
    side["variables"] = std::move(vars);
    side["lattice_config"] = detail::config_to_json(config);

    write_text_file_atomic(qubo_path, body.str());
    write_text_file_atomic(sidecar_path, side.dump(2) + "\n");
}

double ParsedQubo::energy(const SpinConfig& config) const {
    if (config.bits.size() != num_vars)
        throw std::domain_error("spin configuration does not cover every variable");
    double e = 0.0;
    for (const auto& [i, v] : linear)
        if (config.bits[i]) e += v;
    for (const auto& [ij, v] : quadratic)
        if (config.bits[ij.first] && config.bits[ij.second]) e += v;
    return e;
}

ParsedQubo parse_qubo_file(const std::string& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    ParsedQubo out;
    bool header_seen = false;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == 'c') continue;
        std::istringstream ls(line);
        if (!header_seen) {
            std::string p, kind;
            std::size_t zero = 0, nlin = 0, nquad = 0;
            if (!(ls >> p >> kind >> zero >> out.num_vars >> nlin >> nquad) || p != "p" ||
                kind != "qubo")
                throw ConfigError(path + ":" + std::to_string(lineno) + ": bad QUBO header");
            header_seen = true;
            continue;
        }
        std::uint32_t i = 0, j = 0;
        double v = 0.0;
        if (!(ls >> i >> j >> v))
            throw ConfigError(path + ":" + std::to_string(lineno) + ": bad coefficient line");
        if (i >= out.num_vars || j >= out.num_vars)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": variable id out of range");
        if (i == j)
            out.linear.push_back({i, v});
        else
            out.quadratic.push_back({{std::min(i, j), std::max(i, j)}, v});
    }
    if (!header_seen) throw ConfigError(path + ": missing QUBO header");
    return out;
}

SidecarInfo load_sidecar(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": invalid JSON: " + e.what());
    }
    try {
        if (j.value("format", "") != "corrfactor-qubo-sidecar")
            throw ConfigError(path + ": not a corrfactor QUBO sidecar");
        SidecarInfo info;
        info.config = detail::config_from_json(j.at("lattice_config"));
        if (!info.config.spec.extent.defined)
            throw ConfigError(path + ": sidecar lattice config lacks an extent");
        info.n_steps = j.at("n_steps").get<int>();
        info.penalty = j.at("penalty").get<double>();
        info.constant_offset = j.at("constant_offset").get<double>();
        info.num_variables = j.at("num_variables").get<std::size_t>();
        info.start = detail::site_from_json(j.at("start"));
        info.tracer = detail::site_from_json(j.at("tracer"));
        if (info.num_variables != info.config.spec.site_count() * static_cast<std::size_t>(info.n_steps))
            throw ConfigError(path + ": variable count inconsistent with lattice and n_steps");
        return info;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": malformed sidecar: " + e.what());
    }
}

IsingProblem problem_from_sidecar(const SidecarInfo& info) {
    return build_ising(info.config.spec, info.config.model, info.start, info.tracer, info.n_steps,
                       info.penalty);
}

SpinConfig parse_sample_line(const std::string& line, std::size_t num_vars) {
    SpinConfig cfg;
    cfg.bits.reserve(num_vars);
    for (char ch : line) {
        if (std::isspace(static_cast<unsigned char>(ch))) continue;
        if (ch == '0')
            cfg.bits.push_back(0);
        else if (ch == '1')
            cfg.bits.push_back(1);
        else
            throw ConfigError(std::string("sample line contains '") + ch + "' (expected 0/1)");
    }
    if (cfg.bits.size() != num_vars)
        throw ConfigError("sample line has " + std::to_string(cfg.bits.size()) +
                          " bits, expected " + std::to_string(num_vars));
    return cfg;
}

}  // namespace corrfactor
