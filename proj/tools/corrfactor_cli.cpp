// corrfactor: correlation factors of vacancy-mediated tracer diffusion.
//
// Subcommands: compute (single f estimate), table (convergence vs N_max),
// qubo (export trajectory encodings for external annealers), decode
// (evaluate externally produced samples), lattices (built-in catalogue).

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "corrfactor/correlation.hpp"
#include "corrfactor/lattice_io.hpp"
#include "corrfactor/qubo_io.hpp"
#include "corrfactor/version.hpp"

namespace {

using nlohmann::json;
using namespace corrfactor;

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;

std::string iso_timestamp() {
    char buf[32];
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string fmt_full(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

struct CommonFlags {
    std::string lattice = "square";
    std::string engine = "mu";
    std::string format = "text";
    std::string out;
    std::string barriers_path;
    std::string mode = "weight";
    std::uint64_t seed = 0;
    std::uint64_t walkers = 10'000'000;
    std::uint64_t restarts = 20'000;
    std::uint64_t stall_window = 50;
    int sweeps = 300;
    double temperature = 0.0;  // 0 = keep config value
    double penalty = 0.0;      // 0 = calibrated default
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_engine = true, bool with_out = true) {
    cmd->add_option("--lattice", f.lattice, "built-in family name or lattice config JSON path");
    if (with_engine)
        cmd->add_option("--engine", f.engine, "mu | crw | anneal | oracle")
            ->check(CLI::IsMember({"mu", "crw", "anneal", "oracle"}));
    cmd->add_option("--format", f.format, "text | json | csv")
        ->check(CLI::IsMember({"text", "json", "csv"}));
    if (with_out) cmd->add_option("--out", f.out, "write the report to this path instead of stdout");
    cmd->add_option("--seed", f.seed, "RNG seed for stochastic engines");
    cmd->add_option("--walkers", f.walkers, "CRW walker count");
    cmd->add_option("--restarts", f.restarts, "annealing restart budget");
    cmd->add_option("--sweeps", f.sweeps, "annealing sweeps per restart");
    cmd->add_option("--stall-window", f.stall_window,
                    "stop annealing after this many restarts with no new trajectory");
    cmd->add_option("--penalty", f.penalty, "constraint penalty (default: calibrated bound)");
    cmd->add_option("--temperature", f.temperature, "hop model temperature (energy units)");
    cmd->add_option("--barriers", f.barriers_path, "JSON file of direction-label -> barrier dE");
    cmd->add_option("--mode", f.mode, "MU field arithmetic: weight | count | log")
        ->check(CLI::IsMember({"weight", "count", "log"}));
}

/// Run setup shared by every command that computes something.
struct Scenario {
    LatticeConfig config;
    SiteRef tracer, start;
    Vec3 flow{};
    EngineOptions options;
    Engine engine = Engine::Mu;
};

Scenario make_scenario(const CommonFlags& f, int n_max) {
    Scenario s;
    if (is_builtin_family(f.lattice))
        s.config = builtin_config(f.lattice);
    else
        s.config = load_lattice_config(f.lattice);

    if (!s.config.spec.extent.defined) {
        auto_size(s.config.spec, n_max);
        s.config.spec.finalize();
    }
    if (f.temperature != 0.0) s.config.model.temperature = f.temperature;
    if (!f.barriers_path.empty()) {
        json j;
        try {
            j = json::parse(read_text_file(f.barriers_path));
        } catch (const json::exception& e) {
            throw ConfigError(f.barriers_path + ": invalid JSON: " + e.what());
        }
        s.config.model.uniform = false;
        for (const auto& [label, de] : j.items())
            s.config.model.barriers[label] = de.get<double>();
    }

    s.tracer = default_tracer(s.config.spec);
    s.start = default_start(s.config.spec, s.tracer);
    s.flow = flow_from(s.config.spec, s.start, s.tracer);

    if (auto e = engine_from_name(f.engine)) s.engine = *e;
    s.options.seed = f.seed;
    s.options.walkers = f.walkers;
    s.options.restarts = f.restarts;
    s.options.stall_window = f.stall_window;
    s.options.schedule.sweeps = f.sweeps;
    s.options.penalty = f.penalty;
    s.options.mu_mode = f.mode == "count" ? FieldMode::Count
                        : f.mode == "log" ? FieldMode::Log
                                          : FieldMode::Weight;
    return s;
}

json manifest_json(const std::string& command, const CommonFlags& f, int n_max) {
    json m;
    m["command"] = command;
    m["lattice"] = f.lattice;
    m["engine"] = f.engine;
    m["n_max"] = n_max;
    m["seed"] = f.seed;
    m["model"] = {{"temperature", f.temperature == 0.0 ? 1.0 : f.temperature},
                  {"barriers", f.barriers_path.empty() ? "uniform" : f.barriers_path},
                  {"mode", f.mode}};
    if (f.engine == "crw") m["walkers"] = f.walkers;
    if (f.engine == "anneal") {
        m["restarts"] = f.restarts;
        m["sweeps"] = f.sweeps;
        m["stall_window"] = f.stall_window;
        m["penalty"] = f.penalty;
    }
    m["tool_version"] = kVersion;
    m["timestamp"] = iso_timestamp();
    return m;
}

std::string manifest_csv_comments(const json& m) {
    std::ostringstream out;
    for (const auto& [k, v] : m.items())
        out << "# " << k << ": " << (v.is_string() ? v.get<std::string>() : v.dump()) << "\n";
    return out.str();
}

void emit(const CommonFlags& f, const std::string& content) {
    if (f.out.empty())
        std::cout << content;
    else
        write_text_file_atomic(f.out, content);
}

int cmd_compute(const CommonFlags& f, int n_max) {
    Scenario s = make_scenario(f, n_max);
    std::optional<std::uint64_t> walkers;
    PropagationResult arrivals = engine_arrivals(s.config.spec, s.config.model, s.start, s.tracer,
                                                 s.engine, n_max, s.options, &walkers);
    CorrelationEstimate est = estimate_correlation(arrivals, s.config.spec, s.tracer, s.flow,
                                                   engine_name(s.engine), n_max, walkers);
    json m = manifest_json("compute", f, n_max);
    if (f.format == "json") {
        json j;
        j["manifest"] = m;
        json e;
        e["engine"] = est.engine;
        e["n_max"] = est.n_max;
        e["avg_cos"] = est.avg_cos;
        e["f"] = est.f;
        e["captured_mass"] = est.captured_mass;
        if (est.stderr_f) e["stderr_f"] = *est.stderr_f;
        json per_n = json::object();
        for (const auto& [n, c] : est.per_n) per_n[std::to_string(n)] = c;
        e["per_n_cos"] = std::move(per_n);
        j["estimate"] = std::move(e);
        emit(f, j.dump(2) + "\n");
    } else if (f.format == "csv") {
        std::ostringstream out;
        out << manifest_csv_comments(m);
        out << "n_max,engine,f,captured_mass,stderr\n";
        out << est.n_max << ',' << est.engine << ',' << fmt_full(est.f) << ','
            << fmt_full(est.captured_mass) << ','
            << (est.stderr_f ? fmt_full(*est.stderr_f) : "") << "\n";
        emit(f, out.str());
    } else {
        std::ostringstream out;
        out << "correlation factor estimate\n";
        out << "  lattice:       " << s.config.spec.name << " (d=" << s.config.spec.dimension
            << ")\n";
        out << "  engine:        " << est.engine << "\n";
        out << "  n_max:         " << est.n_max << "\n";
        out << "  <cos theta>:   " << fmt_full(est.avg_cos) << "\n";
        out << "  f:             " << fmt_full(est.f) << "  (" << fmt3(est.f) << ")\n";
        out << "  captured mass: " << fmt_full(est.captured_mass) << "\n";
        if (est.stderr_f) out << "  stderr(f):     " << fmt_full(*est.stderr_f) << "\n";
        out << "  tool:          corrfactor " << kVersion << ", seed " << f.seed << "\n";
        emit(f, out.str());
    }
    return kExitOk;
}

int cmd_table(const CommonFlags& f, const std::vector<int>& n_list) {
    const int n_top = *std::max_element(n_list.begin(), n_list.end());
    Scenario s = make_scenario(f, n_top);
    auto rows = convergence_table(s.config.spec, s.config.model, s.start, s.tracer, s.flow,
                                  s.engine, n_list, s.options);
    json m = manifest_json("table", f, n_top);
    if (f.format == "json") {
        json j;
        j["manifest"] = m;
        json jr = json::array();
        for (const auto& r : rows) {
            json row;
            row["n_max"] = r.n_max;
            row["engine"] = r.engine;
            row["f"] = r.f ? json(*r.f) : json(nullptr);
            row["captured_mass"] = r.captured_mass;
            row["stderr"] = r.stderr_f ? json(*r.stderr_f) : json(nullptr);
            if (r.parity_dash) row["status"] = "parity-forbidden";
            if (r.refusal) row["status"] = "refused: " + *r.refusal;
            jr.push_back(std::move(row));
        }
        j["rows"] = std::move(jr);
        emit(f, j.dump(2) + "\n");
    } else if (f.format == "csv") {
        std::ostringstream out;
        out << manifest_csv_comments(m);
        out << "n_max,engine,f,captured_mass,stderr\n";
        std::vector<std::string> refusals;
        for (const auto& r : rows) {
            out << r.n_max << ',' << r.engine << ','
                << (r.f ? fmt_full(*r.f) : "-") << ',' << fmt_full(r.captured_mass) << ','
                << (r.stderr_f ? fmt_full(*r.stderr_f) : "-") << "\n";
            if (r.refusal)
                refusals.push_back("# refused: n_max=" + std::to_string(r.n_max) + ": " + *r.refusal);
        }
        for (const auto& line : refusals) out << line << "\n";
        emit(f, out.str());
    } else {
        std::ostringstream out;
        out << "N_max   f       captured   engine=" << f.engine << " lattice=" << f.lattice << "\n";
        for (const auto& r : rows) {
            char buf[128];
            if (r.f)
                std::snprintf(buf, sizeof buf, "%5d   %s   %.6f", r.n_max, fmt3(*r.f).c_str(),
                              r.captured_mass);
            else if (r.refusal)
                std::snprintf(buf, sizeof buf, "%5d   refused (%s)", r.n_max, r.refusal->c_str());
            else
                std::snprintf(buf, sizeof buf, "%5d   -", r.n_max);
            out << buf << "\n";
        }
        emit(f, out.str());
    }
    const bool any_ok = std::any_of(rows.begin(), rows.end(), [](const TableRow& r) {
        return r.f.has_value() || r.parity_dash;
    });
    if (!any_ok && !rows.empty()) {
        for (const auto& r : rows)
            if (r.refusal) {
                std::cerr << "corrfactor: " << *r.refusal << "\n";
                return kExitInfeasible;
            }
    }
    return kExitOk;
}

int cmd_qubo(const CommonFlags& f, int n_max, const std::string& out_prefix) {
    Scenario s = make_scenario(f, n_max);
    for (int n = 2; n <= n_max; ++n) {
        IsingProblem problem =
            build_ising(s.config.spec, s.config.model, s.start, s.tracer, n, f.penalty);
        const std::string base = out_prefix + "_N" + std::to_string(n);
        export_qubo(s.config, problem, base + ".qubo", base + ".json");
        std::cout << base << ".qubo  (" << problem.num_variables() << " variables, "
                  << problem.quadratic.size() << " couplings)\n"
                  << base << ".json\n";
    }
    return kExitOk;
}

int cmd_decode(const CommonFlags& f, const std::string& sidecar_path,
               const std::string& samples_path) {
    SidecarInfo info = load_sidecar(sidecar_path);
    const LatticeSpec& spec = info.config.spec;
    IsingProblem problem = problem_from_sidecar(info);

    std::istringstream in(read_text_file(samples_path));
    std::string line;
    std::size_t lineno = 0, invalid = 0, total = 0;
    std::set<std::vector<SiteRef>> distinct;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        SpinConfig cfg;
        try {
            cfg = parse_sample_line(line, info.num_variables);
        } catch (const ConfigError& e) {
            throw ConfigError(samples_path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        ++total;
        DecodedTrajectory dec = decode(spec, problem, cfg);
        if (dec.valid)
            distinct.insert(dec.sites);
        else
            ++invalid;
    }

    std::vector<TrajectoryRecord> records;
    for (const auto& sites : distinct)
        records.push_back(make_record(spec, info.config.model, sites, info.tracer));

    std::optional<std::size_t> oracle_count;
    try {
        auto oracle = enumerate_trajectories(spec, info.config.model, info.start, info.tracer,
                                             info.n_steps);
        std::size_t cnt = 0;
        for (const auto& r : oracle)
            if (static_cast<int>(r.sites.size()) == info.n_steps) ++cnt;
        oracle_count = cnt;
    } catch (const InfeasibleError&) {
        // coverage unavailable beyond the enumeration guard
    }

    json j;
    j["manifest"] = manifest_json("decode", f, info.n_steps);
    j["samples"] = total;
    j["invalid_samples"] = invalid;
    j["distinct_trajectories"] = distinct.size();
    if (oracle_count) {
        j["oracle_trajectories"] = *oracle_count;
        j["coverage"] = *oracle_count == 0
                            ? 1.0
                            : static_cast<double>(distinct.size()) / *oracle_count;
    }
    json traj = json::array();
    for (const auto& r : records) {
        json t;
        t["weight"] = r.weight;
        t["cos_theta"] = r.theta_cos;
        json sites = json::array();
        for (const auto& site : r.sites) sites.push_back(spec.site_label(site));
        t["sites"] = std::move(sites);
        traj.push_back(std::move(t));
    }
    j["trajectories"] = std::move(traj);
    if (!records.empty()) j["f"] = f_from_records(records);

    if (f.format == "json" || f.format == "csv") {
        emit(f, j.dump(2) + "\n");
    } else {
        std::ostringstream out;
        out << "decoded " << total << " samples: " << distinct.size()
            << " distinct valid trajectories, " << invalid << " invalid\n";
        if (oracle_count)
            out << "coverage vs oracle: " << distinct.size() << "/" << *oracle_count << " = "
                << fmt3(100.0 * j["coverage"].get<double>()) << "%\n";
        if (!records.empty())
            out << "f from decoded table: " << fmt_full(j["f"].get<double>()) << "\n";
        else
            out << "no valid trajectories\n";
        emit(f, out.str());
    }
    return kExitOk;
}

int cmd_lattices(const CommonFlags& f, const std::string& emit_name) {
    if (!emit_name.empty()) {
        if (!is_builtin_family(emit_name))
            throw ConfigError("unknown lattice family '" + emit_name + "'");
        LatticeConfig config = builtin_config(emit_name);
        const std::string text = lattice_config_to_json(config) + "\n";
        emit(f, text);
        return kExitOk;
    }
    std::ostringstream out;
    out << "family      d  sublattices  Z   reference f\n";
    for (const auto& name : builtin_families()) {
        LatticeSpec spec = builtin_family(name);
        char buf[128];
        std::snprintf(buf, sizeof buf, "%-10s  %d  %-11d  %-2d  %s\n", name.c_str(),
                      spec.dimension, static_cast<int>(spec.stencil.size()), spec.coordination(0),
                      builtin_references().at(name).display.c_str());
        out << buf;
    }
    emit(f, out.str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"correlation factors of vacancy-mediated tracer diffusion"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("corrfactor ") + corrfactor::kVersion);

    CommonFlags fc, ft, fq, fd, fl;
    int nmax_compute = 12, nmax_qubo = 2;
    int nmax_upto = 0;
    std::string nmax_list_raw, qubo_prefix = "problem", sidecar, samples, emit_name;

    CLI::App* compute = app.add_subcommand("compute", "single correlation-factor estimate");
    add_common(compute, fc);
    compute->add_option("--nmax", nmax_compute, "first-passage horizon N_max")->required();

    CLI::App* table = app.add_subcommand("table", "f convergence table vs N_max");
    add_common(table, ft);
    table->add_option("--nmax-upto", nmax_upto, "rows for every N_max in 2..N");
    table->add_option("--nmax-list", nmax_list_raw, "comma-separated N_max values");

    CLI::App* qubo = app.add_subcommand("qubo", "export trajectory QUBO instances");
    add_common(qubo, fq, false, false);
    qubo->add_option("--nmax", nmax_qubo, "emit one problem per N in 2..N_max")->required();
    qubo->add_option("--out", qubo_prefix, "output path prefix")->required();

    CLI::App* decode_cmd = app.add_subcommand("decode", "decode external annealer samples");
    add_common(decode_cmd, fd, false);
    decode_cmd->add_option("--sidecar", sidecar, "QUBO sidecar JSON path")->required();
    decode_cmd->add_option("--samples", samples, "file of 0/1 sample lines")->required();

    CLI::App* lattices = app.add_subcommand("lattices", "list built-ins or emit a JSON spec");
    add_common(lattices, fl, false);
    lattices->add_option("--emit", emit_name, "emit the JSON spec of this family");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (compute->parsed()) {
            if (nmax_compute < 2) throw corrfactor::ConfigError("--nmax must be >= 2");
            return cmd_compute(fc, nmax_compute);
        }
        if (table->parsed()) {
            std::vector<int> n_list;
            if (nmax_upto >= 2)
                for (int n = 2; n <= nmax_upto; ++n) n_list.push_back(n);
            if (!nmax_list_raw.empty()) {
                std::istringstream ss(nmax_list_raw);
                std::string tok;
                while (std::getline(ss, tok, ',')) n_list.push_back(std::stoi(tok));
            }
            if (n_list.empty())
                throw corrfactor::ConfigError("table needs --nmax-upto or --nmax-list");
            for (int n : n_list)
                if (n < 2) throw corrfactor::ConfigError("table N_max entries must be >= 2");
            return cmd_table(ft, n_list);
        }
        if (qubo->parsed()) {
            if (nmax_qubo < 2) throw corrfactor::ConfigError("--nmax must be >= 2");
            return cmd_qubo(fq, nmax_qubo, qubo_prefix);
        }
        if (decode_cmd->parsed()) return cmd_decode(fd, sidecar, samples);
        if (lattices->parsed()) return cmd_lattices(fl, emit_name);
    } catch (const corrfactor::InfeasibleError& e) {
        std::cerr << "corrfactor: infeasible: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const corrfactor::ConfigError& e) {
        std::cerr << "corrfactor: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "corrfactor: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "corrfactor: internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitConfig;
}
