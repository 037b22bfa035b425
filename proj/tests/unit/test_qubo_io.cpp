#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "corrfactor/qubo_io.hpp"
#include "corrfactor/rng.hpp"

using namespace corrfactor;

namespace {

struct Exported {
    LatticeConfig config;
    IsingProblem problem;
    std::string qubo_path, sidecar_path;
};

Exported export_square(int n, const std::string& tag) {
    Exported e;
    e.config = builtin_config("square");
    auto_size(e.config.spec, n);
    e.config.spec.finalize();
    const SiteRef tracer = default_tracer(e.config.spec);
    const SiteRef start = default_start(e.config.spec, tracer);
    e.problem = build_ising(e.config.spec, e.config.model, start, tracer, n);
    e.qubo_path = "qubo_test_" + tag + ".qubo";
    e.sidecar_path = "qubo_test_" + tag + ".json";
    export_qubo(e.config, e.problem, e.qubo_path, e.sidecar_path);
    return e;
}

std::string first_line(const std::string& path) {
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    return line;
}

}  // namespace

TEST_SUITE("qubo_io") {

TEST_CASE("header counts variables and coefficients") {
    Exported e = export_square(2, "hdr");
    CHECK(first_line(e.qubo_path) ==
          "p qubo 0 50 50 " + std::to_string(e.problem.quadratic.size()));
    std::remove(e.qubo_path.c_str());
    std::remove(e.sidecar_path.c_str());
}

TEST_CASE("re-parsed coefficients reproduce in-memory energies on random configs") {
    Exported e = export_square(3, "rt");
    ParsedQubo parsed = parse_qubo_file(e.qubo_path);
    CHECK(parsed.num_vars == e.problem.num_variables());
    Philox4x32 rng(4242, 0);
    for (int trial = 0; trial < 100; ++trial) {
        SpinConfig cfg;
        cfg.bits.resize(parsed.num_vars);
        for (auto& b : cfg.bits) b = rng.next_u32() & 1;
        const double file_energy = parsed.energy(cfg) + e.problem.constant_offset;
        CHECK(file_energy == doctest::Approx(energy(e.problem, cfg)).epsilon(1e-12));
    }
    std::remove(e.qubo_path.c_str());
    std::remove(e.sidecar_path.c_str());
}

TEST_CASE("sidecar rebuilds the identical problem and decodes ground samples") {
    Exported e = export_square(2, "side");
    SidecarInfo info = load_sidecar(e.sidecar_path);
    CHECK(info.n_steps == 2);
    CHECK(info.penalty == e.problem.penalty);
    CHECK(info.num_variables == 50);
    IsingProblem rebuilt = problem_from_sidecar(info);
    CHECK(rebuilt.linear == e.problem.linear);
    CHECK(rebuilt.quadratic == e.problem.quadratic);
    CHECK(rebuilt.constant_offset == e.problem.constant_offset);

    // externally produced ground sample: bits as a 0/1 line
    std::string line(info.num_variables, '0');
    line[rebuilt.var_of(info.config.spec, info.start, 1)] = '1';
    line[rebuilt.var_of(info.config.spec, info.tracer, 2)] = '1';
    SpinConfig cfg = parse_sample_line(line, info.num_variables);
    DecodedTrajectory dec = decode(info.config.spec, rebuilt, cfg);
    REQUIRE(dec.valid);
    CHECK(dec.sites == std::vector<SiteRef>{info.start, info.tracer});

    std::remove(e.qubo_path.c_str());
    std::remove(e.sidecar_path.c_str());
}

TEST_CASE("sample lines tolerate whitespace and reject anything else") {
    CHECK_THROWS_AS(parse_sample_line("0102", 4), ConfigError);
    CHECK_THROWS_AS(parse_sample_line("01", 4), ConfigError);
    SpinConfig cfg = parse_sample_line(" 0 1\t10 ", 4);
    CHECK(cfg.bits == std::vector<std::uint8_t>{0, 1, 1, 0});
}

TEST_CASE("a problem with no quadratic terms still writes a well-formed file") {
    Exported e = export_square(2, "deg");
    IsingProblem lin = e.problem;
    lin.quadratic.clear();
    export_qubo(e.config, lin, "qubo_test_lin.qubo", "qubo_test_lin.json");
    CHECK(first_line("qubo_test_lin.qubo") == "p qubo 0 50 50 0");
    ParsedQubo parsed = parse_qubo_file("qubo_test_lin.qubo");
    CHECK(parsed.quadratic.empty());
    std::remove("qubo_test_lin.qubo");
    std::remove("qubo_test_lin.json");
    std::remove(e.qubo_path.c_str());
    std::remove(e.sidecar_path.c_str());
}

TEST_CASE("export failures surface and leave no partial output") {
    Exported e = export_square(2, "fail");
    CHECK_THROWS_AS(export_qubo(e.config, e.problem, "no_such_dir/x.qubo", "no_such_dir/x.json"),
                    std::runtime_error);
    std::ifstream probe("no_such_dir/x.qubo");
    CHECK_FALSE(probe.good());
    std::remove(e.qubo_path.c_str());
    std::remove(e.sidecar_path.c_str());
}

TEST_CASE("malformed QUBO files are rejected with location info") {
    {
        std::ofstream out("qubo_test_bad.qubo");
        out << "p qubo 0 4 1 0\n0 0 not-a-number\n";
    }
    CHECK_THROWS_WITH_AS(parse_qubo_file("qubo_test_bad.qubo"), doctest::Contains(":2"),
                         ConfigError);
    std::remove("qubo_test_bad.qubo");
}

}  // TEST_SUITE
