#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <set>

#include "test_support.hpp"

using namespace vktest;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("vesselkit_unit_" + name)).string();
}

void write_file(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

Json parse(const CliResult& r) { return Json::parse(r.out); }

}  // namespace

// serialization

TEST(Serialization, RoundTripIsExact) {
    const DifferentialVessel v = three_factor_synthesis(30).vessel;
    const std::string text = dump_canonical(vessel_to_json(v));
    const DifferentialVessel back = vessel_from_json(Json::parse(text));
    EXPECT_TRUE(back == v);
    EXPECT_EQ(dump_canonical(vessel_to_json(back)), text);
}

TEST(Serialization, ComplexAndMatrixForms) {
    EXPECT_EQ(decode_complex(Json::parse("[1.5, -2]"), "z"), Complex(1.5, -2.0));
    EXPECT_EQ(decode_complex(Json::parse("3"), "z"), Complex(3.0, 0.0));
    EXPECT_EQ(error_kind([] { decode_complex(Json::parse("[1, 2, 3]"), "z"); }), ErrorKind::InvalidInput);
    EXPECT_EQ(error_kind([] { decode_matrix(Json::parse("[[1, 2], [3]]"), "m"); }), ErrorKind::InvalidInput);
    EXPECT_EQ(error_kind([] { decode_matrix(Json::parse("[]"), "m"); }), ErrorKind::InvalidInput);
    const TimeGrid g(0.0, 1.0, 3);
    const GridFamily f = decode_matrix_or_family(Json::parse("[[[0, 1]]]"), g, "f");
    EXPECT_EQ(f.size(), 4u);
    EXPECT_EQ(f[3](0, 0), Complex(0.0, 1.0));
}

TEST(Serialization, RejectsNonFinite) {
    Json j = vessel_to_json(three_factor_synthesis(10).vessel);
    j["A1"][3][0][0][0] = std::numeric_limits<double>::infinity();
    EXPECT_EQ(error_kind([&] { vessel_from_json(j); }), ErrorKind::InvalidInput);
}

TEST(Serialization, RejectsShapeMismatch) {
    Json j = vessel_to_json(three_factor_synthesis(10).vessel);
    j["B"][0][0].push_back(Json::array({0.0, 0.0}));
    j["B"][0][1].push_back(Json::array({0.0, 0.0}));
    j["B"][0][2].push_back(Json::array({0.0, 0.0}));
    const auto kind = error_kind([&] { vessel_from_json(j); });
    ASSERT_TRUE(kind.has_value());
    EXPECT_TRUE(VesselError(*kind, "").is_input_error());
}

TEST(Serialization, GridWithoutStepsUsesDefault) {
    const TimeGrid g = decode_grid(Json::parse(R"({"t_start": 0, "t_end": 2})"), 50);
    EXPECT_EQ(g.n_steps, 100u);
    EXPECT_EQ(error_kind([] { decode_grid(Json::parse(R"({"t_start": 0, "t_end": 1, "n_steps": 0})")); }),
              ErrorKind::InvalidInput);
}

TEST(Config, FileOverridesDefaults) {
    const std::string path = temp_path("config.json");
    write_file(path, R"({"tol": 1e-6, "probes": 7})");
    setenv("VESSELKIT_CONFIG", path.c_str(), 1);
    const Config cfg = load_config();
    unsetenv("VESSELKIT_CONFIG");
    EXPECT_EQ(cfg.tol, 1e-6);
    EXPECT_EQ(cfg.probes, 7u);
    EXPECT_EQ(cfg.steps_per_unit, 200u);
    Config bad;
    EXPECT_EQ(error_kind([&] { apply_config_json(bad, Json::parse(R"({"tol": -1})")); }), ErrorKind::InvalidInput);
}

// command line

TEST(Cli, VerifyPassesOnFixtures) {
    for (const char* name : {"blaschke_vessel.json", "three_vessel.json", "trivial_vessel.json"}) {
        const CliResult r = run_cli("verify " + fixture(name));
        EXPECT_EQ(r.exit_code, 0) << name;
        const Json report = parse(r);
        std::set<std::string> names;
        for (const auto& res : report["residuals"]) {
            EXPECT_TRUE(res["passed"].get<bool>()) << name << " " << res["name"];
            EXPECT_TRUE(names.insert(res["name"].get<std::string>()).second) << "duplicate " << res["name"];
        }
        EXPECT_GE(names.size(), 6u);
    }
}

TEST(Cli, TrivialVesselHasZeroResiduals) {
    const Json report = parse(run_cli("verify " + fixture("trivial_vessel.json")));
    for (const auto& res : report["residuals"]) EXPECT_EQ(res["value"].get<double>(), 0.0) << res["name"];
}

TEST(Cli, ExitCodes) {
    EXPECT_EQ(run_cli("verify " + fixture("perturbed_vessel.json")).exit_code, 3);
    EXPECT_EQ(run_cli("synthesize " + fixture("empty_spec.json")).exit_code, 1);
    EXPECT_EQ(run_cli("verify " + fixture("malformed.json")).exit_code, 1);
    EXPECT_EQ(run_cli("verify " + fixture("does_not_exist.json")).exit_code, 1);
    EXPECT_EQ(run_cli("no-such-command").exit_code, 1);
    EXPECT_EQ(run_cli("synthesize " + fixture("degenerate_spec.json")).exit_code, 2);
    EXPECT_EQ(run_cli("hermitian " + fixture("hermitian_indefinite.json")).exit_code, 2);
    EXPECT_EQ(run_cli("transfer " + fixture("blaschke_vessel.json") + " --lambda -0.5,1").exit_code, 2);
}

TEST(Cli, ErrorDocumentNamesTheKind) {
    const CliResult r = run_cli("synthesize " + fixture("degenerate_spec.json"));
    const Json j = parse(r);
    EXPECT_EQ(j["command"], "synthesize");
    EXPECT_EQ(j["error"]["kind"], "DegenerateB");
}

TEST(Cli, TransferValue) {
    const CliResult r = run_cli("transfer " + fixture("blaschke_vessel.json") + " --lambda 1,0 --node 5");
    ASSERT_EQ(r.exit_code, 0);
    const Json report = parse(r);
    const Json& s = report["results"][0]["S"];
    const Complex got = decode_complex(s[0][0], "S");
    const Complex z(-0.5, 1.0);
    EXPECT_LT(std::abs(got - (1.0 + std::conj(z)) / (1.0 - z)), 1e-10);
}

TEST(Cli, SynthesizeOneAndThreeData) {
    const CliResult one = run_cli("synthesize " + fixture("blaschke_spec.json"));
    ASSERT_EQ(one.exit_code, 0);
    EXPECT_EQ(one.out, read_file(fixture("blaschke_vessel.json")));

    const CliResult three = run_cli("synthesize " + fixture("three_spec.json"));
    ASSERT_EQ(three.exit_code, 0);
    const DifferentialVessel v = vessel_from_json(parse(three));
    EXPECT_EQ(v.state_dim(), 3);
    for (std::size_t i = 0; i < v.grid().size(); i += 20) {
        const ComplexMatrix& a1 = v.a1()[i];
        EXPECT_EQ(ComplexMatrix(a1.triangularView<Eigen::StrictlyUpper>()).norm(), 0.0);
    }
}

TEST(Cli, CoupleWithTrivialKeepsTransfer) {
    const std::string out = temp_path("coupled.json");
    ASSERT_EQ(run_cli("couple " + fixture("trivial_vessel.json") + " " + fixture("trivial_vessel.json") + " -o " + out)
                  .exit_code,
              0);
    const DifferentialVessel c = vessel_from_json(Json::parse(read_file(out)));
    EXPECT_EQ(c.state_dim(), 2);
    EXPECT_LT((c.transfer(Complex(1.0, 2.0), 3) - identity(1)).norm(), 1e-15);
    EXPECT_EQ(run_cli("verify " + out).exit_code, 0);
}

TEST(Cli, MultintMatchesExponential) {
    const CliResult r = run_cli("multint " + fixture("multint_const.json") + " --lambda 1,0.5");
    ASSERT_EQ(r.exit_code, 0);
    const Json report = parse(r);
    const Complex w = decode_complex(report["results"][0]["W"][0][0], "W");
    EXPECT_LT(std::abs(w - std::exp(Complex(0.0, 0.8) / Complex(1.0, 0.5))), 1e-3);
}

TEST(Cli, SeededReportsAreReproducible) {
    const std::string args = "verify " + fixture("three_vessel.json") + " --seed 9 --probes 5";
    EXPECT_EQ(run_cli(args).out, run_cli(args).out);
}

TEST(Cli, TimingIsOptIn) {
    const std::string args = "verify " + fixture("blaschke_vessel.json");
    EXPECT_FALSE(parse(run_cli(args)).contains("timing"));
    EXPECT_TRUE(parse(run_cli(args + " --timing")).contains("timing"));
}

TEST(Cli, GaugeSelfEquivalence) {
    const CliResult r = run_cli("gauge " + fixture("three_vessel.json") + " " + fixture("three_vessel.json"));
    EXPECT_EQ(r.exit_code, 0);
    EXPECT_TRUE(parse(r)["equivalent"].get<bool>());
}

TEST(Cli, HermitianPositiveCase) { EXPECT_EQ(run_cli("hermitian " + fixture("hermitian.json")).exit_code, 0); }

TEST(Cli, BadConfigIsAnInputError) {
    const std::string path = temp_path("bad_config.json");
    write_file(path, R"({"tol": -1})");
    setenv("VESSELKIT_CONFIG", path.c_str(), 1);
    const CliResult r = run_cli("verify " + fixture("blaschke_vessel.json"));
    unsetenv("VESSELKIT_CONFIG");
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_EQ(parse(r)["error"]["kind"], "InvalidInput");
}
