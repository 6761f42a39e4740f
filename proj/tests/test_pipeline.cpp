#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>

#include "farmstate/csv.hpp"
#include "farmstate/errors.hpp"
#include "farmstate/pipeline.hpp"
#include "oracles.hpp"

using namespace farmstate;
namespace fs = std::filesystem;

namespace {

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

std::string tiny_synthetic_config(const std::string& out_dir,
                                  const std::string& extra_analysis = "") {
    return "[synthetic]\n"
           "n_turbines = 4\n"
           "n_steps = 2000\n"
           "seed = 42\n"
           "correlation_length = 5\n"
           "mean_wind_x = 8\n"
           "mean_wind_y = 3\n"
           "ou_theta = 0.1\n"
           "ou_sigma = 0.7\n"
           "cut_in_speed = 3\n"
           "rated_speed = 12\n"
           "rated_power_kw = 2000\n"
           "[analysis]\n"
           "lags = 0:3\n"
           "q_range = 1:3\n"
           "tau_range = 1:3\n"
           "n_state_bins = 12\n"
           "n_return_bins = 21\n"
           "min_samples_per_bin = 10\n" +
           extra_analysis +
           "[output]\n"
           "directory = " + out_dir + "\n";
}

const std::vector<std::string> kAnalyzeArtifacts = {
    "structure_report.json", "spectrum.csv", "mode_profiles.csv",
    "state.csv",             "joint_density.csv", "risk_return_table.csv",
    "policy.csv",            "manifest.json"};

}  // namespace

TEST_CASE("validate_config: reference config echoes all defaults") {
    oracles::TempDir dir("cfg");
    write_file(dir.file("cfg.ini"), tiny_synthetic_config(dir.file("out")));
    const PipelineConfig cfg = validate_config(dir.file("cfg.ini"));
    CHECK(cfg.use_synthetic);
    CHECK(cfg.q_values == std::vector<int>{1, 2, 3});
    const std::string echo = cfg.canonical_echo();
    CHECK(echo.find("analysis.floor_epsilon_rel = 9.9999999999999995e-07") !=
          std::string::npos);
    CHECK(echo.find("analysis.measure_toeplitz = true") != std::string::npos);
    CHECK(echo.find("synthetic.seed = 42") != std::string::npos);
    CHECK(echo.find("source = synthetic") != std::string::npos);
}

TEST_CASE("validate_config: violations are collected, not fail-fast") {
    oracles::TempDir dir("cfgbad");
    write_file(dir.file("cfg.ini"),
               "[input]\n"
               "velocity_csv = /nonexistent/v.csv\n"
               "power_csv = /nonexistent/p.csv\n"
               "[synthetic]\n"
               "n_turbines = 4\n"
               "[analysis]\n"
               "tau_range = \n"
               "bogus_key = 1\n");
    try {
        validate_config(dir.file("cfg.ini"));
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("exactly one input source") != std::string::npos);
        CHECK(msg.find("tau_range") != std::string::npos);
        CHECK(msg.find("bogus_key") != std::string::npos);
        CHECK(msg.find("velocity_csv: file not found") != std::string::npos);
    }
}

TEST_CASE("validate_config: tau values beyond the cap are rejected") {
    oracles::TempDir dir("cfgcap");
    const std::string base =
        "[synthetic]\n"
        "n_turbines = 4\n"
        "n_steps = 2000\n"
        "[analysis]\n";
    const std::string tail = "[output]\ndirectory = " + dir.file("out") + "\n";
    write_file(dir.file("cfg.ini"), base + "tau_range = 1:200\n" + tail);
    CHECK_THROWS_AS(validate_config(dir.file("cfg.ini")), ConfigError);
    write_file(dir.file("cfg2.ini"),
               base + "tau_range = 1:200\ntau_cap = 250\n" + tail);
    const PipelineConfig cfg = validate_config(dir.file("cfg2.ini"));
    CHECK(cfg.tau_values.size() == 200);
}

TEST_CASE("validate_config: missing file and unreadable config") {
    CHECK_THROWS_AS(validate_config("/nonexistent/cfg.ini"), IoError);

    oracles::TempDir dir("cfgmiss");
    write_file(dir.file("cfg.ini"),
               "[input]\n"
               "velocity_csv = " + dir.file("v.csv") + "\n"
               "power_csv = " + dir.file("p.csv") + "\n");
    CHECK_THROWS_AS(validate_config(dir.file("cfg.ini")), ConfigError);
}

TEST_CASE("analyze: full artifact set with deterministic manifests") {
    oracles::TempDir dir("an");
    write_file(dir.file("cfg.ini"), tiny_synthetic_config(dir.file("out")));
    PipelineConfig cfg = validate_config(dir.file("cfg.ini"));
    cfg.cache = false;

    const RunResult r1 = run_analyze(cfg);
    for (const auto& name : kAnalyzeArtifacts)
        CHECK(fs::exists(fs::path(dir.file("out")) / name));
    CHECK(!r1.covariance_cached);

    // Same config into a different directory, more threads: byte-identical.
    PipelineConfig cfg2 = cfg;
    cfg2.out_dir = dir.file("out2");
    cfg2.threads = 2;
    const RunResult r2 = run_analyze(cfg2);
    CHECK(r1.manifest_hash == r2.manifest_hash);
    for (const auto& name : kAnalyzeArtifacts) {
        const std::string a = csv::read_file((fs::path(dir.file("out")) / name).string());
        const std::string b = csv::read_file((fs::path(dir.file("out2")) / name).string());
        CHECK(a == b);
    }
}

TEST_CASE("analyze: cache skips covariance and spectral stages") {
    oracles::TempDir dir("cache");
    write_file(dir.file("cfg.ini"), tiny_synthetic_config(dir.file("out")));
    const PipelineConfig cfg = validate_config(dir.file("cfg.ini"));

    const RunResult first = run_analyze(cfg);
    CHECK(!first.covariance_cached);
    CHECK(!first.spectral_cached);
    std::map<std::string, std::string> bytes;
    for (const auto& name : kAnalyzeArtifacts)
        bytes[name] = csv::read_file((fs::path(dir.file("out")) / name).string());

    const RunResult second = run_analyze(cfg);
    CHECK(second.covariance_cached);
    CHECK(second.spectral_cached);
    CHECK(second.manifest_hash == first.manifest_hash);
    for (const auto& name : kAnalyzeArtifacts)
        CHECK(bytes[name] ==
              csv::read_file((fs::path(dir.file("out")) / name).string()));
}

TEST_CASE("analyze: changed seed invalidates the cache") {
    oracles::TempDir dir("cachem");
    write_file(dir.file("cfg.ini"), tiny_synthetic_config(dir.file("out")));
    PipelineConfig cfg = validate_config(dir.file("cfg.ini"));
    (void)run_analyze(cfg);
    cfg.scenario.seed = 77;
    const RunResult r = run_analyze(cfg);
    CHECK(!r.covariance_cached);
}

TEST_CASE("generate then analyze from files matches the synthetic path") {
    oracles::TempDir dir("gen");
    write_file(dir.file("gen.ini"), tiny_synthetic_config(dir.file("data")));
    const PipelineConfig gen_cfg = validate_config(dir.file("gen.ini"));
    const RunResult gen = run_generate(gen_cfg);
    CHECK(fs::exists(fs::path(dir.file("data")) / "velocity.csv"));
    CHECK(fs::exists(fs::path(dir.file("data")) / "power.csv"));
    CHECK(!gen.manifest_hash.empty());

    const std::string file_cfg =
        "[input]\n"
        "velocity_csv = " + dir.file("data") + "/velocity.csv\n"
        "power_csv = " + dir.file("data") + "/power.csv\n"
        "[analysis]\n"
        "lags = 0:3\n"
        "q_range = 1:3\n"
        "tau_range = 1:3\n"
        "n_state_bins = 12\n"
        "n_return_bins = 21\n"
        "min_samples_per_bin = 10\n"
        "[output]\n"
        "directory = " + dir.file("out_files") + "\n";
    write_file(dir.file("files.ini"), file_cfg);
    const PipelineConfig cfg_files = validate_config(dir.file("files.ini"));
    const RunResult from_files = run_analyze(cfg_files);

    write_file(dir.file("syn.ini"), tiny_synthetic_config(dir.file("out_syn")));
    const PipelineConfig cfg_syn = validate_config(dir.file("syn.ini"));
    const RunResult from_syn = run_analyze(cfg_syn);

    // The CSV round trip is exact, so both paths see identical data and
    // produce identical analysis CSVs (manifests differ: sources differ).
    for (const auto& name : {"spectrum.csv", "state.csv", "risk_return_table.csv",
                             "policy.csv"}) {
        const std::string a =
            csv::read_file((fs::path(dir.file("out_files")) / name).string());
        const std::string b =
            csv::read_file((fs::path(dir.file("out_syn")) / name).string());
        CHECK(a == b);
    }
    CHECK(from_files.manifest_hash != from_syn.manifest_hash);
}

TEST_CASE("policy subcommand reproduces the analyze policy") {
    oracles::TempDir dir("pol");
    write_file(dir.file("cfg.ini"), tiny_synthetic_config(dir.file("out")));
    const PipelineConfig cfg = validate_config(dir.file("cfg.ini"));
    (void)run_analyze(cfg);
    const std::string direct =
        csv::read_file((fs::path(dir.file("out")) / "policy.csv").string());

    PipelineConfig pol_cfg = cfg;
    pol_cfg.out_dir = dir.file("polout");
    (void)run_policy(pol_cfg, dir.file("out") + "/risk_return_table.csv");
    const std::string recomputed =
        csv::read_file((fs::path(dir.file("polout")) / "policy.csv").string());
    CHECK(direct == recomputed);
}

TEST_CASE("spectrum subcommand writes the spectral artifacts only") {
    oracles::TempDir dir("spec");
    write_file(dir.file("cfg.ini"), tiny_synthetic_config(dir.file("out")));
    PipelineConfig cfg = validate_config(dir.file("cfg.ini"));
    cfg.cache = false;
    const RunResult r = run_spectrum(cfg);
    CHECK(fs::exists(fs::path(dir.file("out")) / "spectrum.csv"));
    CHECK(fs::exists(fs::path(dir.file("out")) / "structure_report.json"));
    CHECK(!fs::exists(fs::path(dir.file("out")) / "risk_return_table.csv"));
    CHECK(!r.manifest_hash.empty());
}

TEST_CASE("verify passes on healthy synthetic data") {
    oracles::TempDir dir("ver");
    write_file(dir.file("cfg.ini"), tiny_synthetic_config(dir.file("out")));
    const PipelineConfig cfg = validate_config(dir.file("cfg.ini"));
    const VerifyResult vr = run_verify(cfg);
    CHECK(vr.hermitian_ok);
    CHECK(vr.presym_ok);
    CHECK(vr.spectral_gates_ok);
    CHECK(vr.toeplitz_ok);
    CHECK(vr.all_ok());
    CHECK(vr.report.stationarity_available);
}

TEST_CASE("stage failures carry the stage name") {
    oracles::TempDir dir("stage");
    // Velocity file parses but the power file has a negative value: the
    // ingest stage must be named in the error.
    write_file(dir.file("v.csv"), "t,vx_1,vy_1\n0,1,0\n1,2,0\n2,1,0\n3,2,0\n");
    write_file(dir.file("p.csv"), "t,power_kw\n0,1\n1,-2\n2,1\n3,1\n");
    write_file(dir.file("cfg.ini"),
               "[input]\n"
               "velocity_csv = " + dir.file("v.csv") + "\n"
               "power_csv = " + dir.file("p.csv") + "\n"
               "[analysis]\n"
               "lags = 0:1\n"
               "q_range = 1:2\n"
               "tau_range = 1\n"
               "[output]\n"
               "directory = " + dir.file("out") + "\n");
    const PipelineConfig cfg = validate_config(dir.file("cfg.ini"));
    try {
        run_analyze(cfg);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("stage ingest") != std::string::npos);
    }
    // No partial outputs left behind.
    CHECK(!fs::exists(fs::path(dir.file("out")) / "spectrum.csv"));
    CHECK(!fs::exists(fs::path(dir.file("out")) / "spectrum.csv.tmp"));
}

TEST_CASE("fnv1a is stable") {
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") != fnv1a_hex("b"));
}
