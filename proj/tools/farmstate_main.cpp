// farmstate: lagged-PCA wind farm state and conditional risk-return pipeline.
//
// Exit codes: 0 success, 2 config/argument error, 3 data validation error,
// 4 numerical-check failure, 5 I/O error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "farmstate/errors.hpp"
#include "farmstate/pipeline.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    int threads = 1;
    std::optional<std::uint64_t> seed;
    bool no_cache = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "pipeline config file")->required();
    cmd->add_option("--out", flags.out_dir, "output directory (overrides config)");
    cmd->add_option("--threads", flags.threads, "worker threads")->check(CLI::Range(1, 256));
    cmd->add_option("--seed", flags.seed, "synthetic scenario seed override");
    cmd->add_flag("--no-cache", flags.no_cache, "disable the covariance/spectral cache");
}

farmstate::PipelineConfig resolve(const CommonFlags& flags) {
    farmstate::PipelineConfig cfg = farmstate::validate_config(flags.config_path);
    if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
    if (flags.seed) cfg.scenario.seed = *flags.seed;
    if (flags.no_cache) cfg.cache = false;
    cfg.threads = flags.threads;
    return cfg;
}

void print_run(const char* command, const farmstate::RunResult& result,
               const farmstate::PipelineConfig& cfg) {
    std::cout << command << ": wrote " << result.outputs.size() << " artifacts to "
              << cfg.out_dir << "\n";
    if (result.covariance_cached) std::cout << "  covariance stage: cache hit\n";
    if (result.spectral_cached) std::cout << "  spectral stage: cache hit\n";
    if (!result.manifest_hash.empty())
        std::cout << "  manifest hash: " << result.manifest_hash << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"wind farm state / conditional risk-return pipeline"};
    app.require_subcommand(1);

    CommonFlags generate_flags, analyze_flags, spectrum_flags, policy_flags,
        verify_flags;
    std::string table_csv;

    add_common(app.add_subcommand("generate", "write a synthetic dataset"),
               generate_flags);
    add_common(app.add_subcommand("analyze", "run the full pipeline"), analyze_flags);
    add_common(app.add_subcommand("spectrum", "run through the spectral stage only"),
               spectrum_flags);
    CLI::App* policy_cmd =
        app.add_subcommand("policy", "recompute the policy from a cached table");
    add_common(policy_cmd, policy_flags);
    policy_cmd->add_option("--table", table_csv,
                           "risk-return table CSV (default: <out>/risk_return_table.csv)");
    add_common(app.add_subcommand("verify", "structure and invariant checks only"),
               verify_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand("generate")) {
            const auto cfg = resolve(generate_flags);
            print_run("generate", farmstate::run_generate(cfg), cfg);
        } else if (app.got_subcommand("analyze")) {
            const auto cfg = resolve(analyze_flags);
            print_run("analyze", farmstate::run_analyze(cfg), cfg);
        } else if (app.got_subcommand("spectrum")) {
            const auto cfg = resolve(spectrum_flags);
            print_run("spectrum", farmstate::run_spectrum(cfg), cfg);
        } else if (app.got_subcommand("policy")) {
            const auto cfg = resolve(policy_flags);
            const std::string table =
                table_csv.empty() ? cfg.out_dir + "/risk_return_table.csv" : table_csv;
            print_run("policy", farmstate::run_policy(cfg, table), cfg);
        } else if (app.got_subcommand("verify")) {
            const auto cfg = resolve(verify_flags);
            const farmstate::VerifyResult vr = farmstate::run_verify(cfg);
            const auto line = [](const char* name, bool ok) {
                std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << "\n";
            };
            line("hermitian-after-symmetrization", vr.hermitian_ok);
            line("presymmetrization-deviation", vr.presym_ok);
            line("toeplitz-consistency", vr.toeplitz_ok);
            line("spectral-gates", vr.spectral_gates_ok);
            std::printf("  toeplitz stationarity deviation: %.6g relative%s\n",
                        vr.report.toeplitz_stationarity_rel,
                        vr.report.stationarity_available ? "" : " (not measured)");
            for (const auto& m : vr.messages) std::cout << "  " << m << "\n";
            if (!vr.all_ok()) return 4;
        }
    } catch (const farmstate::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const farmstate::ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const farmstate::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const farmstate::NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const farmstate::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
