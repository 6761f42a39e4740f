#include "farmstate/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "farmstate/csv.hpp"
#include "farmstate/errors.hpp"
#include "farmstate/parallel.hpp"
#include "farmstate/state.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace farmstate {

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

namespace {

// ---------------------------------------------------------------------------
// Config file parsing (INI-style: [section], key = value, '#' comments)
// ---------------------------------------------------------------------------

using SectionMap = std::map<std::string, std::map<std::string, std::string>>;

std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

SectionMap parse_ini(const std::string& content, std::vector<std::string>& errors) {
    SectionMap out;
    std::string section;
    size_t pos = 0;
    long long line_no = 0;
    while (pos <= content.size()) {
        size_t eol = content.find('\n', pos);
        if (eol == std::string::npos) eol = content.size();
        std::string line = trim(std::string_view(content).substr(pos, eol - pos));
        pos = eol + 1;
        ++line_no;
        if (pos > content.size() + 1) break;
        if (line.empty() || line[0] == '#' || line[0] == ';') {
            if (pos > content.size()) break;
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']') {
                errors.push_back("line " + std::to_string(line_no) +
                                 ": malformed section header");
            } else {
                section = trim(std::string_view(line).substr(1, line.size() - 2));
                out[section];
            }
        } else {
            const size_t eq = line.find('=');
            if (eq == std::string::npos) {
                errors.push_back("line " + std::to_string(line_no) +
                                 ": expected key = value");
            } else {
                const std::string key = trim(std::string_view(line).substr(0, eq));
                const std::string value = trim(std::string_view(line).substr(eq + 1));
                if (section.empty()) {
                    errors.push_back("line " + std::to_string(line_no) +
                                     ": key outside any [section]");
                } else if (!out[section].emplace(key, value).second) {
                    errors.push_back("line " + std::to_string(line_no) +
                                     ": duplicate key " + section + "." + key);
                }
            }
        }
        if (pos > content.size()) break;
    }
    return out;
}

struct KeyReader {
    const std::map<std::string, std::string>* section = nullptr;
    std::string prefix;
    std::vector<std::string>* errors = nullptr;
    std::set<std::string> seen;

    bool has(const std::string& key) {
        seen.insert(key);
        return section && section->count(key) > 0;
    }
    std::string raw(const std::string& key) { return section->at(key); }

    void read_string(const std::string& key, std::string& out) {
        if (has(key)) out = raw(key);
    }
    void read_bool(const std::string& key, bool& out) {
        if (!has(key)) return;
        const std::string v = raw(key);
        if (v == "true") out = true;
        else if (v == "false") out = false;
        else errors->push_back(prefix + key + ": expected true or false, got '" + v + "'");
    }
    void read_int(const std::string& key, int& out, int lo, int hi) {
        if (!has(key)) return;
        long long v = 0;
        if (!csv::try_parse_index(raw(key), v) || v < lo || v > hi)
            errors->push_back(prefix + key + ": expected integer in [" +
                              std::to_string(lo) + ", " + std::to_string(hi) +
                              "], got '" + raw(key) + "'");
        else out = static_cast<int>(v);
    }
    void read_u64(const std::string& key, std::uint64_t& out) {
        if (!has(key)) return;
        const std::string v = raw(key);
        char* end = nullptr;
        const unsigned long long parsed = std::strtoull(v.c_str(), &end, 10);
        if (end != v.c_str() + v.size())
            errors->push_back(prefix + key + ": expected unsigned integer, got '" + v + "'");
        else out = parsed;
    }
    void read_double(const std::string& key, double& out, bool allow_inf = false) {
        if (!has(key)) return;
        const std::string v = raw(key);
        if (allow_inf && v == "inf") {
            out = std::numeric_limits<double>::infinity();
            return;
        }
        double parsed = 0.0;
        if (!csv::try_parse_double(v, parsed) || !std::isfinite(parsed))
            errors->push_back(prefix + key + ": expected number, got '" + v + "'");
        else out = parsed;
    }
    // "a:b" inclusive range or comma-separated list.
    void read_int_list(const std::string& key, std::vector<int>& out) {
        if (!has(key)) return;
        const std::string v = raw(key);
        std::vector<int> values;
        const size_t colon = v.find(':');
        if (colon != std::string::npos) {
            long long a = 0, b = 0;
            if (!csv::try_parse_index(trim(std::string_view(v).substr(0, colon)), a) ||
                !csv::try_parse_index(trim(std::string_view(v).substr(colon + 1)), b) ||
                a > b) {
                errors->push_back(prefix + key + ": expected range a:b, got '" + v + "'");
                return;
            }
            for (long long x = a; x <= b; ++x) values.push_back(static_cast<int>(x));
        } else {
            for (const auto field : csv::split_fields(v)) {
                long long x = 0;
                if (!csv::try_parse_index(trim(field), x)) {
                    errors->push_back(prefix + key + ": expected integer list, got '" + v + "'");
                    return;
                }
                values.push_back(static_cast<int>(x));
            }
        }
        if (values.empty())
            errors->push_back(prefix + key + " must be non-empty");
        else out = values;
    }
    void check_unknown() {
        if (!section) return;
        for (const auto& [key, value] : *section)
            if (!seen.count(key))
                errors->push_back(prefix + key + ": unknown key");
    }
};

std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Stage wrapper: prefixes error messages with the failing stage name while
// preserving the error type (the CLI maps types to exit codes).
// ---------------------------------------------------------------------------

template <typename Fn>
auto stage(const char* name, Fn&& fn) {
    const auto wrap = [&](const std::string& what) {
        return "stage " + std::string(name) + ": " + what;
    };
    try {
        return fn();
    } catch (const ParseError& e) {
        throw ParseError(wrap(e.what()));
    } catch (const SchemaError& e) {
        throw SchemaError(wrap(e.what()));
    } catch (const ValidationError& e) {
        throw ValidationError(wrap(e.what()));
    } catch (const ArgumentError& e) {
        throw ArgumentError(wrap(e.what()));
    } catch (const NumericalError& e) {
        throw NumericalError(wrap(e.what()));
    } catch (const ConfigError& e) {
        throw ConfigError(wrap(e.what()));
    } catch (const IoError& e) {
        throw IoError(wrap(e.what()));
    }
}

// Writes artifacts to .tmp files, then renames everything at commit time so
// a failed run leaves no partial outputs behind.
class ArtifactWriter {
public:
    explicit ArtifactWriter(const std::string& out_dir) : out_dir_(out_dir) {
        std::error_code ec;
        fs::create_directories(out_dir_, ec);
        if (ec) throw IoError("cannot create output directory " + out_dir);
    }

    ~ArtifactWriter() {
        for (const auto& name : pending_) {
            std::error_code ec;
            fs::remove(fs::path(out_dir_) / (name + ".tmp"), ec);
        }
    }

    std::string tmp_path(const std::string& name) {
        pending_.push_back(name);
        return (fs::path(out_dir_) / (name + ".tmp")).string();
    }

    std::string hash_of(const std::string& name) const {
        return fnv1a_hex(csv::read_file((fs::path(out_dir_) / (name + ".tmp")).string()));
    }

    void commit() {
        for (const auto& name : pending_) {
            const fs::path tmp = fs::path(out_dir_) / (name + ".tmp");
            const fs::path final_path = fs::path(out_dir_) / name;
            std::error_code ec;
            fs::rename(tmp, final_path, ec);
            if (ec) throw IoError("cannot finalize " + final_path.string());
        }
        pending_.clear();
    }

    const std::vector<std::string>& pending() const { return pending_; }

private:
    std::string out_dir_;
    std::vector<std::string> pending_;
};

// ---------------------------------------------------------------------------
// Data acquisition and caching
// ---------------------------------------------------------------------------

struct InputData {
    VelocityField field;
    PowerSeries power;
    std::string velocity_hash;  // file mode only
    std::string power_hash;
};

InputData acquire(const PipelineConfig& cfg) {
    if (cfg.use_synthetic) {
        auto [field, power] = generate(cfg.scenario);
        return {std::move(field), std::move(power), "", ""};
    }
    IngestOptions opt;
    opt.allow_gaps = cfg.allow_gaps;
    opt.floor_epsilon_rel = cfg.floor_epsilon_rel;
    opt.sample_interval_s = cfg.sample_interval_s;
    VelocityField field = load_velocity_field(cfg.velocity_csv, opt);
    opt.expected_steps = field.n_steps();
    PowerSeries power = load_power_series(cfg.power_csv, opt);
    return {std::move(field), std::move(power),
            fnv1a_hex(csv::read_file(cfg.velocity_csv)),
            fnv1a_hex(csv::read_file(cfg.power_csv))};
}

std::string covariance_cache_key(const PipelineConfig& cfg, const InputData& data) {
    std::string src = "lags=" + join_ints(cfg.lags) + "\n";
    src += "measure_toeplitz=" + std::string(cfg.measure_toeplitz ? "true" : "false") + "\n";
    src += "version=" + std::string(kArtifactVersion) + "\n";
    if (cfg.use_synthetic) {
        src += "scenario=" + cfg.canonical_echo() + "\n";
    } else {
        src += "velocity=" + data.velocity_hash + "\n";
        src += "power=" + data.power_hash + "\n";
        src += "allow_gaps=" + std::string(cfg.allow_gaps ? "true" : "false") + "\n";
    }
    return fnv1a_hex(src);
}

struct CovSpectral {
    MasterMatrix master;
    SpectralBasis basis;
    bool covariance_cached = false;
    bool spectral_cached = false;
};

CovSpectral covariance_and_spectral(const PipelineConfig& cfg, const InputData& data,
                                    const LagSet& lagset) {
    const fs::path cache_dir = fs::path(cfg.out_dir) / "cache";
    const fs::path key_path = cache_dir / "cache_key.json";
    const fs::path master_path = cache_dir / "master.wfmm";
    const fs::path basis_path = cache_dir / "basis.bin";
    const std::string key = covariance_cache_key(cfg, data);

    if (cfg.cache && fs::exists(key_path) && fs::exists(master_path) &&
        fs::exists(basis_path)) {
        try {
            const json meta = json::parse(csv::read_file(key_path.string()));
            if (meta.value("key", "") == key) {
                MasterMatrix master = load_master(master_path.string(),
                                                  data.field.n_turbines(), lagset);
                master.presym_hermitian_dev = meta.value("presym_hermitian_dev", 0.0);
                master.presym_available = meta.value("presym_available", false);
                master.toeplitz_stationarity_dev =
                    meta.value("toeplitz_stationarity_dev", 0.0);
                master.stationarity_available =
                    meta.value("stationarity_available", false);
                SpectralBasis basis = load_basis(basis_path.string());
                return {std::move(master), std::move(basis), true, true};
            }
        } catch (const Error&) {
            // Unusable cache: fall through and recompute.
        }
    }

    AssembleOptions aopt;
    aopt.measure_toeplitz = cfg.measure_toeplitz;
    aopt.threads = cfg.threads;
    MasterMatrix master =
        stage("covariance", [&] { return assemble_master(data.field, lagset, aopt); });
    SpectralBasis basis = stage("spectral", [&] { return decompose(master); });

    if (cfg.cache) {
        std::error_code ec;
        fs::create_directories(cache_dir, ec);
        if (!ec) {
            save_master(master_path.string(), master);
            save_basis(basis_path.string(), basis);
            json meta;
            meta["key"] = key;
            meta["presym_hermitian_dev"] = master.presym_hermitian_dev;
            meta["presym_available"] = master.presym_available;
            meta["toeplitz_stationarity_dev"] = master.toeplitz_stationarity_dev;
            meta["stationarity_available"] = master.stationarity_available;
            std::ofstream out(key_path);
            out << meta.dump(2) << "\n";
        }
    }
    return {std::move(master), std::move(basis), false, false};
}

void write_structure_report_json(const std::string& path, const StructureReport& rep) {
    json j;
    j["dimension"] = rep.dimension;
    j["n_turbines"] = rep.n_turbines;
    j["n_lags"] = rep.n_lags;
    j["max_abs_entry"] = rep.max_abs_entry;
    j["hermitian_dev_abs"] = rep.hermitian_dev_abs;
    j["hermitian_dev_rel"] = rep.hermitian_dev_rel;
    j["presym_hermitian_dev_abs"] = rep.presym_hermitian_dev_abs;
    j["presym_hermitian_dev_rel"] = rep.presym_hermitian_dev_rel;
    j["presym_available"] = rep.presym_available;
    j["toeplitz_consistency_abs"] = rep.toeplitz_consistency_abs;
    j["toeplitz_consistency_rel"] = rep.toeplitz_consistency_rel;
    j["toeplitz_warning"] = rep.toeplitz_warning;
    j["warn_threshold_rel"] = rep.warn_threshold_rel;
    j["toeplitz_stationarity_abs"] = rep.toeplitz_stationarity_abs;
    j["toeplitz_stationarity_rel"] = rep.toeplitz_stationarity_rel;
    j["stationarity_available"] = rep.stationarity_available;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failure: " + path);
}

struct ManifestInputs {
    std::string command;
    const PipelineConfig* cfg = nullptr;
    const InputData* data = nullptr;
    std::vector<std::pair<std::string, std::string>> output_hashes;
};

std::string write_manifest(const std::string& path, const ManifestInputs& mi) {
    json j;
    j["artifact_version"] = kArtifactVersion;
    j["command"] = mi.command;
    json config_obj;
    std::istringstream echo(mi.cfg->canonical_echo());
    std::string line;
    while (std::getline(echo, line)) {
        const size_t eq = line.find(" = ");
        if (eq != std::string::npos)
            config_obj[line.substr(0, eq)] = line.substr(eq + 3);
    }
    j["config"] = config_obj;
    j["config_hash"] = fnv1a_hex(mi.cfg->canonical_echo());
    if (!mi.cfg->use_synthetic) {
        j["input_hashes"] = {{"velocity_csv", mi.data->velocity_hash},
                             {"power_csv", mi.data->power_hash}};
    }
    json outputs;
    std::string hash_src = std::string(kArtifactVersion) + "\n" +
                           j["config_hash"].get<std::string>() + "\n";
    if (!mi.cfg->use_synthetic)
        hash_src += mi.data->velocity_hash + "\n" + mi.data->power_hash + "\n";
    for (const auto& [name, hash] : mi.output_hashes) {
        outputs[name] = hash;
        hash_src += name + ":" + hash + "\n";
    }
    j["outputs"] = outputs;
    const std::string manifest_hash = fnv1a_hex(hash_src);
    j["manifest_hash"] = manifest_hash;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failure: " + path);
    return manifest_hash;
}

RunResult run_through_spectral(const PipelineConfig& cfg, bool full_analyze) {
    ArtifactWriter writer(cfg.out_dir);
    InputData data = stage("ingest", [&] { return acquire(cfg); });
    const LagSet lagset(cfg.lags);

    CovSpectral cs = covariance_and_spectral(cfg, data, lagset);
    const StructureReport report = verify_structure(cs.master, cfg.toeplitz_warn_rel);
    write_structure_report_json(writer.tmp_path("structure_report.json"), report);

    const int max_q = *std::max_element(cfg.q_values.begin(), cfg.q_values.end());
    write_spectrum_csv(writer.tmp_path("spectrum.csv"), cs.basis);
    write_mode_profiles_csv(writer.tmp_path("mode_profiles.csv"), cs.basis, max_q);

    if (full_analyze) {
        std::vector<StateSeries> states(cfg.q_values.size());
        stage("state", [&] {
            parallel_for(cfg.q_values.size(), cfg.threads, [&](size_t qi) {
                states[qi] = compute_state(data.field, cs.basis, lagset,
                                           cfg.q_values[qi]);
            });
            return 0;
        });
        write_state_csv(writer.tmp_path("state.csv"), states);

        stage("density", [&] {
            const int tau0 = *std::min_element(cfg.tau_values.begin(),
                                               cfg.tau_values.end());
            const ReturnSeries returns = compute_returns(data.power, tau0);
            const ConditionalDensity density =
                estimate_density(states[0], returns, cfg.binning);
            write_joint_density_csv(writer.tmp_path("joint_density.csv"), density);
            return 0;
        });

        const RiskReturnTable table = stage("table", [&] {
            TableOptions topt;
            topt.threads = cfg.threads;
            return build_table(data.field, data.power, cs.basis, lagset,
                               cfg.q_values, cfg.tau_values, cfg.binning, topt);
        });
        write_table_csv(writer.tmp_path("risk_return_table.csv"), table);

        const OptimalPolicy policy = stage("policy", [&] { return optimize_policy(table); });
        write_policy_csv(writer.tmp_path("policy.csv"), policy);
    }

    ManifestInputs mi;
    mi.command = full_analyze ? "analyze" : "spectrum";
    mi.cfg = &cfg;
    mi.data = &data;
    for (const auto& name : writer.pending())
        mi.output_hashes.emplace_back(name, writer.hash_of(name));
    RunResult result;
    result.covariance_cached = cs.covariance_cached;
    result.spectral_cached = cs.spectral_cached;
    for (const auto& name : writer.pending()) result.outputs.push_back(name);
    result.outputs.push_back("manifest.json");
    result.manifest_hash =
        write_manifest(writer.tmp_path("manifest.json"), mi);
    writer.commit();
    return result;
}

}  // namespace

std::string PipelineConfig::canonical_echo() const {
    std::ostringstream s;
    s << "source = " << (use_synthetic ? "synthetic" : "files") << "\n";
    s << "input.velocity_csv = " << velocity_csv << "\n";
    s << "input.power_csv = " << power_csv << "\n";
    s << "input.allow_gaps = " << (allow_gaps ? "true" : "false") << "\n";
    s << "synthetic.n_turbines = " << scenario.n_turbines << "\n";
    s << "synthetic.n_steps = " << scenario.n_steps << "\n";
    s << "synthetic.seed = " << scenario.seed << "\n";
    s << "synthetic.correlation_length = "
      << csv::format_double(scenario.correlation_length) << "\n";
    s << "synthetic.mean_wind_x = " << csv::format_double(scenario.mean_wind.real())
      << "\n";
    s << "synthetic.mean_wind_y = " << csv::format_double(scenario.mean_wind.imag())
      << "\n";
    s << "synthetic.ou_theta = " << csv::format_double(scenario.ou_theta) << "\n";
    s << "synthetic.ou_sigma = " << csv::format_double(scenario.ou_sigma) << "\n";
    s << "synthetic.cut_in_speed = "
      << csv::format_double(scenario.power_curve.cut_in_speed) << "\n";
    s << "synthetic.rated_speed = "
      << csv::format_double(scenario.power_curve.rated_speed) << "\n";
    s << "synthetic.rated_power_kw = "
      << csv::format_double(scenario.power_curve.rated_power_kw) << "\n";
    s << "analysis.lags = " << join_ints(lags) << "\n";
    s << "analysis.q_range = " << join_ints(q_values) << "\n";
    s << "analysis.tau_range = " << join_ints(tau_values) << "\n";
    s << "analysis.tau_cap = " << tau_cap << "\n";
    s << "analysis.n_state_bins = " << binning.n_state_bins << "\n";
    s << "analysis.n_return_bins = " << binning.n_return_bins << "\n";
    s << "analysis.min_samples_per_bin = " << binning.min_samples_per_bin << "\n";
    s << "analysis.floor_epsilon_rel = " << csv::format_double(floor_epsilon_rel)
      << "\n";
    s << "analysis.sample_interval_s = " << csv::format_double(sample_interval_s)
      << "\n";
    s << "analysis.measure_toeplitz = " << (measure_toeplitz ? "true" : "false")
      << "\n";
    s << "analysis.toeplitz_warn_rel = " << csv::format_double(toeplitz_warn_rel)
      << "\n";
    return s.str();
}

PipelineConfig validate_config(const std::string& path) {
    const std::string content = csv::read_file(path);
    std::vector<std::string> errors;
    const SectionMap sections = parse_ini(content, errors);

    for (const auto& [name, keys] : sections)
        if (name != "input" && name != "synthetic" && name != "analysis" &&
            name != "output")
            errors.push_back("[" + name + "]: unknown section");

    PipelineConfig cfg;
    const bool has_input = sections.count("input") > 0;
    const bool has_synthetic = sections.count("synthetic") > 0;
    if (has_input == has_synthetic)
        errors.push_back(
            "exactly one input source required: provide [input] or [synthetic]");
    cfg.use_synthetic = has_synthetic;

    if (has_input) {
        KeyReader r{&sections.at("input"), "input.", &errors, {}};
        r.read_string("velocity_csv", cfg.velocity_csv);
        r.read_string("power_csv", cfg.power_csv);
        r.read_bool("allow_gaps", cfg.allow_gaps);
        r.check_unknown();
        if (cfg.velocity_csv.empty())
            errors.push_back("input.velocity_csv is required");
        else if (!fs::exists(cfg.velocity_csv))
            errors.push_back("input.velocity_csv: file not found: " + cfg.velocity_csv);
        if (cfg.power_csv.empty())
            errors.push_back("input.power_csv is required");
        else if (!fs::exists(cfg.power_csv))
            errors.push_back("input.power_csv: file not found: " + cfg.power_csv);
    }
    if (has_synthetic) {
        KeyReader r{&sections.at("synthetic"), "synthetic.", &errors, {}};
        r.read_int("n_turbines", cfg.scenario.n_turbines, 1, 100000);
        r.read_int("n_steps", cfg.scenario.n_steps, 2, 1 << 30);
        r.read_u64("seed", cfg.scenario.seed);
        r.read_double("correlation_length", cfg.scenario.correlation_length, true);
        double mx = cfg.scenario.mean_wind.real(), my = cfg.scenario.mean_wind.imag();
        r.read_double("mean_wind_x", mx);
        r.read_double("mean_wind_y", my);
        cfg.scenario.mean_wind = {mx, my};
        r.read_double("ou_theta", cfg.scenario.ou_theta);
        r.read_double("ou_sigma", cfg.scenario.ou_sigma);
        r.read_double("cut_in_speed", cfg.scenario.power_curve.cut_in_speed);
        r.read_double("rated_speed", cfg.scenario.power_curve.rated_speed);
        r.read_double("rated_power_kw", cfg.scenario.power_curve.rated_power_kw);
        r.check_unknown();
    }
    if (sections.count("analysis")) {
        KeyReader r{&sections.at("analysis"), "analysis.", &errors, {}};
        r.read_int_list("lags", cfg.lags);
        r.read_int_list("q_range", cfg.q_values);
        r.read_int_list("tau_range", cfg.tau_values);
        r.read_int("tau_cap", cfg.tau_cap, 1, 1 << 30);
        r.read_int("n_state_bins", cfg.binning.n_state_bins, 2, 1 << 20);
        r.read_int("n_return_bins", cfg.binning.n_return_bins, 1, 1 << 20);
        r.read_int("min_samples_per_bin", cfg.binning.min_samples_per_bin, 1, 1 << 30);
        r.read_double("floor_epsilon_rel", cfg.floor_epsilon_rel);
        r.read_double("sample_interval_s", cfg.sample_interval_s);
        r.read_bool("measure_toeplitz", cfg.measure_toeplitz);
        r.read_double("toeplitz_warn_rel", cfg.toeplitz_warn_rel);
        r.check_unknown();
    }
    if (sections.count("output")) {
        KeyReader r{&sections.at("output"), "output.", &errors, {}};
        r.read_string("directory", cfg.out_dir);
        r.read_bool("cache", cfg.cache);
        r.check_unknown();
    }

    // Range sanity. Lags must be given explicitly sorted and anchored at 0;
    // q and tau ranges are canonicalized to ascending unique lists.
    if (cfg.lags.empty() || cfg.lags.front() != 0)
        errors.push_back("analysis.lags must start at 0");
    for (size_t i = 0; i < cfg.lags.size(); ++i) {
        if (cfg.lags[i] < 0) errors.push_back("analysis.lags must be non-negative");
        if (i > 0 && cfg.lags[i] <= cfg.lags[i - 1]) {
            errors.push_back("analysis.lags must be strictly increasing");
            break;
        }
    }
    auto canonicalize = [&errors](std::vector<int>& v, const std::string& name) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        if (v.empty()) errors.push_back(name + " must be non-empty");
        else if (v.front() < 1) errors.push_back(name + " values must be >= 1");
    };
    canonicalize(cfg.q_values, "analysis.q_range");
    canonicalize(cfg.tau_values, "analysis.tau_range");
    if (!cfg.tau_values.empty() && cfg.tau_values.back() > cfg.tau_cap)
        errors.push_back("analysis.tau_range exceeds tau_cap (" +
                         std::to_string(cfg.tau_cap) +
                         "); raise analysis.tau_cap to search longer horizons");
    if (cfg.floor_epsilon_rel < 0.0)
        errors.push_back("analysis.floor_epsilon_rel must be >= 0");
    if (cfg.out_dir.empty()) errors.push_back("output.directory must be non-empty");

    if (has_synthetic) {
        cfg.scenario.floor_epsilon_rel = cfg.floor_epsilon_rel;
        cfg.scenario.sample_interval_s = cfg.sample_interval_s;
        try {
            cfg.scenario.validate();
        } catch (const ArgumentError& e) {
            errors.push_back(std::string("synthetic scenario: ") + e.what());
        }
    }

    if (!errors.empty()) {
        std::string msg = "invalid config " + path + ":";
        for (const auto& e : errors) msg += "\n  - " + e;
        throw ConfigError(msg);
    }
    return cfg;
}

RunResult run_analyze(const PipelineConfig& cfg) {
    return run_through_spectral(cfg, true);
}

RunResult run_spectrum(const PipelineConfig& cfg) {
    return run_through_spectral(cfg, false);
}

RunResult run_generate(const PipelineConfig& cfg) {
    if (!cfg.use_synthetic)
        throw ConfigError("generate requires a [synthetic] scenario");
    ArtifactWriter writer(cfg.out_dir);
    InputData data = stage("generate", [&] { return acquire(cfg); });
    write_velocity_csv(writer.tmp_path("velocity.csv"), data.field);
    write_power_csv(writer.tmp_path("power.csv"), data.power);

    ManifestInputs mi;
    mi.command = "generate";
    mi.cfg = &cfg;
    mi.data = &data;
    for (const auto& name : writer.pending())
        mi.output_hashes.emplace_back(name, writer.hash_of(name));
    RunResult result;
    for (const auto& name : writer.pending()) result.outputs.push_back(name);
    result.outputs.push_back("manifest.json");
    result.manifest_hash = write_manifest(writer.tmp_path("manifest.json"), mi);
    writer.commit();
    return result;
}

VerifyResult run_verify(const PipelineConfig& cfg) {
    VerifyResult vr;
    InputData data = stage("ingest", [&] { return acquire(cfg); });
    const LagSet lagset(cfg.lags);
    AssembleOptions aopt;
    aopt.measure_toeplitz = cfg.measure_toeplitz;
    aopt.threads = cfg.threads;
    const MasterMatrix master =
        stage("covariance", [&] { return assemble_master(data.field, lagset, aopt); });
    vr.report = verify_structure(master, cfg.toeplitz_warn_rel);

    vr.hermitian_ok = vr.report.hermitian_dev_abs == 0.0;
    if (!vr.hermitian_ok)
        vr.messages.push_back("post-symmetrization Hermitian deviation is nonzero");
    vr.presym_ok = vr.report.presym_hermitian_dev_rel < 1e-10;
    if (!vr.presym_ok)
        vr.messages.push_back("pre-symmetrization Hermitian deviation exceeds 1e-10 relative");
    vr.toeplitz_ok = !vr.report.toeplitz_warning;
    if (!vr.toeplitz_ok)
        vr.messages.push_back("inter-block Toeplitz consistency above warn threshold");
    try {
        (void)decompose(master);
        vr.spectral_gates_ok = true;
    } catch (const Error& e) {
        vr.spectral_gates_ok = false;
        vr.messages.push_back(std::string("spectral gates: ") + e.what());
    }
    return vr;
}

RunResult run_policy(const PipelineConfig& cfg, const std::string& table_csv) {
    ArtifactWriter writer(cfg.out_dir);
    const RiskReturnTable table =
        stage("policy", [&] { return read_table_csv(table_csv); });
    const OptimalPolicy policy = optimize_policy(table);
    write_policy_csv(writer.tmp_path("policy.csv"), policy);
    RunResult result;
    result.outputs.push_back("policy.csv");
    writer.commit();
    return result;
}

}  // namespace farmstate
