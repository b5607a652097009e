#include "nompcfar/errors.hpp"
#include "nompcfar/harness.hpp"
#include "nompcfar/tensor_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace nompcfar;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::ofstream open_output(const fs::path& path) {
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out)
        throw UsageError("cannot write " + path.string());
    return out;
}

/// Writes to `path`, or to stdout when it is empty.
template <class F>
void emit(const std::string& path, F&& write) {
    if (path.empty()) {
        write(std::cout);
        return;
    }
    std::ofstream out = open_output(path);
    write(out);
}

// ---- threshold ---------------------------------------------------------------

struct ThresholdArgs {
    std::string variant = "ca";
    double p_fa = 1e-2;
    std::size_t n = 256;
    std::size_t n_ref = 50;
    std::size_t snapshots = 1;
    std::size_t os_rank = 0;
    std::string out;
};

void run_threshold(const ThresholdArgs& a) {
    const CfarVariant variant = parse_variant(a.variant);
    if (!(a.p_fa > 0.0 && a.p_fa < 1.0))
        throw InvalidArgument("--p-fa must lie in (0, 1)");
    if (variant == CfarVariant::OS && (a.os_rank < 1 || a.os_rank > a.n_ref))
        throw InvalidArgument("--rank must satisfy 1 <= r <= Nr for the OS variant");
    const ThresholdRow row = compute_threshold(variant, a.p_fa, a.n, a.n_ref, a.snapshots, a.os_rank);
    emit(a.out, [&](std::ostream& os) { write_threshold_csv(os, row); });
}

// ---- simulate ----------------------------------------------------------------

struct SimulateArgs {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::optional<std::size_t> trials;
};

void run_simulate(const SimulateArgs& a) {
    ExperimentConfig cfg = load_experiment_config(a.config);
    if (a.seed)
        cfg.seed = *a.seed;
    if (a.workers)
        cfg.workers = *a.workers;
    if (a.trials)
        cfg.trials = *a.trials;
    const ExperimentResult result = run_experiment(cfg);
    if (a.out.empty()) {
        write_trials_csv(std::cout, result.rows);
        write_summary_csv(std::cerr, result.summary);
        return;
    }
    const fs::path out(a.out);
    {
        std::ofstream f = open_output(out);
        write_trials_csv(f, result.rows);
    }
    fs::path summary = out;
    summary.replace_filename(out.stem().string() + "_summary" + out.extension().string());
    {
        std::ofstream f = open_output(summary);
        write_summary_csv(f, result.summary);
    }
    write_summary_csv(std::cout, result.summary);
}

// ---- detect ------------------------------------------------------------------

struct DetectArgs {
    std::vector<std::string> tensors;
    std::string config;
    std::string out;
    std::string format = "csv";
    std::string run_id;
};

nlohmann::json to_json(const DetectionReport& report, const std::string& run_id) {
    using nlohmann::json;
    const double n = static_cast<double>(element_count(report.components.dims));
    json comps = json::array();
    for (std::size_t k = 0; k < report.size(); ++k) {
        const SinusoidComponent& c = report.components.components[k];
        std::vector<double> freq(c.freq.values().begin(), c.freq.values().end());
        comps.push_back({{"k", k},
                         {"freq", freq},
                         {"amp_re", c.amplitude.real()},
                         {"amp_im", c.amplitude.imag()},
                         {"amplitude_db", 10.0 * std::log10(n * std::norm(c.amplitude) / report.noise_floors[k])},
                         {"delta_db", report.margins[k]},
                         {"threshold_db", 10.0 * std::log10(report.thresholds[k])},
                         {"noise_floor_db", 10.0 * std::log10(report.noise_floors[k])},
                         {"n_ref_used", report.n_ref_used[k]}});
    }
    return {{"run_id", run_id},
            {"dims", report.components.dims},
            {"iterations", report.iterations},
            {"converged", report.converged},
            {"saturated", report.saturated},
            {"cycle_guard", report.cycle_guard},
            {"window_fallbacks", report.window_fallbacks},
            {"components", comps}};
}

void run_detect(const DetectArgs& a) {
    if (a.format != "csv" && a.format != "json")
        throw UsageError("--format must be csv or json");
    std::vector<ComplexTensor> cubes;
    for (const auto& path : a.tensors) {
        if (!fs::exists(path))
            throw UsageError("tensor file not found: " + path);
        cubes.push_back(read_tensor_file(path));
        if (cubes.back().dims() != cubes.front().dims())
            throw InvalidArgument("all tensor files must share dims");
    }

    ExperimentConfig cfg;
    if (!a.config.empty())
        cfg = load_experiment_config(a.config);
    cfg.algorithm = Algorithm::NompCfar;
    cfg.scenario.dims = cubes.front().dims();
    cfg.scenario.k_targets = 0;
    cfg.scenario.snapshots = cubes.size();
    cfg.scenario.compression_ratio.reset();
    NompCfarSettings settings = cfg.detector;
    settings.k_max = std::min(settings.k_max, cubes.front().size());
    settings.cfar.alpha = design_alpha(cfg);

    const DetectionReport report = cubes.size() == 1 ? nomp_cfar(cubes.front(), settings)
                                                     : nomp_cfar_mmv(cubes, settings);
    const std::string run_id = a.run_id.empty() ? fs::path(a.tensors.front()).stem().string() : a.run_id;
    emit(a.out, [&](std::ostream& os) {
        if (a.format == "json")
            os << std::setw(2) << to_json(report, run_id) << '\n';
        else
            write_detections_csv(os, report, run_id);
    });
}

// ---- convert -----------------------------------------------------------------

struct ConvertArgs {
    std::string detections;
    std::string out;
    RadarParams radar;
};

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ','))
        out.push_back(cell);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

double parse_number(const std::string& text, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size())
            throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw UsageError("malformed " + what + " value '" + text + "'");
    }
}

void run_convert(const ConvertArgs& a) {
    a.radar.validate();
    std::ifstream in(a.detections);
    if (!in)
        throw UsageError("cannot open detection file " + a.detections);
    std::string line;
    if (!std::getline(in, line))
        throw UsageError("detection file is empty: " + a.detections);
    const auto header = split_csv(line);
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i)
        col[header[i]] = i;
    for (const char* need : {"run_id", "k", "freq_0"})
        if (!col.count(need))
            throw UsageError("detection file lacks a '" + std::string(need) + "' column");
    std::vector<std::size_t> freq_cols;
    for (std::size_t d = 0; col.count("freq_" + std::to_string(d)); ++d)
        freq_cols.push_back(col["freq_" + std::to_string(d)]);

    emit(a.out, [&](std::ostream& os) {
        os << "run_id,k,range_m,velocity_mps,azimuth_rad\n" << std::setprecision(10);
        std::size_t line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty())
                continue;
            const auto cells = split_csv(line);
            if (cells.size() != header.size())
                throw UsageError(a.detections + ":" + std::to_string(line_no) + ": wrong number of fields");
            std::vector<double> w;
            for (std::size_t c : freq_cols)
                w.push_back(parse_number(cells[c], "frequency"));
            const RadarState s = freq_to_state(FrequencyVector(w), a.radar);
            os << cells[col["run_id"]] << ',' << cells[col["k"]] << ',' << s.range << ',' << s.velocity << ','
               << s.azimuth << '\n';
        }
    });
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"NOMP-CFAR line-spectral detection toolkit"};
    app.require_subcommand(1);

    ThresholdArgs ta;
    auto* threshold = app.add_subcommand("threshold", "Threshold multiplier for a false-alarm target");
    threshold->add_option("--variant", ta.variant, "ca or os")->capture_default_str();
    threshold->add_option("--p-fa", ta.p_fa, "Nominal false-alarm probability")->capture_default_str();
    threshold->add_option("-N,--cells", ta.n, "Number of spectrum cells N")->capture_default_str();
    threshold->add_option("--nr", ta.n_ref, "Reference cells N_r")->capture_default_str();
    threshold->add_option("-S,--snapshots", ta.snapshots, "Snapshots S")->capture_default_str();
    threshold->add_option("-r,--rank", ta.os_rank, "OS rank r (1-based)")->capture_default_str();
    threshold->add_option("-o,--out", ta.out, "Output CSV (default stdout)");

    SimulateArgs sa;
    auto* simulate = app.add_subcommand("simulate", "Run a Monte Carlo experiment from a config file");
    simulate->add_option("config", sa.config, "Experiment INI file")->required();
    simulate->add_option("-o,--out", sa.out, "Per-trial CSV; the summary goes next to it as <name>_summary.csv");
    simulate->add_option("--seed", sa.seed, "Override the master seed");
    simulate->add_option("--workers", sa.workers, "Override the worker count");
    simulate->add_option("--trials", sa.trials, "Override the trial count");

    DetectArgs da;
    auto* detect = app.add_subcommand("detect", "Detect sinusoids in LSET tensor files (several files = snapshots)");
    detect->add_option("tensor", da.tensors, "LSET tensor file(s)")->required();
    detect->add_option("-c,--config", da.config, "INI file; [detector] and [refine] are used");
    detect->add_option("-o,--out", da.out, "Output file (default stdout)");
    detect->add_option("--format", da.format, "csv or json")->capture_default_str();
    detect->add_option("--run-id", da.run_id, "Run identifier (default: file stem)");

    ConvertArgs ca;
    auto* convert = app.add_subcommand("convert", "Map detected frequencies to range, velocity and azimuth");
    convert->add_option("detections", ca.detections, "Detection CSV from `detect`")->required();
    convert->add_option("-o,--out", ca.out, "Output CSV (default stdout)");
    convert->add_option("--fc", ca.radar.f_c, "Carrier frequency, Hz")->capture_default_str();
    convert->add_option("--mu", ca.radar.mu, "Chirp slope, Hz/s")->capture_default_str();
    convert->add_option("--ts", ca.radar.t_s, "Fast-time sampling interval, s")->capture_default_str();
    convert->add_option("--tr", ca.radar.t_r, "Chirp repetition interval, s")->capture_default_str();
    convert->add_option("--spacing", ca.radar.d, "Antenna spacing, m (0: half wavelength)")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*threshold)
            run_threshold(ta);
        else if (*simulate)
            run_simulate(sa);
        else if (*detect)
            run_detect(da);
        else if (*convert)
            run_convert(ca);
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const InvalidArgument& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return kExitConfig;
    } catch (const InfeasibleScenario& e) {
        std::cerr << "infeasible scenario: " << e.what() << '\n';
        return kExitConfig;
    } catch (const OutOfFieldOfView& e) {
        std::cerr << "out of field of view: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const NumericalFailure& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const IllConditioned& e) {
        std::cerr << "numerical failure: " << e.what() << " (rcond " << e.rcond() << ")\n";
        return kExitNumerical;
    } catch (const DegenerateWindow& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const DomainError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
