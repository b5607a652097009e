#include "nompcfar/harness.hpp"

#include "fft.hpp"
#include "nompcfar/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

namespace nompcfar {

namespace {

constexpr std::size_t kRejectionBudget = 100000;

std::string fmt(double v) {
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

double db(double v) {
    return 10.0 * std::log10(v);
}

Complex cn(std::mt19937_64& rng, double variance) {
    std::normal_distribution<double> g(0.0, std::sqrt(0.5 * variance));
    const double re = g(rng);
    const double im = g(rng);
    return {re, im};
}

} // namespace

// ---- Scenarios ----------------------------------------------------------------

void ScenarioSpec::validate() const {
    if (dims.empty())
        throw InvalidArgument("scenario: dims must be non-empty");
    element_count(dims);
    if (!snr_db.empty() && snr_db.size() != 1 && snr_db.size() != k_targets)
        throw InvalidArgument("scenario: snr_db needs one value or one per target");
    if (k_targets > 0 && snr_db.empty())
        throw InvalidArgument("scenario: snr_db is required when targets are present");
    if (snapshots < 1)
        throw InvalidArgument("scenario: snapshots must be >= 1");
    if (!(min_sep_bins >= 0.0))
        throw InvalidArgument("scenario: min_sep_bins must be non-negative");
    if (!(noise_fluct_db >= 0.0))
        throw InvalidArgument("scenario: noise_fluct_db must be non-negative");
    for (std::size_t n : dims)
        if (min_sep_bins * static_cast<double>(k_targets) >= static_cast<double>(n))
            throw InfeasibleScenario("scenario: separation constraint cannot be met for this many targets");
    if (compression_ratio) {
        if (dims.size() != 1)
            throw InvalidArgument("scenario: compression is 1-D only");
        if (!(*compression_ratio > 0.0 && *compression_ratio <= 1.0))
            throw InvalidArgument("scenario: compression_ratio must lie in (0, 1]");
        if (snapshots != 1)
            throw InvalidArgument("scenario: compression with several snapshots is not supported");
    }
}

double ScenarioSpec::snr_of(std::size_t k) const {
    return snr_db.size() == 1 ? snr_db.front() : snr_db.at(k);
}

CompressionOperator bernoulli_operator(std::size_t m, std::size_t n, std::mt19937_64& rng) {
    CompressionOperator op{m, n, CVector(m * n)};
    const double s = 1.0 / std::numbers::sqrt2;
    std::uniform_int_distribution<int> bit(0, 3);
    for (auto& v : op.matrix) {
        const int b = bit(rng);
        v = Complex((b & 1) ? s : -s, (b & 2) ? s : -s);
    }
    return op;
}

Scenario generate_scenario(const ScenarioSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> angle(0.0, kTwoPi);
    const std::size_t rank = spec.dims.size();
    const std::size_t n = element_count(spec.dims);

    std::vector<FrequencyVector> freqs;
    for (std::size_t attempt = 0;; ++attempt) {
        if (attempt >= kRejectionBudget)
            throw InfeasibleScenario("scenario: rejection budget exhausted while placing frequencies");
        freqs.clear();
        for (std::size_t k = 0; k < spec.k_targets; ++k) {
            std::vector<double> w(rank);
            for (auto& x : w)
                x = angle(rng);
            freqs.emplace_back(std::move(w));
        }
        bool ok = true;
        for (std::size_t a = 0; a < freqs.size() && ok; ++a)
            for (std::size_t b = a + 1; b < freqs.size() && ok; ++b)
                for (std::size_t d = 0; d < rank && ok; ++d)
                    ok = wrap_dist(freqs[a][d], freqs[b][d]) > spec.min_sep_bins * kTwoPi / static_cast<double>(spec.dims[d]);
        if (ok)
            break;
    }

    Scenario sc;
    sc.truth.dims = spec.dims;
    for (std::size_t k = 0; k < spec.k_targets; ++k) {
        // Integrated SNR at unit nominal noise power: N |x|^2 = 10^{SNR/10}.
        const double mag = std::sqrt(std::pow(10.0, spec.snr_of(k) / 10.0) / static_cast<double>(n));
        CVector amps(spec.snapshots);
        for (auto& x : amps)
            x = std::polar(mag, angle(rng));
        sc.truth.components.push_back({amps.front(), freqs[k]});
        sc.truth_amplitudes.push_back(std::move(amps));
    }

    sc.sigma2 = 1.0;
    if (spec.noise_fluct_db > 0.0) {
        std::uniform_real_distribution<double> u(-spec.noise_fluct_db, spec.noise_fluct_db);
        sc.sigma2 = std::pow(10.0, u(rng) / 10.0);
    }

    for (std::size_t s = 0; s < spec.snapshots; ++s) {
        std::vector<SinusoidComponent> comps;
        for (std::size_t k = 0; k < spec.k_targets; ++k)
            comps.push_back({sc.truth_amplitudes[k][s], freqs[k]});
        ComplexTensor z = synthesize(spec.dims, comps);
        if (!spec.compression_ratio)
            for (auto& v : z.data())
                v += cn(rng, sc.sigma2);
        sc.observations.push_back(std::move(z));
    }

    if (spec.compression_ratio) {
        const auto m = static_cast<std::size_t>(std::lround(*spec.compression_ratio * static_cast<double>(n)));
        sc.phi = bernoulli_operator(std::max<std::size_t>(m, 1), n, rng);
        sc.compressed = sc.phi->apply(sc.observations.front().vec());
        for (auto& v : sc.compressed)
            v += cn(rng, sc.sigma2);
    }
    return sc;
}

std::uint64_t trial_seed(std::uint64_t master, std::uint64_t index) {
    // SplitMix64 output for counter position index + 1.
    std::uint64_t z = master + (index + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// ---- Classical detector -----------------------------------------------------

DetectionReport classical_cfar_detect(const ComplexTensor& y, const CfarConfig& config) {
    config.validate();
    const Dims& dims = y.dims();
    const std::size_t n = y.size();
    CVector spec(n);
    detail::fft_forward(y.data(), dims, spec);
    const double norm = 1.0 / std::sqrt(static_cast<double>(n));
    RVector power(n);
    for (std::size_t i = 0; i < n; ++i) {
        spec[i] *= norm;
        power[i] = std::norm(spec[i]);
    }
    const ReferenceWindow window(dims, config.n_guard);
    DetectionReport report;
    report.components.dims = dims;
    std::vector<double> ref;
    for (std::size_t i = 0; i < n; ++i) {
        const auto cells = window.collect(i, config.n_ref, {});
        if (cells.empty())
            throw DegenerateWindow("classical cfar: no reference cell");
        ref.clear();
        for (std::size_t c : cells)
            ref.push_back(power[c]);
        double floor = 0.0;
        if (config.variant == CfarVariant::CA) {
            for (double p : ref)
                floor += p;
            floor /= static_cast<double>(ref.size());
        } else {
            floor = os_threshold(ref, std::min(config.os_rank, ref.size()), 1.0);
        }
        const double threshold = config.alpha * floor;
        if (power[i] < threshold || power[i] == 0.0)
            continue;
        const GridIndex idx = grid_index(i, dims);
        const Complex amp = spec[i] * norm;
        report.components.components.push_back({amp, cell_frequency(idx, dims)});
        report.snapshot_amplitudes.push_back({amp});
        report.margins.push_back(threshold > 0.0 ? db(power[i] / threshold) : std::numeric_limits<double>::infinity());
        report.thresholds.push_back(threshold);
        report.noise_floors.push_back(floor);
        report.n_ref_used.push_back(cells.size());
    }
    report.iterations = 1;
    return report;
}

// ---- Radar conversion --------------------------------------------------------

double RadarParams::spacing() const {
    return d > 0.0 ? d : kSpeedOfLight / (2.0 * f_c);
}

void RadarParams::validate() const {
    for (double v : {f_c, mu, t_s, t_r})
        if (!(v > 0.0) || !std::isfinite(v))
            throw InvalidArgument("radar parameters must be positive");
    if (!(d >= 0.0))
        throw InvalidArgument("antenna spacing must be non-negative");
}

RadarState freq_to_state(const FrequencyVector& freqs, const RadarParams& params) {
    params.validate();
    auto signed_angle = [](double w) { return w > std::numbers::pi ? w - kTwoPi : w; };
    constexpr double pi = std::numbers::pi;
    const double c = kSpeedOfLight;
    RadarState s;
    if (freqs.size() >= 1)
        s.range = c * freqs[0] / (4.0 * pi * params.mu * params.t_s);
    if (freqs.size() >= 2)
        s.velocity = c * signed_angle(freqs[1]) / (4.0 * pi * params.f_c * params.t_r);
    if (freqs.size() >= 3) {
        double arg = c * signed_angle(freqs[2]) / (2.0 * pi * params.f_c * params.spacing());
        if (std::fabs(arg) > 1.0 + 1e-12)
            throw OutOfFieldOfView("spatial frequency maps outside the field of view");
        arg = std::clamp(arg, -1.0, 1.0);
        s.azimuth = std::asin(arg);
    }
    return s;
}

// ---- Experiments ---------------------------------------------------------------

std::string to_string(Algorithm algorithm) {
    switch (algorithm) {
    case Algorithm::NompCfar:
        return "nomp_cfar";
    case Algorithm::NompCfarForward:
        return "nomp_cfar_forward";
    case Algorithm::NompBaseline:
        return "nomp_baseline";
    case Algorithm::Classical:
        return "classical";
    }
    return "unknown";
}

Algorithm parse_algorithm(const std::string& text) {
    for (Algorithm a : {Algorithm::NompCfar, Algorithm::NompCfarForward, Algorithm::NompBaseline, Algorithm::Classical})
        if (text == to_string(a))
            return a;
    throw ConfigError("unknown algorithm '" + text +
                      "' (expected nomp_cfar, nomp_cfar_forward, nomp_baseline or classical)");
}

void ExperimentConfig::validate() const {
    scenario.validate();
    if (!(p_fa > 0.0 && p_fa < 1.0))
        throw ConfigError("detector.p_fa must lie in (0, 1)");
    if (alpha && !(*alpha > 0.0))
        throw ConfigError("detector.alpha must be positive");
    if (!(sigma2 > 0.0))
        throw ConfigError("detector.sigma2 must be positive");
    if (workers < 1)
        throw ConfigError("experiment.workers must be >= 1");
    const bool multi = scenario.snapshots > 1 || scenario.compression_ratio.has_value();
    if (multi && algorithm != Algorithm::NompCfar)
        throw ConfigError(to_string(algorithm) + " supports single-snapshot uncompressed scenes only");
    if (detector.cfar.variant == CfarVariant::OS && scenario.snapshots > 1)
        throw ConfigError("the OS variant has no multi-snapshot design");
    NompCfarSettings probe = detector;
    probe.cfar.alpha = 1.0;
    probe.validate();
}

double design_alpha(const ExperimentConfig& config) {
    if (config.alpha)
        return *config.alpha;
    const std::size_t n = element_count(config.scenario.dims);
    const CfarConfig& cfar = config.detector.cfar;
    switch (config.algorithm) {
    case Algorithm::NompBaseline:
        return alpha_nomp(config.p_fa, n);
    case Algorithm::Classical:
        return cfar.variant == CfarVariant::CA ? alpha_cell_ca(config.p_fa / static_cast<double>(n), cfar.n_ref)
                                               : alpha_cell_os(config.p_fa / static_cast<double>(n), cfar.n_ref, cfar.os_rank);
    case Algorithm::NompCfar:
    case Algorithm::NompCfarForward:
        break;
    }
    if (cfar.variant == CfarVariant::OS)
        return alpha_from_pfa_os(config.p_fa, n, cfar.n_ref, cfar.os_rank);
    return alpha_from_pfa({config.p_fa, n, cfar.n_ref, config.scenario.snapshots});
}

TrialRow run_trial(const ExperimentConfig& config, double alpha, std::size_t index, std::uint64_t seed) {
    ScenarioSpec spec = config.scenario;
    spec.seed = seed;
    const Scenario sc = generate_scenario(spec);
    NompCfarSettings settings = config.detector;
    settings.cfar.alpha = alpha;

    CandidateSet estimate;
    switch (config.algorithm) {
    case Algorithm::NompCfar:
        if (sc.phi)
            estimate = nomp_cfar_compressive(sc.compressed, *sc.phi, settings).components;
        else if (spec.snapshots > 1)
            estimate = nomp_cfar_mmv(sc.observations, settings).components;
        else
            estimate = nomp_cfar(sc.observations.front(), settings).components;
        break;
    case Algorithm::NompCfarForward:
        estimate = nomp_cfar_forward(sc.observations.front(), settings).components;
        break;
    case Algorithm::NompBaseline:
        estimate = nomp_baseline(sc.observations.front(), config.sigma2, config.p_fa, settings.refine);
        break;
    case Algorithm::Classical:
        estimate = classical_cfar_detect(sc.observations.front(), settings.cfar).components;
        break;
    }

    const ScoreResult s = score(sc.truth, estimate, spec.dims);
    TrialRow row;
    row.seed = seed;
    row.scenario_id = index;
    row.k = s.n_true;
    row.k_hat = s.n_estimated;
    row.n_false = s.n_false;
    row.n_detected = s.n_detected_true;
    row.all_detected = s.all_detected;
    row.freq_mse = s.freq_mse();
    row.nmse = s.nmse;
    return row;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    const double alpha = design_alpha(config);
    ExperimentResult result;
    result.rows.resize(config.trials);

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= config.trials)
                return;
            try {
                result.rows[i] = run_trial(config, alpha, i, trial_seed(config.seed, i));
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
                next = config.trials;
                return;
            }
        }
    };
    const std::size_t n_workers = std::min(config.workers, std::max<std::size_t>(config.trials, 1));
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < n_workers; ++w)
            pool.emplace_back(worker);
        for (auto& t : pool)
            t.join();
    }
    if (failure)
        std::rethrow_exception(failure);

    ExperimentSummary& sum = result.summary;
    sum.name = config.name;
    sum.algorithm = to_string(config.algorithm);
    sum.trials = config.trials;
    sum.p_fa_nominal = config.p_fa;
    sum.alpha = alpha;
    std::size_t targets = 0;
    std::size_t detected = 0;
    std::size_t mse_count = 0;
    std::size_t nmse_count = 0;
    for (const TrialRow& r : result.rows) {
        sum.pfa_measured += static_cast<double>(r.n_false);
        sum.pd_all += r.all_detected ? 1.0 : 0.0;
        sum.p_order += r.k == r.k_hat ? 1.0 : 0.0;
        targets += r.k;
        detected += r.n_detected;
        if (!std::isnan(r.freq_mse)) {
            sum.mean_freq_mse += r.freq_mse;
            ++mse_count;
        }
        if (!std::isnan(r.nmse)) {
            sum.mean_nmse += r.nmse;
            ++nmse_count;
        }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double t = static_cast<double>(config.trials);
    if (config.trials > 0) {
        sum.pfa_measured /= t;
        sum.pd_all /= t;
        sum.p_order /= t;
    } else {
        sum.pfa_measured = sum.pd_all = sum.p_order = nan;
    }
    sum.pd_per_target = targets > 0 ? static_cast<double>(detected) / static_cast<double>(targets) : nan;
    sum.mean_freq_mse = mse_count > 0 ? sum.mean_freq_mse / static_cast<double>(mse_count) : nan;
    sum.mean_nmse = nmse_count > 0 ? sum.mean_nmse / static_cast<double>(nmse_count) : nan;
    return result;
}

void write_trials_csv(std::ostream& out, const std::vector<TrialRow>& rows) {
    out << "seed,scenario_id,K,K_hat,n_false,all_detected,freq_mse,nmse\n";
    for (const TrialRow& r : rows)
        out << r.seed << ',' << r.scenario_id << ',' << r.k << ',' << r.k_hat << ',' << r.n_false << ','
            << (r.all_detected ? 1 : 0) << ',' << fmt(r.freq_mse) << ',' << fmt(r.nmse) << '\n';
}

void write_summary_csv(std::ostream& out, const ExperimentSummary& s) {
    out << "name,algorithm,trials,p_fa_nominal,alpha,pfa_measured,pd_all,pd_per_target,p_order,mean_freq_mse,"
           "mean_nmse\n";
    out << s.name << ',' << s.algorithm << ',' << s.trials << ',' << fmt(s.p_fa_nominal) << ',' << fmt(s.alpha) << ','
        << fmt(s.pfa_measured) << ',' << fmt(s.pd_all) << ',' << fmt(s.pd_per_target) << ',' << fmt(s.p_order) << ','
        << fmt(s.mean_freq_mse) << ',' << fmt(s.mean_nmse) << '\n';
}

void write_detections_csv(std::ostream& out, const DetectionReport& report, const std::string& run_id, bool header) {
    const std::size_t rank = report.components.dims.size();
    const double n = static_cast<double>(element_count(report.components.dims));
    if (header) {
        out << "run_id,k";
        for (std::size_t d = 0; d < rank; ++d)
            out << ",freq_" << d;
        out << ",amp_re,amp_im,amplitude_db,delta_db,threshold_db,noise_floor_db\n";
    }
    for (std::size_t k = 0; k < report.size(); ++k) {
        const SinusoidComponent& c = report.components.components[k];
        const double floor = k < report.noise_floors.size() ? report.noise_floors[k] : std::nan("");
        out << run_id << ',' << k;
        for (std::size_t d = 0; d < rank; ++d)
            out << ',' << fmt(c.freq[d]);
        out << ',' << fmt(c.amplitude.real()) << ',' << fmt(c.amplitude.imag()) << ','
            << fmt(db(n * std::norm(c.amplitude) / floor)) << ','
            << fmt(k < report.margins.size() ? report.margins[k] : std::nan("")) << ','
            << fmt(k < report.thresholds.size() ? db(report.thresholds[k]) : std::nan("")) << ',' << fmt(db(floor))
            << '\n';
    }
}

ThresholdRow compute_threshold(CfarVariant variant, double p_fa, std::size_t n, std::size_t n_ref,
                               std::size_t snapshots, std::size_t os_rank) {
    ThresholdRow row{variant, p_fa, n, n_ref, snapshots, os_rank, 0.0};
    if (variant == CfarVariant::OS) {
        if (snapshots != 1)
            throw InvalidArgument("threshold: the OS variant has no multi-snapshot design");
        row.alpha = alpha_from_pfa_os(p_fa, n, n_ref, os_rank);
    } else {
        row.alpha = alpha_from_pfa({p_fa, n, n_ref, snapshots});
    }
    return row;
}

void write_threshold_csv(std::ostream& out, const ThresholdRow& row, bool header) {
    if (header)
        out << "variant,p_fa,N,Nr,S,r,alpha,alpha_db\n";
    out << to_string(row.variant) << ',' << fmt(row.p_fa) << ',' << row.n << ',' << row.n_ref << ',' << row.snapshots
        << ',' << row.os_rank << ',' << fmt(row.alpha) << ',' << fmt(db(row.alpha)) << '\n';
}

} // namespace nompcfar
