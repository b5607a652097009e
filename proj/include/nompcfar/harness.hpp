#pragma once

#include "nompcfar/analysis.hpp"
#include "nompcfar/cfar.hpp"
#include "nompcfar/nomp.hpp"
#include "nompcfar/nomp_cfar.hpp"
#include "nompcfar/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace nompcfar {

// ---- Scenarios ----------------------------------------------------------------

struct ScenarioSpec {
    Dims dims{256};
    std::size_t k_targets = 16;
    std::vector<double> snr_db{18.0}; ///< integrated SNR per target; one value is broadcast
    double min_sep_bins = 2.5;
    std::size_t snapshots = 1;
    std::optional<double> compression_ratio; ///< M/N, 1-D only
    double noise_fluct_db = 0.0;             ///< u: noise power drawn from U[-u, u] dB
    std::uint64_t seed = 1;

    void validate() const;
    double snr_of(std::size_t k) const;
};

struct Scenario {
    CandidateSet truth;                   ///< amplitudes of snapshot 0
    std::vector<CVector> truth_amplitudes; ///< per target, per snapshot
    std::vector<ComplexTensor> observations; ///< one per snapshot (uncompressed)
    std::optional<CompressionOperator> phi;
    CVector compressed; ///< Phi z + noise, when compression is on
    double sigma2 = 1.0;
};

/// Draws frequencies uniformly subject to the per-dimension wrap-distance
/// separation, amplitudes from the integrated SNR at unit nominal noise power
/// with uniform phase, then adds CN(0, sigma2) noise.
Scenario generate_scenario(const ScenarioSpec& spec);

/// Complex-Bernoulli matrix with entries (+-1 +- j)/sqrt(2).
CompressionOperator bernoulli_operator(std::size_t m, std::size_t n, std::mt19937_64& rng);

/// Counter-based seed split of a master seed.
std::uint64_t trial_seed(std::uint64_t master, std::uint64_t index);

// ---- Classical detector -----------------------------------------------------

/// FFT followed by a per-cell CFAR test of every cell (config.alpha is the
/// per-cell multiplier). Firing cells become on-grid components.
DetectionReport classical_cfar_detect(const ComplexTensor& y, const CfarConfig& config);

// ---- Radar conversion --------------------------------------------------------

struct RadarParams {
    double f_c = 77e9;       ///< carrier, Hz
    double mu = 29.982e12;   ///< chirp slope, Hz/s
    double t_s = 1e-7;       ///< fast-time sampling interval, s
    double t_r = 160e-6;     ///< pulse repetition interval, s
    double d = 0.0;          ///< antenna spacing, m; 0 means half a wavelength

    double spacing() const;
    void validate() const;
};

inline constexpr double kSpeedOfLight = 299792458.0;

struct RadarState {
    double range = 0.0;    ///< m
    double velocity = 0.0; ///< m/s, negative when approaching
    double azimuth = 0.0;  ///< rad
};

/// Maps (fast time, slow time, spatial) frequencies to range, radial velocity
/// and azimuth. Missing dimensions yield zero. Slow-time and spatial
/// frequencies are read in (-pi, pi].
RadarState freq_to_state(const FrequencyVector& freqs, const RadarParams& params);

// ---- Experiments ---------------------------------------------------------------

enum class Algorithm { NompCfar, NompCfarForward, NompBaseline, Classical };

std::string to_string(Algorithm algorithm);
Algorithm parse_algorithm(const std::string& text);

struct ExperimentConfig {
    std::string name = "experiment";
    Algorithm algorithm = Algorithm::NompCfar;
    std::size_t trials = 100;
    std::uint64_t seed = 1;
    std::size_t workers = 1;

    ScenarioSpec scenario;

    double p_fa = 1e-2;
    std::optional<double> alpha; ///< overrides the design from p_fa
    double sigma2 = 1.0;         ///< noise power assumed by nomp_baseline
    NompCfarSettings detector;   ///< detector.cfar.alpha is filled by design_alpha

    void validate() const;
};

/// Threshold multiplier for the configured algorithm and false-alarm target.
double design_alpha(const ExperimentConfig& config);

/// Parses an INI experiment file with sections [experiment], [scenario],
/// [detector], [refine]. Throws ConfigError naming the file, line or key.
ExperimentConfig parse_experiment_config(std::istream& in, const std::string& source = "<config>");
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct TrialRow {
    std::uint64_t seed = 0;
    std::size_t scenario_id = 0;
    std::size_t k = 0;
    std::size_t k_hat = 0;
    std::size_t n_false = 0;
    std::size_t n_detected = 0;
    bool all_detected = false;
    double freq_mse = 0.0; ///< NaN unless K_hat == K
    double nmse = 0.0;
};

struct ExperimentSummary {
    std::string name;
    std::string algorithm;
    std::size_t trials = 0;
    double p_fa_nominal = 0.0;
    double alpha = 0.0;
    double pfa_measured = 0.0;     ///< mean false components per trial
    double pd_all = 0.0;           ///< fraction of trials with every target detected
    double pd_per_target = 0.0;    ///< fraction of targets detected
    double p_order = 0.0;          ///< fraction of trials with K_hat == K
    double mean_freq_mse = 0.0;    ///< over trials with K_hat == K
    double mean_nmse = 0.0;
};

struct ExperimentResult {
    std::vector<TrialRow> rows;
    ExperimentSummary summary;
};

/// Runs one scored trial. The trial is a pure function of (config, seed).
TrialRow run_trial(const ExperimentConfig& config, double alpha, std::size_t index, std::uint64_t seed);

/// Executes the trials on a bounded worker pool; rows come back in trial order.
ExperimentResult run_experiment(const ExperimentConfig& config);

void write_trials_csv(std::ostream& out, const std::vector<TrialRow>& rows);
void write_summary_csv(std::ostream& out, const ExperimentSummary& summary);

/// Detection records: run_id, k, freq_d..., amp_re, amp_im, amplitude_db,
/// delta_db, threshold_db, noise_floor_db.
void write_detections_csv(std::ostream& out, const DetectionReport& report, const std::string& run_id,
                          bool header = true);

/// Threshold-table row `variant,p_fa,N,Nr,S,r,alpha,alpha_db`.
struct ThresholdRow {
    CfarVariant variant = CfarVariant::CA;
    double p_fa = 1e-2;
    std::size_t n = 256;
    std::size_t n_ref = 50;
    std::size_t snapshots = 1;
    std::size_t os_rank = 0;
    double alpha = 0.0;
};

ThresholdRow compute_threshold(CfarVariant variant, double p_fa, std::size_t n, std::size_t n_ref,
                               std::size_t snapshots, std::size_t os_rank);
void write_threshold_csv(std::ostream& out, const ThresholdRow& row, bool header = true);

} // namespace nompcfar
