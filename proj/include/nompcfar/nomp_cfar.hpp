#pragma once

#include "nompcfar/cfar.hpp"
#include "nompcfar/nomp.hpp"
#include "nompcfar/tensor.hpp"

#include <string>
#include <vector>

namespace nompcfar {

struct NompCfarSettings {
    std::size_t k_max = 32;
    CfarConfig cfar;
    RefineSettings refine;
    std::size_t max_iters = 256; ///< safety bound on loop iterations
    bool record_trace = false;

    void validate() const;
};

enum class Action { Deactivate, Activate, Stop };

std::string to_string(Action action);

struct TraceEntry {
    Action action = Action::Stop;
    std::size_t index = 0; ///< component index the action refers to
    double delta_db = 0.0;
};

struct DetectionReport {
    CandidateSet components;
    /// Per-snapshot amplitudes, one row per component (a single entry for SMV).
    std::vector<CVector> snapshot_amplitudes;
    std::vector<double> margins;     ///< Δ_k in dB
    std::vector<double> thresholds;  ///< α σ̂²_k
    std::vector<double> noise_floors; ///< σ̂²_k
    std::vector<std::size_t> n_ref_used;
    std::size_t iterations = 0;
    bool converged = true;        ///< false when max_iters ran out
    bool saturated = false;       ///< stopped with the CFAR still firing at k_max
    bool cycle_guard = false;     ///< stopped to avoid re-adding a just-removed cell
    std::size_t window_fallbacks = 0; ///< exclusions emptied a window; unblocked window used
    std::size_t skipped_cells = 0;    ///< zero-norm generalized atoms on the DFT grid
    std::vector<TraceEntry> trace;

    std::size_t size() const noexcept { return components.size(); }
};

/// M x N compression matrix, row-major.
struct CompressionOperator {
    std::size_t m = 0;
    std::size_t n = 0;
    CVector matrix;

    static CompressionOperator identity(std::size_t n);
    Complex operator()(std::size_t row, std::size_t col) const { return matrix[row * n + col]; }
    CVector apply(const CVector& x) const;
    void validate() const;
};

ComplexTensor residual(const ComplexTensor& y, const CandidateSet& set);

/// Residual with component k added back.
ComplexTensor pseudo_measurement(const ComplexTensor& y, const CandidateSet& set, std::size_t k);

/// Δ_k of every component on its pseudo-measurement, with the DFT cells of
/// the other components (dilated by the exclusion radius) kept out of the
/// reference window.
std::vector<DeltaReport> component_margins(const ComplexTensor& y, const CandidateSet& set,
                                           const NompCfarSettings& settings);

DetectionReport nomp_cfar(const ComplexTensor& y, const NompCfarSettings& settings);

/// Additive-only variant: detect on the residual until the CFAR stops firing.
DetectionReport nomp_cfar_forward(const ComplexTensor& y, const NompCfarSettings& settings);

/// Shared-frequency multi-snapshot variant; settings.cfar.alpha should come
/// from the MMV false-alarm design.
DetectionReport nomp_cfar_mmv(const std::vector<ComplexTensor>& snapshots, const NompCfarSettings& settings);

/// 1-D compressive variant over generalized atoms Phi a(w) / ||Phi a(w)||.
DetectionReport nomp_cfar_compressive(const CVector& y_c, const CompressionOperator& phi,
                                      const NompCfarSettings& settings);

/// Generalized spectrum ă(w_n)^H y_c on the N-point DFT grid (zero where the
/// generalized atom vanishes).
CVector generalized_spectrum(const CVector& y_c, const CompressionOperator& phi);

} // namespace nompcfar
