#pragma once

#include "nompcfar/cfar.hpp"
#include "nompcfar/nomp.hpp"
#include "nompcfar/tensor.hpp"

#include <cstdint>
#include <map>
#include <vector>

namespace nompcfar::detail {

using Snapshots = std::vector<CVector>;

/// Objective value with first and second derivatives (D x D, row-major).
struct ObjectiveEval {
    double value = 0.0;
    RVector gradient;
    RVector hessian;
};

/// Dictionary of (possibly compressed) atoms b(w).
///
/// Plain model: b(w) = a(w), q(w) = ||b||^2 = N.
/// Compressive model (1-D): b(w) = Phi a(w), q(w) = a^H Phi^H Phi a.
/// All matched-filter work happens on back-projected data v = Phi^H r, so
/// b(w)^H r = a(w)^H v and the concentrated objective is sum_s |a^H v_s|^2 / q.
class AtomModel {
public:
    explicit AtomModel(Dims dims);
    /// `phi` holds M x N entries, row-major.
    AtomModel(std::size_t m, std::size_t n, CVector phi);

    bool compressive() const noexcept { return !phi_.empty(); }
    const Dims& dims() const noexcept { return dims_; }
    std::size_t n() const noexcept { return n_; }
    std::size_t out_size() const noexcept { return compressive() ? m_ : n_; }

    CVector atom(const FrequencyVector& freq) const;
    double norm2(const FrequencyVector& freq) const;
    CVector back_project(const CVector& r) const;
    Snapshots back_project(const Snapshots& r) const;

    /// a(w)^H v
    Complex correlate(const CVector& v, const FrequencyVector& freq) const;
    ObjectiveEval evaluate(const Snapshots& v, const FrequencyVector& freq, bool derivatives) const;

    /// Snapshot-averaged normalized power on the N-point DFT grid.
    RVector grid_power(const Snapshots& v) const;
    /// Argmax of the objective over the gamma-oversampled grid.
    FrequencyVector coarse_peak(const Snapshots& v, std::size_t gamma) const;
    /// Grid points whose generalized atom has (numerically) zero norm.
    std::size_t skipped_cells() const noexcept { return skipped_; }

private:
    const RVector& norm2_on_grid(std::size_t gamma) const;
    double norm2_from_lags(double omega, double* d1, double* d2) const;

    Dims dims_;
    std::size_t n_ = 0;
    std::size_t m_ = 0;
    CVector phi_;
    CVector lags_; // c_k = sum_{m-n=k} (Phi^H Phi)_{mn}, k = -(N-1)..N-1
    double zero_norm_ = 0.0;
    mutable std::map<std::size_t, RVector> q_cache_;
    mutable std::size_t skipped_ = 0;
};

struct Component {
    FrequencyVector freq;
    CVector amps; // one per snapshot
    CVector atom; // b(freq)
    double q = 0.0;
};

/// Greedy pursuit state: data, model and the current component list.
class Pursuit {
public:
    Pursuit(const AtomModel& model, Snapshots data, RefineSettings settings);

    const AtomModel& model() const noexcept { return model_; }
    const Snapshots& data() const noexcept { return data_; }
    std::size_t snapshots() const noexcept { return data_.size(); }
    const RefineSettings& settings() const noexcept { return settings_; }

    std::vector<Component> comps;

    Snapshots residual() const;
    Snapshots pseudo(std::size_t k) const;
    double residual_energy() const;

    Component make(const FrequencyVector& freq, const Snapshots& v) const;
    /// Damped Newton ascent of the objective on back-projected data `v`.
    void refine_single(Component& c, const Snapshots& v) const;

    /// Coarse detection plus single refinement on the residual; appends.
    void detect_one();
    void cyclic();
    /// Joint LS amplitudes; throws IllConditioned.
    void least_squares();
    /// LS that keeps the current amplitudes when the system is singular.
    bool least_squares_safe();
    void merge_duplicates();
    /// One NOMP iteration: detect, cyclic refinement, LS.
    void nomp_step();

    GridIndex cell(std::size_t k) const;
    std::vector<GridIndex> cells_except(std::size_t skip) const;

    /// CFAR margin of every component on its pseudo-measurement; exclusions
    /// are the cells of the other components. A window emptied by exclusions
    /// falls back to the unblocked window and is counted in `fallbacks`.
    std::vector<DeltaReport> margins(const CfarConfig& cfar, const ReferenceWindow& window,
                                     std::size_t* fallbacks) const;
    /// CFAR test on the residual with every component excluded.
    DeltaReport residual_test(const CfarConfig& cfar, const ReferenceWindow& window, bool* fallback) const;

private:
    DeltaReport test(const Snapshots& r, std::span<const GridIndex> excluded, const CfarConfig& cfar,
                     const ReferenceWindow& window, bool* fallback) const;

    const AtomModel& model_;
    Snapshots data_;
    RefineSettings settings_;
};

std::vector<SinusoidComponent> to_public(const std::vector<Component>& comps);
std::vector<Component> from_public(const AtomModel& model, const std::vector<SinusoidComponent>& comps);

} // namespace nompcfar::detail
