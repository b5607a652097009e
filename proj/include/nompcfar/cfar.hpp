#pragma once

#include "nompcfar/tensor.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nompcfar {

enum class CfarVariant { CA, OS };

std::string to_string(CfarVariant variant);
CfarVariant parse_variant(const std::string& text);

struct CfarConfig {
    CfarVariant variant = CfarVariant::CA;
    std::size_t n_ref = 50;   ///< total reference cells N_r
    std::size_t n_guard = 4;  ///< guard cells per side per dimension
    std::size_t os_rank = 0;  ///< r, 1-based; OS only
    double alpha = 1.0;       ///< threshold multiplier
    /// Chebyshev radius around excluded cells; unset means n_guard.
    std::optional<std::size_t> exclusion_radius;

    std::size_t exclusion() const noexcept { return exclusion_radius.value_or(n_guard); }
    void validate() const;
};

struct DeltaReport {
    double delta_db = 0.0;
    GridIndex peak;
    double peak_power = 0.0;
    double noise_floor = 0.0;
    double threshold = 0.0;
    std::size_t n_ref_used = 0;
    bool zero_noise_floor = false;

    bool fires() const noexcept { return delta_db >= 0.0; }
};

struct FalseAlarmSpec {
    double p_fa = 1e-2;
    std::size_t n_cells = 256;
    std::size_t n_ref = 50;
    std::size_t snapshots = 1;
};

/// Reference-cell walk around a cell under test.
///
/// Cells are visited in Chebyshev shells of growing radius, starting just
/// outside the guard box, with circular wrap-around in every dimension.
/// Within a shell, cells closer in Euclidean distance come first; remaining
/// ties are broken per dimension, with the positive offset first.
class ReferenceWindow {
public:
    ReferenceWindow(Dims grid, std::size_t n_guard);

    const Dims& grid() const noexcept { return grid_; }

    /// Linear indices of up to `n_ref` cells, skipping any cell flagged in
    /// `blocked` (may be empty). Never returns the CUT or a guard cell.
    std::vector<std::size_t> collect(std::size_t cut, std::size_t n_ref,
                                     std::span<const std::uint8_t> blocked) const;

private:
    Dims grid_;
    std::vector<std::vector<long>> offsets_;
};

/// Flags every cell within Chebyshev radius `radius` (circular) of an
/// excluded cell.
std::vector<std::uint8_t> exclusion_mask(const Dims& grid, std::span<const GridIndex> excluded,
                                         std::size_t radius);

std::vector<GridIndex> reference_cells(const GridIndex& cut, const Dims& grid, const CfarConfig& config,
                                       std::span<const GridIndex> excluded = {});

/// Mean power over the reference set (CA), or the os_rank-th smallest power (OS).
double noise_floor(const ComplexTensor& spectrum, const GridIndex& cut, const CfarConfig& config,
                   std::span<const GridIndex> excluded = {});

/// Soft CFAR decision on an arbitrary power map. Δ = 10 log10(peak / (α σ̂²)).
DeltaReport cfar_delta_power(std::span<const double> power, const Dims& grid, const CfarConfig& config,
                             const ReferenceWindow& window, std::span<const std::uint8_t> blocked);

/// Soft CFAR decision on a tensor: DFT, peak, noise floor, margin.
DeltaReport cfar_delta(const ComplexTensor& y, const CfarConfig& config, std::span<const GridIndex> excluded = {});

// ---- False-alarm analysis -------------------------------------------------

/// Average false-alarm probability of the peak CA-CFAR detector, by quadrature.
double pfa_from_alpha(double alpha, std::size_t n_cells, std::size_t n_ref);

/// Same quantity from the alternating binomial series; only for n_cells <= 64.
double pfa_from_alpha_series(double alpha, std::size_t n_cells, std::size_t n_ref);

/// Small-P_FA approximation N (alpha/N_r + 1)^{-N_r}.
double pfa_approx(double alpha, std::size_t n_cells, std::size_t n_ref);
double alpha_from_pfa_approx(double p_fa, std::size_t n_cells, std::size_t n_ref);

/// Multi-snapshot CA detector on the snapshot-averaged power.
double pfa_from_alpha_mmv(double alpha, std::size_t n_cells, std::size_t n_ref, std::size_t snapshots);

/// Threshold multiplier achieving p_fa (MMV formula when snapshots > 1).
double alpha_from_pfa(const FalseAlarmSpec& spec);

/// Known-noise threshold multiplier -ln(1 - (1 - p)^{1/N}).
double alpha_nomp(double p_fa, std::size_t n_cells);

double os_threshold(std::span<const double> window, std::size_t os_rank, double alpha_os);
double pfa_from_alpha_os(double alpha_os, std::size_t n_cells, std::size_t n_ref, std::size_t os_rank);
double alpha_from_pfa_os(double p_fa, std::size_t n_cells, std::size_t n_ref, std::size_t os_rank);

// Single-cell (per-bin) false-alarm probability and its inverse.
double cell_pfa_ca(double alpha, std::size_t n_ref);
double alpha_cell_ca(double p_cell, std::size_t n_ref);
double cell_pfa_os(double alpha_os, std::size_t n_ref, std::size_t os_rank);
double alpha_cell_os(double p_cell, std::size_t n_ref, std::size_t os_rank);

} // namespace nompcfar
