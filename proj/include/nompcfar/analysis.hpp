#pragma once

#include "nompcfar/nomp.hpp"
#include "nompcfar/nomp_cfar.hpp"
#include "nompcfar/tensor.hpp"

#include <span>

namespace nompcfar {

/// First-order Marcum Q-function Q1(a, b) = P(|a + n|^2 > b^2), n ~ CN(0, 2).
double marcum_q1(double a, double b);

/// Detection probability of a single target under the CA-CFAR design,
/// averaged over the threshold estimate and with the mean straddle loss
/// |beta| = 0.88^D.
double pd_single(double snr_linear, double alpha, std::size_t n_ref, std::size_t d_dims);

/// Product of pd_single over the targets: an upper bound on detecting all of them.
double pd_all_upper(std::span<const double> snrs_linear, double alpha, std::size_t n_ref, std::size_t d_dims);

/// Single-tone frequency CRB (rad^2) for integrated SNR snr_linear = N|x|^2/sigma^2.
double crb_single_freq(std::size_t n, double snr_linear);

struct ScoreResult {
    std::size_t n_true = 0;
    std::size_t n_estimated = 0;
    std::size_t n_detected_true = 0;
    std::size_t n_false = 0;
    bool all_detected = false;
    bool order_correct = false; ///< K_hat == K
    std::size_t n_matched = 0;
    /// Sum over matched pairs of squared wrap distances summed over dimensions;
    /// only meaningful when order_correct.
    double freq_sq_error = 0.0;
    double nmse = 0.0; ///< ||z_hat - z||^2 / ||z||^2, NaN when z = 0

    /// Mean squared frequency error per matched pair, NaN unless the order is correct.
    double freq_mse() const;
};

/// Greedy matching by increasing max-over-dimensions distance in DFT bins.
/// A truth is detected when matched within 0.5 bins; an estimate is a false
/// alarm when it is at least 0.5 bins away from every truth.
ScoreResult score(const CandidateSet& truth, const CandidateSet& estimate, const Dims& dims);
ScoreResult score(const CandidateSet& truth, const DetectionReport& estimate, const Dims& dims);

} // namespace nompcfar
