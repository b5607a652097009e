#include "nompcfar/analysis.hpp"

#include "nompcfar/errors.hpp"
#include "quadrature.hpp"

#include <boost/math/distributions/non_central_chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

namespace nompcfar {

double marcum_q1(double a, double b) {
    if (!(a >= 0.0) || !(b >= 0.0) || !std::isfinite(a) || !std::isfinite(b))
        throw InvalidArgument("marcum_q1: arguments must be finite and non-negative");
    if (b == 0.0)
        return 1.0;
    if (a == 0.0)
        return std::exp(-0.5 * b * b);
    // Q1(a, b) is the survival function of a noncentral chi-square with two
    // degrees of freedom and noncentrality a^2, evaluated at b^2.
    const boost::math::non_central_chi_squared dist(2.0, a * a);
    return std::clamp(boost::math::cdf(boost::math::complement(dist, b * b)), 0.0, 1.0);
}

double pd_single(double snr_linear, double alpha, std::size_t n_ref, std::size_t d_dims) {
    if (!(snr_linear >= 0.0))
        throw InvalidArgument("pd_single: snr must be non-negative");
    if (!(alpha > 0.0) || n_ref < 1 || d_dims < 1)
        throw InvalidArgument("pd_single: invalid detector design");
    if (std::isinf(snr_linear))
        return 1.0;
    const double a = std::pow(0.88, static_cast<double>(d_dims)) * std::sqrt(2.0 * snr_linear);
    const double nr = static_cast<double>(n_ref);
    // T ~ Gamma(N_r, alpha / N_r) is the normalized threshold.
    auto h = [&](double t) { return marcum_q1(a, std::sqrt(2.0 * t)); };
    const double p = detail::gamma_expectation(h, nr, alpha / nr, "pd_single");
    return std::clamp(p, 0.0, 1.0);
}

double pd_all_upper(std::span<const double> snrs_linear, double alpha, std::size_t n_ref, std::size_t d_dims) {
    if (snrs_linear.empty())
        throw InvalidArgument("pd_all_upper: empty target list");
    double p = 1.0;
    for (double snr : snrs_linear)
        p *= pd_single(snr, alpha, n_ref, d_dims);
    return p;
}

double crb_single_freq(std::size_t n, double snr_linear) {
    if (n < 2)
        throw InvalidArgument("crb_single_freq: need at least two samples");
    if (!(snr_linear > 0.0))
        throw InvalidArgument("crb_single_freq: snr must be positive");
    const double nn = static_cast<double>(n);
    const double per_sample = snr_linear / nn;
    return 6.0 / (per_sample * nn * (nn * nn - 1.0));
}

double ScoreResult::freq_mse() const {
    if (!order_correct || n_matched == 0)
        return std::numeric_limits<double>::quiet_NaN();
    return freq_sq_error / static_cast<double>(n_matched);
}

ScoreResult score(const CandidateSet& truth, const CandidateSet& estimate, const Dims& dims) {
    const std::size_t rank = dims.size();
    for (const auto* set : {&truth, &estimate})
        for (const auto& c : set->components)
            if (c.freq.size() != rank)
                throw InvalidArgument("score: frequency rank does not match dims");

    auto bins = [&](const FrequencyVector& a, const FrequencyVector& b) {
        double m = 0.0;
        for (std::size_t d = 0; d < rank; ++d)
            m = std::max(m, wrap_dist(a[d], b[d]) * static_cast<double>(dims[d]) / kTwoPi);
        return m;
    };

    ScoreResult out;
    out.n_true = truth.size();
    out.n_estimated = estimate.size();
    out.order_correct = out.n_true == out.n_estimated;

    std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
    pairs.reserve(truth.size() * estimate.size());
    std::vector<double> nearest(estimate.size(), std::numeric_limits<double>::infinity());
    for (std::size_t t = 0; t < truth.size(); ++t)
        for (std::size_t e = 0; e < estimate.size(); ++e) {
            const double d = bins(truth.components[t].freq, estimate.components[e].freq);
            nearest[e] = std::min(nearest[e], d);
            pairs.emplace_back(d, t, e);
        }
    std::sort(pairs.begin(), pairs.end());
    std::vector<bool> truth_used(truth.size(), false);
    std::vector<bool> est_used(estimate.size(), false);
    for (const auto& [d, t, e] : pairs) {
        if (d > 0.5)
            break;
        if (truth_used[t] || est_used[e])
            continue;
        truth_used[t] = est_used[e] = true;
        ++out.n_matched;
        for (std::size_t k = 0; k < rank; ++k) {
            const double w = wrap_dist(truth.components[t].freq[k], estimate.components[e].freq[k]);
            out.freq_sq_error += w * w;
        }
    }
    out.n_detected_true = out.n_matched;
    out.all_detected = out.n_detected_true == out.n_true;
    for (double d : nearest)
        if (d >= 0.5)
            ++out.n_false;

    const ComplexTensor z = synthesize(dims, truth.components);
    const ComplexTensor diff = synthesize(dims, estimate.components) - z;
    const double ez = z.energy();
    out.nmse = ez > 0.0 ? diff.energy() / ez : std::numeric_limits<double>::quiet_NaN();
    return out;
}

ScoreResult score(const CandidateSet& truth, const DetectionReport& estimate, const Dims& dims) {
    return score(truth, estimate.components, dims);
}

} // namespace nompcfar
