#include "nompcfar/cfar.hpp"

#include "nompcfar/errors.hpp"
#include "quadrature.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <numeric>

namespace nompcfar {

std::string to_string(CfarVariant variant) {
    return variant == CfarVariant::CA ? "CA" : "OS";
}

CfarVariant parse_variant(const std::string& text) {
    std::string t = text;
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::toupper(c); });
    if (t == "CA")
        return CfarVariant::CA;
    if (t == "OS")
        return CfarVariant::OS;
    throw InvalidArgument("unknown CFAR variant '" + text + "' (expected CA or OS)");
}

void CfarConfig::validate() const {
    if (n_ref < 1)
        throw InvalidArgument("cfar: n_ref must be >= 1");
    if (!(alpha > 0.0) || !std::isfinite(alpha))
        throw InvalidArgument("cfar: alpha must be positive");
    if (variant == CfarVariant::OS && (os_rank < 1 || os_rank > n_ref))
        throw InvalidArgument("cfar: os_rank must lie in [1, n_ref]");
}

// ---- Geometry ---------------------------------------------------------------

ReferenceWindow::ReferenceWindow(Dims grid, std::size_t n_guard) : grid_(std::move(grid)) {
    const std::size_t total = element_count(grid_);
    const std::size_t rank = grid_.size();
    // Each residue class appears exactly once: offsets in [-(N-1)/2, N/2].
    std::vector<long> lo(rank);
    std::vector<long> hi(rank);
    for (std::size_t d = 0; d < rank; ++d) {
        lo[d] = -static_cast<long>((grid_[d] - 1) / 2);
        hi[d] = static_cast<long>(grid_[d] / 2);
    }
    offsets_.reserve(total);
    std::vector<long> off(lo);
    for (std::size_t i = 0; i < total; ++i) {
        long cheb = 0;
        for (long o : off)
            cheb = std::max(cheb, std::labs(o));
        if (cheb > static_cast<long>(n_guard))
            offsets_.push_back(off);
        for (std::size_t d = 0; d < rank; ++d) {
            if (++off[d] <= hi[d])
                break;
            off[d] = lo[d];
        }
    }
    auto key_less = [](const std::vector<long>& a, const std::vector<long>& b) {
        long ca = 0, cb = 0, sa = 0, sb = 0;
        for (std::size_t d = 0; d < a.size(); ++d) {
            ca = std::max(ca, std::labs(a[d]));
            cb = std::max(cb, std::labs(b[d]));
            sa += a[d] * a[d];
            sb += b[d] * b[d];
        }
        if (ca != cb)
            return ca < cb;
        if (sa != sb)
            return sa < sb;
        for (std::size_t d = 0; d < a.size(); ++d) {
            if (std::labs(a[d]) != std::labs(b[d]))
                return std::labs(a[d]) < std::labs(b[d]);
            if (a[d] != b[d])
                return a[d] > b[d];
        }
        return false;
    };
    std::sort(offsets_.begin(), offsets_.end(), key_less);
}

std::vector<std::size_t> ReferenceWindow::collect(std::size_t cut, std::size_t n_ref,
                                                  std::span<const std::uint8_t> blocked) const {
    const std::size_t rank = grid_.size();
    const GridIndex centre = grid_index(cut, grid_);
    std::vector<std::size_t> cells;
    cells.reserve(n_ref);
    for (const auto& off : offsets_) {
        if (cells.size() >= n_ref)
            break;
        std::size_t linear = 0;
        std::size_t stride = 1;
        for (std::size_t d = 0; d < rank; ++d) {
            const long n = static_cast<long>(grid_[d]);
            const long c = ((static_cast<long>(centre[d]) + off[d]) % n + n) % n;
            linear += static_cast<std::size_t>(c) * stride;
            stride *= grid_[d];
        }
        if (!blocked.empty() && blocked[linear])
            continue;
        cells.push_back(linear);
    }
    return cells;
}

std::vector<std::uint8_t> exclusion_mask(const Dims& grid, std::span<const GridIndex> excluded, std::size_t radius) {
    const std::size_t total = element_count(grid);
    std::vector<std::uint8_t> mask(total, 0);
    if (excluded.empty())
        return mask;
    const std::size_t rank = grid.size();
    std::size_t box = 1;
    std::vector<std::size_t> width(rank);
    for (std::size_t d = 0; d < rank; ++d) {
        width[d] = std::min<std::size_t>(2 * radius + 1, grid[d]);
        box *= width[d];
    }
    for (const GridIndex& e : excluded) {
        if (e.size() != rank)
            throw InvalidArgument("exclusion: rank mismatch");
        for (std::size_t i = 0; i < box; ++i) {
            std::size_t rem = i;
            std::size_t linear = 0;
            std::size_t stride = 1;
            for (std::size_t d = 0; d < rank; ++d) {
                const long n = static_cast<long>(grid[d]);
                const long step = static_cast<long>(rem % width[d]);
                rem /= width[d];
                // A full-width box covers the whole dimension; otherwise centre it.
                const long o = width[d] == grid[d] ? step : step - static_cast<long>(radius);
                const long c = ((static_cast<long>(e[d]) + o) % n + n) % n;
                linear += static_cast<std::size_t>(c) * stride;
                stride *= grid[d];
            }
            mask[linear] = 1;
        }
    }
    return mask;
}

std::vector<GridIndex> reference_cells(const GridIndex& cut, const Dims& grid, const CfarConfig& config,
                                       std::span<const GridIndex> excluded) {
    config.validate();
    const std::size_t cut_linear = linear_index(cut, grid);
    const ReferenceWindow window(grid, config.n_guard);
    const auto mask = exclusion_mask(grid, excluded, config.exclusion());
    const auto cells = window.collect(cut_linear, config.n_ref, mask);
    if (cells.empty())
        throw DegenerateWindow("cfar: no eligible reference cell around the cell under test");
    std::vector<GridIndex> out;
    out.reserve(cells.size());
    for (std::size_t c : cells)
        out.push_back(grid_index(c, grid));
    return out;
}

namespace {

double floor_from_cells(std::span<const double> power, std::span<const std::size_t> cells, const CfarConfig& config) {
    if (config.variant == CfarVariant::CA) {
        double sum = 0.0;
        for (std::size_t c : cells)
            sum += power[c];
        return sum / static_cast<double>(cells.size());
    }
    std::vector<double> window;
    window.reserve(cells.size());
    for (std::size_t c : cells)
        window.push_back(power[c]);
    // With a depleted window the rank is clamped to the window length.
    return os_threshold(window, std::min(config.os_rank, window.size()), 1.0);
}

RVector powers(const ComplexTensor& spectrum) {
    RVector p(spectrum.size());
    for (std::size_t i = 0; i < p.size(); ++i)
        p[i] = std::norm(spectrum[i]);
    return p;
}

} // namespace

double noise_floor(const ComplexTensor& spectrum, const GridIndex& cut, const CfarConfig& config,
                   std::span<const GridIndex> excluded) {
    config.validate();
    const ReferenceWindow window(spectrum.dims(), config.n_guard);
    const auto mask = exclusion_mask(spectrum.dims(), excluded, config.exclusion());
    const auto cells = window.collect(linear_index(cut, spectrum.dims()), config.n_ref, mask);
    if (cells.empty())
        throw DegenerateWindow("cfar: no eligible reference cell around the cell under test");
    return floor_from_cells(powers(spectrum), cells, config);
}

DeltaReport cfar_delta_power(std::span<const double> power, const Dims& grid, const CfarConfig& config,
                             const ReferenceWindow& window, std::span<const std::uint8_t> blocked) {
    const Peak peak = peak_location(power, grid);
    const auto cells = window.collect(peak.linear, config.n_ref, blocked);
    if (cells.empty())
        throw DegenerateWindow("cfar: no eligible reference cell around the cell under test");

    DeltaReport report;
    report.peak = peak.index;
    report.peak_power = peak.power;
    report.n_ref_used = cells.size();
    report.noise_floor = floor_from_cells(power, cells, config);
    report.threshold = config.alpha * report.noise_floor;
    if (report.threshold > 0.0) {
        report.delta_db = 10.0 * std::log10(report.peak_power / report.threshold);
    } else {
        report.zero_noise_floor = true;
        report.delta_db = report.peak_power > 0.0 ? std::numeric_limits<double>::infinity()
                                                  : -std::numeric_limits<double>::infinity();
    }
    return report;
}

DeltaReport cfar_delta(const ComplexTensor& y, const CfarConfig& config, std::span<const GridIndex> excluded) {
    config.validate();
    const ComplexTensor spectrum = dft_spectrum(y);
    const RVector p = powers(spectrum);
    const ReferenceWindow window(y.dims(), config.n_guard);
    const auto mask = exclusion_mask(y.dims(), excluded, config.exclusion());
    return cfar_delta_power(p, y.dims(), config, window, mask);
}

// ---- False-alarm analysis -------------------------------------------------

namespace {

void require_alpha(double alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha))
        throw InvalidArgument("alpha must be positive and finite");
}

void require_counts(std::size_t n_cells, std::size_t n_ref) {
    if (n_cells < 1 || n_ref < 1)
        throw InvalidArgument("cell counts must be >= 1");
}

void require_probability(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw InvalidArgument("probability must lie in (0, 1)");
}

/// 1 - (1 - q)^N computed without cancellation, given q.
double one_minus_pow_complement(double q, double n) {
    if (q >= 1.0)
        return 1.0;
    return -std::expm1(n * std::log1p(-q));
}

/// Root of the strictly decreasing map alpha -> pfa(alpha) - target.
template <class Pfa>
double solve_alpha(Pfa&& pfa, double target, const char* what) {
    double lo = 1e-9;
    double hi = 1.0;
    int grow = 0;
    while (pfa(hi) > target) {
        lo = hi;
        hi *= 2.0;
        if (++grow > 60)
            throw NumericalFailure(std::string(what) + ": could not bracket alpha");
    }
    if (pfa(lo) < target)
        throw NumericalFailure(std::string(what) + ": could not bracket alpha");
    auto f = [&](double a) { return pfa(a) - target; };
    std::uintmax_t iters = 200;
    const auto [a, b] = boost::math::tools::bisect(f, lo, hi, boost::math::tools::eps_tolerance<double>(48), iters);
    const double alpha = 0.5 * (a + b);
    if (std::fabs(pfa(alpha) - target) >= 1e-4 * target)
        throw NumericalFailure(std::string(what) + ": bisection did not reach the requested accuracy");
    return alpha;
}

} // namespace

double pfa_from_alpha(double alpha, std::size_t n_cells, std::size_t n_ref) {
    require_alpha(alpha);
    require_counts(n_cells, n_ref);
    const double nr = static_cast<double>(n_ref);
    const double n = static_cast<double>(n_cells);
    // x ~ Gamma(N_r, 1); the threshold in noise units is alpha x / N_r.
    auto h = [&](double x) { return one_minus_pow_complement(std::exp(-alpha * x / nr), n); };
    const double p = detail::gamma_expectation(h, nr, 1.0, "pfa_from_alpha");
    return std::clamp(p, 0.0, 1.0);
}

double pfa_from_alpha_series(double alpha, std::size_t n_cells, std::size_t n_ref) {
    require_alpha(alpha);
    require_counts(n_cells, n_ref);
    if (n_cells > 64)
        throw DomainError("pfa_from_alpha_series: alternating series unstable for N > 64");
    using ld = long double;
    const ld nr = static_cast<ld>(n_ref);
    // Neumaier-compensated sum of sum_{n>=1} (-1)^{n+1} C(N,n) (n alpha/N_r + 1)^{-N_r}.
    ld sum = 0.0L;
    ld comp = 0.0L;
    ld binom = 1.0L;
    ld largest = 0.0L;
    for (std::size_t k = 1; k <= n_cells; ++k) {
        binom = binom * static_cast<ld>(n_cells - k + 1) / static_cast<ld>(k);
        const ld mag = binom * std::pow(static_cast<ld>(k) * static_cast<ld>(alpha) / nr + 1.0L, -nr);
        const ld term = (k % 2 == 1) ? mag : -mag;
        largest = std::max(largest, mag);
        const ld t = sum + term;
        if (std::fabs(sum) >= std::fabs(term))
            comp += (sum - t) + term;
        else
            comp += (term - t) + sum;
        sum = t;
    }
    const ld result = sum + comp;
    if (largest * static_cast<ld>(n_cells) * LDBL_EPSILON > 1e-9L)
        throw DomainError("pfa_from_alpha_series: term range too large for extended precision");
    return std::clamp(static_cast<double>(result), 0.0, 1.0);
}

double pfa_approx(double alpha, std::size_t n_cells, std::size_t n_ref) {
    require_alpha(alpha);
    require_counts(n_cells, n_ref);
    return static_cast<double>(n_cells) * cell_pfa_ca(alpha, n_ref);
}

double alpha_from_pfa_approx(double p_fa, std::size_t n_cells, std::size_t n_ref) {
    require_probability(p_fa);
    require_counts(n_cells, n_ref);
    return alpha_cell_ca(p_fa / static_cast<double>(n_cells), n_ref);
}

double pfa_from_alpha_mmv(double alpha, std::size_t n_cells, std::size_t n_ref, std::size_t snapshots) {
    require_alpha(alpha);
    require_counts(n_cells, n_ref);
    if (snapshots < 1)
        throw InvalidArgument("pfa_from_alpha_mmv: snapshots must be >= 1");
    const double nr = static_cast<double>(n_ref);
    const double s = static_cast<double>(snapshots);
    const double n = static_cast<double>(n_cells);
    // u ~ Gamma(S N_r, 1); per-cell exceedance of the chi-square(2S) statistic
    // is the regularized upper gamma Q(S, alpha u / N_r).
    auto h = [&](double u) { return one_minus_pow_complement(boost::math::gamma_q(s, alpha * u / nr), n); };
    const double p = detail::gamma_expectation(h, s * nr, 1.0, "pfa_from_alpha_mmv");
    return std::clamp(p, 0.0, 1.0);
}

double alpha_from_pfa(const FalseAlarmSpec& spec) {
    require_probability(spec.p_fa);
    require_counts(spec.n_cells, spec.n_ref);
    if (spec.snapshots < 1)
        throw InvalidArgument("alpha_from_pfa: snapshots must be >= 1");
    if (spec.snapshots == 1)
        return solve_alpha([&](double a) { return pfa_from_alpha(a, spec.n_cells, spec.n_ref); }, spec.p_fa,
                           "alpha_from_pfa");
    return solve_alpha([&](double a) { return pfa_from_alpha_mmv(a, spec.n_cells, spec.n_ref, spec.snapshots); },
                       spec.p_fa, "alpha_from_pfa");
}

double alpha_nomp(double p_fa, std::size_t n_cells) {
    require_probability(p_fa);
    if (n_cells < 1)
        throw InvalidArgument("alpha_nomp: n_cells must be >= 1");
    // 1 - (1-p)^{1/N} = -expm1(log1p(-p)/N)
    return -std::log(-std::expm1(std::log1p(-p_fa) / static_cast<double>(n_cells)));
}

double os_threshold(std::span<const double> window, std::size_t os_rank, double alpha_os) {
    if (window.empty())
        throw DegenerateWindow("os_threshold: empty reference window");
    if (os_rank < 1 || os_rank > window.size())
        throw InvalidArgument("os_threshold: rank must lie in [1, window length]");
    std::vector<double> w(window.begin(), window.end());
    std::nth_element(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(os_rank - 1), w.end());
    return alpha_os * w[os_rank - 1];
}

double pfa_from_alpha_os(double alpha_os, std::size_t n_cells, std::size_t n_ref, std::size_t os_rank) {
    require_alpha(alpha_os);
    require_counts(n_cells, n_ref);
    if (os_rank < 1 || os_rank > n_ref)
        throw InvalidArgument("pfa_from_alpha_os: rank must lie in [1, n_ref]");
    const double n = static_cast<double>(n_cells);
    // The r-th order statistic of N_r unit exponentials is -ln V with
    // V ~ Beta(N_r - r + 1, r); per-cell exceedance of alpha X_(r) is V^alpha.
    // Integrated over X_(r) itself.
    auto h = [&](double x) { return one_minus_pow_complement(std::exp(-alpha_os * x), n); };
    const double p = detail::neg_log_beta_expectation(h, static_cast<double>(n_ref - os_rank + 1),
                                              static_cast<double>(os_rank), "pfa_from_alpha_os");
    return std::clamp(p, 0.0, 1.0);
}

double alpha_from_pfa_os(double p_fa, std::size_t n_cells, std::size_t n_ref, std::size_t os_rank) {
    require_probability(p_fa);
    return solve_alpha([&](double a) { return pfa_from_alpha_os(a, n_cells, n_ref, os_rank); }, p_fa,
                       "alpha_from_pfa_os");
}

double cell_pfa_ca(double alpha, std::size_t n_ref) {
    require_alpha(alpha);
    const double nr = static_cast<double>(n_ref);
    return std::exp(-nr * std::log1p(alpha / nr));
}

double alpha_cell_ca(double p_cell, std::size_t n_ref) {
    require_probability(p_cell);
    const double nr = static_cast<double>(n_ref);
    return nr * std::expm1(-std::log(p_cell) / nr);
}

double cell_pfa_os(double alpha_os, std::size_t n_ref, std::size_t os_rank) {
    require_alpha(alpha_os);
    if (os_rank < 1 || os_rank > n_ref)
        throw InvalidArgument("cell_pfa_os: rank must lie in [1, n_ref]");
    // prod_{i=0}^{r-1} (N_r - i) / (N_r - i + alpha)
    double log_p = 0.0;
    for (std::size_t i = 0; i < os_rank; ++i) {
        const double m = static_cast<double>(n_ref - i);
        log_p -= std::log1p(alpha_os / m);
    }
    return std::exp(log_p);
}

double alpha_cell_os(double p_cell, std::size_t n_ref, std::size_t os_rank) {
    require_probability(p_cell);
    return solve_alpha([&](double a) { return cell_pfa_os(a, n_ref, os_rank); }, p_cell, "alpha_cell_os");
}

} // namespace nompcfar
