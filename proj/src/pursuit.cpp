#include "pursuit.hpp"

#include "fft.hpp"
#include "nompcfar/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace nompcfar::detail {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::size_t kNewtonHalvings = 8;
constexpr std::size_t kGradientHalvings = 30;
constexpr double kDuplicateTol = 1e-12;

} // namespace

// ---- AtomModel ---------------------------------------------------------------

AtomModel::AtomModel(Dims dims) : dims_(std::move(dims)), n_(element_count(dims_)) {}

AtomModel::AtomModel(std::size_t m, std::size_t n, CVector phi)
    : dims_{n}, n_(n), m_(m), phi_(std::move(phi)) {
    if (m == 0 || n == 0 || m > n)
        throw InvalidArgument("compression operator must be M x N with 1 <= M <= N");
    if (phi_.size() != m * n)
        throw InvalidArgument("compression operator: entry count does not match M x N");
    for (const Complex& v : phi_)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
            throw InvalidArgument("compression operator: non-finite entry");
    // Lag sums of the Gram matrix Phi^H Phi, so that q(w) = sum_k c_k e^{-jkw}.
    lags_.assign(2 * n - 1, Complex{});
    for (std::size_t i = 0; i < m; ++i) {
        const Complex* row = &phi_[i * n];
        for (std::size_t a = 0; a < n; ++a) {
            const Complex ca = std::conj(row[a]);
            for (std::size_t b = 0; b < n; ++b)
                lags_[a + (n - 1) - b] += ca * row[b];
        }
    }
    zero_norm_ = 1e-12 * std::max(lags_[n - 1].real(), 1e-300);
}

CVector AtomModel::atom(const FrequencyVector& freq) const {
    CVector a = nompcfar::atom(dims_, freq);
    if (!compressive())
        return a;
    CVector b(m_);
    for (std::size_t i = 0; i < m_; ++i) {
        Complex acc{};
        const Complex* row = &phi_[i * n_];
        for (std::size_t j = 0; j < n_; ++j)
            acc += row[j] * a[j];
        b[i] = acc;
    }
    return b;
}

double AtomModel::norm2_from_lags(double omega, double* d1, double* d2) const {
    // q(w) = sum_k c_k e^{-jkw}; the sum is real because c_{-k} = conj(c_k).
    double q = 0.0;
    double q1 = 0.0;
    double q2 = 0.0;
    const long half = static_cast<long>(n_) - 1;
    for (long k = -half; k <= half; ++k) {
        const Complex term = lags_[static_cast<std::size_t>(k + half)] * std::polar(1.0, -static_cast<double>(k) * omega);
        const double kd = static_cast<double>(k);
        q += term.real();
        q1 += kd * term.imag();      // Re(-jk term)
        q2 -= kd * kd * term.real(); // Re(-k^2 term)
    }
    if (d1)
        *d1 = q1;
    if (d2)
        *d2 = q2;
    return q;
}

double AtomModel::norm2(const FrequencyVector& freq) const {
    if (!compressive())
        return static_cast<double>(n_);
    return norm2_from_lags(freq[0], nullptr, nullptr);
}

CVector AtomModel::back_project(const CVector& r) const {
    if (!compressive())
        return r;
    CVector v(n_, Complex{});
    for (std::size_t i = 0; i < m_; ++i) {
        const Complex ri = r[i];
        const Complex* row = &phi_[i * n_];
        for (std::size_t j = 0; j < n_; ++j)
            v[j] += std::conj(row[j]) * ri;
    }
    return v;
}

Snapshots AtomModel::back_project(const Snapshots& r) const {
    Snapshots v;
    v.reserve(r.size());
    for (const auto& s : r)
        v.push_back(back_project(s));
    return v;
}

Complex AtomModel::correlate(const CVector& v, const FrequencyVector& freq) const {
    const std::size_t rank = dims_.size();
    std::vector<CVector> e(rank);
    for (std::size_t d = 0; d < rank; ++d) {
        e[d] = steering_vector(dims_[d], freq[d]);
        for (auto& x : e[d])
            x = std::conj(x);
    }
    const std::size_t n0 = dims_[0];
    const std::size_t outer = n_ / n0;
    std::vector<std::size_t> idx(rank, 0);
    Complex acc{};
    for (std::size_t o = 0; o < outer; ++o) {
        Complex w{1.0, 0.0};
        for (std::size_t d = 1; d < rank; ++d)
            w *= e[d][idx[d]];
        Complex inner{};
        const Complex* row = &v[o * n0];
        for (std::size_t i = 0; i < n0; ++i)
            inner += e[0][i] * row[i];
        acc += w * inner;
        for (std::size_t d = 1; d < rank; ++d) {
            if (++idx[d] < dims_[d])
                break;
            idx[d] = 0;
        }
    }
    return acc;
}

ObjectiveEval AtomModel::evaluate(const Snapshots& v, const FrequencyVector& freq, bool derivatives) const {
    const std::size_t rank = dims_.size();
    ObjectiveEval out;
    double p = 0.0;
    RVector dp(rank, 0.0);
    RVector hp(rank * rank, 0.0);

    if (rank == 1) {
        // Same sums as below, with the conjugate phasor generated in place.
        const double w = freq[0];
        const Complex step = std::polar(1.0, -w);
        for (const CVector& vs : v) {
            Complex f{};
            Complex g1{};
            Complex h1{};
            for (std::size_t start = 0; start < n_; start += 32) {
                const std::size_t stop = std::min(n_, start + 32);
                Complex e = std::polar(1.0, -static_cast<double>(start) * w);
                if (derivatives) {
                    for (std::size_t i = start; i < stop; ++i, e *= step) {
                        const Complex t = vs[i] * e;
                        const double nd = static_cast<double>(i);
                        f += t;
                        g1 += nd * t;
                        h1 += nd * nd * t;
                    }
                } else {
                    for (std::size_t i = start; i < stop; ++i, e *= step)
                        f += vs[i] * e;
                }
            }
            p += std::norm(f);
            if (derivatives) {
                const Complex fd = Complex{0.0, -1.0} * g1;
                dp[0] += 2.0 * (std::conj(f) * fd).real();
                hp[0] += 2.0 * (std::norm(fd) - (std::conj(f) * h1).real());
            }
        }
    } else {
        std::vector<CVector> e(rank);
        for (std::size_t d = 0; d < rank; ++d) {
            e[d] = steering_vector(dims_[d], freq[d]);
            for (auto& x : e[d])
                x = std::conj(x);
        }
        std::vector<Complex> g(rank);
        std::vector<Complex> h(rank * rank);
        std::vector<std::size_t> idx(rank, 0);
        for (const CVector& vs : v) {
            // f = sum_n conj(a_n) v_n; df/dw_d = -j sum n_d (.); d2f = -sum n_d n_e (.)
            Complex f{};
            std::fill(g.begin(), g.end(), Complex{});
            std::fill(h.begin(), h.end(), Complex{});
            std::fill(idx.begin(), idx.end(), 0);
            for (std::size_t lin = 0; lin < n_; ++lin) {
                Complex t = vs[lin];
                for (std::size_t d = 0; d < rank; ++d)
                    t *= e[d][idx[d]];
                f += t;
                if (derivatives) {
                    for (std::size_t d = 0; d < rank; ++d) {
                        const double nd = static_cast<double>(idx[d]);
                        g[d] += nd * t;
                        for (std::size_t c = d; c < rank; ++c)
                            h[d * rank + c] += nd * static_cast<double>(idx[c]) * t;
                    }
                }
                for (std::size_t d = 0; d < rank; ++d) {
                    if (++idx[d] < dims_[d])
                        break;
                    idx[d] = 0;
                }
            }
            p += std::norm(f);
            if (derivatives) {
                const Complex j{0.0, 1.0};
                for (std::size_t d = 0; d < rank; ++d) {
                    const Complex fd = -j * g[d];
                    dp[d] += 2.0 * (std::conj(f) * fd).real();
                    for (std::size_t c = d; c < rank; ++c) {
                        const Complex fc = -j * g[c];
                        const Complex fdc = -h[d * rank + c];
                        hp[d * rank + c] += 2.0 * (std::conj(fc) * fd + std::conj(f) * fdc).real();
                    }
                }
            }
        }
    }
    for (std::size_t d = 0; d < rank; ++d)
        for (std::size_t c = 0; c < d; ++c)
            hp[d * rank + c] = hp[c * rank + d];

    double q = static_cast<double>(n_);
    double q1 = 0.0;
    double q2 = 0.0;
    if (compressive())
        q = norm2_from_lags(freq[0], &q1, &q2);
    if (q <= zero_norm_) {
        out.value = 0.0;
        out.gradient.assign(rank, 0.0);
        out.hessian.assign(rank * rank, 0.0);
        return out;
    }
    out.value = p / q;
    if (!derivatives)
        return out;
    out.gradient.resize(rank);
    out.hessian.resize(rank * rank);
    if (!compressive()) {
        for (std::size_t d = 0; d < rank; ++d)
            out.gradient[d] = dp[d] / q;
        for (std::size_t i = 0; i < rank * rank; ++i)
            out.hessian[i] = hp[i] / q;
        return out;
    }
    // Quotient rule, D = 1.
    out.gradient[0] = dp[0] / q - p * q1 / (q * q);
    out.hessian[0] = hp[0] / q - 2.0 * dp[0] * q1 / (q * q) - p * q2 / (q * q) + 2.0 * p * q1 * q1 / (q * q * q);
    return out;
}

const RVector& AtomModel::norm2_on_grid(std::size_t gamma) const {
    auto it = q_cache_.find(gamma);
    if (it != q_cache_.end())
        return it->second;
    const std::size_t points = gamma * n_;
    RVector q(points);
    std::size_t skipped = 0;
    for (std::size_t k = 0; k < points; ++k) {
        q[k] = norm2_from_lags(kTwoPi * static_cast<double>(k) / static_cast<double>(points), nullptr, nullptr);
        if (q[k] <= zero_norm_)
            ++skipped;
    }
    if (gamma == 1)
        skipped_ = skipped;
    return q_cache_.emplace(gamma, std::move(q)).first->second;
}

RVector AtomModel::grid_power(const Snapshots& v) const {
    RVector power(n_, 0.0);
    CVector spec(n_);
    for (const CVector& vs : v) {
        fft_forward(vs, dims_, spec);
        for (std::size_t i = 0; i < n_; ++i)
            power[i] += std::norm(spec[i]);
    }
    const double s = static_cast<double>(v.size());
    if (!compressive()) {
        const double scale = 1.0 / (static_cast<double>(n_) * s);
        for (double& x : power)
            x *= scale;
        return power;
    }
    const RVector& q = norm2_on_grid(1);
    for (std::size_t i = 0; i < n_; ++i)
        power[i] = q[i] <= zero_norm_ ? 0.0 : power[i] / (q[i] * s);
    return power;
}

FrequencyVector AtomModel::coarse_peak(const Snapshots& v, std::size_t gamma) const {
    Dims grid = dims_;
    for (auto& g : grid)
        g *= gamma;
    const std::size_t points = element_count(grid);
    RVector power(points, 0.0);
    CVector spec(points);
    for (const CVector& vs : v) {
        fft_forward_padded(vs, dims_, grid, spec);
        for (std::size_t i = 0; i < points; ++i)
            power[i] += std::norm(spec[i]);
    }
    if (compressive()) {
        const RVector& q = norm2_on_grid(gamma);
        for (std::size_t i = 0; i < points; ++i)
            power[i] = q[i] <= zero_norm_ ? 0.0 : power[i] / q[i];
    }
    const Peak peak = peak_location(power, grid);
    return cell_frequency(peak.index, grid);
}

// ---- Pursuit -----------------------------------------------------------------

Pursuit::Pursuit(const AtomModel& model, Snapshots data, RefineSettings settings)
    : model_(model), data_(std::move(data)), settings_(settings) {
    if (data_.empty())
        throw InvalidArgument("pursuit: at least one snapshot is required");
    for (const auto& s : data_)
        if (s.size() != model_.out_size())
            throw InvalidArgument("pursuit: snapshot length does not match the model");
}

Snapshots Pursuit::residual() const {
    Snapshots r = data_;
    for (const Component& c : comps)
        for (std::size_t s = 0; s < r.size(); ++s) {
            const Complex x = c.amps[s];
            for (std::size_t i = 0; i < r[s].size(); ++i)
                r[s][i] -= x * c.atom[i];
        }
    return r;
}

Snapshots Pursuit::pseudo(std::size_t k) const {
    if (k >= comps.size())
        throw InvalidArgument("pseudo-measurement: component index out of range");
    Snapshots r = data_;
    for (std::size_t j = 0; j < comps.size(); ++j) {
        if (j == k)
            continue;
        const Component& c = comps[j];
        for (std::size_t s = 0; s < r.size(); ++s) {
            const Complex x = c.amps[s];
            for (std::size_t i = 0; i < r[s].size(); ++i)
                r[s][i] -= x * c.atom[i];
        }
    }
    return r;
}

double Pursuit::residual_energy() const {
    double e = 0.0;
    for (const auto& s : residual())
        for (const Complex& v : s)
            e += std::norm(v);
    return e;
}

Component Pursuit::make(const FrequencyVector& freq, const Snapshots& v) const {
    Component c;
    c.freq = freq;
    c.q = model_.norm2(freq);
    c.atom = model_.atom(freq);
    c.amps.resize(v.size());
    for (std::size_t s = 0; s < v.size(); ++s)
        c.amps[s] = c.q <= 0.0 ? Complex{} : model_.correlate(v[s], freq) / c.q;
    return c;
}

void Pursuit::refine_single(Component& c, const Snapshots& v) const {
    const Dims& dims = model_.dims();
    const std::size_t rank = dims.size();
    std::vector<double> w(c.freq.values().begin(), c.freq.values().end());
    bool moved = false;

    auto value_at = [&](const std::vector<double>& x) { return model_.evaluate(v, FrequencyVector(x), false).value; };
    auto shifted = [&](const Eigen::VectorXd& step, double scale) {
        std::vector<double> x(w);
        for (std::size_t d = 0; d < rank; ++d)
            x[d] += scale * step[static_cast<Eigen::Index>(d)];
        return x;
    };
    // Largest allowed move is half a DFT bin in every coordinate.
    auto cap = [&](Eigen::VectorXd& step) {
        double ratio = 0.0;
        for (std::size_t d = 0; d < rank; ++d)
            ratio = std::max(ratio, std::fabs(step[static_cast<Eigen::Index>(d)]) * static_cast<double>(dims[d]) / kPi);
        if (ratio > 1.0)
            step /= ratio;
    };

    for (std::size_t it = 0; it < settings_.newton_steps_single; ++it) {
        const ObjectiveEval ev = model_.evaluate(v, FrequencyVector(w), true);
        Eigen::VectorXd g(static_cast<Eigen::Index>(rank));
        Eigen::MatrixXd h(static_cast<Eigen::Index>(rank), static_cast<Eigen::Index>(rank));
        for (std::size_t d = 0; d < rank; ++d) {
            g[static_cast<Eigen::Index>(d)] = ev.gradient[d];
            for (std::size_t e = 0; e < rank; ++e)
                h(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(e)) = ev.hessian[d * rank + e];
        }
        if (!(g.allFinite() && h.allFinite()) || g.isZero(0.0))
            break;

        // Increases below this are indistinguishable from rounding in G.
        const double noise = 64.0 * std::numeric_limits<double>::epsilon() * std::fabs(ev.value);
        bool accepted = false;
        Eigen::LLT<Eigen::MatrixXd> llt(-h);
        if (llt.info() == Eigen::Success) {
            Eigen::VectorXd step = llt.solve(g);
            cap(step);
            if (0.5 * g.dot(step) <= noise) {
                // The predicted gain is below rounding in G, so comparing
                // values cannot judge the step; the local model is trusted.
                w = shifted(step, 1.0);
                moved = true;
                continue;
            }
            if (!settings_.step_accept_rule) {
                w = shifted(step, 1.0);
                accepted = true;
            } else {
                double scale = 1.0;
                for (std::size_t k = 0; k <= kNewtonHalvings && !accepted; ++k, scale *= 0.5) {
                    auto x = shifted(step, scale);
                    if (value_at(x) > ev.value) {
                        w = std::move(x);
                        accepted = true;
                    }
                }
            }
        }
        if (!accepted) {
            Eigen::VectorXd step = g;
            double ratio = 0.0;
            for (std::size_t d = 0; d < rank; ++d)
                ratio = std::max(ratio, std::fabs(g[static_cast<Eigen::Index>(d)]) * static_cast<double>(dims[d]) / kPi);
            step /= ratio;
            double scale = 1.0;
            for (std::size_t k = 0; k <= kGradientHalvings && !accepted; ++k, scale *= 0.5) {
                auto x = shifted(step, scale);
                if (value_at(x) > ev.value + noise) {
                    w = std::move(x);
                    accepted = true;
                }
            }
        }
        if (!accepted)
            break;
        moved = true;
    }
    if (moved) {
        c = make(FrequencyVector(w), v);
    } else {
        // Stationary: refresh the amplitude at the current frequency.
        for (std::size_t s = 0; s < v.size(); ++s)
            c.amps[s] = c.q <= 0.0 ? Complex{} : model_.correlate(v[s], c.freq) / c.q;
    }
}

void Pursuit::detect_one() {
    const Snapshots r = residual();
    const Snapshots v = model_.back_project(r);
    Component c = make(model_.coarse_peak(v, settings_.oversample), v);
    refine_single(c, v);
    comps.push_back(std::move(c));
}

void Pursuit::cyclic() {
    if (comps.empty())
        return;
    Snapshots r = residual();
    for (std::size_t round = 0; round < settings_.cyclic_rounds; ++round) {
        for (Component& c : comps) {
            for (std::size_t s = 0; s < r.size(); ++s)
                for (std::size_t i = 0; i < r[s].size(); ++i)
                    r[s][i] += c.amps[s] * c.atom[i];
            refine_single(c, model_.back_project(r));
            for (std::size_t s = 0; s < r.size(); ++s)
                for (std::size_t i = 0; i < r[s].size(); ++i)
                    r[s][i] -= c.amps[s] * c.atom[i];
        }
    }
}

void Pursuit::least_squares() {
    const auto k = static_cast<Eigen::Index>(comps.size());
    if (k == 0)
        return;
    const std::size_t len = model_.out_size();
    Eigen::MatrixXcd gram(k, k);
    for (Eigen::Index a = 0; a < k; ++a) {
        const CVector& ba = comps[static_cast<std::size_t>(a)].atom;
        for (Eigen::Index b = a; b < k; ++b) {
            const CVector& bb = comps[static_cast<std::size_t>(b)].atom;
            Complex acc{};
            for (std::size_t i = 0; i < len; ++i)
                acc += std::conj(ba[i]) * bb[i];
            gram(a, b) = acc;
            gram(b, a) = std::conj(acc);
        }
    }
    Eigen::LLT<Eigen::MatrixXcd> llt(gram);
    const double rcond = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
    if (llt.info() != Eigen::Success || !(rcond > 1e-13))
        throw IllConditioned("least squares: atoms are numerically dependent", rcond);
    const auto s_count = static_cast<Eigen::Index>(data_.size());
    Eigen::MatrixXcd rhs(k, s_count);
    for (Eigen::Index a = 0; a < k; ++a) {
        const CVector& ba = comps[static_cast<std::size_t>(a)].atom;
        for (Eigen::Index s = 0; s < s_count; ++s) {
            const CVector& ys = data_[static_cast<std::size_t>(s)];
            Complex acc{};
            for (std::size_t i = 0; i < len; ++i)
                acc += std::conj(ba[i]) * ys[i];
            rhs(a, s) = acc;
        }
    }
    const Eigen::MatrixXcd x = llt.solve(rhs);
    for (Eigen::Index a = 0; a < k; ++a)
        for (Eigen::Index s = 0; s < s_count; ++s)
            comps[static_cast<std::size_t>(a)].amps[static_cast<std::size_t>(s)] = x(a, s);
}

bool Pursuit::least_squares_safe() {
    try {
        least_squares();
        return true;
    } catch (const IllConditioned&) {
        return false;
    }
}

void Pursuit::merge_duplicates() {
    for (std::size_t a = 0; a < comps.size(); ++a) {
        for (std::size_t b = a + 1; b < comps.size();) {
            bool same = true;
            for (std::size_t d = 0; d < comps[a].freq.size() && same; ++d)
                same = wrap_dist(comps[a].freq[d], comps[b].freq[d]) < kDuplicateTol;
            if (same) {
                for (std::size_t s = 0; s < comps[a].amps.size(); ++s)
                    comps[a].amps[s] += comps[b].amps[s];
                comps.erase(comps.begin() + static_cast<std::ptrdiff_t>(b));
            } else {
                ++b;
            }
        }
    }
}

void Pursuit::nomp_step() {
    detect_one();
    cyclic();
    merge_duplicates();
    least_squares_safe();
}

GridIndex Pursuit::cell(std::size_t k) const {
    return nearest_cell(comps[k].freq, model_.dims());
}

std::vector<GridIndex> Pursuit::cells_except(std::size_t skip) const {
    std::vector<GridIndex> cells;
    cells.reserve(comps.size());
    for (std::size_t j = 0; j < comps.size(); ++j)
        if (j != skip)
            cells.push_back(cell(j));
    return cells;
}

DeltaReport Pursuit::test(const Snapshots& r, std::span<const GridIndex> excluded, const CfarConfig& cfar,
                          const ReferenceWindow& window, bool* fallback) const {
    const RVector power = model_.grid_power(model_.back_project(r));
    const auto mask = exclusion_mask(model_.dims(), excluded, cfar.exclusion());
    try {
        return cfar_delta_power(power, model_.dims(), cfar, window, mask);
    } catch (const DegenerateWindow&) {
        if (excluded.empty())
            throw;
        if (fallback)
            *fallback = true;
        return cfar_delta_power(power, model_.dims(), cfar, window, {});
    }
}

std::vector<DeltaReport> Pursuit::margins(const CfarConfig& cfar, const ReferenceWindow& window,
                                          std::size_t* fallbacks) const {
    const Snapshots r = residual();
    std::vector<DeltaReport> out;
    out.reserve(comps.size());
    Snapshots pk = r;
    for (std::size_t k = 0; k < comps.size(); ++k) {
        const Component& c = comps[k];
        for (std::size_t s = 0; s < r.size(); ++s)
            for (std::size_t i = 0; i < r[s].size(); ++i)
                pk[s][i] = r[s][i] + c.amps[s] * c.atom[i];
        bool fallback = false;
        out.push_back(test(pk, cells_except(k), cfar, window, &fallback));
        if (fallback && fallbacks)
            ++*fallbacks;
    }
    return out;
}

DeltaReport Pursuit::residual_test(const CfarConfig& cfar, const ReferenceWindow& window, bool* fallback) const {
    const auto excluded = cells_except(comps.size());
    return test(residual(), excluded, cfar, window, fallback);
}

std::vector<SinusoidComponent> to_public(const std::vector<Component>& comps) {
    std::vector<SinusoidComponent> out;
    out.reserve(comps.size());
    for (const Component& c : comps)
        out.push_back({c.amps.empty() ? Complex{} : c.amps.front(), c.freq});
    return out;
}

std::vector<Component> from_public(const AtomModel& model, const std::vector<SinusoidComponent>& comps) {
    std::vector<Component> out;
    out.reserve(comps.size());
    for (const SinusoidComponent& sc : comps) {
        if (sc.freq.size() != model.dims().size())
            throw InvalidArgument("component frequency rank does not match the data");
        Component c;
        c.freq = sc.freq;
        c.q = model.norm2(sc.freq);
        c.atom = model.atom(sc.freq);
        c.amps = {sc.amplitude};
        out.push_back(std::move(c));
    }
    return out;
}

} // namespace nompcfar::detail
