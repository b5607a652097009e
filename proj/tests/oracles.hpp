#pragma once

// Independent reference implementations used by the unit tests. Everything
// here is written from the defining formulas, O(N^2) where that is simplest,
// and shares no code with the library beyond the value types.

#include "nompcfar/tensor.hpp"

#include <cmath>
#include <complex>
#include <random>
#include <vector>

namespace oracle {

using nompcfar::Complex;
using nompcfar::ComplexTensor;
using nompcfar::CVector;
using nompcfar::Dims;

inline constexpr double kPi = 3.14159265358979323846;

inline Complex cn(std::mt19937_64& rng, double variance = 1.0) {
    std::normal_distribution<double> g(0.0, std::sqrt(variance / 2.0));
    const double re = g(rng);
    return {re, g(rng)};
}

inline ComplexTensor random_tensor(const Dims& dims, std::mt19937_64& rng, double variance = 1.0) {
    std::size_t n = 1;
    for (auto d : dims)
        n *= d;
    CVector v(n);
    for (auto& x : v)
        x = cn(rng, variance);
    return ComplexTensor(dims, v);
}

/// Multi-index of a linear position, first dimension fastest.
inline std::vector<std::size_t> unravel(std::size_t lin, const Dims& dims) {
    std::vector<std::size_t> idx(dims.size());
    for (std::size_t d = 0; d < dims.size(); ++d) {
        idx[d] = lin % dims[d];
        lin /= dims[d];
    }
    return idx;
}

/// Direct double sum of the normalized D-dimensional DFT.
inline CVector brute_dft(const CVector& y, const Dims& dims) {
    const std::size_t n = y.size();
    CVector out(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto kk = unravel(k, dims);
        Complex acc{};
        for (std::size_t m = 0; m < n; ++m) {
            const auto mm = unravel(m, dims);
            double phase = 0.0;
            for (std::size_t d = 0; d < dims.size(); ++d)
                phase -= 2.0 * kPi * static_cast<double>(kk[d] * mm[d]) / static_cast<double>(dims[d]);
            acc += y[m] * Complex(std::cos(phase), std::sin(phase));
        }
        out[k] = acc / std::sqrt(static_cast<double>(n));
    }
    return out;
}

/// a(w) evaluated elementwise as exp(j sum_d n_d w_d).
inline CVector direct_atom(const Dims& dims, const std::vector<double>& w) {
    std::size_t n = 1;
    for (auto d : dims)
        n *= d;
    CVector a(n);
    for (std::size_t lin = 0; lin < n; ++lin) {
        const auto idx = unravel(lin, dims);
        double phase = 0.0;
        for (std::size_t d = 0; d < dims.size(); ++d)
            phase += static_cast<double>(idx[d]) * w[d];
        a[lin] = Complex(std::cos(phase), std::sin(phase));
    }
    return a;
}

/// |a(w)^H y|^2 / N by direct summation.
inline double objective(const CVector& y, const Dims& dims, const std::vector<double>& w) {
    const CVector a = direct_atom(dims, w);
    Complex acc{};
    for (std::size_t i = 0; i < y.size(); ++i)
        acc += std::conj(a[i]) * y[i];
    return std::norm(acc) / static_cast<double>(y.size());
}

inline double circ(double a, double b) {
    double d = std::fmod(std::fabs(a - b), 2.0 * kPi);
    return std::min(d, 2.0 * kPi - d);
}

/// Circular per-dimension offset of cell b from cell a, in [-N/2, N/2].
inline long circ_offset(std::size_t a, std::size_t b, std::size_t n) {
    long o = static_cast<long>(b) - static_cast<long>(a);
    const long nn = static_cast<long>(n);
    o = ((o % nn) + nn) % nn;
    if (o > nn / 2)
        o -= nn;
    return o;
}

/// Chebyshev circular distance between two linear cells.
inline std::size_t cheb(std::size_t a, std::size_t b, const Dims& dims) {
    const auto ia = unravel(a, dims);
    const auto ib = unravel(b, dims);
    std::size_t m = 0;
    for (std::size_t d = 0; d < dims.size(); ++d)
        m = std::max<std::size_t>(m, static_cast<std::size_t>(std::labs(circ_offset(ia[d], ib[d], dims[d]))));
    return m;
}

} // namespace oracle
