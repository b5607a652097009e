#include "nompcfar/tensor.hpp"

#include "fft.hpp"
#include "nompcfar/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace nompcfar {

std::size_t element_count(const Dims& dims) {
    if (dims.empty())
        throw InvalidArgument("tensor: at least one dimension is required");
    std::size_t total = 1;
    for (std::size_t n : dims) {
        if (n == 0)
            throw InvalidArgument("tensor: every extent must be positive");
        total *= n;
    }
    return total;
}

std::size_t linear_index(const GridIndex& index, const Dims& dims) {
    if (index.size() != dims.size())
        throw InvalidArgument("grid index rank does not match tensor rank");
    std::size_t linear = 0;
    std::size_t stride = 1;
    for (std::size_t d = 0; d < dims.size(); ++d) {
        if (index[d] >= dims[d])
            throw InvalidArgument("grid index out of bounds in dimension " + std::to_string(d));
        linear += index[d] * stride;
        stride *= dims[d];
    }
    return linear;
}

GridIndex grid_index(std::size_t linear, const Dims& dims) {
    GridIndex index;
    index.idx.resize(dims.size());
    for (std::size_t d = 0; d < dims.size(); ++d) {
        index[d] = linear % dims[d];
        linear /= dims[d];
    }
    return index;
}

double wrap_angle(double omega) {
    double w = std::fmod(omega, kTwoPi);
    if (w < 0.0)
        w += kTwoPi;
    if (w >= kTwoPi)
        w = 0.0;
    return w;
}

FrequencyVector::FrequencyVector(std::vector<double> omega) : omega_(std::move(omega)) {
    for (double& w : omega_) {
        if (!std::isfinite(w))
            throw InvalidArgument("frequency must be finite");
        w = wrap_angle(w);
    }
}

FrequencyVector::FrequencyVector(std::initializer_list<double> omega)
    : FrequencyVector(std::vector<double>(omega)) {}

ComplexTensor::ComplexTensor(Dims dims) : dims_(std::move(dims)), data_(element_count(dims_)) {}

ComplexTensor::ComplexTensor(Dims dims, CVector data) : dims_(std::move(dims)), data_(std::move(data)) {
    if (data_.size() != element_count(dims_))
        throw InvalidArgument("tensor: data length does not match the product of extents");
}

double ComplexTensor::energy() const {
    double e = 0.0;
    for (const Complex& v : data_)
        e += std::norm(v);
    return e;
}

ComplexTensor& ComplexTensor::operator+=(const ComplexTensor& other) {
    if (other.dims_ != dims_)
        throw InvalidArgument("tensor: extents differ");
    for (std::size_t i = 0; i < data_.size(); ++i)
        data_[i] += other.data_[i];
    return *this;
}

ComplexTensor& ComplexTensor::operator-=(const ComplexTensor& other) {
    if (other.dims_ != dims_)
        throw InvalidArgument("tensor: extents differ");
    for (std::size_t i = 0; i < data_.size(); ++i)
        data_[i] -= other.data_[i];
    return *this;
}

ComplexTensor& ComplexTensor::operator*=(Complex scale) {
    for (Complex& v : data_)
        v *= scale;
    return *this;
}

ComplexTensor operator+(ComplexTensor lhs, const ComplexTensor& rhs) { return lhs += rhs; }
ComplexTensor operator-(ComplexTensor lhs, const ComplexTensor& rhs) { return lhs -= rhs; }
ComplexTensor operator*(Complex scale, ComplexTensor tensor) { return tensor *= scale; }

CVector steering_vector(std::size_t length, double omega) {
    if (length == 0)
        throw InvalidArgument("steering_vector: length must be positive");
    // Phasor recurrence, resynchronised with an exact evaluation every 32 samples.
    CVector a(length);
    const Complex step = std::polar(1.0, omega);
    for (std::size_t p = 0; p < length; ++p)
        a[p] = p % 32 == 0 ? std::polar(1.0, static_cast<double>(p) * omega) : a[p - 1] * step;
    return a;
}

CVector atom(const Dims& dims, const FrequencyVector& freq) {
    const std::size_t total = element_count(dims);
    if (freq.size() != dims.size())
        throw InvalidArgument("atom: frequency has " + std::to_string(freq.size()) + " entries, tensor has rank " +
                              std::to_string(dims.size()));
    if (dims.size() == 1)
        return steering_vector(dims[0], freq[0]);
    CVector out(total, Complex{1.0, 0.0});
    std::size_t stride = 1;
    for (std::size_t d = 0; d < dims.size(); ++d) {
        const CVector a = steering_vector(dims[d], freq[d]);
        const std::size_t period = stride * dims[d];
        for (std::size_t base = 0; base < total; base += period)
            for (std::size_t p = 0; p < dims[d]; ++p)
                for (std::size_t i = 0; i < stride; ++i)
                    out[base + p * stride + i] *= a[p];
        stride = period;
    }
    return out;
}

ComplexTensor synthesize(const Dims& dims, std::span<const SinusoidComponent> components) {
    ComplexTensor z(dims);
    for (const auto& c : components) {
        const CVector a = atom(dims, c.freq);
        auto data = z.data();
        for (std::size_t i = 0; i < a.size(); ++i)
            data[i] += c.amplitude * a[i];
    }
    return z;
}

ComplexTensor dft_spectrum(const ComplexTensor& y) {
    ComplexTensor out(y.dims());
    detail::fft_forward(y.data(), y.dims(), out.data());
    out *= 1.0 / std::sqrt(static_cast<double>(y.size()));
    return out;
}

ComplexTensor oversampled_spectrum(const ComplexTensor& y, std::size_t gamma) {
    if (gamma == 0)
        throw InvalidArgument("oversampled_spectrum: gamma must be >= 1");
    Dims grid = y.dims();
    for (auto& n : grid)
        n *= gamma;
    ComplexTensor out(grid);
    detail::fft_forward_padded(y.data(), y.dims(), grid, out.data());
    out *= 1.0 / std::sqrt(static_cast<double>(y.size()));
    return out;
}

Peak peak_location(std::span<const double> power, const Dims& dims) {
    if (power.empty())
        throw InvalidArgument("peak_location: empty spectrum");
    // max_element returns the first maximum, which is the tie-break rule.
    const auto it = std::max_element(power.begin(), power.end());
    Peak peak;
    peak.linear = static_cast<std::size_t>(it - power.begin());
    peak.power = *it;
    peak.index = grid_index(peak.linear, dims);
    return peak;
}

Peak peak_location(const ComplexTensor& spectrum) {
    RVector power(spectrum.size());
    for (std::size_t i = 0; i < power.size(); ++i)
        power[i] = std::norm(spectrum[i]);
    return peak_location(power, spectrum.dims());
}

double wrap_dist(double omega_a, double omega_b) {
    const double d = std::fabs(std::remainder(omega_b - omega_a, kTwoPi));
    return std::min(d, std::numbers::pi);
}

GridIndex nearest_cell(const FrequencyVector& freq, const Dims& dims) {
    if (freq.size() != dims.size())
        throw InvalidArgument("nearest_cell: rank mismatch");
    GridIndex index;
    index.idx.resize(dims.size());
    for (std::size_t d = 0; d < dims.size(); ++d) {
        const double pos = freq[d] * static_cast<double>(dims[d]) / kTwoPi;
        const auto cell = static_cast<long long>(std::llround(pos));
        const auto n = static_cast<long long>(dims[d]);
        index[d] = static_cast<std::size_t>(((cell % n) + n) % n);
    }
    return index;
}

FrequencyVector cell_frequency(const GridIndex& index, const Dims& grid_dims) {
    std::vector<double> w(index.size());
    for (std::size_t d = 0; d < index.size(); ++d)
        w[d] = kTwoPi * static_cast<double>(index[d]) / static_cast<double>(grid_dims[d]);
    return FrequencyVector(std::move(w));
}

} // namespace nompcfar
