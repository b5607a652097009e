#pragma once

#include <complex>
#include <compare>
#include <cstddef>
#include <initializer_list>
#include <numbers>
#include <span>
#include <vector>

namespace nompcfar {

using Complex = std::complex<double>;
using CVector = std::vector<Complex>;
using RVector = std::vector<double>;
using Dims = std::vector<std::size_t>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Product of all extents; throws InvalidArgument on an empty list or a zero extent.
std::size_t element_count(const Dims& dims);

/// Multi-index into a D-dimensional grid. Storage order puts the first
/// dimension fastest, matching a_{N_D} (x) ... (x) a_{N_1}.
struct GridIndex {
    std::vector<std::size_t> idx;

    GridIndex() = default;
    GridIndex(std::initializer_list<std::size_t> values) : idx(values) {}
    explicit GridIndex(std::vector<std::size_t> values) : idx(std::move(values)) {}

    std::size_t size() const noexcept { return idx.size(); }
    std::size_t operator[](std::size_t d) const { return idx[d]; }
    std::size_t& operator[](std::size_t d) { return idx[d]; }

    auto operator<=>(const GridIndex&) const = default;
};

std::size_t linear_index(const GridIndex& index, const Dims& dims);
GridIndex grid_index(std::size_t linear, const Dims& dims);

/// D angular frequencies, each reduced into [0, 2*pi) on construction.
class FrequencyVector {
public:
    FrequencyVector() = default;
    explicit FrequencyVector(std::vector<double> omega);
    FrequencyVector(std::initializer_list<double> omega);

    std::size_t size() const noexcept { return omega_.size(); }
    double operator[](std::size_t d) const { return omega_[d]; }
    std::span<const double> values() const noexcept { return omega_; }

    bool operator==(const FrequencyVector&) const = default;

private:
    std::vector<double> omega_;
};

/// Reduce an angle into [0, 2*pi).
double wrap_angle(double omega);

struct SinusoidComponent {
    Complex amplitude{};
    FrequencyVector freq;
};

/// Dense complex tensor; data is stored first-dimension-fastest.
class ComplexTensor {
public:
    ComplexTensor() = default;
    explicit ComplexTensor(Dims dims);
    ComplexTensor(Dims dims, CVector data);

    const Dims& dims() const noexcept { return dims_; }
    std::size_t rank() const noexcept { return dims_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<const Complex> data() const noexcept { return data_; }
    std::span<Complex> data() noexcept { return data_; }
    const CVector& vec() const noexcept { return data_; }

    Complex operator[](std::size_t i) const { return data_[i]; }
    Complex& operator[](std::size_t i) { return data_[i]; }
    Complex at(const GridIndex& index) const { return data_[linear_index(index, dims_)]; }

    /// Sum of squared magnitudes.
    double energy() const;

    ComplexTensor& operator+=(const ComplexTensor& other);
    ComplexTensor& operator-=(const ComplexTensor& other);
    ComplexTensor& operator*=(Complex scale);

private:
    Dims dims_;
    CVector data_;
};

ComplexTensor operator+(ComplexTensor lhs, const ComplexTensor& rhs);
ComplexTensor operator-(ComplexTensor lhs, const ComplexTensor& rhs);
ComplexTensor operator*(Complex scale, ComplexTensor tensor);

/// [1, e^{j w}, ..., e^{j (P-1) w}]
CVector steering_vector(std::size_t length, double omega);

/// Vectorized multidimensional atom, unit-modulus entries, squared norm N.
CVector atom(const Dims& dims, const FrequencyVector& freq);

ComplexTensor synthesize(const Dims& dims, std::span<const SinusoidComponent> components);

/// Unitary D-dimensional DFT (1/sqrt(N) scaling).
ComplexTensor dft_spectrum(const ComplexTensor& y);

/// Zero-padded transform on a grid of gamma*N_d points per dimension, still
/// scaled by 1/sqrt(N) of the unpadded tensor.
ComplexTensor oversampled_spectrum(const ComplexTensor& y, std::size_t gamma);

struct Peak {
    GridIndex index;
    std::size_t linear = 0;
    double power = 0.0;
};

/// Argmax of |.|^2; ties go to the smallest linear index.
Peak peak_location(const ComplexTensor& spectrum);
Peak peak_location(std::span<const double> power, const Dims& dims);

/// Circular distance min_a |b - a + 2 pi a|, in [0, pi].
double wrap_dist(double omega_a, double omega_b);

/// DFT cell nearest to each frequency coordinate.
GridIndex nearest_cell(const FrequencyVector& freq, const Dims& dims);

/// Frequency of a grid cell on a grid of the given extents.
FrequencyVector cell_frequency(const GridIndex& index, const Dims& grid_dims);

} // namespace nompcfar
