#include "nompcfar/errors.hpp"
#include "nompcfar/harness.hpp"
#include "nompcfar/tensor_io.hpp"

#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace nompcfar;

namespace {

// Tensors use first-index-fastest storage, i.e. Fortran order in numpy.
using CArray = py::array_t<Complex, py::array::f_style | py::array::forcecast>;

ComplexTensor to_tensor(const CArray& a) {
    if (a.ndim() < 1)
        throw InvalidArgument("expected an array with at least one dimension");
    Dims dims(a.shape(), a.shape() + a.ndim());
    return ComplexTensor(dims, CVector(a.data(), a.data() + a.size()));
}

CArray to_array(const ComplexTensor& t) {
    std::vector<py::ssize_t> shape(t.dims().begin(), t.dims().end());
    CArray out(shape);
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

CfarConfig make_cfar(const std::string& variant, std::size_t n_ref, std::size_t n_guard, std::size_t os_rank,
                     std::optional<std::size_t> exclusion_radius) {
    CfarConfig c;
    c.variant = parse_variant(variant);
    c.n_ref = n_ref;
    c.n_guard = n_guard;
    c.os_rank = os_rank;
    c.exclusion_radius = exclusion_radius;
    return c;
}

py::array_t<double> freq_matrix(const CandidateSet& set) {
    const std::size_t rank = set.dims.size();
    py::array_t<double> out({static_cast<py::ssize_t>(set.size()), static_cast<py::ssize_t>(rank)});
    auto v = out.mutable_unchecked<2>();
    for (std::size_t k = 0; k < set.size(); ++k)
        for (std::size_t d = 0; d < rank; ++d)
            v(k, d) = set.components[k].freq[d];
    return out;
}

py::array_t<Complex> amplitude_vector(const CandidateSet& set) {
    py::array_t<Complex> out(static_cast<py::ssize_t>(set.size()));
    for (std::size_t k = 0; k < set.size(); ++k)
        out.mutable_at(k) = set.components[k].amplitude;
    return out;
}

py::dict report_dict(const DetectionReport& r) {
    py::dict d;
    d["freqs"] = freq_matrix(r.components);
    d["amplitudes"] = amplitude_vector(r.components);
    d["snapshot_amplitudes"] = r.snapshot_amplitudes;
    d["margins_db"] = r.margins;
    d["thresholds"] = r.thresholds;
    d["noise_floors"] = r.noise_floors;
    d["n_ref_used"] = r.n_ref_used;
    d["iterations"] = r.iterations;
    d["converged"] = r.converged;
    d["saturated"] = r.saturated;
    d["cycle_guard"] = r.cycle_guard;
    d["window_fallbacks"] = r.window_fallbacks;
    return d;
}

py::dict set_dict(const CandidateSet& s) {
    py::dict d;
    d["freqs"] = freq_matrix(s);
    d["amplitudes"] = amplitude_vector(s);
    return d;
}

NompCfarSettings settings(double p_fa, std::size_t n_cells, std::size_t snapshots, const std::string& variant,
                          std::size_t n_ref, std::size_t n_guard, std::size_t os_rank,
                          std::optional<std::size_t> exclusion_radius, std::size_t k_max, std::optional<double> alpha) {
    NompCfarSettings s;
    s.cfar = make_cfar(variant, n_ref, n_guard, os_rank, exclusion_radius);
    s.k_max = std::min(k_max, n_cells);
    if (alpha)
        s.cfar.alpha = *alpha;
    else if (s.cfar.variant == CfarVariant::OS)
        s.cfar.alpha = alpha_from_pfa_os(p_fa, n_cells, n_ref, os_rank);
    else
        s.cfar.alpha = alpha_from_pfa({p_fa, n_cells, n_ref, snapshots});
    return s;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Line-spectral detection with Newtonized pursuit and a CFAR stopping rule";

    py::register_exception<DegenerateWindow>(m, "DegenerateWindow", PyExc_RuntimeError);
    py::register_exception<NumericalFailure>(m, "NumericalFailure", PyExc_RuntimeError);
    py::register_exception<IllConditioned>(m, "IllConditioned", PyExc_RuntimeError);
    py::register_exception<InfeasibleScenario>(m, "InfeasibleScenario", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_RuntimeError);
    py::register_exception<OutOfFieldOfView>(m, "OutOfFieldOfView", PyExc_ValueError);

    // Thresholds.
    m.def(
        "alpha_from_pfa",
        [](double p_fa, std::size_t n_cells, std::size_t n_ref, std::size_t snapshots) {
            return alpha_from_pfa({p_fa, n_cells, n_ref, snapshots});
        },
        py::arg("p_fa"), py::arg("n_cells"), py::arg("n_ref"), py::arg("snapshots") = 1,
        "CA threshold multiplier for a false-alarm target over n_cells spectrum cells.");
    m.def("pfa_from_alpha", &pfa_from_alpha, py::arg("alpha"), py::arg("n_cells"), py::arg("n_ref"));
    m.def("pfa_from_alpha_mmv", &pfa_from_alpha_mmv, py::arg("alpha"), py::arg("n_cells"), py::arg("n_ref"),
          py::arg("snapshots"));
    m.def("pfa_approx", &pfa_approx, py::arg("alpha"), py::arg("n_cells"), py::arg("n_ref"));
    m.def("alpha_from_pfa_approx", &alpha_from_pfa_approx, py::arg("p_fa"), py::arg("n_cells"), py::arg("n_ref"));
    m.def("alpha_nomp", &alpha_nomp, py::arg("p_fa"), py::arg("n_cells"),
          "Known-noise threshold multiplier on sigma^2.");
    m.def("pfa_from_alpha_os", &pfa_from_alpha_os, py::arg("alpha"), py::arg("n_cells"), py::arg("n_ref"),
          py::arg("os_rank"));
    m.def("alpha_from_pfa_os", &alpha_from_pfa_os, py::arg("p_fa"), py::arg("n_cells"), py::arg("n_ref"),
          py::arg("os_rank"));
    m.def("alpha_cell_ca", &alpha_cell_ca, py::arg("p_cell"), py::arg("n_ref"));

    // Spectra.
    m.def("dft_spectrum", [](const CArray& y) { return to_array(dft_spectrum(to_tensor(y))); }, py::arg("y"),
          "Unitary multidimensional DFT (sign e^{-j w n}).");
    m.def(
        "synthesize",
        [](const std::vector<std::size_t>& dims, const std::vector<std::vector<double>>& freqs,
           const std::vector<Complex>& amplitudes) {
            if (freqs.size() != amplitudes.size())
                throw InvalidArgument("freqs and amplitudes differ in length");
            std::vector<SinusoidComponent> comps;
            for (std::size_t k = 0; k < freqs.size(); ++k)
                comps.push_back({amplitudes[k], FrequencyVector(freqs[k])});
            return to_array(synthesize(Dims(dims), comps));
        },
        py::arg("dims"), py::arg("freqs"), py::arg("amplitudes"));

    // Detectors.
    m.def(
        "nomp_cfar",
        [](const CArray& y, double p_fa, const std::string& variant, std::size_t n_ref, std::size_t n_guard,
           std::size_t os_rank, std::optional<std::size_t> exclusion_radius, std::size_t k_max,
           std::optional<double> alpha, bool forward) {
            const ComplexTensor t = to_tensor(y);
            const NompCfarSettings s =
                settings(p_fa, t.size(), 1, variant, n_ref, n_guard, os_rank, exclusion_radius, k_max, alpha);
            py::gil_scoped_release release;
            const DetectionReport r = forward ? nomp_cfar_forward(t, s) : nomp_cfar(t, s);
            py::gil_scoped_acquire acquire;
            return report_dict(r);
        },
        py::arg("y"), py::arg("p_fa") = 1e-2, py::arg("variant") = "ca", py::arg("n_ref") = 50,
        py::arg("n_guard") = 4, py::arg("os_rank") = 0, py::arg("exclusion_radius") = py::none(),
        py::arg("k_max") = 32, py::arg("alpha") = py::none(), py::arg("forward") = false,
        "Pursuit with a CFAR stopping rule on a tensor of any rank.");
    m.def(
        "nomp_cfar_mmv",
        [](const std::vector<CArray>& ys, double p_fa, std::size_t n_ref, std::size_t n_guard, std::size_t k_max,
           std::optional<double> alpha) {
            if (ys.empty())
                throw InvalidArgument("need at least one snapshot");
            std::vector<ComplexTensor> snaps;
            for (const auto& y : ys)
                snaps.push_back(to_tensor(y));
            const NompCfarSettings s =
                settings(p_fa, snaps.front().size(), snaps.size(), "ca", n_ref, n_guard, 0, std::nullopt, k_max, alpha);
            return report_dict(nomp_cfar_mmv(snaps, s));
        },
        py::arg("snapshots"), py::arg("p_fa") = 1e-2, py::arg("n_ref") = 50, py::arg("n_guard") = 4,
        py::arg("k_max") = 32, py::arg("alpha") = py::none());
    m.def(
        "nomp_baseline",
        [](const CArray& y, double sigma2, double p_fa) {
            return set_dict(nomp_baseline(to_tensor(y), sigma2, p_fa));
        },
        py::arg("y"), py::arg("sigma2"), py::arg("p_fa") = 1e-2, "Pursuit with a known-noise stopping rule.");
    m.def(
        "nomp_topk", [](const CArray& y, std::size_t k) { return set_dict(nomp_topk(to_tensor(y), k)); },
        py::arg("y"), py::arg("k"));
    m.def(
        "classical_cfar_detect",
        [](const CArray& y, double alpha, const std::string& variant, std::size_t n_ref, std::size_t n_guard,
           std::size_t os_rank) {
            CfarConfig c = make_cfar(variant, n_ref, n_guard, os_rank, std::nullopt);
            c.alpha = alpha;
            return report_dict(classical_cfar_detect(to_tensor(y), c));
        },
        py::arg("y"), py::arg("alpha"), py::arg("variant") = "ca", py::arg("n_ref") = 50, py::arg("n_guard") = 4,
        py::arg("os_rank") = 0, "FFT and a per-cell CFAR test of every cell.");

    // Analysis.
    m.def("marcum_q1", &marcum_q1, py::arg("a"), py::arg("b"));
    m.def("pd_single", &pd_single, py::arg("snr_linear"), py::arg("alpha"), py::arg("n_ref"), py::arg("d_dims") = 1);
    m.def(
        "pd_all_upper",
        [](const std::vector<double>& snrs, double alpha, std::size_t n_ref, std::size_t d_dims) {
            return pd_all_upper(snrs, alpha, n_ref, d_dims);
        },
        py::arg("snrs_linear"), py::arg("alpha"), py::arg("n_ref"), py::arg("d_dims") = 1);
    m.def("crb_single_freq", &crb_single_freq, py::arg("n"), py::arg("snr_linear"));

    // Scenarios and radar conversion.
    m.def(
        "generate_scenario",
        [](const std::vector<std::size_t>& dims, std::size_t k_targets, std::vector<double> snr_db,
           double min_sep_bins, double noise_fluct_db, std::uint64_t seed) {
            ScenarioSpec spec;
            spec.dims = Dims(dims);
            spec.k_targets = k_targets;
            spec.snr_db = std::move(snr_db);
            spec.min_sep_bins = min_sep_bins;
            spec.noise_fluct_db = noise_fluct_db;
            spec.seed = seed;
            const Scenario sc = generate_scenario(spec);
            py::dict d = set_dict(sc.truth);
            d["y"] = to_array(sc.observations.front());
            d["sigma2"] = sc.sigma2;
            return d;
        },
        py::arg("dims"), py::arg("k_targets"), py::arg("snr_db"), py::arg("min_sep_bins") = 2.5,
        py::arg("noise_fluct_db") = 0.0, py::arg("seed") = 1);
    m.def(
        "freq_to_state",
        [](const std::vector<double>& freqs, double f_c, double mu, double t_s, double t_r, double d) {
            const RadarState s = freq_to_state(FrequencyVector(freqs), RadarParams{f_c, mu, t_s, t_r, d});
            return py::make_tuple(s.range, s.velocity, s.azimuth);
        },
        py::arg("freqs"), py::arg("f_c") = 77e9, py::arg("mu") = 29.982e12, py::arg("t_s") = 1e-7,
        py::arg("t_r") = 160e-6, py::arg("d") = 0.0, "Returns (range m, velocity m/s, azimuth rad).");

    // LSET files.
    m.def("read_tensor", [](const std::filesystem::path& p) { return to_array(read_tensor_file(p)); }, py::arg("path"));
    m.def(
        "write_tensor", [](const std::filesystem::path& p, const CArray& y) { write_tensor_file(p, to_tensor(y)); },
        py::arg("path"), py::arg("y"));
}
