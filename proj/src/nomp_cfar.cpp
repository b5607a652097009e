#include "nompcfar/nomp_cfar.hpp"

#include "nompcfar/errors.hpp"
#include "pursuit.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace nompcfar {

using detail::AtomModel;
using detail::Pursuit;
using detail::Snapshots;

void NompCfarSettings::validate() const {
    if (k_max < 1)
        throw InvalidArgument("nomp_cfar: k_max must be >= 1");
    if (max_iters < k_max)
        throw InvalidArgument("nomp_cfar: max_iters must be >= k_max");
    cfar.validate();
    refine.validate();
}

std::string to_string(Action action) {
    switch (action) {
    case Action::Deactivate:
        return "deactivate";
    case Action::Activate:
        return "activate";
    case Action::Stop:
        return "stop";
    }
    return "unknown";
}

CompressionOperator CompressionOperator::identity(std::size_t n) {
    CompressionOperator op{n, n, CVector(n * n, Complex{})};
    for (std::size_t i = 0; i < n; ++i)
        op.matrix[i * n + i] = 1.0;
    return op;
}

CVector CompressionOperator::apply(const CVector& x) const {
    if (x.size() != n)
        throw InvalidArgument("compression: input length does not match N");
    CVector out(m);
    for (std::size_t i = 0; i < m; ++i) {
        Complex acc{};
        for (std::size_t j = 0; j < n; ++j)
            acc += matrix[i * n + j] * x[j];
        out[i] = acc;
    }
    return out;
}

void CompressionOperator::validate() const {
    if (m == 0 || n == 0 || m > n)
        throw InvalidArgument("compression operator must be M x N with 1 <= M <= N");
    if (matrix.size() != m * n)
        throw InvalidArgument("compression operator: entry count does not match M x N");
    for (const Complex& v : matrix)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
            throw InvalidArgument("compression operator: entries must be finite");
}

ComplexTensor residual(const ComplexTensor& y, const CandidateSet& set) {
    return y - synthesize(y.dims(), set.components);
}

ComplexTensor pseudo_measurement(const ComplexTensor& y, const CandidateSet& set, std::size_t k) {
    if (k >= set.size())
        throw InvalidArgument("pseudo_measurement: component index out of range");
    std::vector<SinusoidComponent> others;
    others.reserve(set.size() - 1);
    for (std::size_t j = 0; j < set.size(); ++j)
        if (j != k)
            others.push_back(set.components[j]);
    return y - synthesize(y.dims(), others);
}

std::vector<DeltaReport> component_margins(const ComplexTensor& y, const CandidateSet& set,
                                           const NompCfarSettings& settings) {
    settings.cfar.validate();
    const AtomModel model(y.dims());
    Pursuit p(model, {y.vec()}, settings.refine);
    p.comps = detail::from_public(model, set.components);
    const ReferenceWindow window(y.dims(), settings.cfar.n_guard);
    return p.margins(settings.cfar, window, nullptr);
}

namespace {

DetectionReport run(const AtomModel& model, Snapshots data, const NompCfarSettings& settings, bool forward) {
    settings.validate();
    if (settings.k_max > model.n())
        throw InvalidArgument("nomp_cfar: k_max exceeds the number of samples");
    Pursuit p(model, std::move(data), settings.refine);
    const ReferenceWindow window(model.dims(), settings.cfar.n_guard);
    DetectionReport report;
    bool fallback = false;

    auto note = [&](Action action, std::size_t index, double delta) {
        if (settings.record_trace)
            report.trace.push_back({action, index, delta});
    };
    auto count_fallback = [&] {
        if (fallback)
            ++report.window_fallbacks;
        fallback = false;
    };

    if (!forward) {
        for (std::size_t attempt = 0; p.comps.size() < settings.k_max && attempt < 4 * settings.k_max; ++attempt)
            p.nomp_step();
    }

    std::optional<GridIndex> last_removed;
    bool stopped = false;
    std::size_t iter = 0;
    while (iter < settings.max_iters) {
        ++iter;
        if (!forward && !p.comps.empty()) {
            const auto margins = p.margins(settings.cfar, window, &report.window_fallbacks);
            std::size_t worst = 0;
            for (std::size_t k = 1; k < margins.size(); ++k)
                if (margins[k].delta_db < margins[worst].delta_db)
                    worst = k;
            const double worst_delta = margins[worst].delta_db;
            if (worst_delta < 0.0) {
                last_removed = p.cell(worst);
                p.comps.erase(p.comps.begin() + static_cast<std::ptrdiff_t>(worst));
                p.cyclic();
                p.merge_duplicates();
                p.least_squares_safe();
                note(Action::Deactivate, worst, worst_delta);
                continue;
            }
        }

        const DeltaReport r = p.residual_test(settings.cfar, window, &fallback);
        count_fallback();
        if (!r.fires()) {
            note(Action::Stop, p.comps.size(), r.delta_db);
            stopped = true;
            break;
        }
        if (p.comps.size() >= settings.k_max) {
            report.saturated = true;
            note(Action::Stop, p.comps.size(), r.delta_db);
            stopped = true;
            break;
        }
        p.detect_one();
        if (last_removed && p.cell(p.comps.size() - 1) == *last_removed) {
            p.comps.pop_back();
            report.cycle_guard = true;
            note(Action::Stop, p.comps.size(), r.delta_db);
            stopped = true;
            break;
        }
        last_removed.reset();
        if (forward) {
            p.cyclic();
            p.merge_duplicates();
            p.least_squares_safe();
        }
        note(Action::Activate, p.comps.size() - 1, r.delta_db);
    }
    report.iterations = iter;
    report.converged = stopped;

    report.components = {model.dims(), detail::to_public(p.comps)};
    const auto final_margins = p.margins(settings.cfar, window, &report.window_fallbacks);
    for (std::size_t k = 0; k < p.comps.size(); ++k) {
        const DeltaReport& m = final_margins[k];
        report.snapshot_amplitudes.push_back(p.comps[k].amps);
        report.margins.push_back(m.delta_db);
        report.thresholds.push_back(m.threshold);
        report.noise_floors.push_back(m.noise_floor);
        report.n_ref_used.push_back(m.n_ref_used);
    }
    report.skipped_cells = model.skipped_cells();
    return report;
}

Snapshots single(const ComplexTensor& y) {
    if (y.empty())
        throw InvalidArgument("nomp_cfar: empty observation");
    return {y.vec()};
}

} // namespace

DetectionReport nomp_cfar(const ComplexTensor& y, const NompCfarSettings& settings) {
    const AtomModel model(y.dims());
    return run(model, single(y), settings, false);
}

DetectionReport nomp_cfar_forward(const ComplexTensor& y, const NompCfarSettings& settings) {
    const AtomModel model(y.dims());
    return run(model, single(y), settings, true);
}

DetectionReport nomp_cfar_mmv(const std::vector<ComplexTensor>& snapshots, const NompCfarSettings& settings) {
    if (snapshots.empty())
        throw InvalidArgument("nomp_cfar_mmv: empty snapshot list");
    Snapshots data;
    data.reserve(snapshots.size());
    for (const auto& s : snapshots) {
        if (s.dims() != snapshots.front().dims())
            throw InvalidArgument("nomp_cfar_mmv: snapshots must share dims");
        data.push_back(s.vec());
    }
    const AtomModel model(snapshots.front().dims());
    return run(model, std::move(data), settings, false);
}

DetectionReport nomp_cfar_compressive(const CVector& y_c, const CompressionOperator& phi,
                                      const NompCfarSettings& settings) {
    phi.validate();
    if (y_c.size() != phi.m)
        throw InvalidArgument("nomp_cfar_compressive: measurement length does not match M");
    const AtomModel model(phi.m, phi.n, phi.matrix);
    return run(model, {y_c}, settings, false);
}

CVector generalized_spectrum(const CVector& y_c, const CompressionOperator& phi) {
    phi.validate();
    if (y_c.size() != phi.m)
        throw InvalidArgument("generalized_spectrum: measurement length does not match M");
    const AtomModel model(phi.m, phi.n, phi.matrix);
    const CVector v = model.back_project(y_c);
    CVector out(phi.n);
    for (std::size_t k = 0; k < phi.n; ++k) {
        const FrequencyVector w{kTwoPi * static_cast<double>(k) / static_cast<double>(phi.n)};
        const double q = model.norm2(w);
        out[k] = q <= 1e-12 * static_cast<double>(phi.n) ? Complex{} : model.correlate(v, w) / std::sqrt(q);
    }
    return out;
}

} // namespace nompcfar
