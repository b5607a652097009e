#include "nompcfar/nomp.hpp"

#include "nompcfar/cfar.hpp"
#include "nompcfar/errors.hpp"
#include "pursuit.hpp"

namespace nompcfar {

using detail::AtomModel;
using detail::Pursuit;

void RefineSettings::validate() const {
    if (oversample < 1)
        throw InvalidArgument("refine: oversample must be >= 1");
}

namespace {

Pursuit make_pursuit(const AtomModel& model, const ComplexTensor& y, const RefineSettings& settings) {
    settings.validate();
    return Pursuit(model, {y.vec()}, settings);
}

CandidateSet to_set(const Dims& dims, const Pursuit& p) {
    return {dims, detail::to_public(p.comps)};
}

void check_set(const ComplexTensor& y, const CandidateSet& set) {
    if (!set.dims.empty() && set.dims != y.dims())
        throw InvalidArgument("candidate set dims do not match the data");
}

} // namespace

ObjectiveValue matched_filter_objective(const ComplexTensor& y, const FrequencyVector& freq) {
    if (freq.size() != y.rank())
        throw InvalidArgument("objective: frequency rank does not match the data");
    const AtomModel model(y.dims());
    const auto ev = model.evaluate({y.vec()}, freq, true);
    return {ev.value, ev.gradient, ev.hessian};
}

SinusoidComponent coarse_detect(const ComplexTensor& residual, std::size_t gamma) {
    if (residual.empty())
        throw InvalidArgument("coarse_detect: empty residual");
    if (gamma < 1)
        throw InvalidArgument("coarse_detect: gamma must be >= 1");
    const AtomModel model(residual.dims());
    const detail::Snapshots v{residual.vec()};
    const FrequencyVector freq = model.coarse_peak(v, gamma);
    return {model.correlate(v[0], freq) / model.norm2(freq), freq};
}

SinusoidComponent newton_refine_single(const ComplexTensor& y_pseudo, const SinusoidComponent& comp,
                                       const RefineSettings& settings) {
    const AtomModel model(y_pseudo.dims());
    Pursuit p = make_pursuit(model, y_pseudo, settings);
    auto comps = detail::from_public(model, {comp});
    p.refine_single(comps[0], p.data());
    return detail::to_public(comps).front();
}

CandidateSet cyclic_refine(const ComplexTensor& y, const CandidateSet& set, const RefineSettings& settings) {
    check_set(y, set);
    const AtomModel model(y.dims());
    Pursuit p = make_pursuit(model, y, settings);
    p.comps = detail::from_public(model, set.components);
    p.cyclic();
    p.merge_duplicates();
    return to_set(y.dims(), p);
}

CandidateSet ls_reestimate(const ComplexTensor& y, const CandidateSet& set) {
    check_set(y, set);
    if (set.size() > y.size())
        throw IllConditioned("least squares: more components than samples", 0.0);
    const AtomModel model(y.dims());
    Pursuit p = make_pursuit(model, y, {});
    p.comps = detail::from_public(model, set.components);
    p.least_squares();
    return to_set(y.dims(), p);
}

CandidateSet nomp_baseline(const ComplexTensor& y, double sigma2, double p_fa, const RefineSettings& settings) {
    if (!(sigma2 > 0.0))
        throw InvalidArgument("nomp_baseline: sigma2 must be positive");
    const double tau = alpha_nomp(p_fa, y.size()) * sigma2;
    const AtomModel model(y.dims());
    Pursuit p = make_pursuit(model, y, settings);
    while (p.comps.size() < y.size()) {
        const RVector power = model.grid_power(p.model().back_project(p.residual()));
        if (peak_location(power, y.dims()).power < tau)
            break;
        p.nomp_step();
    }
    return to_set(y.dims(), p);
}

CandidateSet nomp_topk(const ComplexTensor& y, std::size_t k_max, const RefineSettings& settings) {
    if (k_max < 1)
        throw InvalidArgument("nomp_topk: k_max must be >= 1");
    if (k_max > y.size())
        throw InvalidArgument("nomp_topk: k_max exceeds the number of samples");
    const AtomModel model(y.dims());
    Pursuit p = make_pursuit(model, y, settings);
    // Duplicate merges can shrink the set, so the bound is on attempts.
    for (std::size_t attempt = 0; p.comps.size() < k_max && attempt < 4 * k_max; ++attempt)
        p.nomp_step();
    return to_set(y.dims(), p);
}

} // namespace nompcfar
