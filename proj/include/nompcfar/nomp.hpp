#pragma once

#include "nompcfar/tensor.hpp"

#include <vector>

namespace nompcfar {

struct CandidateSet {
    Dims dims;
    std::vector<SinusoidComponent> components;

    std::size_t size() const noexcept { return components.size(); }
    bool empty() const noexcept { return components.empty(); }
};

struct RefineSettings {
    std::size_t newton_steps_single = 1; ///< R_s
    std::size_t cyclic_rounds = 3;       ///< R_c
    std::size_t oversample = 4;          ///< gamma
    /// Require each accepted step to increase the objective. When off, a
    /// Newton step at a negative definite Hessian is taken unchecked.
    bool step_accept_rule = true;

    void validate() const;
};

/// Concentrated objective G(w) = |a(w)^H vec(y)|^2 / N with its gradient and
/// Hessian (D x D, row-major).
struct ObjectiveValue {
    double value = 0.0;
    RVector gradient;
    RVector hessian;
};

ObjectiveValue matched_filter_objective(const ComplexTensor& y, const FrequencyVector& freq);

SinusoidComponent coarse_detect(const ComplexTensor& residual, std::size_t gamma);

SinusoidComponent newton_refine_single(const ComplexTensor& y_pseudo, const SinusoidComponent& comp,
                                       const RefineSettings& settings = {});

CandidateSet cyclic_refine(const ComplexTensor& y, const CandidateSet& set, const RefineSettings& settings = {});

/// Least-squares amplitudes for fixed frequencies. Throws IllConditioned when
/// the atoms are numerically dependent.
CandidateSet ls_reestimate(const ComplexTensor& y, const CandidateSet& set);

/// Known-noise NOMP: stops once the residual DFT peak falls below
/// alpha_nomp(p_fa, N) * sigma2.
CandidateSet nomp_baseline(const ComplexTensor& y, double sigma2, double p_fa, const RefineSettings& settings = {});

/// Exactly k_max NOMP iterations without a stopping test.
CandidateSet nomp_topk(const ComplexTensor& y, std::size_t k_max, const RefineSettings& settings = {});

} // namespace nompcfar
