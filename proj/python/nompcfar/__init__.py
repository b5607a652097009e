"""Line-spectral detection with Newtonized pursuit and a CFAR stopping rule.

Arrays use numpy's complex128; tensors of any rank are accepted and the
first axis is the fastest-varying one in the underlying storage.
"""

from ._core import (
    ConfigError,
    DegenerateWindow,
    IllConditioned,
    InfeasibleScenario,
    NumericalFailure,
    OutOfFieldOfView,
    alpha_cell_ca,
    alpha_from_pfa,
    alpha_from_pfa_approx,
    alpha_from_pfa_os,
    alpha_nomp,
    classical_cfar_detect,
    crb_single_freq,
    dft_spectrum,
    freq_to_state,
    generate_scenario,
    marcum_q1,
    nomp_baseline,
    nomp_cfar,
    nomp_cfar_mmv,
    nomp_topk,
    pd_all_upper,
    pd_single,
    pfa_approx,
    pfa_from_alpha,
    pfa_from_alpha_mmv,
    pfa_from_alpha_os,
    read_tensor,
    synthesize,
    write_tensor,
)

__version__ = "0.1.0"
