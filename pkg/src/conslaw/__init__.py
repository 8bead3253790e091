"""Fractional regularity experiments for 1-D scalar conservation laws."""

from .errors import *  # noqa: F401,F403
from .flux import (Flux, Interval, LptProbe, DegeneracyReport, degeneracy_at,
                   degeneracy_report, holder_degeneracy, lpt_alpha, lpt_measure,
                   parse_flux_spec, smooth_degeneracy)
from .variation import (GrowthClass, SampledFunction, SeriesProbe, VariationResult,
                        classify_growth, gagliardo_seminorm, gagliardo_seminorm_periodic,
                        partial_variation_series, tv_s, tv_s_bruteforce)
from .transport import (CharacteristicFlow, GodunovConfig, characteristic_flow,
                        evolve_continuous, evolve_periodic, godunov_solve, invert_flow,
                        l1_distance, linf_distance, shock_time)
from .constructions import (ChengData, OscillatorParams, ScalingReport, WkbConfig,
                            build_wkb_config, cheng_initial_data, oscillator,
                            oscillator_extrema, powerlaw_oscillation, profile_evolve,
                            select_delta, sobolev_scaling_sweep, wkb_initial,
                            wkb_reconstruct, wkb_residual)

__version__ = "0.1.0"
