"""
Frequency-domain FOPID/PID tuning of an AVR loop with a chaotic-map NSGA-II.
"""

from .chaos import HenonSource, LogisticSource, UniformSource, gaussian_from, make_source
from .errors import AvrTuneError
from .fractional import FopidParams, OustaloupConfig, fopid_freq_exact, fopid_to_rational, oustaloup
from .lti import Polynomial, RationalTF, feedback, poles, series
from .margins import Margins, bode_data, find_margins
from .nsga2 import Nsga2Config, crowding_distance, evaluate, non_dominated_sort, run
from .plant import AvrParams, exact_loop, oustaloup_loop
from .timesim import robustness_sweep, step_response, to_statespace

__version__ = "0.1.0"

__all__ = [
    "AvrParams",
    "AvrTuneError",
    "FopidParams",
    "HenonSource",
    "LogisticSource",
    "Margins",
    "Nsga2Config",
    "OustaloupConfig",
    "Polynomial",
    "RationalTF",
    "UniformSource",
    "bode_data",
    "crowding_distance",
    "evaluate",
    "exact_loop",
    "feedback",
    "find_margins",
    "fopid_freq_exact",
    "fopid_to_rational",
    "gaussian_from",
    "make_source",
    "non_dominated_sort",
    "oustaloup",
    "oustaloup_loop",
    "poles",
    "robustness_sweep",
    "run",
    "series",
    "step_response",
    "to_statespace",
]
