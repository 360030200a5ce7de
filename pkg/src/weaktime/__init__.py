"""Weak arrival-time measurement by two-photon interference: forward model,
tomographic inversion and shot-noise simulation on a discrete time grid."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .grid import TemporalGrid, default_grid, inner, to_frequency, to_time
from .interferometer import (MeasurementSettings, background_rate, broadband_rates,
                             channel_apply, coincidence_rate, forward_rates,
                             measurement_operator_apply, oracle_two_photon,
                             probe_detection_probability, two_photon_coincidence_rate,
                             two_photon_rates)
from .noise import ShotNoiseConfig, estimator_variance_sweep, sample_counts
from .records import BROADBAND, CountRecord, RecordTable
from .states import (DensityMatrix, PureState, ReferencePulse, TwoPhotonPureState, fidelity,
                     gaussian_entangled_pair, gaussian_pulse, load_state, mix, pure_to_density,
                     save_state, schmidt_coefficients, superpose)
from .tomography import (KirkwoodDistribution, estimate_weak_value_broadband,
                         estimate_weak_value_subtracted, kirkwood_from_fringes,
                         kirkwood_function, reconstruct_density, two_photon_wavefunction,
                         wavefunction_freq, wavefunction_time, weak_value_time_projector)
