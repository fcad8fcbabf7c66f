"""Single-photon avalanche diode lidar simulator.

Two regimes: a fast Cramér-Rao mode that noises ground-truth depth at the
bound, and a histogram mode that samples first-photon arrivals pulse by
pulse and estimates depth with a matched filter.
"""

from .config import (AcquisitionSpec, AtmosphereSpec, LaserSpec, OpticsSpec, SensorSpec, SystemConfig,
                     TargetPatch, Tolerances, load_config, load_preset, parse_config)
from .crb_imager import crb_sigma_map, iter_crb_batch, simulate_crb_batch, simulate_crb_image
from .errors import (ConfigError, DomainError, EdgeProximityWarning, FormatError, QuadratureError,
                     ScaleGuardError)
from .estimation import (MatchFilterSpec, depth_distribution, depth_image_from_cube,
                         distinguishability_sweep, match_filter_peak, per_bar_accuracy)
from .fisher import crb_sigma_star, fisher_per_pulse, min_distinguishability
from .likelihood import LikelihoodModel, PulseResponse, bin_probabilities, build_model, total_alpha
from .radiometry import background_rate, energy_chain, photons_per_pulse, sbnr
from .scene import DepthImage, Scene, resolution_target
from .spad_sampler import Histogram, HistogramCube, build_histogram, simulate_histogram_cube

__version__ = "0.1.0"
