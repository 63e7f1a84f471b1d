"""Hierarchical (p-adic) cellular neural networks on finite rooted trees.

The package simulates reaction-diffusion cellular neural networks whose
cells are the leaves of the depth-l rooted tree G_l = Z_p / p^l Z_p:
state dynamics with and without delay, the fractional heat semigroup on
the unit ball, stationary-state analysis of the scalar-gain edge
detector, and grayscale image processing (edge detection, denoising)
through hierarchy-respecting pixel codecs.
"""

from .errors import (
    AccuracyError,
    ConfigError,
    DivergenceError,
    EnumerationLimitError,
    PadicCnnError,
    ParameterError,
    ValidationError,
)
from .ptree import PadicIndex, PadicNormValue, TreeParams
from .funcspace import (
    GridFunction,
    OperatorMatrix,
    RadialKernel,
    build_J_operator,
    build_vladimirov_generator,
    haar_convolve,
    haar_convolve_fast,
    heat_kernel_Z0,
    read_grid_csv,
    sample_radial,
    vladimirov_lambda,
    write_grid_csv,
)
from .dynamics import (
    DelayState,
    StepperConfig,
    Trajectory,
    duhamel_residual,
    evolve_semigroup,
    integrate,
    integrate_delay,
)
from .networks import (
    SIGMOID,
    ContinuousCnn,
    DelayRdCnn,
    DenoiseRdCnn,
    EdgeCnn,
    SigmoidSpec,
    StationaryState,
    drive,
    enumerate_stationary,
    lattice_join,
    lattice_meet,
    minimal_states,
    poset_compare,
    rhs_continuous,
    rhs_delay,
    rhs_denoise,
    rhs_edge,
    stability_bound_continuous,
    stability_bound_delay,
    stationary_edge,
)
from .imaging import (
    EncodingMap,
    GrayImage,
    add_gaussian_noise,
    decode,
    encode,
    psnr,
    read_pgm,
    write_pgm,
)
from .presets import PRESETS, preset_config

__version__ = "0.1.0"

__all__ = [
    "AccuracyError",
    "ConfigError",
    "ContinuousCnn",
    "DelayRdCnn",
    "DelayState",
    "DenoiseRdCnn",
    "DivergenceError",
    "EdgeCnn",
    "EncodingMap",
    "EnumerationLimitError",
    "GrayImage",
    "GridFunction",
    "OperatorMatrix",
    "PRESETS",
    "PadicCnnError",
    "PadicIndex",
    "PadicNormValue",
    "ParameterError",
    "RadialKernel",
    "SIGMOID",
    "SigmoidSpec",
    "StationaryState",
    "StepperConfig",
    "Trajectory",
    "TreeParams",
    "ValidationError",
    "add_gaussian_noise",
    "build_J_operator",
    "build_vladimirov_generator",
    "decode",
    "drive",
    "duhamel_residual",
    "encode",
    "enumerate_stationary",
    "evolve_semigroup",
    "haar_convolve",
    "haar_convolve_fast",
    "heat_kernel_Z0",
    "integrate",
    "integrate_delay",
    "lattice_join",
    "lattice_meet",
    "minimal_states",
    "poset_compare",
    "preset_config",
    "psnr",
    "read_grid_csv",
    "read_pgm",
    "rhs_continuous",
    "rhs_delay",
    "rhs_denoise",
    "rhs_edge",
    "sample_radial",
    "stability_bound_continuous",
    "stability_bound_delay",
    "stationary_edge",
    "vladimirov_lambda",
    "write_grid_csv",
    "write_pgm",
]
