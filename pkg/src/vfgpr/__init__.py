"""Variable-fidelity Gaussian process surrogate models.

Four model families share one kernel and linear-algebra core:

* :mod:`vfgpr.gp` single-fidelity GP regression,
* :mod:`vfgpr.vfgp` co-kriging on low- and high-fidelity samples,
* :mod:`vfgpr.svfgp` sparse co-kriging via a Nystrom approximation,
* :mod:`vfgpr.bbvfgp` co-kriging updated with a low-fidelity blackbox.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AllStartsFailed,
    DegenerateDiagonal,
    DegenerateTestSample,
    DimensionMismatch,
    NotPositiveDefinite,
    OracleFailure,
    ParseError,
    SubsampleTooLarge,
    VfgprError,
)
from .gp import Dataset, FitConfig, GpModel  # noqa: E402
from .kernels import NoiseSpec, SeKernel  # noqa: E402
from .vfgp import VfDataset, VfgpModel, VfParams  # noqa: E402
from .svfgp import SvfgpModel  # noqa: E402
from .bbvfgp import BbVfgpModel, LowFidelityOracle  # noqa: E402
