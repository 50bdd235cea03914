"""Berry connections, curvature and their weak-value split on sampled parameter spaces."""

__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .grid import ParameterGrid, PathContour, ScalarField, VectorField  # noqa: E402
from .geometry import (EigenBundle, GaugeFunction, berry_connection, berry_curvature,  # noqa: E402
                       berry_phase_line, berry_phase_wilson, build_bundle, chern_number)
from .weakvalue import (CustomField, FixedBra, ParameterState, curvature_decompose,  # noqa: E402
                        decompose, gauge_covariance_test)
from .adiabatic import TimePath, cone_path, evolve_tdse, extract_phases  # noqa: E402
