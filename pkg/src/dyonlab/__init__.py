"""Classical and quantum MICZ-Kepler systems, Dirac dyon fields and their
conformally flat generalisations."""
from .errors import (ConfigError, ConvergenceError, DomainError, DyonlabError, IntegrationAborted,
                     ProximityError, SingularityError, StringProximityError)
from .geometry import FLAT, Curvature, MetricSpec, coulomb_green_closed, coulomb_green_quadrature
from .fields import DyonCenter, duality_residual, magnetic_field_multi, monopole_flux
from .model import (Coulomb, LinearStark, NBodySpec, Oscillator, PhaseState, Replacement, SystemSpec,
                    evaluate_hamiltonian, iv2_residual)
from .dynamics import Integrator, IntegratorConfig, build_initial_state, integrate, integrate_nbody
from .quantum import RadialGrid, RadialProblem, analytic_spectrum, radial_eigenvalues

__version__ = "0.1.0"
