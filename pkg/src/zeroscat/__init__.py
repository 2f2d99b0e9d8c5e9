"""Zero-energy scattering for long-range attractive potentials V ~ -gamma r**-mu."""

from .errors import ZeroScatError
from .potentials import CutoffMode, PotentialModel

__version__ = "0.1.0"
__all__ = ["CutoffMode", "PotentialModel", "ZeroScatError", "__version__"]
