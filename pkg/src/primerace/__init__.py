"""Prime number races mod q: densities from the random model built on Dirichlet L-function zeros."""

from ._accel import backend_name
from .characters import RaceSpec, build_character_table, c_q, character

__version__ = "0.1.0"

__all__ = ["RaceSpec", "build_character_table", "c_q", "character", "backend_name", "__version__"]
