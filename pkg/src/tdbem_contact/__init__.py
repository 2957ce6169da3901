"""Time-domain energetic Galerkin BEM for 2D elastodynamic Signorini contact."""
from .assembly import BlockLowerToeplitz, assemble_rhs, assemble_S_blocks, s0_min_eig
from .config import RunConfig, preset
from .contact import UzawaConfig, assemble_coupling, uzawa_solve
from .geometry import Material, TimeGrid, build_dof_layout, build_preset_mesh
from .mot_solver import factorize, march

__version__ = "0.1.0"

__all__ = ["BlockLowerToeplitz", "Material", "RunConfig", "TimeGrid", "UzawaConfig",
           "assemble_S_blocks", "assemble_coupling", "assemble_rhs", "build_dof_layout",
           "build_preset_mesh", "factorize", "march", "preset", "s0_min_eig", "uzawa_solve"]
