"""Gradient fields of two-phase conductivity problems with nearly touching disks."""
from .analysis import bound_factors, fit_blowup_rate, sandwich_check, sweep
from .densities import densities_disk_in_disk, phi_two_disks, residual_check
from .errors import (
    ConfigurationError,
    DomainError,
    GapfieldError,
    InvariantError,
    SeriesError,
)
from .fields import Affine, HarmonicPoly, harmonic_conjugate
from .geometry import (
    Disk,
    DiskInDiskConfig,
    DiskInDiskGeometry,
    TwoDiskConfig,
    TwoDiskGeometry,
    derived_scalars,
    fixed_points,
)
from .oracle import (
    IllConditionedWarning,
    nystrom_disk_in_disk,
    nystrom_neumann_disk_in_disk,
    nystrom_two_disks,
    single_inclusion_closed_form,
)
from .solver import (
    grad_sup_norm,
    solve_dirichlet_disk_in_disk,
    solve_neumann_disk_in_disk,
    solve_two_disks,
)

__all__ = [
    "Affine", "ConfigurationError", "Disk", "DiskInDiskConfig", "DiskInDiskGeometry",
    "DomainError", "GapfieldError", "HarmonicPoly", "IllConditionedWarning",
    "InvariantError", "SeriesError", "TwoDiskConfig", "TwoDiskGeometry",
    "bound_factors", "densities_disk_in_disk", "derived_scalars", "fit_blowup_rate",
    "fixed_points", "grad_sup_norm", "harmonic_conjugate", "nystrom_disk_in_disk",
    "nystrom_neumann_disk_in_disk", "nystrom_two_disks", "phi_two_disks",
    "residual_check", "sandwich_check", "single_inclusion_closed_form",
    "solve_dirichlet_disk_in_disk", "solve_neumann_disk_in_disk", "solve_two_disks",
    "sweep",
]
