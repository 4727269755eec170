from .bessel import BesselTable, spherical_bessel_table
from .materials import (
    AIR,
    ALUMINIUM,
    WATER,
    ElasticSolid,
    FluidMedium,
    ShellTarget,
    material,
    parse_material,
)
from .scattering import (
    FormFunction,
    form_function_rigid,
    form_function_shell,
    solve_batched,
    truncation_order,
)

__all__ = [
    "AIR", "ALUMINIUM", "WATER", "BesselTable", "ElasticSolid", "FluidMedium",
    "FormFunction", "ShellTarget", "form_function_rigid", "form_function_shell",
    "material", "parse_material", "solve_batched", "spherical_bessel_table",
    "truncation_order",
]
