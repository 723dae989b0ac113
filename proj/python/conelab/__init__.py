"""Weighted variational geometry of Euclidean solid cones.

Thin wrapper over the C++ core: cones, homogeneous densities, discrete
hypersurfaces, weighted measures, and the stability machinery. See the
project README for the scenario config schema used by run_config.
"""

from ._core import (
    ConelabError,
    CurvatureReport,
    CurvatureWitness,
    CutoffDecay,
    DensityProfile,
    HomogeneousDensity,
    Hypersurface,
    MinkowskiReport,
    RescaledParallelReport,
    SolidCone,
    StabilityReport,
    UmbilicityReport,
    VariationDiagnostics,
    __version__,
    canonical_config,
    cutoff_energy_decay,
    import_obj,
    import_polyline_csv,
    laplace_spectrum,
    make_cap,
    make_ellipsoid,
    make_radial_graph,
    make_sphere_through_origin,
    mesh_cap,
    mesh_ellipsoid,
    minkowski,
    oriented_volume,
    rescaled_parallel,
    run_config,
    run_variation,
    spectrum,
    stability_report,
    umbilicity_gap,
    weighted_area,
)

__all__ = [
    "ConelabError",
    "CurvatureReport",
    "CurvatureWitness",
    "CutoffDecay",
    "DensityProfile",
    "HomogeneousDensity",
    "Hypersurface",
    "MinkowskiReport",
    "RescaledParallelReport",
    "SolidCone",
    "StabilityReport",
    "UmbilicityReport",
    "VariationDiagnostics",
    "__version__",
    "canonical_config",
    "cutoff_energy_decay",
    "import_obj",
    "import_polyline_csv",
    "laplace_spectrum",
    "make_cap",
    "make_ellipsoid",
    "make_radial_graph",
    "make_sphere_through_origin",
    "mesh_cap",
    "mesh_ellipsoid",
    "minkowski",
    "oriented_volume",
    "rescaled_parallel",
    "run_config",
    "run_variation",
    "spectrum",
    "stability_report",
    "umbilicity_gap",
    "weighted_area",
]
