"""tubegeom: numerical certification of Sasaki bundle structures and tube deformations."""

__version__ = "0.1.0"

from . import errors
from .scalar import (
    ScalarExpr, const, coord, add, mul, div, neg, power, sin, cos, exp, log,
    sqrt, evaluate, differentiate, simplify, substitute, parse_expression,
    to_text,
)
from .chart import (
    ChartManifold, FramedPoint, GeodesicPath, christoffel, curvature,
    covariant_derivative, integrate_geodesic, orthonormal_frame,
    verify_fermi_chart, probe_points, rotation_acs, standard_block_acs,
    load_manifest, manifest_dict, save_manifest,
)
from .bundle import (
    BundleChart, LiftFrame, build_sasaki, connection_map, lift, lift_frame,
    build_bundle_acs, check_bracket_identities,
)
from .hermitian import (
    second_fundamental_tensor, h_tensor_components, h1_closed_form,
    h2_closed_form, bundle_h_direct, lee_form, gh_classify, GHClassReport,
    CLASS_LABELS, lift_pattern,
)
from .tube import (
    AdaptedTube, RegionTag, PiecewiseField, radial_decompose, radial_profile,
    deform_field, region_samples, deformed_christoffel, deformed_curvature,
    verify_totally_geodesic, verify_flat_inner, verify_parallel_J,
    KaehlerTube, build_kaehler_tube, build_hyper_stage,
)
from .reports import (
    SuiteConfig, RunReport, CheckRecord, run_suite, list_manifolds,
    resolve_manifold, export_table, render_figure, SUITE_IDS,
)
