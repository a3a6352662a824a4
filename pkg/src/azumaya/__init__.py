"""Numerical and exact tools for maps from Azumaya points and curves to ``R^n``.

The package is organized by layer:

* :mod:`azumaya.linalg` joint block decomposition of commuting matrices;
* :mod:`azumaya.jets` test functions and their Taylor jets;
* :mod:`azumaya.point` maps from a matrix point, evaluation and support;
* :mod:`azumaya.dga` exact differential calculus on ``M_r(C)``;
* :mod:`azumaya.curves`, :mod:`azumaya.branches`, :mod:`azumaya.connection`
  families over a one-dimensional base;
* :mod:`azumaya.forms` adapted-map conditions;
* :mod:`azumaya.io`, :mod:`azumaya.cli` documents and the command line.
"""

from .branches import BranchDiagram, analyze, branch_slopes, classify
from .connection import BranchConnection, pushforward_connection
from .curves import (
    Base,
    FamilySpec,
    MatrixCurveMap,
    builtin_family,
    characteristic_polynomials,
    evaluate_family,
    from_branched_cover,
)
from .dga import (
    DerivationAction,
    DGAElement,
    Derivation,
    FamilyDerivation,
    dga_d,
    dga_equal,
    dga_wedge,
    inner_derivation,
    pair,
    pushforward_derivation,
    split_derivation,
)
from .errors import AzumayaError, DomainError, InputError
from .exact import QMatrix
from .forms import (
    PolyForm,
    check_calibration_vanishing,
    check_J_holomorphic,
    check_lagrangian,
    check_relative_dim0,
    check_slag,
    g2_form,
    pullback_to_branches,
)
from .io import MapSpecDoc, emit_branch_csv, emit_svg, parse_spec, serialize
from .jets import FnSpec, Jet, extract_jet, jet_product
from .linalg import commutation_defect, joint_block_decompose, spectral_decompose
from .point import (
    C_INFINITY,
    AzumayaPointMap,
    evaluate,
    minimal_annihilator,
    pushforward_module,
    support,
    validate,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
