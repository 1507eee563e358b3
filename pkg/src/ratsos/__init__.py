"""Certified lower bounds for sums of rational functions over compact
semialgebraic sets, computed through block moment relaxations with
sign-symmetry and per-clique sparsity reductions."""

__version__ = "0.1.0"

from .corrsparse import CliqueStructure, build_cliques, ensure_ball_constraints
from .families import FAMILIES, rayleigh_to_real
from .oracle import GridOracleResult, grid_oracle
from .poly import Monomial, MonomialBasis, Polynomial, basis, moment_index
from .problem import Constraint, SrfoProblem, parse, serialize
from .relax import (
    METHODS,
    RelaxationSdp,
    RelaxationSpec,
    build,
    build_cs,
    build_cs_signsym,
    build_dense,
    build_epigraph,
    build_signsym,
    extract_bound,
    flatness_certificate,
    min_order,
    solve_relaxation,
)
from .sdp import (
    SdpStandardForm,
    SolveReport,
    export_sdpa,
    import_sdpa_solution,
    read_sdpa,
    solve_internal,
    to_standard_form,
)
from .signsym import (
    BlockPartition,
    SignSymmetryGroup,
    block_partition,
    in_closure,
    sign_symmetries,
    support_sets,
)

__all__ = [
    "BlockPartition",
    "CliqueStructure",
    "Constraint",
    "FAMILIES",
    "GridOracleResult",
    "METHODS",
    "Monomial",
    "MonomialBasis",
    "Polynomial",
    "RelaxationSdp",
    "RelaxationSpec",
    "SdpStandardForm",
    "SignSymmetryGroup",
    "SolveReport",
    "SrfoProblem",
    "basis",
    "build",
    "build_cliques",
    "build_cs",
    "build_cs_signsym",
    "build_dense",
    "build_epigraph",
    "build_signsym",
    "ensure_ball_constraints",
    "export_sdpa",
    "extract_bound",
    "flatness_certificate",
    "grid_oracle",
    "import_sdpa_solution",
    "in_closure",
    "min_order",
    "moment_index",
    "parse",
    "rayleigh_to_real",
    "read_sdpa",
    "serialize",
    "sign_symmetries",
    "solve_internal",
    "solve_relaxation",
    "support_sets",
    "to_standard_form",
]
