"""Constructive-interference block-level precoding for the MU-MISO downlink.

One precoding matrix per block of M-PSK symbol slots, chosen to push every
noiseless received signal deeper into its detection region: the max-min
margin problem reduces to a quadratic program over the probability simplex,
solved here by two cached-factorization ADMM schemes and an independent
projected-gradient oracle, with closed-form precoder recovery and a seeded
Monte-Carlo SER harness against ZF / RZF / per-slot CI baselines.
"""

__version__ = "0.1.0"

from .baselines import ci_slp_precoder, rzf_precoder, zf_precoder
from .ci_geometry import (
    BoundaryBasis,
    CiGeometry,
    SingularBasisError,
    boundary_basis,
    build_geometry,
    lift_precoder,
    unlift_precoder,
)
from .model import (
    ChannelBlock,
    Constellation,
    NoiseModel,
    SymbolBlock,
    detect,
    receive,
    sample_channel,
    sample_generic_symbols,
    sample_noise,
    sample_symbols,
)
from .precoder import PrecoderMatrix, evaluate_alpha, recover_precoder
from .qp_builder import (
    RANK_RTOL,
    FactoredQp,
    GramData,
    QpProblem,
    RankReport,
    build_factored,
    build_gram,
    build_qp,
    null_space_products,
    numerical_rank,
    rank_report,
    verify_pinv_feasibility,
)
from .sim import (
    CSV_HEADER,
    ExperimentConfig,
    SchemeSpec,
    SerResult,
    SweepPoint,
    build_instance,
    derive_streams,
    parse_scheme,
    run_blocklength_sweep,
    run_budget_sweep,
    run_ser_sweep,
    run_timing_bench,
    write_csv,
    write_sidecar,
)
from .solvers import (
    SCHEME1,
    SCHEME2,
    AdmmConfig,
    OracleConvergenceError,
    SolveResult,
    SolveStats,
    Trace,
    kkt_residual,
    monotone_rho,
    oracle_solve,
    project_simplex,
    solve,
)
from .verify_suite import VerificationCase, VerificationReport, run_all

__all__ = [
    "__version__",
    # signal model
    "Constellation", "ChannelBlock", "SymbolBlock", "NoiseModel",
    "sample_channel", "sample_symbols", "sample_generic_symbols",
    "sample_noise", "receive", "detect",
    # interference geometry
    "BoundaryBasis", "CiGeometry", "SingularBasisError",
    "boundary_basis", "build_geometry", "lift_precoder", "unlift_precoder",
    # quadratic program assembly
    "RANK_RTOL", "GramData", "QpProblem", "FactoredQp", "RankReport",
    "build_gram", "build_qp", "build_factored", "rank_report",
    "numerical_rank", "null_space_products", "verify_pinv_feasibility",
    # solvers
    "SCHEME1", "SCHEME2", "AdmmConfig", "Trace", "SolveStats", "SolveResult",
    "OracleConvergenceError", "solve", "oracle_solve", "kkt_residual",
    "project_simplex", "monotone_rho",
    # precoder recovery and baselines
    "PrecoderMatrix", "recover_precoder", "evaluate_alpha",
    "zf_precoder", "rzf_precoder", "ci_slp_precoder",
    # experiments
    "CSV_HEADER", "ExperimentConfig", "SchemeSpec", "SweepPoint", "SerResult",
    "parse_scheme", "derive_streams", "build_instance",
    "run_ser_sweep", "run_blocklength_sweep", "run_budget_sweep",
    "run_timing_bench", "write_csv", "write_sidecar",
    # verification suite
    "VerificationCase", "VerificationReport", "run_all",
]
