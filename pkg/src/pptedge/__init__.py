"""Construction and certification of corank-one PPT entangled edge states in n (x) n."""

__version__ = "0.1.0"

from .linalg import KernelReport, eigh, kernel_report, partial_transpose, principal_submatrix  # noqa: E402
from .blocks import build_P, build_P2, build_Q, kernel_vector_P  # noqa: E402
from .construction import (BlockSpec, GenericityError, ParamSet, StateAssembly,  # noqa: E402
                           assemble_alternative_4x4, assemble_rho, assemble_rho_gamma,
                           extract_D, load_params, save_params)
from .bilinear import (CaseTag, SolutionCase, build_system, classify_solution,  # noqa: E402
                       eval_form, generate_solution, lemma_basic_property, system_residuals)
from .certifier import (Certificate, HalfPlane, Tolerances, Verdict, certify,  # noqa: E402
                        default_params, find_r_hat, half_plane_test, kernel_vector_w,
                        krawtchouk_check, perturbed_params, star_condition_check)

__all__ = [
    "KernelReport", "eigh", "kernel_report", "partial_transpose", "principal_submatrix",
    "build_P", "build_P2", "build_Q", "kernel_vector_P",
    "BlockSpec", "GenericityError", "ParamSet", "StateAssembly", "assemble_alternative_4x4",
    "assemble_rho", "assemble_rho_gamma", "extract_D", "load_params", "save_params",
    "CaseTag", "SolutionCase", "build_system", "classify_solution", "eval_form",
    "generate_solution", "lemma_basic_property", "system_residuals",
    "Certificate", "HalfPlane", "Tolerances", "Verdict", "certify", "default_params",
    "find_r_hat", "half_plane_test", "kernel_vector_w", "krawtchouk_check",
    "perturbed_params", "star_condition_check",
]
