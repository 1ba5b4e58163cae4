"""Ensemble Navier-Stokes solver with shared-matrix timestepping,
penalty-projection splitting, and sparse-grid stochastic collocation."""

from .mesh import Rect, TriMesh, barycentric_refine, build_structured_mesh, \
    classify_boundary
from .fespace import FESpace, QuadratureRule, quadrature_rule
from .schemes import CoupledEnsembleStepper, EnsembleState, \
    ProjectionEnsembleStepper, SchemeConfig, ViscosityEnsemble, \
    build_spaces, ensemble_energy, make_stepper, stability_diagnostics
from .stochastic import KLViscosity, SparseGrid, \
    affine_perturbation_ensemble, clenshaw_curtis_sparse_grid, expect_qoi, \
    kl_eigenvalue, kl_viscosity_eval
from .problems import cavity_problem, manufactured_problem, \
    step_channel_problem, tgv_problem

__version__ = "0.1.0"

__all__ = [
    "Rect", "TriMesh", "barycentric_refine", "build_structured_mesh",
    "classify_boundary", "FESpace", "QuadratureRule", "quadrature_rule",
    "CoupledEnsembleStepper", "EnsembleState", "ProjectionEnsembleStepper",
    "SchemeConfig", "ViscosityEnsemble", "build_spaces", "ensemble_energy",
    "make_stepper", "stability_diagnostics", "KLViscosity", "SparseGrid",
    "affine_perturbation_ensemble", "clenshaw_curtis_sparse_grid",
    "expect_qoi", "kl_eigenvalue", "kl_viscosity_eval", "cavity_problem",
    "manufactured_problem", "step_channel_problem", "tgv_problem",
]
