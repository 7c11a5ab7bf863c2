"""
scatter-density
Constructive approximation by scattered translates of binomial power kernels.
"""

__version__ = "0.1.0"

from .approx import (
    ApproximationCertificate,
    ApproximationPipeline,
    Target,
    TranslateCombination,
    approximate,
    certify,
    cheb_approx,
    eval_combination,
    monomial_to_basis,
    reproduce_basis_poly,
)
from .polybasis import ExpansionModel, KernelFamily, KernelSpec, Polynomial, classify_basis
from .sequences import DoublingSequence, ScatteredProvider, extract_doubling

__all__ = [
    'ApproximationCertificate', 'ApproximationPipeline', 'DoublingSequence',
    'ExpansionModel', 'KernelFamily', 'KernelSpec', 'Polynomial', 'ScatteredProvider',
    'Target', 'TranslateCombination', 'approximate', 'certify', 'cheb_approx',
    'classify_basis', 'eval_combination', 'extract_doubling', 'monomial_to_basis',
    'reproduce_basis_poly',
]
