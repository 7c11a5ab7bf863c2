"""Linear solves behind translate recovery.

The Vandermonde system has a closed-form Cramer solution that is evaluated in
exact rational arithmetic. The logarithmic alternant system has no closed form;
it is solved by LU in a private mpmath context and certified a posteriori by
its residual.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple, Union

from mpmath.ctx_mp import MPContext

from .errors import PrecisionError, SingularityError, ZeroFError
from .polybasis import (
    DEFAULT_PRECISION_BITS,
    ExpansionModel,
    as_rational,
    format_rational,
    make_context,
    rational_to_mpf,
)
from .sequences import DoublingSequence, node_gap_product

logger = logging.getLogger(__name__)

MAX_PRECISION_BITS = 4096

Nodes = Union[DoublingSequence, Sequence]


def _nodes(Y: Nodes) -> Tuple[Fraction, ...]:
    if isinstance(Y, DoublingSequence):
        return Y.nodes
    return tuple(as_rational(v) for v in Y)


def _to_mp(ctx: MPContext, value):
    if hasattr(value, "_mpf_"):
        return ctx.mpf(value)
    return rational_to_mpf(ctx, value)


# Alternant matrices

def alternant_matrix(rules: Sequence[Callable], nodes: Sequence, ctx: Optional[MPContext] = None):
    """Rows of rule(y) evaluated at common nodes.

    Without a context the rules receive exact rationals and the matrix is a
    nested list of Fractions; with one they receive mpf values.
    """
    if ctx is None:
        points = [as_rational(y) for y in nodes]
    else:
        points = [_to_mp(ctx, y) for y in nodes]
    return [[rule(y) for y in points] for rule in rules]


def vandermonde_rules(N: int) -> List[Callable]:
    """Row k of the Vandermonde system is y**(-k), k = 0..N-1"""
    return [lambda y, k=k: 1 / y ** k for k in range(N)]


def log_alternant_rows(N: int, offset: int = 1) -> List[Tuple[int, bool]]:
    """(power, has_log) per row: rational rows first, then the log rows"""
    L = offset
    rational = [(k, False) for k in range(L + 1, L + N)]
    logarithmic = [(k, True) for k in range(L, L + N)]
    return rational + logarithmic


def log_alternant_rules(ctx: MPContext, N: int, offset: int = 1) -> List[Callable]:
    def rule(power, has_log):
        if has_log:
            return lambda y: ctx.log(y) / y ** power
        return lambda y: 1 / y ** power

    return [rule(power, has_log) for power, has_log in log_alternant_rows(N, offset)]


def residual(matrix, solution: Sequence, rhs: Sequence, ctx: Optional[MPContext] = None):
    """Max-norm of matrix @ solution - rhs.

    Exact when everything is rational and no context is given; otherwise
    accumulated with fdot in the context's precision.
    """
    rows = [list(row) for row in matrix]
    if any(len(row) != len(solution) for row in rows) or len(rows) != len(rhs):
        raise ValueError("matrix, solution and rhs dimensions disagree")
    if ctx is None:
        worst = Fraction(0)
        for row, b in zip(rows, rhs):
            total = sum((as_rational(m) * as_rational(x) for m, x in zip(row, solution)), Fraction(0))
            worst = max(worst, abs(total - as_rational(b)))
        return worst
    values = [_to_mp(ctx, x) for x in solution]
    worst = ctx.mpf(0)
    for row, b in zip(rows, rhs):
        total = ctx.fdot([_to_mp(ctx, m) for m in row], values)
        worst = max(worst, abs(total - _to_mp(ctx, b)))
    return worst


# Vandermonde

@dataclass(frozen=True)
class VandermondeSolution:
    """Cramer solution c and translate coefficients a~ = c/F(y)."""

    Y: DoublingSequence
    N: int
    c: Tuple[Fraction, ...]
    a_tilde: Tuple
    residual: Fraction
    precision_bits: Optional[int] = None

    @property
    def exact(self) -> bool:
        return self.precision_bits is None

    def to_dict(self) -> dict:
        if self.exact:
            coefficients = [format_rational(a) for a in self.a_tilde]
        else:
            digits = max(15, int(self.precision_bits * math.log10(2)))
            ctx = make_context(self.precision_bits)
            coefficients = [ctx.nstr(a, digits) for a in self.a_tilde]
        return {
            "N": self.N,
            "nodes": [format_rational(y) for y in self.Y.nodes[: self.N]],
            "gap_products": [format_rational(p) for p in self.Y.prefix(self.N).gap_products],
            "c": [format_rational(v) for v in self.c],
            "a_tilde": coefficients,
            "exact": self.exact,
            "precision_bits": self.precision_bits,
            "residual": format_rational(self.residual),
        }


def vandermonde_coeffs(Y: Nodes, N: int) -> List[Fraction]:
    """c_i = y_i**(N-1) * prod_{j != i} (1 - y_i/y_j)**-1 over the first N nodes"""
    nodes = _nodes(Y)
    if not 1 <= N <= len(nodes):
        raise ValueError(f"N must lie in 1..{len(nodes)}, got {N}")
    nodes = nodes[:N]
    coefficients = []
    for i, y_i in enumerate(nodes):
        value = y_i ** (N - 1)
        for j, y_j in enumerate(nodes):
            if j != i:
                value /= 1 - y_i / y_j
        coefficients.append(value)
    return coefficients


def translate_coeffs(Y: Nodes, model: ExpansionModel, N: int,
                     precision_bits: int = DEFAULT_PRECISION_BITS) -> list:
    """a~_i = c_i / F(y_i); Fractions when F is rational on the nodes, mpf otherwise"""
    nodes = _nodes(Y)
    c = vandermonde_coeffs(nodes, N)
    exact = [model.F_exact(y) for y in nodes[:N]]
    if all(value is not None for value in exact):
        for y, value in zip(nodes, exact):
            if value == 0:
                raise ZeroFError(f"F vanishes at y = {y}; start the doubling sequence further out")
        return [ci / value for ci, value in zip(c, exact)]

    ctx = make_context(precision_bits)
    coefficients = []
    for y, ci in zip(nodes, c):
        F = model.F_mp(ctx, y)
        if F == 0:
            raise ZeroFError(f"F vanishes at y = {y}; start the doubling sequence further out")
        coefficients.append(rational_to_mpf(ctx, ci) / F)
    return coefficients


def solve_vandermonde(Y: DoublingSequence, model: ExpansionModel, N: int,
                      precision_bits: int = DEFAULT_PRECISION_BITS) -> VandermondeSolution:
    """Closed-form solve plus its exact verification V_N c = e_N"""
    c = vandermonde_coeffs(Y, N)
    rhs = [0] * (N - 1) + [1]
    matrix = alternant_matrix(vandermonde_rules(N), Y.nodes[:N])
    check = residual(matrix, c, rhs)
    if check != 0:
        raise PrecisionError(f"closed-form Vandermonde solution has residual {check}", residual=check)
    a_tilde = translate_coeffs(Y, model, N, precision_bits)
    exact = all(isinstance(a, Fraction) for a in a_tilde)
    return VandermondeSolution(
        Y=Y, N=N, c=tuple(c), a_tilde=tuple(a_tilde), residual=check,
        precision_bits=None if exact else precision_bits,
    )


# Logarithmic alternant

@dataclass(frozen=True)
class AlternantSolution:
    """High-precision solution of the logarithmic alternant system."""

    nodes: Tuple[Fraction, ...]
    N: int
    offset: int
    isolate: int
    a_tilde: Tuple
    residual: object
    precision_bits: int
    growth: Tuple[float, ...]

    @property
    def growth_constant(self) -> float:
        """Largest |a~_i| / (y_i**(L+N-1) (ln y_i)**(N-1)) over the nodes"""
        return max(self.growth)

    @property
    def gap_products(self) -> Tuple[Fraction, ...]:
        return tuple(node_gap_product(self.nodes, i) for i in range(len(self.nodes)))

    def to_dict(self) -> dict:
        ctx = make_context(self.precision_bits)
        digits = max(15, int(self.precision_bits * math.log10(2)))
        return {
            "N": self.N,
            "L": self.offset,
            "isolate": self.isolate,
            "nodes": [format_rational(y) for y in self.nodes],
            "gap_products": [format_rational(p) for p in self.gap_products],
            "a_tilde": [ctx.nstr(a, digits) for a in self.a_tilde],
            "residual": ctx.nstr(self.residual, 17),
            "precision_bits": self.precision_bits,
            "growth": list(self.growth),
            "growth_constant": self.growth_constant,
        }


def log_alternant_solve(Y: Nodes, N: int, precision_bits: int = DEFAULT_PRECISION_BITS,
                        isolate: Optional[int] = None, offset: int = 1) -> AlternantSolution:
    """Solve the (2N-1)-square logarithmic alternant system.

    Rows are y**-k for k = L+1..L+N-1 followed by y**-k ln y for k = L..L+N-1,
    columns run over the first 2N-1 nodes, and the right-hand side selects the
    log row of power ``isolate`` (default L+N-1). Columns are scaled by
    y**(L+N-1) before factorisation; the residual is taken on the unscaled system.
    """
    L = offset
    if N < 1:
        raise ValueError(f"N must be at least 1, got {N}")
    if L < 1:
        raise ValueError(f"offset must be at least 1, got {L}")
    isolate = L + N - 1 if isolate is None else isolate
    if not L <= isolate <= L + N - 1:
        raise ValueError(f"isolate must lie in {L}..{L + N - 1}, got {isolate}")
    size = 2 * N - 1
    nodes = _nodes(Y)
    if len(nodes) < size:
        raise ValueError(f"log alternant of block size {N} needs {size} nodes, got {len(nodes)}")
    nodes = nodes[:size]
    if any(y <= 0 for y in nodes):
        raise ValueError("log alternant needs positive nodes")
    if len(set(nodes)) < size:
        raise SingularityError(
            f"log alternant is singular: repeated nodes in {[str(y) for y in nodes]}",
            nodes=nodes,
        )

    ctx = make_context(precision_bits)
    rows = log_alternant_rows(N, L)
    scale = L + N - 1
    scaled = ctx.matrix(size, size)
    logs = [ctx.log(rational_to_mpf(ctx, y)) for y in nodes]
    for j, y in enumerate(nodes):
        for i, (power, has_log) in enumerate(rows):
            entry = rational_to_mpf(ctx, y ** (scale - power))
            scaled[i, j] = entry * logs[j] if has_log else entry
    rhs = [ctx.mpf(0)] * size
    rhs[(N - 1) + (isolate - L)] = ctx.mpf(1)

    try:
        z = ctx.lu_solve(scaled, rhs)
    except ZeroDivisionError:
        raise SingularityError(
            f"log alternant is singular at {[str(y) for y in nodes]}", nodes=nodes
        )
    a_tilde = tuple(z[j] * rational_to_mpf(ctx, y ** scale) for j, y in enumerate(nodes))

    matrix = alternant_matrix(log_alternant_rules(ctx, N, L), nodes, ctx)
    error = residual(matrix, a_tilde, rhs, ctx)
    threshold = ctx.ldexp(ctx.mpf(1), -(precision_bits // 2))
    if not error <= threshold:
        raise PrecisionError(
            f"log alternant residual {ctx.nstr(error, 5)} exceeds 2^-{precision_bits // 2}",
            residual=error, precision_bits=precision_bits,
        )

    growth = tuple(
        float(abs(a) / (rational_to_mpf(ctx, y ** scale) * log_y ** (N - 1)))
        for a, y, log_y in zip(a_tilde, nodes, logs)
    )
    logger.debug("log alternant N=%d at %d bits: residual %s", N, precision_bits, ctx.nstr(error, 5))
    return AlternantSolution(
        nodes=nodes, N=N, offset=L, isolate=isolate, a_tilde=a_tilde,
        residual=error, precision_bits=precision_bits, growth=growth,
    )


def solve_with_retry(solve: Callable, precision_bits: int = DEFAULT_PRECISION_BITS,
                     max_bits: int = MAX_PRECISION_BITS, **kwargs):
    """Call solve(precision_bits=...), doubling the precision on PrecisionError"""
    bits = precision_bits
    while True:
        try:
            return solve(precision_bits=bits, **kwargs)
        except PrecisionError as error:
            if bits * 2 > max_bits:
                error.precision_bits = bits
                raise
            logger.info("residual above threshold at %d bits, retrying at %d bits", bits, bits * 2)
            bits *= 2
