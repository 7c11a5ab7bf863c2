"""Density construction: polynomial pre-approximation, basis recovery, certification.

A target f is first replaced by a Chebyshev interpolant p with ||f - p|| < eps/2.
p is rewritten in the expansion basis (A_k : k >= K) of the kernel, every A_k is
reproduced by a combination of scattered translates, and the assembled
combination is certified on an equispaced grid.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Chebyshev
from numpy.polynomial import Polynomial as PowerSeries

from .errors import BudgetError, DegeneracyError, DegreeCapError, FloorTooSmallError, ScatterError
from .polybasis import (
    DEFAULT_PRECISION_BITS,
    ExpansionModel,
    KernelSpec,
    Polynomial,
    as_rational,
    check_basis,
    classify_basis,
    format_rational,
    kernel_value,
    make_context,
    rational_to_mpf,
)
from .sequences import DoublingSequence, ScatteredProvider, Sign, extract_doubling
from .solvers import log_alternant_solve, solve_with_retry, translate_coeffs

logger = logging.getLogger(__name__)

DEFAULT_GRID_SIZE = 1001
DEFAULT_MAX_DEGREE = 64
DEFAULT_P_VALUES = (1, 2)
MAX_FLOOR = 2 ** 64
GUARD_BITS = 32


# Targets

def _runge(x):
    return 1.0 / (1.0 + 25.0 * np.asarray(x, dtype=float) ** 2)


BUILTIN_TARGETS: Dict[str, Callable] = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "abs": np.abs,
    "runge": _runge,
}


@dataclass(frozen=True)
class Target:
    """A function to approximate, evaluated in double precision on arrays."""

    name: str
    function: Callable
    polynomial: Optional[Polynomial] = None

    @classmethod
    def builtin(cls, name: str) -> "Target":
        if name not in BUILTIN_TARGETS:
            raise ValueError(f"unknown builtin target {name!r}; choose from {sorted(BUILTIN_TARGETS)}")
        return cls(name, BUILTIN_TARGETS[name])

    @classmethod
    def from_polynomial(cls, coefficients: Sequence, name: str = "polynomial") -> "Target":
        poly = coefficients if isinstance(coefficients, Polynomial) else Polynomial(coefficients)
        powers = PowerSeries([float(c) for c in poly.coeffs] or [0.0])
        return cls(name, lambda x: powers(np.asarray(x, dtype=float)), poly)

    @classmethod
    def from_samples(cls, xs: Sequence, ys: Sequence, name: str = "samples") -> "Target":
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.shape != ys.shape or xs.size < 2:
            raise ValueError("sampled target needs matching x and y arrays of length >= 2")
        order = np.argsort(xs)
        xs, ys = xs[order], ys[order]
        return cls(name, lambda x: np.interp(np.asarray(x, dtype=float), xs, ys))

    def __call__(self, x):
        return np.asarray(self.function(np.asarray(x, dtype=float)), dtype=float)


def _as_target(f) -> Target:
    if isinstance(f, Target):
        return f
    if isinstance(f, Polynomial):
        return Target.from_polynomial(f)
    if isinstance(f, str):
        return Target.builtin(f)
    return Target(getattr(f, "__name__", "function"), f)


def _grid(interval, grid_size: int) -> np.ndarray:
    a, b = (float(v) for v in interval)
    if grid_size < 2:
        raise ValueError(f"grid size must be at least 2, got {grid_size}")
    if not a < b:
        raise ValueError(f"interval must satisfy a < b, got [{a}, {b}]")
    return np.linspace(a, b, grid_size)


# Polynomial pre-approximation

def cheb_approx(f, interval, tol: float, max_degree: int = DEFAULT_MAX_DEGREE,
                grid_size: int = DEFAULT_GRID_SIZE) -> Tuple[Polynomial, float]:
    """Lowest-degree Chebyshev interpolant whose grid error is below tol"""
    target = _as_target(f)
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    if target.polynomial is not None:
        return target.polynomial, 0.0

    a, b = (float(v) for v in interval)
    xs = _grid(interval, grid_size)
    values = target(xs)
    best = math.inf
    for degree in range(1, max_degree + 1):
        interpolant = Chebyshev.interpolate(target, degree, domain=[a, b])
        powers = interpolant.convert(kind=PowerSeries)
        error = float(np.max(np.abs(powers(xs) - values)))
        best = min(best, error)
        if error < tol:
            logger.debug("chebyshev degree %d reaches %.3g < %.3g", degree, error, tol)
            return Polynomial([Fraction(float(c)) for c in powers.coef]), error
    raise DegreeCapError(
        f"chebyshev interpolation reached degree {max_degree} with error {best:.3g} >= {tol:.3g}",
        best_error=best, degree=max_degree,
    )


def monomial_to_basis(p: Polynomial, model: ExpansionModel) -> Dict[int, Fraction]:
    """Exact d_k with p = sum_k d_k A_k, k = K..K+deg p, by back-substitution"""
    if p.is_zero():
        return {}
    check_basis(model, p.degree + 1)
    remainder = p
    coefficients = {}
    for m in range(p.degree, -1, -1):
        term = model.coefficient(model.K + m)
        d = remainder.coefficient(m) / term.leading
        if d != 0:
            coefficients[model.K + m] = d
            remainder = remainder - term * d
    if not remainder.is_zero():
        raise DegeneracyError(f"back-substitution left a remainder {remainder}")
    return dict(sorted(coefficients.items()))


# Translate combinations

@dataclass(frozen=True)
class RecoveryRecord:
    """How well one basis polynomial was reproduced."""

    index: int
    n_terms: int
    y1: Fraction
    grid_error: float
    empirical_constant: float
    residual: float
    precision_bits: int
    budget: Optional[float] = None

    @property
    def met(self) -> bool:
        return self.budget is None or self.grid_error <= self.budget

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "n_terms": self.n_terms,
            "y1": format_rational(self.y1),
            "grid_error": self.grid_error,
            "empirical_constant": self.empirical_constant,
            "residual": self.residual,
            "precision_bits": self.precision_bits,
            "budget": self.budget,
        }


@dataclass(frozen=True)
class TranslateCombination:
    """s(x) = sum_j a_j phi(x - x_j) with exact coefficients and nodes."""

    kernel: KernelSpec
    terms: Tuple[Tuple[Fraction, Fraction], ...] = ()
    precision_bits: int = DEFAULT_PRECISION_BITS
    recovery: Tuple[RecoveryRecord, ...] = ()

    def __post_init__(self):
        nodes = [node for _, node in self.terms]
        if len(set(nodes)) != len(nodes):
            raise ValueError("translate combination nodes must be pairwise distinct")

    def __len__(self) -> int:
        return len(self.terms)

    @property
    def nodes(self) -> Tuple[Fraction, ...]:
        return tuple(node for _, node in self.terms)

    @classmethod
    def combine(cls, kernel: KernelSpec,
                weighted: Iterable[Tuple[Fraction, "TranslateCombination"]]) -> "TranslateCombination":
        """sum_i w_i s_i, merging coefficients of shared nodes"""
        merged: Dict[Fraction, Fraction] = {}
        bits = DEFAULT_PRECISION_BITS
        records: List[RecoveryRecord] = []
        for weight, combination in weighted:
            bits = max(bits, combination.precision_bits)
            records.extend(combination.recovery)
            for coefficient, node in combination.terms:
                merged[node] = merged.get(node, Fraction(0)) + as_rational(weight) * coefficient
        terms = tuple((a, y) for y, a in sorted(merged.items(), key=lambda item: abs(item[0])) if a != 0)
        return cls(kernel, terms, bits, tuple(records))

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel.to_dict(),
            "terms": [
                {"coefficient": format_rational(a), "node": format_rational(y)} for a, y in self.terms
            ],
            "precision_bits": self.precision_bits,
            "recovery": [record.to_dict() for record in self.recovery],
        }


class KernelTable:
    """phi(x - y) on a fixed grid, cached per node."""

    def __init__(self, kernel: KernelSpec, xs: Sequence, precision_bits: int):
        self.kernel = kernel
        self.precision_bits = precision_bits
        self.ctx = make_context(precision_bits)
        self.points = [as_rational(float(x)) for x in xs]
        self._columns: Dict[Fraction, list] = {}

    def column(self, y) -> list:
        y = as_rational(y)
        if y not in self._columns:
            self._columns[y] = [
                kernel_value(self.kernel, rational_to_mpf(self.ctx, x - y), self.ctx) for x in self.points
            ]
        return self._columns[y]

    def evaluate(self, combination: TranslateCombination) -> list:
        values = [self.ctx.mpf(0)] * len(self.points)
        for coefficient, node in combination.terms:
            a = rational_to_mpf(self.ctx, coefficient)
            values = [v + a * phi for v, phi in zip(values, self.column(node))]
        return values


def eval_combination(s: TranslateCombination, x, precision_bits: Optional[int] = None):
    """sum_j a_j phi(x - x_j) as an mpf in the combination's working precision"""
    ctx = make_context(precision_bits or s.precision_bits)
    x = as_rational(x)
    total = ctx.mpf(0)
    for coefficient, node in s.terms:
        t = rational_to_mpf(ctx, x - node)
        total += rational_to_mpf(ctx, coefficient) * kernel_value(s.kernel, t, ctx)
    return total


def eval_combination_grid(s: TranslateCombination, xs: Sequence,
                          table: Optional[KernelTable] = None) -> np.ndarray:
    """Closed-form evaluation of s on a grid, rounded to doubles"""
    if table is None or table.precision_bits < s.precision_bits or table.kernel != s.kernel:
        table = KernelTable(s.kernel, xs, s.precision_bits)
    return np.array([float(v) for v in table.evaluate(s)], dtype=float)


def _working_bits(precision_bits: int, nodes: Sequence[Fraction], power: int) -> int:
    largest = max(abs(y) for y in nodes)
    return precision_bits + power * max(1, math.ceil(math.log2(largest))) + GUARD_BITS


def nodes_needed(model: ExpansionModel, m: int) -> int:
    """Translates used to reproduce A_m"""
    if model.F_has_log:
        return 2 * (m - model.K + 1) - 1
    return m + 1


def reproduce_basis_poly(model: ExpansionModel, Y: DoublingSequence, m: int,
                         n_terms: Optional[int] = None, budget: Optional[float] = None,
                         floor=None, interval=(-1, 1), grid_size: int = DEFAULT_GRID_SIZE,
                         precision_bits: int = DEFAULT_PRECISION_BITS,
                         table: Optional[KernelTable] = None) -> TranslateCombination:
    """Combination of translates at the leading nodes of Y that reproduces A_m.

    Rational families solve the Vandermonde system over m+1 nodes for any m >= 0;
    logarithmic ones need m >= L and solve the alternant system of block size
    m-L+1 over 2(m-L)+1 nodes.
    The grid error against A_m is recorded; FloorTooSmallError is raised when it
    exceeds the budget.
    """
    if model.F_has_log and m < model.K:
        raise ValueError(f"basis index {m} lies below the log basis offset K = {model.K}")
    needed = nodes_needed(model, m)
    if n_terms is not None and n_terms != needed:
        raise ValueError(f"reproducing A_{m} takes exactly {needed} translates, got {n_terms}")
    if len(Y) < needed:
        raise ValueError(f"reproducing A_{m} needs {needed} nodes, Y has {len(Y)}")
    if not model.accepts(Y.sign):
        raise ValueError(f"{model.spec.family.value} needs a {model.sign_requirement.value} doubling sequence")
    if floor is not None and abs(Y.head) <= as_rational(floor):
        raise ValueError(f"|y1| = {abs(Y.head)} does not exceed the floor {floor}")

    Y = Y.prefix(needed)
    if model.F_has_log:
        N = m - model.K + 1
        bits = _working_bits(precision_bits, Y.nodes, model.K + N)
        solution = solve_with_retry(
            log_alternant_solve, bits, Y=Y, N=N, isolate=m, offset=model.K
        )
        bits = solution.precision_bits
        coefficients = [as_rational(a) for a in solution.a_tilde]
        solve_residual = float(solution.residual)
    else:
        bits = _working_bits(precision_bits, Y.nodes, needed)
        coefficients = [as_rational(a) for a in translate_coeffs(Y, model, needed, bits)]
        solve_residual = 0.0

    combination = TranslateCombination(
        model.spec, tuple(zip(coefficients, Y.nodes)), bits
    )

    xs = _grid(interval, grid_size)
    if table is None or table.precision_bits < bits or table.kernel != model.spec:
        table = KernelTable(model.spec, xs, bits)
    ctx = table.ctx
    target = [rational_to_mpf(ctx, c) for c in reversed(model.coefficient(m).coeffs)]
    values = table.evaluate(combination)
    worst = ctx.mpf(0)
    for value, x in zip(values, table.points):
        x = rational_to_mpf(ctx, x)
        reference = ctx.mpf(0)
        for c in target:
            reference = reference * x + c
        worst = max(worst, abs(value - reference))
    grid_error = float(worst)
    y1 = abs(Y.head)
    scale = math.log(float(y1)) if model.F_has_log else float(y1)
    record = RecoveryRecord(
        index=m, n_terms=needed, y1=Y.head, grid_error=grid_error,
        empirical_constant=grid_error * scale, residual=solve_residual,
        precision_bits=bits, budget=budget,
    )
    logger.debug("A_%d from %d translates beyond %s: grid error %.3g", m, needed, y1, grid_error)
    result = TranslateCombination(model.spec, combination.terms, bits, (record,))
    if not record.met:
        raise FloorTooSmallError(
            f"A_{m} reproduced to {grid_error:.3g} at y1 = {Y.head}, above the budget {budget:.3g}",
            best_error=grid_error, combination=result,
        )
    return result


# Certification

@dataclass(frozen=True)
class ApproximationCertificate:
    """Measured errors of a translate combination on an equispaced grid."""

    interval: Tuple[float, float]
    grid_size: int
    sup_error: float
    lp_errors: Dict[float, float]
    epsilon: Optional[float] = None
    y1_used: Optional[Fraction] = None
    precision_bits: Optional[int] = None
    residuals: Tuple[float, ...] = ()
    poly_degree: Optional[int] = None
    poly_error: Optional[float] = None
    n_terms: int = 0
    iterations: int = 0
    kernel: Optional[dict] = None
    provider: Optional[dict] = None
    target: Optional[str] = None
    samples: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    @property
    def success(self) -> bool:
        return self.epsilon is not None and self.sup_error < self.epsilon

    def with_context(self, **updates) -> "ApproximationCertificate":
        values = {name: getattr(self, name) for name in self.__dataclass_fields__}
        values.update(updates)
        return ApproximationCertificate(**values)

    def to_dict(self) -> dict:
        return {
            "interval": list(self.interval),
            "grid_size": self.grid_size,
            "sup_error": self.sup_error,
            "lp_errors": {format(p, "g"): value for p, value in sorted(self.lp_errors.items())},
            "epsilon": self.epsilon,
            "success": self.success,
            "y1_used": None if self.y1_used is None else format_rational(self.y1_used),
            "precision_bits": self.precision_bits,
            "residuals": list(self.residuals),
            "poly_degree": self.poly_degree,
            "poly_error": self.poly_error,
            "n_terms": self.n_terms,
            "iterations": self.iterations,
            "kernel": self.kernel,
            "provider": self.provider,
            "target": self.target,
        }


def lp_error(errors: np.ndarray, xs: np.ndarray, p: float) -> float:
    """Composite trapezoidal L^p norm of sampled |f - s|"""
    values = np.abs(errors) ** p
    h = (xs[-1] - xs[0]) / (len(xs) - 1)
    integral = h * (np.sum(values) - 0.5 * (values[0] + values[-1]))
    return float(integral ** (1.0 / p))


def certify(s: TranslateCombination, f, interval, grid_size: int = DEFAULT_GRID_SIZE,
            p_values: Sequence[float] = DEFAULT_P_VALUES, epsilon: Optional[float] = None,
            table: Optional[KernelTable] = None) -> ApproximationCertificate:
    """Sup and L^p errors of s against f on an equispaced grid"""
    target = _as_target(f)
    xs = _grid(interval, grid_size)
    a, b = float(xs[0]), float(xs[-1])
    fx = target(xs)
    sx = eval_combination_grid(s, xs, table) if len(s) else np.zeros_like(xs)
    errors = np.abs(fx - sx)
    sup_error = float(np.max(errors))

    lp_errors = {}
    for p in p_values:
        if p < 1:
            raise ValueError(f"L^p errors need p >= 1, got {p}")
        # trapezoid weights sum to b - a, so this only absorbs rounding
        bound = sup_error * (b - a) ** (1.0 / p)
        lp_errors[float(p)] = min(lp_error(errors, xs, p), bound)

    return ApproximationCertificate(
        interval=(a, b),
        grid_size=grid_size,
        sup_error=sup_error,
        lp_errors=lp_errors,
        epsilon=epsilon,
        precision_bits=s.precision_bits,
        residuals=tuple(record.residual for record in s.recovery),
        n_terms=len(s),
        kernel=s.kernel.to_dict(),
        target=target.name,
        samples=np.column_stack([xs, fx, sx, errors]),
    )


# Pipeline

class ApproximationPipeline:
    """Runs the density construction for one kernel and provider."""

    def __init__(self, kernel: KernelSpec, provider: ScatteredProvider, epsilon: float,
                 interval=(-1, 1), grid_size: int = DEFAULT_GRID_SIZE,
                 precision_bits: int = DEFAULT_PRECISION_BITS,
                 p_values: Sequence[float] = DEFAULT_P_VALUES,
                 max_degree: int = DEFAULT_MAX_DEGREE, max_floor=MAX_FLOOR):
        if not epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        self.kernel = kernel
        self.provider = provider
        self.epsilon = float(epsilon)
        self.interval = tuple(as_rational(v) for v in interval)
        self.grid_size = grid_size
        self.precision_bits = precision_bits
        self.p_values = tuple(p_values)
        self.max_degree = max_degree
        self.max_floor = as_rational(max_floor)
        self.model: Optional[ExpansionModel] = None
        self.stage = None
        self.status = "idle"
        self.iterations = 0
        self.floor = None
        self.best_error = None
        self.error_count = 0
        self.last_error = None
        self._observers = []

    def add_observer(self, observer):
        """Add an observer to be notified of pipeline state changes"""
        if observer not in self._observers:
            self._observers.append(observer)

    def remove_observer(self, observer):
        """Remove an observer from the notification list"""
        if observer in self._observers:
            self._observers.remove(observer)

    def notify_observers(self):
        for observer in self._observers:
            observer.on_pipeline_state_changed(self)

    def _enter(self, stage: str, status: str = "running"):
        self.stage = stage
        self.status = status
        self.notify_observers()

    def initial_floor(self) -> Fraction:
        a, b = self.interval
        return max(Fraction(8), 4 * max(abs(a), abs(b)), 4 * self.kernel.c)

    def run(self, f) -> Tuple[TranslateCombination, ApproximationCertificate]:
        try:
            return self._run(_as_target(f))
        except ScatterError as error:
            if error.stage is None:
                error.stage = self.stage
            self.error_count += 1
            self.last_error = str(error)
            self.status = "failed"
            self.notify_observers()
            raise

    def _run(self, target: Target):
        self._enter("classify")
        self.model = model = classify_basis(self.kernel)

        self._enter("polynomial")
        p, poly_error = cheb_approx(
            target, self.interval, self.epsilon / 2, self.max_degree, self.grid_size
        )

        self._enter("basis")
        d = monomial_to_basis(p, model)
        if not d:
            empty = TranslateCombination(self.kernel, (), self.precision_bits)
            certificate = certify(empty, target, self.interval, self.grid_size, self.p_values, self.epsilon)
            return empty, self._finish(certificate, p, poly_error)

        sign = Sign(model.preferred_sign)
        indices = sorted(d)
        count = max(nodes_needed(model, k) for k in indices)
        xs = _grid(self.interval, self.grid_size)
        self.floor = self.initial_floor()
        self._enter("recovery")
        while self.floor <= self.max_floor:
            self.iterations += 1
            Y = extract_doubling(self.provider, sign, self.floor, count)
            power = model.K + count if model.F_has_log else count
            table = KernelTable(self.kernel, xs, _working_bits(self.precision_bits, Y.nodes, power))

            parts = []
            missed = []
            for k in indices:
                budget = self.epsilon / (2 * len(indices) * abs(float(d[k])))
                try:
                    part = reproduce_basis_poly(
                        model, Y, k, budget=budget, interval=self.interval,
                        grid_size=self.grid_size, precision_bits=self.precision_bits, table=table,
                    )
                except FloorTooSmallError as error:
                    logger.debug("A_%d misses its budget %.3g at y1 = %s", k, budget, Y.head)
                    missed.append(k)
                    part = error.combination
                parts.append((d[k], part))
            s = TranslateCombination.combine(self.kernel, parts)

            self._enter("certify")
            certificate = certify(s, target, self.interval, self.grid_size, self.p_values,
                                  self.epsilon, table)
            if self.best_error is None or certificate.sup_error < self.best_error:
                self.best_error = certificate.sup_error
            logger.info("iteration %d: y1 = %s, sup error %.3g, %d budgets missed",
                        self.iterations, Y.head, certificate.sup_error, len(missed))
            if certificate.success and not missed:
                return s, self._finish(certificate.with_context(y1_used=Y.head), p, poly_error)

            self.floor *= 2
            self._enter("recovery")

        raise BudgetError(
            f"y1 floor passed 2^{self.max_floor.numerator.bit_length() - 1} without meeting every "
            f"recovery budget with sup error < {self.epsilon:.3g}; best {self.best_error:.3g}",
            best_error=self.best_error,
        )

    def _finish(self, certificate, p, poly_error):
        certificate = certificate.with_context(
            poly_degree=None if p.is_zero() else p.degree, poly_error=poly_error,
            iterations=self.iterations,
            provider=self.provider.to_dict(),
        )
        self.best_error = certificate.sup_error
        self._enter("done", "succeeded")
        return certificate

    def get_status_summary(self) -> dict:
        """Get a summary of the pipeline state"""
        return {
            "kernel": self.kernel.family.value,
            "stage": self.stage,
            "status": self.status,
            "iterations": self.iterations,
            "floor": None if self.floor is None else format_rational(self.floor),
            "best_error": self.best_error,
            "error_count": self.error_count,
            "last_error": self.last_error,
        }


def approximate(f, interval, epsilon: float, kernel: KernelSpec, provider: ScatteredProvider,
                **options) -> Tuple[TranslateCombination, ApproximationCertificate]:
    """Translate combination with certified grid sup error below epsilon"""
    pipeline = ApproximationPipeline(kernel, provider, epsilon, interval, **options)
    return pipeline.run(f)
