"""Exact expansion polynomials for the supported kernel families.

Every kernel here expands around a far-away translate as

    phi(x - y) = F(y) * sum_k A_k(x) / y**k

(the logarithmic kernels carry an extra ``ln|y|`` series). The coefficient
polynomials are generated in exact rational arithmetic so that degrees and
leading coefficients can be checked without tolerances.
"""

from __future__ import annotations

import logging
import math
import numbers
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

from mpmath.ctx_mp import MPContext

from .errors import DegeneracyError, UnsupportedParameterError

logger = logging.getLogger(__name__)

DEFAULT_PRECISION_BITS = 256


# Rational and high-precision helpers

def as_rational(value) -> Fraction:
    """Convert a config or API scalar to an exact rational"""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not numeric parameters")
    if isinstance(value, numbers.Rational):
        return Fraction(int(value.numerator), int(value.denominator))
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite value {value}")
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if hasattr(value, "_mpf_"):
        return mpf_to_rational(value)
    raise TypeError(f"cannot interpret {value!r} as a rational number")


def make_context(precision_bits: int = DEFAULT_PRECISION_BITS) -> MPContext:
    """Fresh mpmath context; contexts are never shared between calls"""
    ctx = MPContext()
    ctx.prec = int(precision_bits)
    return ctx


def rational_to_mpf(ctx: MPContext, value):
    value = as_rational(value)
    return ctx.mpf(value.numerator) / value.denominator


def mpf_to_rational(value) -> Fraction:
    """Exact value of a finite binary float"""
    sign, mantissa, exponent, _ = value._mpf_
    mantissa = int(mantissa)
    if mantissa == 0:
        if exponent != 0:
            raise ValueError(f"cannot convert special value {value} to a rational")
        return Fraction(0)
    numerator = -mantissa if sign else mantissa
    if exponent >= 0:
        return Fraction(numerator * 2 ** exponent)
    return Fraction(numerator, 2 ** -exponent)


def format_rational(value: Fraction) -> str:
    return str(as_rational(value))


# Polynomials

class Polynomial:
    """Dense polynomial with exact rational coefficients, lowest degree first."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Sequence = ()):
        values = [as_rational(c) for c in coeffs]
        while values and values[-1] == 0:
            values.pop()
        self.coeffs = tuple(values)

    @classmethod
    def zero(cls) -> "Polynomial":
        return cls(())

    @classmethod
    def constant(cls, value) -> "Polynomial":
        return cls((value,))

    @classmethod
    def monomial(cls, degree: int, coeff=1) -> "Polynomial":
        if degree < 0:
            raise ValueError(f"negative degree {degree}")
        return cls([0] * degree + [coeff])

    @property
    def degree(self) -> int:
        """Degree, or -1 for the zero polynomial"""
        return len(self.coeffs) - 1

    @property
    def leading(self) -> Fraction:
        return self.coeffs[-1] if self.coeffs else Fraction(0)

    def is_zero(self) -> bool:
        return not self.coeffs

    def coefficient(self, degree: int) -> Fraction:
        if 0 <= degree < len(self.coeffs):
            return self.coeffs[degree]
        return Fraction(0)

    def __add__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(other)
        size = max(len(self.coeffs), len(other.coeffs))
        return Polynomial([self.coefficient(i) + other.coefficient(i) for i in range(size)])

    __radd__ = __add__

    def __neg__(self):
        return Polynomial([-c for c in self.coeffs])

    def __sub__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(other)
        return self + (-other)

    def __rsub__(self, other):
        return Polynomial.constant(other) - self

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            factor = as_rational(other)
            return Polynomial([c * factor for c in self.coeffs])
        if self.is_zero() or other.is_zero():
            return Polynomial.zero()
        product = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            for j, b in enumerate(other.coeffs):
                product[i + j] += a * b
        return Polynomial(product)

    __rmul__ = __mul__

    def __truediv__(self, other):
        factor = as_rational(other)
        return Polynomial([c / factor for c in self.coeffs])

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self.coeffs == other.coeffs
        if isinstance(other, (int, Fraction)):
            return self.coeffs == Polynomial.constant(other).coeffs
        return NotImplemented

    def __hash__(self):
        return hash(self.coeffs)

    def __call__(self, x):
        """Horner evaluation; exact for rationals, float for floats"""
        if isinstance(x, float):
            result = 0.0
            for c in reversed(self.coeffs):
                result = result * x + float(c)
            return result
        x = as_rational(x)
        result = Fraction(0)
        for c in reversed(self.coeffs):
            result = result * x + c
        return result

    def evaluate_mp(self, ctx: MPContext, x):
        result = ctx.mpf(0)
        for c in reversed(self.coeffs):
            result = result * x + rational_to_mpf(ctx, c)
        return result

    def to_strings(self) -> List[str]:
        return [format_rational(c) for c in self.coeffs] or ["0"]

    def to_dict(self) -> dict:
        return {
            "coefficients": self.to_strings(),
            "degree": None if self.is_zero() else self.degree,
            "leading": format_rational(self.leading),
        }

    def __repr__(self):
        if self.is_zero():
            return "Polynomial(0)"
        terms = []
        for power, c in enumerate(self.coeffs):
            if c == 0:
                continue
            if power == 0:
                terms.append(f"{c}")
            elif power == 1:
                terms.append(f"{c}*x")
            else:
                terms.append(f"{c}*x^{power}")
        return "Polynomial(" + " + ".join(terms) + ")"


# Kernel descriptions

class KernelFamily(str, Enum):
    BINOMIAL_POWER = "binomial-power"
    ARCTAN_SHIFTED = "arctan-shifted"
    ARCTAN_BINOMIAL = "arctan-binomial"
    INV_X_LOG = "inv-x-log"
    RELATED_LOG = "related-log"
    RELATED_ARCTAN = "related-arctan"


LOG_FAMILIES = (KernelFamily.INV_X_LOG, KernelFamily.RELATED_LOG)


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus its parameters q, r, c and L."""

    family: KernelFamily
    q: int = 2
    r: Fraction = Fraction(1, 2)
    c: Fraction = Fraction(1)
    L: int = 1

    def __post_init__(self):
        try:
            family = KernelFamily(self.family)
        except ValueError:
            raise UnsupportedParameterError(f"unknown kernel family {self.family!r}")
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "r", as_rational(self.r))
        object.__setattr__(self, "c", as_rational(self.c))

        if isinstance(self.q, bool) or not isinstance(self.q, numbers.Integral) or self.q < 1:
            raise UnsupportedParameterError(f"q must be a positive integer, got {self.q!r}")
        if isinstance(self.L, bool) or not isinstance(self.L, numbers.Integral) or self.L < 1:
            raise UnsupportedParameterError(f"L must be a positive integer, got {self.L!r}")
        object.__setattr__(self, "q", int(self.q))
        object.__setattr__(self, "L", int(self.L))
        if self.c <= 0:
            raise UnsupportedParameterError(f"shape parameter c must be positive, got {self.c}")

        if family is KernelFamily.ARCTAN_SHIFTED:
            # the derivative is the Poisson kernel; no free parameters
            object.__setattr__(self, "q", 2)
            object.__setattr__(self, "r", Fraction(-1))
            object.__setattr__(self, "c", Fraction(1))
        elif family is KernelFamily.INV_X_LOG:
            if self.q != 2 or self.c != 1:
                raise UnsupportedParameterError("inv-x-log fixes q = 2 and c = 1")
        elif family is KernelFamily.RELATED_LOG:
            if self.q % 2:
                raise UnsupportedParameterError(f"related-log needs even q, got {self.q}")
            if self.c != 1:
                raise UnsupportedParameterError("related-log fixes c = 1")
        else:
            if self.r == 0:
                raise UnsupportedParameterError("r must be nonzero")
            if family is KernelFamily.BINOMIAL_POWER and self.r.denominator == 1 and self.r > 0:
                raise UnsupportedParameterError(
                    f"r = {self.r} makes the kernel a polynomial; translates cannot be dense"
                )
            if family is not KernelFamily.BINOMIAL_POWER and self.q % 2:
                raise UnsupportedParameterError(f"{family.value} needs even q, got {self.q}")

    @classmethod
    def multiquadric(cls, c=1) -> "KernelSpec":
        return cls(KernelFamily.BINOMIAL_POWER, q=2, r=Fraction(1, 2), c=c)

    @classmethod
    def poisson(cls) -> "KernelSpec":
        return cls(KernelFamily.BINOMIAL_POWER, q=2, r=Fraction(-1))

    @property
    def qr(self) -> Fraction:
        return self.q * self.r

    @property
    def is_log(self) -> bool:
        return self.family in LOG_FAMILIES

    def to_dict(self) -> dict:
        summary = {"family": self.family.value, "q": self.q}
        if self.family is KernelFamily.RELATED_LOG:
            summary["L"] = self.L
        elif not self.is_log:
            summary.update(r=format_rational(self.r), c=format_rational(self.c))
        return summary


# Coefficient generators

@lru_cache(maxsize=4096)
def gen_binomial(u: Fraction, k: int) -> Fraction:
    """General binomial coefficient u(u-1)...(u-k+1)/k!"""
    if k < 0:
        raise ValueError(f"k must be nonnegative, got {k}")
    u = as_rational(u)
    result = Fraction(1)
    for i in range(k):
        result = result * (u - i) / (i + 1)
    return result


@lru_cache(maxsize=4096)
def _binomial_term(q: int, r: Fraction, c: Fraction, k: int) -> Polynomial:
    qr = q * r
    coeffs = [Fraction(0)] * (k + 1)
    for j in range(k // q + 1):
        power = k - q * j
        coeffs[power] += (
            (-1) ** k * gen_binomial(r, j) * gen_binomial(qr - q * j, power) * c ** j
        )
    return Polynomial(coeffs)


def binomial_Ak(spec: KernelSpec, k: int) -> Polynomial:
    """A_k of the binomial power kernel (c + t**q)**r, before any sign modifier"""
    if spec.family is not KernelFamily.BINOMIAL_POWER:
        raise ValueError(f"binomial_Ak needs a binomial-power kernel, got {spec.family.value}")
    if k < 0:
        raise ValueError(f"k must be nonnegative, got {k}")
    return _binomial_term(spec.q, spec.r, spec.c, k)


def _poisson_term(k: int) -> Polynomial:
    if k < 0:
        return Polynomial.zero()
    return _binomial_term(2, Fraction(-1), Fraction(1), k)


@lru_cache(maxsize=1024)
def arctan_Bk(k: int) -> Polynomial:
    """B_k of the shifted arctangent, obtained from the Poisson kernel"""
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    return _poisson_term(k - 1) / k


def cauchy_product(S: Sequence[Polynomial], T: Sequence[Polynomial], n: int) -> List[Polynomial]:
    """First n coefficients of the product of two formal series in 1/y"""
    result = []
    for k in range(n):
        total = Polynomial.zero()
        for i in range(min(k, len(S) - 1) + 1):
            j = k - i
            if j < len(T):
                total = total + S[i] * T[j]
        result.append(total)
    return result


@lru_cache(maxsize=2048)
def _arctan_binomial_term(q: int, r: Fraction, c: Fraction, k: int) -> Polynomial:
    total = Polynomial.zero()
    for i in range(k + 1):
        total = total + _binomial_term(q, r, c, i) * arctan_Bk(k - i + 1)
    return total


def arctan_binomial_Ck(spec: KernelSpec, k: int) -> Polynomial:
    """C_k of (c + t**q)**r * (arctan(t) + pi/2), normalised by y**(qr - 1)"""
    if spec.family not in (KernelFamily.ARCTAN_BINOMIAL, KernelFamily.RELATED_ARCTAN):
        raise ValueError(f"arctan_binomial_Ck needs an arctan product kernel, got {spec.family.value}")
    if k < 0:
        raise ValueError(f"k must be nonnegative, got {k}")
    return _arctan_binomial_term(spec.q, spec.r, spec.c, k)


def sum_identity(u, k: int) -> Tuple[Fraction, Fraction]:
    """Both sides of sum_j (-1)**j C(u, j) = (-1)**k C(u - 1, k)"""
    u = as_rational(u)
    if u == 0:
        raise ValueError("u must be nonzero")
    lhs = sum((Fraction((-1) ** j) * gen_binomial(u, j) for j in range(k + 1)), Fraction(0))
    rhs = (-1) ** k * gen_binomial(u - 1, k)
    return lhs, rhs


@lru_cache(maxsize=64)
def _inv_x_log_series(n: int) -> Tuple[Tuple[Polynomial, ...], Tuple[Polynomial, ...]]:
    x = Polynomial.monomial(1)
    # y-derivative of ln(1 + (x - y)**2) is sum_m C_m / y**m
    derivative = [Polynomial.zero()] + [
        _poisson_term(m - 1) * 2 - x * _poisson_term(m - 2) * 2 for m in range(1, n + 1)
    ]
    # integrating term by term leaves 2 ln|y| plus sum_j D_j / y**j
    log_rational = [Polynomial.zero()] + [
        -derivative[j + 1] / j for j in range(1, n)
    ]
    # 1/(x - y) = -sum_k x**(k-1) / y**k
    inverse = [Polynomial.zero()] + [-Polynomial.monomial(k - 1) for k in range(1, n + 1)]
    A = tuple(term * 2 for term in inverse)
    B = tuple(cauchy_product(inverse, log_rational, n + 1))
    return A, B


def log_kernel_series(n: int) -> Tuple[Tuple[Polynomial, ...], Tuple[Polynomial, ...]]:
    """Series of ln(1 + t**2)/t as (A, B), each indexed 0..n by the power of 1/y

    phi(x - y) = ln|y| * sum_j A_j(x)/y**j + sum_k B_k(x)/y**k, with A_0 = B_0 = B_1 = 0.
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    return _inv_x_log_series(n)


@lru_cache(maxsize=64)
def _related_log_series(q: int, L: int, n: int):
    # (x - y)**(-L) = sum_j S_j / y**j, starting at j = L
    S = [Polynomial.zero()] * min(L, n + 1)
    S += [
        Polynomial.monomial(j - L, (-1) ** L * gen_binomial(Fraction(j - 1), j - L))
        for j in range(L, n + 1)
    ]
    # y-derivative of ln(1 + (x - y)**q) is (q/y) * sum_m G_m / y**m
    head = [Polynomial.monomial(m, gen_binomial(Fraction(q - 1), m) * (-1) ** m) for m in range(q)]
    inverse_binomial = [_binomial_term(q, Fraction(-1), Fraction(1), k) for k in range(n + 1)]
    G = cauchy_product(head, inverse_binomial, n + 1)
    D = [Polynomial.zero()] + [G[l] * Fraction(-q, l) for l in range(1, n + 1)]
    A = tuple(term * q for term in S)
    B = tuple(cauchy_product(S, D, n + 1))
    return A, B


def related_series(spec: KernelSpec, n: int) -> Dict[str, Tuple[Polynomial, ...]]:
    """Coefficient lists of the product kernels, indexed 0..n by the power of 1/y

    related-log, t**(-L) ln(1 + t**q):
        phi(x - y) = ln|y| * sum_j A_j/y**j + sum_j B_j/y**j
    related-arctan, (c + t**q)**r (arctan(t) + pi/2):
        phi(x - y) = y**qr * sum_j C_j/y**j, with C_0 = 0
    """
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    if spec.family is KernelFamily.RELATED_LOG:
        A, B = _related_log_series(spec.q, spec.L, n)
        return {"A": A, "B": B}
    if spec.family in (KernelFamily.RELATED_ARCTAN, KernelFamily.ARCTAN_BINOMIAL):
        C = (Polynomial.zero(),) + tuple(arctan_binomial_Ck(spec, j - 1) for j in range(1, n + 1))
        return {"C": C}
    raise ValueError(f"related_series needs a related-product kernel, got {spec.family.value}")


# Logarithmic derivatives

@dataclass(frozen=True)
class LogDerivative:
    """D^N (p(x) ln x) = log_part(x) * ln x + sum_e rational[e] * x**e"""

    rational: Dict[int, Fraction]
    log_part: Polynomial
    factors: Tuple[int, ...] = ()

    def evaluate(self, x) -> float:
        x = float(x)
        value = self.log_part(x) * math.log(x)
        for power, coeff in self.rational.items():
            value += float(coeff) * x ** power
        return value


def log_poly_derivative(p: Polynomial, order: int) -> LogDerivative:
    """Differentiate p(x) ln x order times, exactly.

    For deg p < order the log part vanishes and the result is
    x**(-order) * sum_j (-1)**(order-1+j) * factors[j] * a_j * x**j
    with factors[j] = j! (order-1-j)!.
    """
    if order < 1:
        raise ValueError(f"order must be positive, got {order}")
    log_terms = {power: coeff for power, coeff in enumerate(p.coeffs) if coeff != 0}
    rational: Dict[int, Fraction] = {}
    for _ in range(order):
        next_log: Dict[int, Fraction] = {}
        next_rational: Dict[int, Fraction] = {}
        for power, coeff in log_terms.items():
            # d(x^e ln x) = e x^(e-1) ln x + x^(e-1)
            if power != 0:
                next_log[power - 1] = next_log.get(power - 1, Fraction(0)) + power * coeff
            next_rational[power - 1] = next_rational.get(power - 1, Fraction(0)) + coeff
        for power, coeff in rational.items():
            if power != 0:
                next_rational[power - 1] = next_rational.get(power - 1, Fraction(0)) + power * coeff
        log_terms = {e: v for e, v in next_log.items() if v != 0}
        rational = {e: v for e, v in next_rational.items() if v != 0}

    log_degree = max(log_terms) if log_terms else -1
    log_part = Polynomial([log_terms.get(e, 0) for e in range(log_degree + 1)])
    factors = tuple(
        math.factorial(j) * math.factorial(order - 1 - j) for j in range(order)
    )
    return LogDerivative(rational=rational, log_part=log_part, factors=factors)


def log_power_derivative(k: int) -> Tuple[int, Fraction]:
    """Return (k!, C_k) with D^k (x**k ln x) = k! ln x + C_k"""
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    harmonic = sum((Fraction(1, n) for n in range(1, k + 1)), Fraction(0))
    return math.factorial(k), math.factorial(k) * harmonic


# Expansion models

class SignRequirement(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    EITHER = "either"


@dataclass(frozen=True)
class ExpansionModel:
    """How a kernel's translates expand: F(y), the basis offset K and the A_k"""

    spec: KernelSpec
    F_exponent: Fraction
    F_has_log: bool = False
    F_signed: bool = False
    sign_requirement: SignRequirement = SignRequirement.EITHER
    K: int = 0
    sign_modifier: int = 1

    def accepts(self, sign) -> bool:
        sign = getattr(sign, "value", sign)
        return self.sign_requirement is SignRequirement.EITHER or self.sign_requirement.value == sign

    @property
    def preferred_sign(self) -> str:
        if self.sign_requirement is SignRequirement.NEGATIVE:
            return "negative"
        return "positive"

    def coefficient(self, k: int) -> Polynomial:
        """A_k of the admissible representation (the ln|y| series for log kernels)"""
        if k < 0:
            raise ValueError(f"k must be nonnegative, got {k}")
        family = self.spec.family
        if family is KernelFamily.BINOMIAL_POWER:
            return binomial_Ak(self.spec, k) * self.sign_modifier
        if family is KernelFamily.ARCTAN_SHIFTED:
            return arctan_Bk(k + 1)
        if family in (KernelFamily.ARCTAN_BINOMIAL, KernelFamily.RELATED_ARCTAN):
            return Polynomial.zero() if k == 0 else arctan_binomial_Ck(self.spec, k - 1)
        return self.log_series(k)[0][k]

    def coefficients(self, n: int) -> List[Polynomial]:
        return [self.coefficient(k) for k in range(n)]

    def log_series(self, n: int):
        """(A, B) lists, indexed 0..n, of a logarithmic kernel"""
        if self.spec.family is KernelFamily.INV_X_LOG:
            return log_kernel_series(max(n, 1))
        if self.spec.family is KernelFamily.RELATED_LOG:
            series = related_series(self.spec, n)
            return series["A"], series["B"]
        raise ValueError(f"{self.spec.family.value} has no logarithmic series")

    def F_exact(self, y) -> Optional[Fraction]:
        """F(y) when it is rational, otherwise None"""
        if self.F_has_log:
            return Fraction(1)
        y = as_rational(y)
        if self.F_exponent.denominator != 1:
            return None
        base = y if self.F_signed else abs(y)
        return base ** int(self.F_exponent)

    def F_mp(self, ctx: MPContext, y):
        exact = self.F_exact(y)
        if exact is not None:
            return rational_to_mpf(ctx, exact)
        magnitude = rational_to_mpf(ctx, abs(as_rational(y)))
        return ctx.power(magnitude, rational_to_mpf(ctx, self.F_exponent))

    def to_dict(self) -> dict:
        return {
            "kernel": self.spec.to_dict(),
            "F_exponent": format_rational(self.F_exponent),
            "F_has_log": self.F_has_log,
            "F_signed": self.F_signed,
            "sign_requirement": self.sign_requirement.value,
            "K": self.K,
            "sign_modifier": self.sign_modifier,
        }


def _ceil(value: Fraction) -> int:
    return -((-value.numerator) // value.denominator)


def classify_basis(spec: KernelSpec) -> ExpansionModel:
    """Pick F(y), the basis offset K and the sign requirement for a kernel"""
    family = spec.family
    if family is KernelFamily.BINOMIAL_POWER:
        qr = spec.qr
        natural = qr.denominator == 1 and qr > 0
        if natural:
            K = spec.q * _ceil(spec.r)
            if spec.q % 2:
                # odd q: expand in y**qr over a negative doubling sequence
                return ExpansionModel(
                    spec, qr, F_signed=True, sign_requirement=SignRequirement.NEGATIVE,
                    K=K, sign_modifier=(-1) ** int(qr),
                )
            return ExpansionModel(spec, qr, K=K)
        if spec.q % 2:
            raise UnsupportedParameterError(
                f"odd q = {spec.q} needs qr to be a positive integer, got qr = {qr}"
            )
        return ExpansionModel(spec, qr, K=0)
    if family is KernelFamily.ARCTAN_SHIFTED:
        return ExpansionModel(
            spec, Fraction(-1), F_signed=True, sign_requirement=SignRequirement.POSITIVE, K=0
        )
    if family in (KernelFamily.ARCTAN_BINOMIAL, KernelFamily.RELATED_ARCTAN):
        qr = spec.qr
        if qr.denominator == 1 and qr > 0:
            raise UnsupportedParameterError(f"{family.value} needs qr outside N, got qr = {qr}")
        return ExpansionModel(spec, qr, sign_requirement=SignRequirement.POSITIVE, K=1)
    L = spec.L if family is KernelFamily.RELATED_LOG else 1
    return ExpansionModel(
        spec, Fraction(0), F_has_log=True, sign_requirement=SignRequirement.POSITIVE, K=L
    )


def check_basis(model: ExpansionModel, count: int) -> None:
    """Raise DegeneracyError unless A_K..A_{K+count-1} have degrees 0..count-1"""
    for m in range(count):
        term = model.coefficient(model.K + m)
        if term.degree != m:
            raise DegeneracyError(
                f"A_{model.K + m} of {model.spec.family.value} has degree {term.degree}, expected {m}"
            )


# Closed-form kernel values

def kernel_value(spec: KernelSpec, t, ctx: MPContext):
    """phi(t) in the working precision of ctx"""
    if not hasattr(t, "_mpf_"):
        t = rational_to_mpf(ctx, t)
    family = spec.family
    if family is KernelFamily.BINOMIAL_POWER:
        return _binomial_value(spec, t, ctx)
    if family is KernelFamily.ARCTAN_SHIFTED:
        return _shifted_arctan(t, ctx)
    if family in (KernelFamily.ARCTAN_BINOMIAL, KernelFamily.RELATED_ARCTAN):
        return _binomial_value(spec, t, ctx) * _shifted_arctan(t, ctx)
    L = spec.L if family is KernelFamily.RELATED_LOG else 1
    if t == 0:
        if spec.q > L:
            return ctx.mpf(0)
        if spec.q == L:
            return ctx.mpf(1)
        return ctx.inf
    return ctx.log(1 + t ** spec.q) / t ** L


def _shifted_arctan(t, ctx: MPContext):
    if t < 0:
        # atan(t) + pi/2 cancels badly for large negative t
        return ctx.atan(-1 / t)
    return ctx.atan(t) + ctx.pi / 2


def _binomial_value(spec: KernelSpec, t, ctx: MPContext):
    base = rational_to_mpf(ctx, spec.c) + t ** spec.q
    if spec.r.denominator == 1:
        return base ** int(spec.r)
    if base < 0:
        raise ValueError(f"(c + t^q)^r is not real at t = {t}")
    if base == 0:
        return ctx.mpf(0) if spec.r > 0 else ctx.inf
    return ctx.power(base, rational_to_mpf(ctx, spec.r))
