import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scatter_density.approx import (
    ApproximationPipeline,
    Target,
    TranslateCombination,
    approximate,
    certify,
    cheb_approx,
    eval_combination,
    lp_error,
    monomial_to_basis,
    nodes_needed,
    reproduce_basis_poly,
)
from scatter_density.errors import BudgetError, DegreeCapError, FloorTooSmallError
from scatter_density.polybasis import KernelFamily, KernelSpec, Polynomial, classify_basis, make_context
from scatter_density.sequences import DoublingSequence, ScatteredProvider, Sign
from tests.strategies import small_rationals

x = Polynomial.monomial(1)


def geometric(head, count, sign=Sign.POSITIVE):
    step = 1 if sign is Sign.POSITIVE else -1
    return DoublingSequence(sign, tuple(step * Fraction(head) * 2 ** j for j in range(count)))


class StageRecorder:
    def __init__(self):
        self.stages = []

    def on_pipeline_state_changed(self, pipeline):
        self.stages.append(pipeline.stage)


# Polynomial pre-approximation

def test_polynomial_targets_pass_through():
    target = Target.from_polynomial([0, -2, 0, 1])
    p, error = cheb_approx(target, (-1, 1), 1e-6)
    assert p == Polynomial([0, -2, 0, 1])
    assert error == 0.0


def test_sine_needs_low_degree():
    p, error = cheb_approx("sin", (-1, 1), 1e-3)
    assert p.degree <= 9
    assert error < 1e-3


def test_kink_hits_degree_cap():
    with pytest.raises(DegreeCapError) as info:
        cheb_approx("abs", (-1, 1), 1e-9)
    assert info.value.best_error > 1e-9
    assert info.value.degree == 64
    assert info.value.exit_code == 5


def test_sampled_target_interpolates_linearly():
    target = Target.from_samples([1, 0, 2], [1, 0, 4])
    assert np.allclose(target([0.5, 1.5]), [0.5, 2.5])
    with pytest.raises(ValueError):
        Target.from_samples([0], [1])


# Basis conversion

def test_monomials_in_multiquadric_basis(multiquadric_model):
    assert monomial_to_basis(Polynomial([1]), multiquadric_model) == {2: 2}
    assert monomial_to_basis(x, multiquadric_model) == {3: 2}
    assert monomial_to_basis(x * x, multiquadric_model) == {2: Fraction(1, 2), 4: 2}
    assert monomial_to_basis(Polynomial.zero(), multiquadric_model) == {}


def test_constant_in_poisson_basis(poisson_model):
    assert monomial_to_basis(Polynomial([1]), poisson_model) == {0: 1}


@given(coeffs=st.lists(small_rationals, min_size=1, max_size=6))
@settings(max_examples=100, deadline=None)
def test_basis_expansion_reproduces_polynomial(coeffs):
    p = Polynomial(coeffs)
    for model in (classify_basis(KernelSpec.multiquadric()), classify_basis(KernelSpec.poisson())):
        d = monomial_to_basis(p, model)
        total = Polynomial.zero()
        for k, dk in d.items():
            total = total + model.coefficient(k) * dk
        assert total == p


def test_log_basis_conversion(inv_x_log_model):
    # A_k = -2 x**(k-1) for the inverse-x log kernel
    assert monomial_to_basis(Polynomial([1, 1]), inv_x_log_model) == {
        1: Fraction(-1, 2), 2: Fraction(-1, 2),
    }


# Combinations

def test_eval_empty_and_single_term(multiquadric):
    assert eval_combination(TranslateCombination(multiquadric), Fraction(1, 3)) == 0
    single = TranslateCombination(multiquadric, ((Fraction(1), Fraction(0)),))
    assert eval_combination(single, 0) == 1


def test_eval_symmetric_combination(multiquadric):
    s = TranslateCombination(multiquadric, ((Fraction(1), Fraction(3)), (Fraction(1), Fraction(-3))))
    ctx = make_context(s.precision_bits)
    left = ctx.mpf(eval_combination(s, Fraction(1, 2)))
    right = ctx.mpf(eval_combination(s, Fraction(-1, 2)))
    assert abs(left - right) < ctx.mpf(10) ** -60


def test_combination_nodes_must_be_distinct(multiquadric):
    with pytest.raises(ValueError):
        TranslateCombination(multiquadric, ((Fraction(1), Fraction(2)), (Fraction(3), Fraction(2))))


def test_combine_merges_shared_nodes(multiquadric):
    first = TranslateCombination(multiquadric, ((Fraction(1), Fraction(2)), (Fraction(1), Fraction(4))))
    second = TranslateCombination(multiquadric, ((Fraction(-1), Fraction(2)), (Fraction(1), Fraction(8))))
    merged = TranslateCombination.combine(multiquadric, [(2, first), (2, second)])
    assert merged.terms == ((Fraction(2), Fraction(4)), (Fraction(2), Fraction(8)))


# Certification

def test_certify_constant_gap(multiquadric):
    certificate = certify(
        TranslateCombination(multiquadric), Target.from_polynomial([1]), (0, 1),
        grid_size=101, p_values=(1, 2),
    )
    assert certificate.sup_error == 1.0
    assert certificate.lp_errors[1.0] == pytest.approx(1.0)
    assert certificate.lp_errors[2.0] == pytest.approx(1.0)
    assert not certificate.success
    assert certify(TranslateCombination(multiquadric), Target.from_polynomial([1]), (0, 1),
                   grid_size=101, epsilon=2).success


def test_lp_errors_never_exceed_sup_bound(multiquadric):
    certificate = certify(TranslateCombination(multiquadric), "sin", (-1, 2), grid_size=301,
                          p_values=(1, 2, 3.5))
    for p, value in certificate.lp_errors.items():
        assert value <= certificate.sup_error * 3 ** (1 / p)


def test_lp_error_trapezoid():
    xs = np.linspace(0, 1, 3)
    assert lp_error(np.array([0.0, 1.0, 0.0]), xs, 1) == pytest.approx(0.5)


# Basis recovery

def test_nodes_needed(multiquadric_model, inv_x_log_model):
    assert nodes_needed(multiquadric_model, 4) == 5
    assert nodes_needed(inv_x_log_model, 1) == 1
    assert nodes_needed(inv_x_log_model, 3) == 5


@pytest.mark.parametrize("m", [0, 1, 2, 3, 4, 5])
def test_recovery_error_halves_when_nodes_double(multiquadric_model, m):
    errors = []
    for exponent in (10, 11, 12):
        part = reproduce_basis_poly(multiquadric_model, geometric(2 ** exponent, m + 1), m, grid_size=201)
        record = part.recovery[0]
        assert record.index == m
        assert record.n_terms == m + 1
        errors.append(record.grid_error)
    for small, large in zip(errors, errors[1:]):
        assert 0.35 <= large / small <= 0.65


def test_single_translate_reproduces_constant(multiquadric_model):
    Y = DoublingSequence(Sign.POSITIVE, (2 ** 10,))
    s = reproduce_basis_poly(multiquadric_model, Y, 0, grid_size=201)
    assert s.terms == ((Fraction(1, 2 ** 10), 2 ** 10),)
    assert s.recovery[0].grid_error < 1.5e-3
    assert abs(float(eval_combination(s, 0)) - 1) < 1e-6


@pytest.mark.parametrize("m", [1, 2])
def test_log_recovery_error_decreases(inv_x_log_model, m):
    errors = []
    for exponent in (8, 16, 32):
        Y = geometric(2 ** exponent, 2 * m - 1)
        part = reproduce_basis_poly(inv_x_log_model, Y, m, grid_size=201)
        errors.append(part.recovery[0].grid_error)
    assert errors[0] > errors[1] > errors[2]
    scaled = [error * math.log(2 ** e) for error, e in zip(errors, (8, 16, 32))]
    assert scaled[0] >= scaled[1] >= scaled[2]


def test_recovery_rejects_bad_requests(multiquadric_model, inv_x_log_model):
    with pytest.raises(ValueError):
        reproduce_basis_poly(inv_x_log_model, geometric(16, 3), 0)
    with pytest.raises(ValueError):
        reproduce_basis_poly(multiquadric_model, geometric(16, 2), 2)
    with pytest.raises(ValueError):
        reproduce_basis_poly(multiquadric_model, geometric(16, 3), 2, n_terms=4)
    with pytest.raises(ValueError):
        reproduce_basis_poly(multiquadric_model, geometric(16, 3), 2, floor=16)
    arctan = classify_basis(KernelSpec(KernelFamily.ARCTAN_SHIFTED))
    with pytest.raises(ValueError):
        reproduce_basis_poly(arctan, geometric(16, 1, Sign.NEGATIVE), 0)


def test_recovery_over_budget(multiquadric_model):
    with pytest.raises(FloorTooSmallError) as info:
        reproduce_basis_poly(multiquadric_model, geometric(16, 4), 3, budget=1e-30, grid_size=51)
    assert info.value.best_error > 1e-30
    assert info.value.exit_code == 5
    missed = info.value.combination
    assert len(missed) == 4
    assert missed.recovery[0].budget == 1e-30
    assert not missed.recovery[0].met


# Pipeline

def test_zero_target_needs_no_translates(multiquadric, integers):
    recorder = StageRecorder()
    pipeline = ApproximationPipeline(multiquadric, integers, 1e-3, grid_size=201)
    pipeline.add_observer(recorder)
    s, certificate = pipeline.run(Target.from_polynomial([]))
    assert len(s) == 0
    assert certificate.sup_error == 0.0
    assert certificate.success
    assert certificate.poly_degree is None
    assert recorder.stages == ["classify", "polynomial", "basis", "done"]


def test_removed_observer_stops_hearing_stages(multiquadric, integers):
    kept, removed = StageRecorder(), StageRecorder()
    pipeline = ApproximationPipeline(multiquadric, integers, 1e-3, grid_size=201)
    pipeline.add_observer(kept)
    pipeline.add_observer(kept)
    pipeline.add_observer(removed)
    pipeline.remove_observer(removed)
    pipeline.remove_observer(removed)
    pipeline.run(Target.from_polynomial([]))
    assert kept.stages == ["classify", "polynomial", "basis", "done"]
    assert removed.stages == []


def test_basis_polynomial_target(multiquadric, integers):
    recorder = StageRecorder()
    pipeline = ApproximationPipeline(multiquadric, integers, 1e-4, grid_size=201)
    pipeline.add_observer(recorder)
    s, certificate = pipeline.run(Target.from_polynomial([0, Fraction(1, 2)]))
    assert certificate.sup_error < 1e-4
    assert certificate.success
    assert certificate.y1_used == s.nodes[0]
    assert len(s) == 4
    assert all(node > 0 for node in s.nodes)
    (record,) = s.recovery
    assert record.budget == pytest.approx(5e-5)
    assert record.met and record.grid_error <= 5e-5
    assert "recovery" in recorder.stages and "certify" in recorder.stages
    assert recorder.stages[-1] == "done"
    summary = pipeline.get_status_summary()
    assert summary["status"] == "succeeded"
    assert summary["error_count"] == 0


def test_runs_are_deterministic(multiquadric):
    provider = ScatteredProvider.jittered(Fraction(1, 4), seed=11)
    first = approximate(Target.from_polynomial([1, 1]), (-1, 1), 1e-3, multiquadric, provider, grid_size=101)
    second = approximate(Target.from_polynomial([1, 1]), (-1, 1), 1e-3, multiquadric, provider, grid_size=101)
    assert first[0].terms == second[0].terms
    assert first[1].to_dict() == second[1].to_dict()


@pytest.mark.parametrize("kernel, provider", [
    (KernelSpec.multiquadric(), ScatteredProvider.jittered(Fraction(1, 4), seed=2024)),
    (KernelSpec(KernelFamily.BINOMIAL_POWER, q=2, r=Fraction(3, 2)), ScatteredProvider.integers()),
    (KernelSpec(KernelFamily.ARCTAN_SHIFTED), ScatteredProvider.integers()),
], ids=["multiquadric", "cubed-multiquadric", "arctan"])
def test_sine_is_approximated(kernel, provider):
    s, certificate = approximate("sin", (-1, 1), 1e-2, kernel, provider)
    assert certificate.success
    assert certificate.sup_error < 1e-2
    assert certificate.grid_size == 1001
    for p, value in certificate.lp_errors.items():
        assert value <= certificate.sup_error * 2 ** (1 / p)
    assert len(set(s.nodes)) == len(s)


def test_odd_power_uses_negative_nodes(integers):
    kernel = KernelSpec(KernelFamily.BINOMIAL_POWER, q=3, r=Fraction(1, 3))
    s, certificate = approximate(Target.from_polynomial([1]), (-1, 1), 1e-3, kernel, integers, grid_size=201)
    assert certificate.success
    assert all(node < 0 for node in s.nodes)


def test_degree_cap_is_attributed_to_polynomial_stage(multiquadric, integers):
    pipeline = ApproximationPipeline(multiquadric, integers, 1e-9, grid_size=201, max_degree=8)
    with pytest.raises(DegreeCapError) as info:
        pipeline.run("abs")
    assert info.value.stage == "polynomial"
    summary = pipeline.get_status_summary()
    assert summary["status"] == "failed"
    assert summary["error_count"] == 1
    assert summary["last_error"]


def test_floor_cap_raises_budget_error(multiquadric, integers):
    pipeline = ApproximationPipeline(multiquadric, integers, 1e-30, grid_size=51, max_floor=64)
    with pytest.raises(BudgetError) as info:
        pipeline.run(Target.from_polynomial([0, Fraction(1, 2)]))
    assert info.value.stage == "recovery"
    assert info.value.best_error is not None and info.value.best_error > 1e-30
    assert pipeline.iterations == 4


def test_epsilon_must_be_positive(multiquadric, integers):
    with pytest.raises(ValueError):
        ApproximationPipeline(multiquadric, integers, 0)
