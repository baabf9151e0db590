"""
Reversible Gate Tests
State action, polynomial substitution, circuit/polynomial duality, commutation and sampling
"""
import pytest
import numpy as np
from pathlib import Path
import sys

# Add backend to path
sys.path.insert(0, str(Path(__file__).parent.parent / "backend"))

from core.anf import Anf, PolySet
from core.bits import as_int, ints_to_bit_matrix
from core.errors import BudgetExceededError, DimensionError, ParameterError
from core.gates import (
    Circuit,
    Gate,
    append_to_polys,
    apply_to_poly,
    apply_to_state,
    cnot,
    commutes,
    commutes_semantic,
    generate_polynomials,
    inverse_circuit,
    mcx,
    negation,
    run_state,
    sample_circuit,
    sample_gate,
    toffoli,
)
from core.randomness import stream


@pytest.fixture
def rng():
    return stream(2024, "tests", "gates")


def bits(text):
    return as_int(text, len(text))


# ============================================================================
# GATE CONSTRUCTION TESTS
# ============================================================================

def test_gate_rejects_target_in_controls():
    with pytest.raises(ParameterError):
        Gate(1, 0b011)


def test_gate_rejects_polarity_outside_controls():
    with pytest.raises(ParameterError):
        Gate(0, 0b010, 0b100)


def test_rank_names():
    assert negation(0).rank == 0
    assert cnot(0, 1).rank == 1
    assert toffoli(0, 1, 2).rank == 2
    assert mcx((0, 1, 2), 3).rank == 3


def test_circuit_rejects_gate_past_width():
    with pytest.raises(DimensionError):
        Circuit(2, (toffoli(0, 1, 2),))


# ============================================================================
# STATE ACTION TESTS
# ============================================================================

def test_toffoli_on_110():
    assert apply_to_state(toffoli(0, 1, 2), "110", 3) == bits("111")


def test_negation_single_wire():
    assert apply_to_state(negation(0), "0", 1) == bits("1")


def test_white_dot_cnot_matches_negation_sandwich():
    white = cnot(0, 1, white=True)
    sandwich = Circuit(2, (negation(0), cnot(0, 1), negation(0)))
    assert apply_to_state(white, "00", 2) == bits("01")
    assert apply_to_state(white, "10", 2) == bits("10")
    for a in range(4):
        assert apply_to_state(white, a, 2) == run_state(sandwich, a)


def test_state_action_dimension_error():
    with pytest.raises(DimensionError):
        apply_to_state(toffoli(0, 1, 2), "11", 2)


def test_run_state_examples():
    assert run_state(Circuit(3), "101") == bits("101")
    assert run_state(Circuit(3, (toffoli(0, 1, 2),)), "110") == bits("111")
    for a in range(2):
        assert run_state(Circuit(1, (negation(0), negation(0))), a) == a


def test_gate_involution_on_states(rng):
    for _ in range(100):
        width = int(rng.integers(1, 9))
        g = sample_gate(width, rng)
        for a in range(1 << width):
            assert apply_to_state(g, apply_to_state(g, a, width), width) == a


# ============================================================================
# POLYNOMIAL ACTION TESTS
# ============================================================================

def test_toffoli_substitution_into_target():
    p = Anf.variable(3, 2)
    assert apply_to_poly(toffoli(0, 1, 2), p) == Anf.from_string("x3 + x1*x2", 3)


def test_cnot_substitution_into_product():
    p = Anf.from_string("x2*x3", 3)
    assert apply_to_poly(cnot(0, 1), p) == Anf.from_string("x2*x3 + x1*x3", 3)


def test_substitution_leaves_polynomial_without_target():
    p = Anf.variable(3, 0)
    assert apply_to_poly(toffoli(0, 1, 2), p) == p


def test_white_dot_substitution_expands_polarity():
    # x3 <- x3 + (x1 + 1) * x2
    p = Anf.variable(3, 2)
    g = Gate(2, 0b011, 0b001)
    assert apply_to_poly(g, p) == Anf.from_string("x3 + x1*x2 + x2", 3)


def test_substitution_contract_pointwise(rng):
    for _ in range(60):
        width = int(rng.integers(2, 9))
        g = sample_gate(width, rng)
        masks = rng.integers(0, 1 << width, size=12).tolist()
        p = Anf(width, masks)
        q = apply_to_poly(g, p)
        for a in range(1 << width):
            assert q.evaluate(a) == p.evaluate(apply_to_state(g, a, width))
        assert apply_to_poly(g, q) == p


def test_substitution_agrees_with_general_substitute(rng):
    width = 6
    for _ in range(30):
        g = sample_gate(width, rng)
        p = Anf(width, rng.integers(0, 1 << width, size=10).tolist())
        controls = Anf.one(width)
        for i in range(width):
            if g.controls >> i & 1:
                factor = Anf.variable(width, i)
                if g.polarity >> i & 1:
                    factor = factor + Anf.one(width)
                controls = controls * factor
        replacement = Anf.variable(width, g.target) + controls
        assert apply_to_poly(g, p) == p.substitute(g.target, replacement)


def test_poly_action_dimension_error():
    with pytest.raises(DimensionError):
        apply_to_poly(toffoli(0, 1, 3), Anf.variable(3, 0))


# ============================================================================
# DUALITY TESTS
# ============================================================================

def test_duality_random_circuits(rng):
    """Generated polynomials evaluated at every input equal the executed circuit"""
    for _ in range(200):
        width = int(rng.integers(2, 11))
        size = int(rng.integers(0, 129))
        c = sample_circuit(width, size, rng)
        polys = generate_polynomials(c)
        inputs = list(range(1 << width))
        table = polys.evaluate_many(ints_to_bit_matrix(inputs, width))
        weights = 1 << np.arange(width, dtype=np.int64)
        evaluated = (table.astype(np.int64) * weights).sum(axis=1).tolist()
        assert evaluated == [run_state(c, a) for a in inputs]


def test_generate_polynomials_execution_order():
    # CNOT runs first, then the negation
    c = Circuit(2, (cnot(0, 1), negation(0)))
    polys = generate_polynomials(c)
    assert polys[0] == Anf.from_string("x1 + 1", 2)
    assert polys[1] == Anf.from_string("x1 + x2", 2)
    assert polys.evaluate("00") == bits("10") == run_state(c, "00")


def test_generate_polynomials_opposite_order():
    c = Circuit(2, (negation(0), cnot(0, 1)))
    polys = generate_polynomials(c)
    assert polys[0] == Anf.from_string("x1 + 1", 2)
    assert polys[1] == Anf.from_string("x1 + x2 + 1", 2)
    for a in range(4):
        assert polys.evaluate(a) == run_state(c, a)


def test_empty_and_doubled_circuits_give_identity(rng):
    assert generate_polynomials(Circuit(4)) == PolySet.identity(4)
    g = sample_gate(4, rng)
    assert generate_polynomials(Circuit(4, (g, g))) == PolySet.identity(4)


def test_generate_polynomials_parallel_matches_sequential(rng):
    c = sample_circuit(8, 60, rng)
    assert generate_polynomials(c, jobs=2) == generate_polynomials(c, jobs=1)


def test_generate_polynomials_budget():
    c = Circuit(4, (toffoli(0, 1, 2), toffoli(2, 3, 0), toffoli(0, 2, 1)))
    with pytest.raises(BudgetExceededError):
        generate_polynomials(c, budget=1)


def test_budget_bounds_result_not_intermediate_growth():
    # x3 picks up x1*x2 from the second gate and loses it again at the first
    c = Circuit(3, (toffoli(0, 1, 2), toffoli(0, 1, 2)))
    polys = generate_polynomials(c, budget=1)
    assert polys == PolySet.identity(3)


def test_append_to_polys_matches_generation(rng):
    for _ in range(40):
        c = sample_circuit(6, 12, rng)
        g = sample_gate(6, rng)
        extended = generate_polynomials(Circuit(6, c.gates + (g,)))
        assert append_to_polys(g, generate_polynomials(c)) == extended[g.target]


def test_append_to_polys_rejects_over_budget():
    polys = generate_polynomials(Circuit(3, (toffoli(0, 1, 2),)))
    g = toffoli(2, 0, 1)
    assert append_to_polys(g, polys, budget=2) is None
    assert append_to_polys(g, polys) == Anf.from_string("x2 + x1*x3 + x1*x2", 3)


def test_append_to_polys_checks_width():
    with pytest.raises(DimensionError):
        append_to_polys(cnot(0, 3), PolySet.identity(3))


# ============================================================================
# INVERSE TESTS
# ============================================================================

def test_inverse_reverses_gate_order():
    g1, g2, g3 = negation(0), cnot(0, 1), toffoli(0, 1, 2)
    c = Circuit(3, (g1, g2, g3))
    assert inverse_circuit(c).gates == (g3, g2, g1)
    assert inverse_circuit(inverse_circuit(c)) == c


def test_inverse_undoes_circuit(rng):
    for _ in range(50):
        width = int(rng.integers(2, 12))
        c = sample_circuit(width, 40, rng)
        inverse = inverse_circuit(c)
        for a in rng.integers(0, 1 << width, size=20).tolist():
            assert run_state(inverse, run_state(c, a)) == a


# ============================================================================
# COMMUTATION TESTS
# ============================================================================

def test_commutes_examples():
    assert not commutes(cnot(0, 1), cnot(1, 2))
    assert commutes(negation(0), negation(1))
    assert commutes(toffoli(0, 1, 2), toffoli(0, 1, 2))


def test_chained_cnots_differ_semantically():
    assert not commutes_semantic(cnot(0, 1), cnot(1, 2))


def test_commutes_width_mismatch():
    with pytest.raises(DimensionError):
        commutes(cnot(0, 1), cnot(1, 3), width=3)


def test_syntactic_noncommutation_implies_semantic(rng):
    """Black-dot gates flagged noncommuting always differ on some state"""
    checked = 0
    for _ in range(400):
        width = int(rng.integers(2, 9))
        g1 = sample_gate(width, rng, max_polarity=0)
        g2 = sample_gate(width, rng, max_polarity=0)
        if commutes(g1, g2):
            continue
        checked += 1
        assert not commutes_semantic(g1, g2)
    assert checked > 0


def test_syntactic_rule_ignores_polarity():
    # both gates read x2, with opposite polarity, so they never fire on the same state
    g1 = Gate(0, 0b010)
    g2 = Gate(2, 0b011, 0b010)
    assert not commutes(g1, g2)
    assert commutes_semantic(g1, g2)


# ============================================================================
# SAMPLING TESTS
# ============================================================================

def test_width_one_forces_negation(rng):
    for _ in range(20):
        assert sample_gate(1, rng).rank == 0


def test_rank_two_distribution(rng):
    for _ in range(50):
        g = sample_gate(3, rng, {2: 1.0})
        assert g.rank == 2
        assert g.polarity & ~g.controls == 0
        assert not g.controls >> g.target & 1


def test_impossible_rank_rejected(rng):
    with pytest.raises(ParameterError):
        sample_gate(2, rng, {3: 1.0})


def test_sampling_is_deterministic():
    first = sample_circuit(8, 30, stream(99, "replay"))
    second = sample_circuit(8, 30, stream(99, "replay"))
    other = sample_circuit(8, 30, stream(99, "other"))
    assert first == second
    assert first != other
