"""
Circuit Library Tests
Boolean lowering, arithmetic circuits against integer oracles, decomposition and padding
"""
import pytest
from pathlib import Path
import sys

# Add backend to path
sys.path.insert(0, str(Path(__file__).parent.parent / "backend"))

from core.circuits import (
    BoolOp,
    FunctionKind,
    FunctionSpec,
    build_function_circuit,
    decode_outputs,
    decompose_multicontrolled,
    function_oracle,
    identity_padding,
    input_state,
    lower_boolean,
    pad_to_gate_count,
    shell_gate_count,
    uniform_width,
    verify_circuit,
)
from core.errors import ParameterError
from core.gates import Circuit, Gate, mcx, run_state
from core.randomness import stream


def spec_of(kind, width, **extra):
    return FunctionSpec(kind=FunctionKind(kind), width=width, **extra)


@pytest.fixture
def rng():
    return stream(31, "tests", "circuits")


# ============================================================================
# BOOLEAN LOWERING TESTS
# ============================================================================

def test_not_lowering():
    gates = lower_boolean(BoolOp(op="NOT", inputs=(0,)))
    c = Circuit(1, tuple(gates))
    assert run_state(c, 0) == 1
    assert run_state(c, 1) == 0


def test_and_lowering_truth_table():
    c = Circuit(3, tuple(lower_boolean(BoolOp(op="AND", inputs=(0, 1), ancilla=2))))
    for a in range(2):
        for b in range(2):
            out = run_state(c, a | b << 1)
            assert out >> 2 & 1 == a & b
            assert out & 0b11 == a | b << 1


def test_or_lowering_with_cleanup():
    c = Circuit(3, tuple(lower_boolean(BoolOp(op="OR", inputs=(0, 1), ancilla=2, cleanup=True))))
    for a in range(2):
        for b in range(2):
            out = run_state(c, a | b << 1)
            assert out >> 2 & 1 == a | b
            assert out & 0b11 == a | b << 1


def test_or_lowering_without_cleanup_complements_inputs():
    gates = lower_boolean(BoolOp(op="OR", inputs=(0, 1), ancilla=2))
    assert len(gates) == 4
    c = Circuit(3, tuple(gates))
    for a in range(2):
        for b in range(2):
            out = run_state(c, a | b << 1)
            assert out >> 2 & 1 == a | b
            assert out & 0b11 == (1 - a) | (1 - b) << 1


def test_bool_op_bindings_checked():
    with pytest.raises(ValueError):
        BoolOp(op="AND", inputs=(0, 1))
    with pytest.raises(ValueError):
        BoolOp(op="OR", inputs=(0, 1), ancilla=1)
    with pytest.raises(ValueError):
        BoolOp(op="NOT", inputs=(0, 1))


# ============================================================================
# ARITHMETIC CIRCUIT TESTS
# ============================================================================

@pytest.mark.parametrize("kind", ["add", "sub", "compare"])
@pytest.mark.parametrize("width", [1, 2, 3, 5, 8])
def test_linear_circuits_exhaustive(kind, width):
    spec = spec_of(kind, width)
    report = verify_circuit(build_function_circuit(spec), spec)
    assert report.mode == "exhaustive"
    assert report.checked == 1 << (2 * width)
    assert report.ok, report.mismatches


@pytest.mark.parametrize("kind", ["mul", "div", "sum_of_squares", "monomial_power"])
@pytest.mark.parametrize("width", [1, 2, 3, 4])
def test_nonlinear_circuits_exhaustive(kind, width):
    spec = spec_of(kind, width)
    report = verify_circuit(build_function_circuit(spec), spec)
    assert report.ok, report.mismatches
    assert report.ancilla_ok


@pytest.mark.parametrize("exponent", [1, 2, 4])
def test_monomial_power_other_exponents(exponent):
    spec = spec_of("monomial_power", 3, exponent=exponent)
    assert verify_circuit(build_function_circuit(spec), spec).ok


def test_wide_adder_sampled():
    spec = spec_of("add", 64)
    report = verify_circuit(build_function_circuit(spec), spec, samples=200, seed=3)
    assert report.mode == "sampled"
    assert report.checked == 200
    assert report.ok


def test_circuit_in_shell_width():
    spec = spec_of("mul", 3)
    total = uniform_width(3)
    c = build_function_circuit(spec, total)
    assert c.width == total
    assert verify_circuit(c, spec).ok


def test_shell_too_narrow():
    with pytest.raises(ParameterError):
        build_function_circuit(spec_of("sum_of_squares", 4), 10)


def test_corrupted_circuit_reports_mismatches():
    spec = spec_of("add", 3)
    c = build_function_circuit(spec)
    middle = len(c) // 2
    broken = Circuit(c.width, c.gates[:middle] + c.gates[middle + 1:])
    report = verify_circuit(broken, spec)
    assert not report.ok
    assert 0 < len(report.mismatches) <= 10


def test_division_by_zero_convention():
    spec = spec_of("div", 3)
    assert function_oracle(spec, 5, 0) == {"quotient": 7, "remainder": 5}
    final = run_state(build_function_circuit(spec), input_state(spec, 5, 0))
    assert decode_outputs(spec, final) == {"quotient": 7, "remainder": 5}


def test_oracle_values():
    assert function_oracle(spec_of("add", 4), 9, 8) == {"sum": 1, "carry": 1}
    assert function_oracle(spec_of("sub", 4), 3, 5) == {"difference": 14, "borrow": 1}
    assert function_oracle(spec_of("compare", 4), 7, 7) == {"eq": 1, "gt": 0}
    assert function_oracle(spec_of("sum_of_squares", 4), 3, 4) == {"sum": 25}
    assert function_oracle(spec_of("monomial_power", 4), 3) == {"power": 27 % 16}


def test_operand_width_limit():
    with pytest.raises(ValueError):
        spec_of("add", 65)


def test_layout_widths():
    L = 5
    assert spec_of("add", L).layout().width == 2 * L + 2
    assert spec_of("mul", L).layout().width == 4 * L + 1
    assert spec_of("compare", L).layout().width == 2 * L + 3
    assert uniform_width(L) == 6 * L + 3
    assert spec_of("mul", L).layout().output_map == tuple(range(2 * L, 4 * L))


def test_layout_ancilla_counts():
    L = 5
    assert spec_of("add", L).layout().ancilla_count == 2
    assert spec_of("compare", L).layout().ancilla_count == 3
    assert spec_of("mul", L).layout().ancilla_count == 2 * L + 1


# ============================================================================
# DECOMPOSITION TESTS
# ============================================================================

def test_decompose_multicontrolled_equivalence():
    g = mcx((0, 1, 2, 3), 4, white=(1, 3))
    ancillas = (5, 6)
    gates = decompose_multicontrolled(g, ancillas)
    assert len(gates) == 2 * 4 - 3
    assert all(x.rank <= 2 for x in gates)
    original = Circuit(7, (g,))
    lowered = Circuit(7, tuple(gates))
    for state in range(1 << 5):
        assert run_state(lowered, state) == run_state(original, state)


def test_decompose_small_gate_unchanged():
    g = mcx((0, 1), 2)
    assert decompose_multicontrolled(g, ()) == [g]


def test_decompose_needs_enough_clean_ancillas():
    g = mcx((0, 1, 2, 3), 4)
    with pytest.raises(ParameterError):
        decompose_multicontrolled(g, (5,))
    with pytest.raises(ParameterError):
        decompose_multicontrolled(g, (3, 5))


# ============================================================================
# PADDING TESTS
# ============================================================================

@pytest.mark.parametrize("count", [0, 2, 3, 7, 10])
def test_identity_padding_is_identity(rng, count):
    gates = identity_padding(5, count, rng)
    assert len(gates) == count
    c = Circuit(5, tuple(gates))
    for state in range(32):
        assert run_state(c, state) == state


def test_single_padding_gate_impossible(rng):
    with pytest.raises(ParameterError):
        identity_padding(5, 1, rng)


def test_pad_to_gate_count_keeps_function(rng):
    spec = spec_of("compare", 3)
    c = build_function_circuit(spec)
    padded = pad_to_gate_count(c, len(c) + 9, rng)
    assert len(padded) == len(c) + 9
    assert verify_circuit(padded, spec).ok
    with pytest.raises(ParameterError):
        pad_to_gate_count(c, len(c) - 1, rng)


def test_shell_gate_count_covers_every_kind(rng):
    L = 2
    total = uniform_width(L)
    target = shell_gate_count(L)
    for kind in FunctionKind:
        spec = spec_of(kind.value, L)
        c = build_function_circuit(spec, total)
        assert target - len(c) >= 2
        padded = pad_to_gate_count(c, target, rng)
        assert len(padded) == target
        assert verify_circuit(padded, spec).ok


def test_gate_polarity_helpers():
    g = Gate(2, 0b011, 0b001)
    assert g.fires(0b010)
    assert not g.fires(0b011)
