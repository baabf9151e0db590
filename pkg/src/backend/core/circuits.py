"""
Reversible Circuit Library
Builds the elementary-function circuits evaluated under cryptovaluation, lowers
Boolean operations to gates and checks circuits against integer arithmetic.

Register conventions: operand a occupies wires 0..L-1 and operand b wires L..2L-1,
least significant bit first. Every other wire starts at 0.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from config.settings import settings
from core.errors import ParameterError
from core.gates import Circuit, Gate, mcx, negation, run_state

logger = logging.getLogger(__name__)

EXHAUSTIVE_INPUT_BITS = 20
DEFAULT_SAMPLES = 1000


class FunctionKind(str, Enum):
    ADD = "add"
    SUB = "sub"
    MUL = "mul"
    DIV = "div"
    COMPARE = "compare"
    SUM_OF_SQUARES = "sum_of_squares"
    MONOMIAL_POWER = "monomial_power"


class FunctionSpec(BaseModel):
    """Elementary function over L-bit unsigned operands"""

    kind: FunctionKind
    width: int = Field(..., ge=1, description="Operand width L in bits")
    exponent: int = Field(default_factory=lambda: settings.MONOMIAL_POWER_EXPONENT, ge=1)

    @model_validator(mode="after")
    def _check_width(self) -> "FunctionSpec":
        if self.width > settings.MAX_OPERAND_WIDTH:
            raise ParameterError(
                f"operand width {self.width} exceeds the supported maximum {settings.MAX_OPERAND_WIDTH}"
            )
        return self

    @property
    def arity(self) -> int:
        return 1 if self.kind is FunctionKind.MONOMIAL_POWER else 2

    @property
    def input_bits(self) -> int:
        return self.arity * self.width

    def layout(self) -> "Layout":
        return _LAYOUTS[self.kind](self)


class BoolOp(BaseModel):
    """NOT on one wire, or AND/OR of two wires into a fresh ancilla"""

    op: Literal["NOT", "AND", "OR"]
    inputs: Tuple[int, ...]
    ancilla: Optional[int] = None
    cleanup: bool = False

    @model_validator(mode="after")
    def _check_bindings(self) -> "BoolOp":
        if self.op == "NOT":
            if len(self.inputs) != 1:
                raise ParameterError("NOT takes exactly one wire")
        else:
            if len(self.inputs) != 2 or self.ancilla is None:
                raise ParameterError(f"{self.op} takes two input wires and an ancilla")
            if len({*self.inputs, self.ancilla}) != 3:
                raise ParameterError(f"{self.op} wires must be distinct")
        return self


@dataclass(frozen=True)
class Layout:
    """
    Wire map of a function circuit

    inputs/outputs map register names to wire tuples (LSB first). `restored` wires
    return to 0 on every input, `preserved` input registers come back unchanged,
    `garbage` wires may hold leftovers.
    """

    width: int
    inputs: Dict[str, Tuple[int, ...]]
    outputs: Dict[str, Tuple[int, ...]]
    restored: Tuple[int, ...] = ()
    preserved: Tuple[str, ...] = ()
    garbage: Tuple[int, ...] = ()

    @property
    def ancilla_count(self) -> int:
        used = set()
        for wires in self.inputs.values():
            used.update(wires)
        return self.width - len(used)

    @property
    def output_map(self) -> Tuple[int, ...]:
        wires: List[int] = []
        for register in self.outputs.values():
            wires.extend(register)
        return tuple(wires)


def _range(start: int, count: int) -> Tuple[int, ...]:
    return tuple(range(start, start + count))


# ============================================================================
# BOOLEAN LOWERING
# ============================================================================

def lower_boolean(op: BoolOp) -> List[Gate]:
    """
    Translate a Boolean operation into elementary gates

    Args:
        op: NOT, AND or OR with its wire bindings (ancilla starts at 0)

    Returns:
        Gate list in execution order
    """
    if op.op == "NOT":
        return [negation(op.inputs[0])]
    a, b = op.inputs
    if op.op == "AND":
        return [mcx((a, b), op.ancilla)]
    # a OR b = 1 + (a + 1)(b + 1); the inputs are left complemented unless cleaned up
    gates = [negation(a), negation(b), negation(op.ancilla), mcx((a, b), op.ancilla)]
    if op.cleanup:
        gates += [negation(a), negation(b)]
    return gates


# ============================================================================
# BUILDING BLOCKS
# ============================================================================

class _Builder:
    """Gate accumulator with optional extra controls applied to every gate"""

    def __init__(self):
        self.gates: List[Gate] = []

    def gate(self, target: int, controls: Sequence[int] = (), extra: int = 0, extra_white: int = 0) -> None:
        mask = extra
        for wire in controls:
            mask |= 1 << wire
        self.gates.append(Gate(target, mask, extra_white))

    def ripple_add(
        self,
        addend: Sequence[int],
        target: Sequence[int],
        carry_in: int,
        carry_out: Optional[int] = None,
        extra: int = 0,
        extra_white: int = 0,
    ) -> None:
        """
        target += addend (mod 2^len), majority/unmajority ripple carry

        The addend register and carry_in come back unchanged; carry_out, when
        given, is XORed with the final carry.
        """
        if len(addend) != len(target):
            raise ParameterError("adder registers must have the same width")
        carries = [carry_in] + list(addend[:-1])
        for c, b, a in zip(carries, target, addend):
            self.gate(b, (a,), extra, extra_white)
            self.gate(c, (a,), extra, extra_white)
            self.gate(a, (c, b), extra, extra_white)
        if carry_out is not None:
            self.gate(carry_out, (addend[-1],), extra, extra_white)
        for c, b, a in reversed(list(zip(carries, target, addend))):
            self.gate(a, (c, b), extra, extra_white)
            self.gate(c, (a,), extra, extra_white)
            self.gate(b, (c,), extra, extra_white)

    def majority_chain(self, addend: Sequence[int], target: Sequence[int], carry_in: int) -> List[Gate]:
        """Carry computation only; the final carry ends up on addend[-1]"""
        start = len(self.gates)
        carries = [carry_in] + list(addend[:-1])
        for c, b, a in zip(carries, target, addend):
            self.gate(b, (a,))
            self.gate(c, (a,))
            self.gate(a, (c, b))
        return self.gates[start:]

    def negate_all(self, wires: Sequence[int]) -> None:
        for wire in wires:
            self.gate(wire)

    def copy(self, source: Sequence[int], dest: Sequence[int]) -> None:
        for s, d in zip(source, dest):
            self.gate(d, (s,))

    def circuit(self, width: int) -> Circuit:
        return Circuit(width, tuple(self.gates))


# ============================================================================
# FUNCTION LAYOUTS AND CONSTRUCTIONS
# ============================================================================

def _operands(L: int) -> Dict[str, Tuple[int, ...]]:
    return {"a": _range(0, L), "b": _range(L, L)}


def _layout_add(spec: FunctionSpec) -> Layout:
    L = spec.width
    c0, z = 2 * L, 2 * L + 1
    return Layout(
        width=2 * L + 2, inputs=_operands(L),
        outputs={"sum": _range(L, L), "carry": (z,)},
        restored=(c0,), preserved=("a",),
    )


def _build_add(spec: FunctionSpec, layout: Layout, builder: _Builder) -> None:
    L = spec.width
    builder.ripple_add(layout.inputs["a"], layout.inputs["b"], 2 * L, 2 * L + 1)


def _layout_sub(spec: FunctionSpec) -> Layout:
    L = spec.width
    c0, z = 2 * L, 2 * L + 1
    return Layout(
        width=2 * L + 2, inputs=_operands(L),
        outputs={"difference": _range(0, L), "borrow": (z,)},
        restored=(c0,), preserved=("b",),
    )


def _build_sub(spec: FunctionSpec, layout: Layout, builder: _Builder) -> None:
    # a - b = NOT(NOT a + b); the carry of NOT a + b is set exactly when b > a
    L = spec.width
    a, b = layout.inputs["a"], layout.inputs["b"]
    builder.negate_all(a)
    builder.ripple_add(b, a, 2 * L, 2 * L + 1)
    builder.negate_all(a)


def _layout_mul(spec: FunctionSpec) -> Layout:
    L = spec.width
    product = _range(2 * L, 2 * L)
    c0 = 4 * L
    return Layout(
        width=4 * L + 1, inputs=_operands(L),
        outputs={"product": product},
        restored=(c0,), preserved=("a", "b"),
    )


def _build_mul(spec: FunctionSpec, layout: Layout, builder: _Builder) -> None:
    # shift-and-add: for each a_i add b into product[i:i+L], carry into product[i+L]
    L = spec.width
    a, b = layout.inputs["a"], layout.inputs["b"]
    product = layout.outputs["product"]
    c0 = 4 * L
    for i in range(L):
        builder.ripple_add(b, product[i:i + L], c0, product[i + L], extra=1 << a[i])


def _layout_div(spec: FunctionSpec) -> Layout:
    L = spec.width
    high = _range(2 * L, L)
    bz, c0 = 3 * L, 3 * L + 1
    quotient = _range(3 * L + 2, L)
    return Layout(
        width=4 * L + 2, inputs=_operands(L),
        outputs={"quotient": quotient, "remainder": _range(0, L)},
        restored=high + (bz, c0), preserved=("b",),
    )


def _build_div(spec: FunctionSpec, layout: Layout, builder: _Builder) -> None:
    """
    Restoring division of a by b

    The working register is a (low half) followed by L zero wires. Each step
    subtracts the zero-extended divisor from an (L+1)-bit window, reads the sign
    into the quotient bit and adds the divisor back when the quotient bit is 0.
    A zero divisor yields quotient 2^L - 1 and remainder a.
    """
    L = spec.width
    a, b = layout.inputs["a"], layout.inputs["b"]
    work = a + _range(2 * L, L)
    divisor = b + (3 * L,)
    c0 = 3 * L + 1
    quotient = layout.outputs["quotient"]
    for i in reversed(range(L)):
        window = work[i:i + L + 1]
        builder.negate_all(window)
        builder.ripple_add(divisor, window, c0)
        builder.negate_all(window)
        builder.gate(quotient[i], (window[-1],))
        builder.gate(quotient[i])
        q_bit = 1 << quotient[i]
        builder.ripple_add(divisor, window, c0, extra=q_bit, extra_white=q_bit)


def _layout_compare(spec: FunctionSpec) -> Layout:
    L = spec.width
    eq, gt, c0 = 2 * L, 2 * L + 1, 2 * L + 2
    return Layout(
        width=2 * L + 3, inputs=_operands(L),
        outputs={"eq": (eq,), "gt": (gt,)},
        restored=(c0,), preserved=("a", "b"),
    )


def _build_compare(spec: FunctionSpec, layout: Layout, builder: _Builder) -> None:
    L = spec.width
    a, b = layout.inputs["a"], layout.inputs["b"]
    eq, gt, c0 = 2 * L, 2 * L + 1, 2 * L + 2

    # b_i <- NOT(a_i XOR b_i); all ones exactly when a == b
    builder.copy(a, b)
    builder.negate_all(b)
    builder.gate(eq, b)
    builder.negate_all(b)
    builder.copy(a, b)

    # a > b exactly when a + NOT b carries out of L bits
    builder.negate_all(b)
    chain = builder.majority_chain(a, b, c0)
    builder.gate(gt, (a[-1],))
    builder.gates.extend(reversed(chain))
    builder.negate_all(b)


def _layout_sum_of_squares(spec: FunctionSpec) -> Layout:
    L = spec.width
    copy = _range(2 * L, L)
    pad = _range(3 * L, L + 1)
    total = _range(4 * L + 1, 2 * L + 1)
    c0 = 6 * L + 2
    return Layout(
        width=6 * L + 3, inputs=_operands(L),
        outputs={"sum": total},
        restored=copy + pad + (c0,), preserved=("a", "b"),
    )


def _build_sum_of_squares(spec: FunctionSpec, layout: Layout, builder: _Builder) -> None:
    L = spec.width
    copy = _range(2 * L, L)
    pad = _range(3 * L, L + 1)
    total = layout.outputs["sum"]
    c0 = 6 * L + 2
    for operand in (layout.inputs["a"], layout.inputs["b"]):
        builder.copy(operand, copy)
        for i in range(L):
            window = total[i:]
            addend = copy + pad[:len(window) - L]
            builder.ripple_add(addend, window, c0, extra=1 << operand[i])
        builder.copy(operand, copy)


def _power_registers(spec: FunctionSpec) -> List[Tuple[int, ...]]:
    L = spec.width
    return [_range(2 * L + s * L, L) for s in range(spec.exponent)]


def _layout_monomial_power(spec: FunctionSpec) -> Layout:
    L = spec.width
    registers = _power_registers(spec)
    c0 = 2 * L + spec.exponent * L
    garbage: Tuple[int, ...] = ()
    for register in registers[1:-1]:
        garbage += register
    return Layout(
        width=c0 + 1, inputs={"a": _range(0, L), "b": _range(L, L)},
        outputs={"power": registers[-1]},
        restored=registers[0] + (c0,) if spec.exponent > 1 else (c0,),
        preserved=("a", "b"), garbage=garbage,
    )


def _build_monomial_power(spec: FunctionSpec, layout: Layout, builder: _Builder) -> None:
    # P_0 = copy of a, P_s = P_{s-1} * a mod 2^L
    L = spec.width
    a = layout.inputs["a"]
    registers = _power_registers(spec)
    c0 = 2 * L + spec.exponent * L
    builder.copy(a, registers[0])
    for s in range(1, spec.exponent):
        previous, current = registers[s - 1], registers[s]
        for i in range(L):
            builder.ripple_add(previous[:L - i], current[i:], c0, extra=1 << a[i])
    if spec.exponent > 1:
        builder.copy(a, registers[0])


_LAYOUTS: Dict[FunctionKind, Callable[[FunctionSpec], Layout]] = {
    FunctionKind.ADD: _layout_add,
    FunctionKind.SUB: _layout_sub,
    FunctionKind.MUL: _layout_mul,
    FunctionKind.DIV: _layout_div,
    FunctionKind.COMPARE: _layout_compare,
    FunctionKind.SUM_OF_SQUARES: _layout_sum_of_squares,
    FunctionKind.MONOMIAL_POWER: _layout_monomial_power,
}

_BUILDERS = {
    FunctionKind.ADD: _build_add,
    FunctionKind.SUB: _build_sub,
    FunctionKind.MUL: _build_mul,
    FunctionKind.DIV: _build_div,
    FunctionKind.COMPARE: _build_compare,
    FunctionKind.SUM_OF_SQUARES: _build_sum_of_squares,
    FunctionKind.MONOMIAL_POWER: _build_monomial_power,
}


def uniform_width(width: int, exponent: Optional[int] = None) -> int:
    """Shell width shared by every function kind at operand width L"""
    specs = [FunctionSpec(kind=kind, width=width, **({"exponent": exponent} if exponent else {}))
             for kind in FunctionKind]
    return max(spec.layout().width for spec in specs)


def build_function_circuit(spec: FunctionSpec, width: Optional[int] = None) -> Circuit:
    """
    Circuit computing an elementary function

    Args:
        spec: function kind and operand width
        width: total wires; defaults to the kind's own layout width, pass
               uniform_width(L) or larger to place it inside a shared shell

    Returns:
        Circuit in execution order
    """
    layout = spec.layout()
    total = layout.width if width is None else width
    if total < layout.width:
        raise ParameterError(f"{spec.kind.value} at L={spec.width} needs {layout.width} wires, got {total}")
    builder = _Builder()
    _BUILDERS[spec.kind](spec, layout, builder)
    circuit = builder.circuit(total)
    logger.debug(f"Built {spec.kind.value} L={spec.width}: {len(circuit)} gates on {total} wires")
    return circuit


# ============================================================================
# INTEGER ORACLE AND VERIFICATION
# ============================================================================

def function_oracle(spec: FunctionSpec, a: int, b: int = 0) -> Dict[str, int]:
    """Plain integer result of the function, keyed by output register"""
    L = spec.width
    modulus = 1 << L
    kind = spec.kind
    if kind is FunctionKind.ADD:
        return {"sum": (a + b) % modulus, "carry": (a + b) >> L}
    if kind is FunctionKind.SUB:
        return {"difference": (a - b) % modulus, "borrow": int(b > a)}
    if kind is FunctionKind.MUL:
        return {"product": a * b}
    if kind is FunctionKind.DIV:
        if b == 0:
            return {"quotient": modulus - 1, "remainder": a}
        return {"quotient": a // b, "remainder": a % b}
    if kind is FunctionKind.COMPARE:
        return {"eq": int(a == b), "gt": int(a > b)}
    if kind is FunctionKind.SUM_OF_SQUARES:
        return {"sum": a * a + b * b}
    return {"power": pow(a, spec.exponent, modulus)}


def read_register(state: int, wires: Sequence[int]) -> int:
    value = 0
    for position, wire in enumerate(wires):
        value |= (state >> wire & 1) << position
    return value


def write_register(state: int, wires: Sequence[int], value: int) -> int:
    for position, wire in enumerate(wires):
        if value >> position & 1:
            state |= 1 << wire
        else:
            state &= ~(1 << wire)
    return state


def input_state(spec: FunctionSpec, a: int, b: int = 0) -> int:
    """Basis state holding the operands, zeros elsewhere"""
    layout = spec.layout()
    state = write_register(0, layout.inputs["a"], a)
    if spec.arity == 2:
        state = write_register(state, layout.inputs["b"], b)
    return state


def decode_outputs(spec: FunctionSpec, state: int) -> Dict[str, int]:
    layout = spec.layout()
    return {name: read_register(state, wires) for name, wires in layout.outputs.items()}


class VerifyReport(BaseModel):
    kind: str
    width: int
    mode: str
    checked: int = 0
    passed: int = 0
    ancilla_ok: bool = True
    mismatches: List[Dict[str, object]] = Field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.passed == self.checked and self.ancilla_ok


def _operand_pairs(spec: FunctionSpec, mode: str, samples: int, seed: int):
    L = spec.width
    if mode == "exhaustive":
        for a in range(1 << L):
            for b in (range(1 << L) if spec.arity == 2 else (0,)):
                yield a, b
        return
    rng = np.random.default_rng(seed)
    weights = 1 << np.arange(L, dtype=object)
    for _ in range(samples):
        bits = rng.integers(0, 2, size=(2, L))
        a = int(np.dot(bits[0].astype(object), weights))
        b = int(np.dot(bits[1].astype(object), weights)) if spec.arity == 2 else 0
        yield a, b


def verify_circuit(
    c: Circuit,
    spec: FunctionSpec,
    mode: Optional[str] = None,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    max_reported: int = 10,
) -> VerifyReport:
    """
    Run a circuit against the integer oracle

    Args:
        c: candidate circuit (at least the layout width)
        spec: function it should compute
        mode: "exhaustive" or "sampled"; defaults to exhaustive when the inputs fit in 20 bits
        samples: number of random operand pairs in sampled mode
        seed: sampling seed
        max_reported: cap on listed mismatches

    Returns:
        VerifyReport with pass counts, mismatches and the ancilla verdict
    """
    layout = spec.layout()
    if mode is None:
        mode = "exhaustive" if spec.input_bits <= EXHAUSTIVE_INPUT_BITS else "sampled"
    if mode not in ("exhaustive", "sampled"):
        raise ParameterError(f"unknown verification mode {mode!r}")
    report = VerifyReport(kind=spec.kind.value, width=spec.width, mode=mode)
    for a, b in _operand_pairs(spec, mode, samples, seed):
        final = run_state(c, input_state(spec, a, b))
        got = decode_outputs(spec, final)
        expected = function_oracle(spec, a, b)
        restored = all(not final >> wire & 1 for wire in layout.restored)
        restored = restored and all(
            read_register(final, layout.inputs[name]) == {"a": a, "b": b}[name] for name in layout.preserved
        )
        report.checked += 1
        if got == expected:
            report.passed += 1
        elif len(report.mismatches) < max_reported:
            report.mismatches.append({"a": a, "b": b, "expected": expected, "got": got})
        if not restored:
            report.ancilla_ok = False
    if not report.ok:
        logger.warning(
            f"{spec.kind.value} L={spec.width}: {report.checked - report.passed} mismatches, "
            f"ancilla ok={report.ancilla_ok}"
        )
    return report


# ============================================================================
# MULTI-CONTROLLED DECOMPOSITION
# ============================================================================

def decompose_multicontrolled(g: Gate, ancillas: Sequence[int]) -> List[Gate]:
    """
    Rewrite a rank-t gate as a V-chain of 2t - 3 Toffoli gates

    Args:
        g: gate to decompose; polarity is kept on the original control wires
        ancillas: zero-initialised wires disjoint from g, at least t - 2 of them

    Returns:
        Gates of rank <= 2 whose composite equals g and restores every ancilla
    """
    if g.rank <= 2:
        return [g]
    controls = [i for i in range(g.controls.bit_length()) if g.controls >> i & 1]
    needed = g.rank - 2
    pool = list(ancillas)[:needed]
    if len(pool) < needed:
        raise ParameterError(f"rank-{g.rank} gate needs {needed} ancillas, got {len(ancillas)}")
    if any(g.wires >> wire & 1 for wire in pool) or len(set(pool)) != needed:
        raise ParameterError("ancillas must be distinct and disjoint from the gate's wires")

    def control_gate(target: int, pair: Tuple[int, int]) -> Gate:
        mask = (1 << pair[0]) | (1 << pair[1])
        return Gate(target, mask, g.polarity & mask)

    compute = [control_gate(pool[0], (controls[0], controls[1]))]
    for j in range(1, needed):
        compute.append(control_gate(pool[j], (controls[j + 1], pool[j - 1])))
    last = control_gate(g.target, (controls[-1], pool[-1]))
    return compute + [last] + list(reversed(compute))


# ============================================================================
# BLINDNESS PADDING
# ============================================================================

def identity_padding(width: int, count: int, rng: np.random.Generator) -> List[Gate]:
    """
    `count` random gates whose composite is the identity

    Pairs of equal gates cancel; an odd remainder uses the three-gate identity
    Gate(t, C) Gate(t, C + c) Gate(t, C + c with c white).
    """
    if count == 0:
        return []
    if count == 1 or width < 2:
        raise ParameterError(f"cannot pad {count} gates on {width} wires with an identity")
    gates: List[Gate] = []
    if count % 2:
        target, control = (int(x) for x in rng.choice(width, size=2, replace=False))
        bit = 1 << control
        gates += [Gate(target), Gate(target, bit), Gate(target, bit, bit)]
        count -= 3
    for _ in range(count // 2):
        target, control = (int(x) for x in rng.choice(width, size=2, replace=False))
        gate = Gate(target, 1 << control)
        gates += [gate, gate]
    return gates


def pad_to_gate_count(c: Circuit, gate_count: int, rng: np.random.Generator) -> Circuit:
    """Insert identity-acting gates at a random position until the circuit has `gate_count` gates"""
    missing = gate_count - len(c)
    if missing < 0:
        raise ParameterError(f"circuit already has {len(c)} gates, more than {gate_count}")
    if missing == 0:
        return c
    padding = identity_padding(c.width, missing, rng)
    position = int(rng.integers(0, len(c) + 1))
    return Circuit(c.width, c.gates[:position] + tuple(padding) + c.gates[position:])


def shell_gate_count(width: int, total_width: Optional[int] = None, exponent: Optional[int] = None) -> int:
    """
    Common padded gate count for every function kind that fits the shell

    Two above the largest kind, so every circuit receives some padding.
    """
    total = total_width or uniform_width(width, exponent)
    extra = {"exponent": exponent} if exponent else {}
    counts = []
    for kind in FunctionKind:
        spec = FunctionSpec(kind=kind, width=width, **extra)
        if spec.layout().width <= total:
            counts.append(len(build_function_circuit(spec, total)))
    if not counts:
        raise ParameterError(f"no function kind at L={width} fits {total} wires")
    return 2 + max(counts)
