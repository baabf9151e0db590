"""
Elementary reversible gates and circuits
Multi-controlled NOT gates with polarity, their action on basis states and on ANF
polynomials, and the circuit/polynomial duality.

Circuits are stored in execution order: gates[0] acts on a state first. Polynomial
generation walks the sequence backwards, which is the only place the two orders meet.
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from config.settings import settings
from core.anf import Anf, PolySet
from core.bits import BitsLike, as_int
from core.errors import BudgetExceededError, DimensionError, ParameterError

logger = logging.getLogger(__name__)

# 20% rank <= 1, 50% rank 2, 30% rank 3-4
DEFAULT_RANK_DISTRIBUTION: Dict[int, float] = {0: 0.10, 1: 0.10, 2: 0.50, 3: 0.15, 4: 0.15}
MAX_SAMPLED_POLARITY = 4

_RANK_NAMES = {0: "NOT", 1: "CNOT", 2: "TOF"}


def _mask_of(wires: Iterable[int]) -> int:
    mask = 0
    for wire in wires:
        mask |= 1 << int(wire)
    return mask


def _wires_of(mask: int) -> List[int]:
    return [i for i in range(mask.bit_length()) if mask >> i & 1]


@lru_cache(maxsize=4096)
def _expansion(controls: int, polarity: int) -> Tuple[int, ...]:
    """Monomial masks of prod_{i in controls} (x_i + polarity_i)"""
    masks = []
    subset = polarity
    while True:
        masks.append(controls & ~subset)
        if subset == 0:
            break
        subset = (subset - 1) & polarity
    return tuple(sorted(masks))


@dataclass(frozen=True)
class Gate:
    """
    Multi-controlled NOT: flips `target` when every control wire i equals
    NOT polarity_i (black dot: polarity bit 0, white dot: polarity bit 1)
    """

    target: int
    controls: int = 0
    polarity: int = 0

    def __post_init__(self):
        if self.target < 0 or self.controls < 0 or self.polarity < 0:
            raise ParameterError("gate wires must be non-negative")
        if self.controls >> self.target & 1:
            raise ParameterError(f"target wire {self.target} is also a control")
        if self.polarity & ~self.controls:
            raise ParameterError("polarity bits must sit on control wires")

    @property
    def rank(self) -> int:
        return self.controls.bit_count()

    @property
    def wires(self) -> int:
        """Mask of every wire the gate touches"""
        return self.controls | (1 << self.target)

    @property
    def max_wire(self) -> int:
        return self.wires.bit_length() - 1

    def fires(self, state: int) -> bool:
        return (state ^ self.polarity) & self.controls == self.controls

    def act(self, state: int) -> int:
        """Apply the gate to an integer state"""
        if (state ^ self.polarity) & self.controls == self.controls:
            return state ^ (1 << self.target)
        return state

    def expansion(self) -> Tuple[int, ...]:
        return _expansion(self.controls, self.polarity)

    def __str__(self) -> str:
        name = _RANK_NAMES.get(self.rank, f"MCX{self.rank}")
        if not self.controls:
            return f"{name}({self.target + 1})"
        ctrl = ",".join(
            ("~" if self.polarity >> i & 1 else "") + str(i + 1) for i in _wires_of(self.controls)
        )
        return f"{name}({ctrl}->{self.target + 1})"


def negation(target: int) -> Gate:
    return Gate(target)


def cnot(control: int, target: int, white: bool = False) -> Gate:
    bit = 1 << control
    return Gate(target, bit, bit if white else 0)


def toffoli(control_a: int, control_b: int, target: int) -> Gate:
    return Gate(target, (1 << control_a) | (1 << control_b))


def mcx(controls: Sequence[int], target: int, white: Sequence[int] = ()) -> Gate:
    """Multi-controlled NOT over wire indices; `white` lists controls conditioned on 0"""
    return Gate(target, _mask_of(controls), _mask_of(white))


@dataclass(frozen=True)
class Circuit:
    """Ordered gate sequence over `width` wires, in execution order"""

    width: int
    gates: Tuple[Gate, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.width < 0:
            raise DimensionError("circuit width must be non-negative")
        for position, gate in enumerate(self.gates):
            if gate.max_wire >= self.width:
                raise DimensionError(
                    f"gate {position} ({gate}) touches wire {gate.max_wire + 1} of a {self.width}-wire circuit"
                )

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    def inverse(self) -> "Circuit":
        return Circuit(self.width, tuple(reversed(self.gates)))

    def concat(self, *others: "Circuit") -> "Circuit":
        """Execute self, then each of `others` in turn"""
        gates = list(self.gates)
        for other in others:
            if other.width != self.width:
                raise DimensionError(f"cannot concatenate width {other.width} onto width {self.width}")
            gates.extend(other.gates)
        return Circuit(self.width, tuple(gates))

    def widened(self, width: int) -> "Circuit":
        """Same gates on a wider register (identity on the new wires)"""
        if width < self.width:
            raise DimensionError(f"cannot narrow a {self.width}-wire circuit to {width}")
        return Circuit(width, self.gates)


# ============================================================================
# STATE ACTION
# ============================================================================

def apply_to_state(g: Gate, a: BitsLike, width: int) -> int:
    """
    Act on a basis state

    Args:
        g: gate
        a: bit vector of `width` bits
        width: register size

    Returns:
        New state as an int (bit i = wire i)
    """
    if g.max_wire >= width:
        raise DimensionError(f"gate {g} does not fit a {width}-wire register")
    return g.act(as_int(a, width, "state"))


def run_state(c: Circuit, a: BitsLike) -> int:
    """Fold the gates over a state in execution order"""
    state = as_int(a, c.width, "state")
    for gate in c.gates:
        if (state ^ gate.polarity) & gate.controls == gate.controls:
            state ^= 1 << gate.target
    return state


def inverse_circuit(c: Circuit) -> Circuit:
    """Every elementary gate is an involution, so the inverse is the reversed sequence"""
    return c.inverse()


# ============================================================================
# POLYNOMIAL ACTION
# ============================================================================

def _substitute_gate(g: Gate, terms: frozenset) -> Tuple[frozenset, int]:
    """Apply x_r <- x_r + prod(x_i + zeta_i) to a monomial set; also return the work done"""
    bit = 1 << g.target
    affected = [m for m in terms if m & bit]
    if not affected:
        return terms, 0
    expansion = g.expansion()
    out = set(terms)
    for mask in affected:
        base = mask & ~bit
        for extra in expansion:
            new = base | extra
            if new in out:
                out.remove(new)
            else:
                out.add(new)
    return frozenset(out), len(affected) * len(expansion)


def apply_to_poly(g: Gate, p: Anf) -> Anf:
    """
    Substitute the gate into a polynomial

    For every point a: apply_to_poly(g, p)(a) == p(apply_to_state(g, a)).

    Args:
        g: gate
        p: polynomial whose variable count equals the register width

    Returns:
        Transformed polynomial
    """
    if g.max_wire >= p.nvars:
        raise DimensionError(f"gate {g} does not fit a polynomial over {p.nvars} variables")
    if not p.support >> g.target & 1:
        return p
    terms, _ = _substitute_gate(g, p.monomials)
    return Anf.from_terms(p.nvars, terms)


def append_to_polys(g: Gate, polys: Sequence[Anf], budget: Optional[int] = None) -> Optional[Anf]:
    """
    New target polynomial when g runs after the map described by `polys`

    polys[i] is wire i as a polynomial of the circuit input. The target becomes
    polys[t] + prod(polys[c] + zeta_c) over the controls c.

    Args:
        g: gate appended at the end of the circuit
        polys: current output polynomials, one per wire
        budget: skip the product when its size bound already passes this cap

    Returns:
        The target's new polynomial, or None when the bound exceeds the budget
    """
    if g.max_wire >= len(polys):
        raise DimensionError(f"gate {g} does not fit {len(polys)} polynomials")
    current = polys[g.target]
    factors = []
    bound = 1
    for wire in _wires_of(g.controls):
        terms = polys[wire].monomials
        if g.polarity >> wire & 1:
            terms = terms ^ {0}
        if not terms:
            return current
        factors.append(terms)
        bound *= len(terms)
    if budget is not None and len(current) + bound > budget:
        return None

    product = {0}
    for terms in factors:
        out: set = set()
        for left in product:
            for right in terms:
                mask = left | right
                if mask in out:
                    out.remove(mask)
                else:
                    out.add(mask)
        product = out
    return Anf.from_terms(current.nvars, current.monomials ^ frozenset(product))


def transform_polynomial(
    c: Circuit,
    p: Anf,
    budget: Optional[int] = None,
    where: str = "polynomial",
) -> Tuple[Anf, int]:
    """
    Push a polynomial through a whole circuit (c |- p)

    Gates are substituted in reverse execution order, so the result evaluated at a
    equals p evaluated at run_state(c, a).

    Args:
        c: circuit in execution order
        p: polynomial over c.width variables
        budget: optional monomial cap on the result; intermediate polynomials may
            grow to INTERMEDIATE_BUDGET_FACTOR times it before cancelling
        where: label used in budget errors

    Returns:
        Tuple of (transformed polynomial, work), where work counts one step per
        gate visited plus one per monomial created or cancelled
    """
    if p.nvars != c.width:
        raise DimensionError(f"polynomial over {p.nvars} variables, circuit has {c.width} wires")
    terms = p.monomials
    support = p.support
    work = len(c.gates)
    cap = None if budget is None else budget * settings.INTERMEDIATE_BUDGET_FACTOR
    for gate in reversed(c.gates):
        if not support >> gate.target & 1:
            continue
        terms, cost = _substitute_gate(gate, terms)
        work += cost
        support |= gate.controls
        if cap is not None and len(terms) > cap:
            raise BudgetExceededError(where, len(terms), cap)
    if budget is not None and len(terms) > budget:
        raise BudgetExceededError(where, len(terms), budget)
    return Anf.from_terms(c.width, terms), work


def _wire_polynomial(c: Circuit, wire: int, budget: Optional[int], where: str) -> Tuple[Anf, int]:
    return transform_polynomial(c, Anf.variable(c.width, wire), budget, f"{where}, output {wire + 1}")


def generate_polynomials_with_cost(
    c: Circuit,
    budget: Optional[int] = None,
    jobs: int = 1,
    where: str = "circuit",
) -> Tuple[PolySet, int]:
    """
    Generate the polynomial tuple of a circuit and count monomial operations

    Args:
        c: circuit in execution order
        budget: optional per-polynomial monomial cap
        jobs: joblib workers across the independent output polynomials
        where: label used in budget errors

    Returns:
        Tuple of (PolySet of c.width polynomials, total work of transform_polynomial)
    """
    if jobs > 1 and c.width > 1:
        results = Parallel(n_jobs=jobs, backend=settings.JOBLIB_BACKEND)(
            delayed(_wire_polynomial)(c, wire, budget, where) for wire in range(c.width)
        )
    else:
        results = [_wire_polynomial(c, wire, budget, where) for wire in range(c.width)]
    polys = [poly for poly, _ in results]
    work = sum(cost for _, cost in results)
    return PolySet(polys, c.width), work


def generate_polynomials(c: Circuit, budget: Optional[int] = None, jobs: int = 1) -> PolySet:
    """
    The ANF tuple of the Boolean map computed by c

    Evaluating the tuple at a equals run_state(c, a) for every a.
    """
    polys, _ = generate_polynomials_with_cost(c, budget=budget, jobs=jobs)
    return polys


# ============================================================================
# COMMUTATION
# ============================================================================

def commutes(g1: Gate, g2: Gate, width: Optional[int] = None) -> bool:
    """
    Syntactic commutation rule: two gates fail to commute when either target
    is a control of the other; polarity is ignored
    """
    if width is not None and max(g1.max_wire, g2.max_wire) >= width:
        raise DimensionError(f"gates do not fit a {width}-wire register")
    if g2.controls >> g1.target & 1:
        return False
    if g1.controls >> g2.target & 1:
        return False
    return True


def commutes_semantic(g1: Gate, g2: Gate) -> bool:
    """Exhaustive check of g1 g2 == g2 g1 on every assignment of the shared wires"""
    wires = _wires_of(g1.wires | g2.wires)
    for assignment in range(1 << len(wires)):
        state = 0
        for position, wire in enumerate(wires):
            if assignment >> position & 1:
                state |= 1 << wire
        if g2.act(g1.act(state)) != g1.act(g2.act(state)):
            return False
    return True


# ============================================================================
# SAMPLING
# ============================================================================

def _feasible_ranks(width: int, distribution: Mapping[int, float]) -> Tuple[np.ndarray, np.ndarray]:
    ranks = np.array([r for r in distribution if 0 <= r < width and distribution[r] > 0], dtype=np.int64)
    if len(ranks) == 0:
        raise ParameterError(f"no rank in {dict(distribution)} is possible on {width} wires")
    weights = np.array([distribution[int(r)] for r in ranks], dtype=float)
    return ranks, weights / weights.sum()


def sample_gate(
    width: int,
    rng: np.random.Generator,
    rank_distribution: Optional[Mapping[int, float]] = None,
    max_polarity: int = MAX_SAMPLED_POLARITY,
    target: Optional[int] = None,
) -> Gate:
    """
    Draw a random well-formed gate

    Args:
        width: register size
        rng: labelled random stream
        rank_distribution: rank -> weight; ranks that need more wires than exist are dropped
        max_polarity: cap on white-dot controls
        target: fix the target wire instead of drawing it

    Returns:
        Random gate
    """
    if width < 1:
        raise ParameterError("cannot sample a gate on zero wires")
    distribution = DEFAULT_RANK_DISTRIBUTION if rank_distribution is None else rank_distribution
    ranks, weights = _feasible_ranks(width, distribution)
    rank = int(rng.choice(ranks, p=weights))

    if target is None:
        target = int(rng.integers(width))
    others = np.array([w for w in range(width) if w != target], dtype=np.int64)
    chosen = rng.choice(others, size=rank, replace=False) if rank else np.array([], dtype=np.int64)
    controls = _mask_of(chosen.tolist())

    white = [int(w) for w in chosen if rng.random() < 0.5]
    if len(white) > max_polarity:
        white = [int(w) for w in rng.choice(np.array(white), size=max_polarity, replace=False)]
    return Gate(target, controls, _mask_of(white))


def sample_circuit(
    width: int,
    size: int,
    rng: np.random.Generator,
    rank_distribution: Optional[Mapping[int, float]] = None,
) -> Circuit:
    """Circuit of `size` independently sampled gates"""
    return Circuit(width, tuple(sample_gate(width, rng, rank_distribution) for _ in range(size)))
