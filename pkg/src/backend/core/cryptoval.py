"""
Cryptovaluation
Encrypted actions, sectional splitting with cancelling boundary keys, encrypted
polynomial-set generation and exact evaluation/decryption of encrypted results.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed

from config.settings import settings
from core.anf import Anf, PolySet
from core.bits import BitsLike, as_int, bit_matrix_to_ints, ints_to_bit_matrix
from core.circuits import (
    FunctionSpec,
    build_function_circuit,
    pad_to_gate_count,
    shell_gate_count,
    uniform_width,
)
from core.errors import DimensionError, ParameterError, SamplingError
from core.gates import (
    Circuit,
    Gate,
    append_to_polys,
    apply_to_poly,
    generate_polynomials_with_cost,
    run_state,
    sample_gate,
)
from core.ime import Ciphertext
from core.keygen import ImePrivateKey, ImePublicKey, KeyParams, generate_keypair
from core.randomness import stream

logger = logging.getLogger(__name__)

# Boundary and output keys use low-rank gates with at most one white dot
KEY_RANK_DISTRIBUTION: Dict[int, float] = {0: 0.10, 1: 0.30, 2: 0.60}
KEY_MAX_POLARITY = 1


class Variant(str, Enum):
    TWO_KEY = "two-key"
    SAME_KEY = "same-key"


@dataclass(frozen=True)
class CryptovalPrivateKey:
    """Output circuit r_cv on n wires plus the input-side message circuit r_en"""

    n: int
    w: int
    k: int
    r_cv: Circuit
    r_en: Circuit
    variant: Variant = Variant.TWO_KEY

    def __post_init__(self):
        if self.r_cv.width != self.n:
            raise DimensionError(f"r_cv has width {self.r_cv.width}, expected n={self.n}")
        if self.r_en.width != self.w:
            raise DimensionError(f"r_en has width {self.r_en.width}, expected w={self.w}")

    @property
    def decryption_cost(self) -> int:
        """Gates run per decryption"""
        return len(self.r_cv)


@dataclass(frozen=True)
class EncryptedProgram:
    """Ordered encrypted polynomial sets; section q maps the state after section q-1"""

    n: int
    w: int
    k: int
    sections: Tuple[PolySet, ...]
    output_map: Tuple[int, ...]
    blindness_class: str = ""
    costs: Tuple[int, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if not self.sections:
            raise DimensionError("a program needs at least one section")
        for q, section in enumerate(self.sections):
            if len(section) != self.n or section.nvars != self.n:
                raise DimensionError(
                    f"section {q + 1} has {len(section)} polynomials over {section.nvars} variables, expected n={self.n}"
                )
        if any(not 0 <= wire < self.n for wire in self.output_map):
            raise DimensionError(f"output map {self.output_map} leaves the {self.n}-wire register")

    @property
    def e(self) -> int:
        return len(self.sections)

    @property
    def max_monomials(self) -> int:
        return max(section.max_monomials for section in self.sections)

    @property
    def total_monomials(self) -> int:
        return sum(section.total_monomials for section in self.sections)


@dataclass(frozen=True)
class Sectioning:
    sections: Tuple[Circuit, ...]
    boundary_keys: Tuple[Circuit, ...]


@dataclass(frozen=True)
class CryptovalKeySet:
    """Everything one function setup produces"""

    spec: FunctionSpec
    public: ImePublicKey
    private: ImePrivateKey
    cv_key: CryptovalPrivateKey
    program: EncryptedProgram
    action_gates: int = 0


# ============================================================================
# ENCRYPTED ACTION
# ============================================================================

def build_encrypted_action(
    m_circuit: Circuit,
    r_en: Circuit,
    r_cv: Circuit,
    variant: Variant = Variant.TWO_KEY,
) -> Circuit:
    """
    Conjugate a computation circuit by the encryption operators

    Execution order: undo the message encryption on wires 0..w-1, run M, apply r_cv.

    Args:
        m_circuit: computation M on n wires
        r_en: message encryption circuit on w wires
        r_cv: output encryption circuit on n wires
        variant: two-key (n > w) or same-key (n = w, r_en = r_cv)

    Returns:
        Encrypted action U_cv on n wires
    """
    n = m_circuit.width
    if r_cv.width != n:
        raise DimensionError(f"r_cv width {r_cv.width} does not match circuit width n={n}")
    variant = Variant(variant)
    if variant is Variant.SAME_KEY:
        if r_en.width != n:
            raise DimensionError(f"same-key action needs n = w, got n={n}, w={r_en.width}")
        if r_en != r_cv:
            raise ParameterError("same-key action needs r_en = r_cv")
        return r_cv.inverse().concat(m_circuit, r_cv)
    if not r_en.width < n:
        raise DimensionError(f"two-key action needs n > w, got n={n}, w={r_en.width}")
    return r_en.inverse().widened(n).concat(m_circuit, r_cv)


# ============================================================================
# KEYS AND SECTIONS
# ============================================================================

def _split_points(total: int, parts: int) -> List[int]:
    base, extra = divmod(total, parts)
    points = [0]
    for q in range(parts):
        points.append(points[-1] + base + (1 if q < extra else 0))
    return points


def _check_section_count(e: int, gates: int) -> None:
    if not 1 <= e <= max(1, gates):
        raise ParameterError(f"section count {e} outside [1, {max(1, gates)}]")


def boundary_key_size(n: int) -> int:
    return max(1, math.ceil(n * settings.SECTION_KEY_FRACTION))


def monomial_budget(n: int) -> int:
    return settings.MONOMIAL_BUDGET_FACTOR * n * n


@dataclass
class _KeySampler:
    """
    Incremental key sampler

    `head` holds the polynomials of the section that ends with the key and `tail`
    those of the section that starts with its inverse. An accepted gate is
    appended to the head and substituted into the tail; both stay within budget.
    """

    width: int
    budget: int
    rng: np.random.Generator
    head: List[Anf]
    tail: Optional[List[Anf]] = None
    gates: List[Gate] = field(default_factory=list)
    rejections: int = 0

    def try_gate(self, gate: Gate) -> bool:
        target = append_to_polys(gate, self.head, self.budget)
        if target is None or len(target) > self.budget:
            self.rejections += 1
            return False
        tail = self.tail
        if tail is not None:
            tail = list(tail)
            for j, p in enumerate(tail):
                if p.support >> gate.target & 1:
                    q = apply_to_poly(gate, p)
                    if len(q) > self.budget:
                        self.rejections += 1
                        return False
                    tail[j] = q
        self.head[gate.target] = target
        self.tail = tail
        self.gates.append(gate)
        return True

    def add_random(self) -> Gate:
        for _ in range(settings.SAMPLER_MAX_RETRIES):
            gate = sample_gate(self.width, self.rng, KEY_RANK_DISTRIBUTION, KEY_MAX_POLARITY)
            if self.try_gate(gate):
                return gate
        raise SamplingError(
            f"key gate {len(self.gates) + 1} within monomial budget {self.budget}", settings.SAMPLER_MAX_RETRIES
        )

    def fill(self, size: int) -> Circuit:
        for _ in range(size):
            self.add_random()
        return Circuit(self.width, tuple(self.gates))


def sample_key(
    prefix: Circuit,
    size: int,
    rng: np.random.Generator,
    budget: Optional[int] = None,
    where: str = "key prefix",
) -> Circuit:
    """
    Random key circuit run after `prefix` without pushing any polynomial of
    prefix + key past the monomial budget

    Args:
        prefix: gates that precede the key inside its section
        size: key gates
        rng: labelled random stream
        budget: per-polynomial monomial cap (defaults to 4 n^2)
        where: label used when the prefix alone exceeds the budget

    Returns:
        Key circuit on prefix.width wires
    """
    n = prefix.width
    budget = monomial_budget(n) if budget is None else budget
    head, _ = generate_polynomials_with_cost(prefix, budget=budget, where=where)
    sampler = _KeySampler(width=n, budget=budget, rng=rng, head=list(head))
    key = sampler.fill(size)
    logger.debug(f"Sampled a {size}-gate key on {n} wires after {sampler.rejections} rejections")
    return key


def _bodies_polys(bodies: Sequence[Circuit], budget: int, jobs: int) -> List[PolySet]:
    if jobs > 1 and len(bodies) > 1:
        results = Parallel(n_jobs=jobs, backend=settings.JOBLIB_BACKEND)(
            delayed(_section_polys)(body, q, budget, 1) for q, body in enumerate(bodies)
        )
    else:
        results = [_section_polys(body, q, budget, 1) for q, body in enumerate(bodies)]
    return [polys for polys, _ in results]


def sectionalize(
    u_cv: Circuit,
    e: int,
    rng: np.random.Generator,
    key_size: Optional[int] = None,
    budget: Optional[int] = None,
    jobs: int = 1,
) -> Sectioning:
    """
    Split an encrypted action into e sections joined by random boundary keys

    Section 1 runs U_1 then R_1, section q runs R_{q-1}^{-1}, U_q, R_q and the last
    section ends with U_e, so every boundary key cancels against its neighbour.
    Keys are drawn gate by gate and a gate is kept only when both sections it
    touches stay within the monomial budget.

    Args:
        u_cv: encrypted action
        e: section count, 1 <= e <= gate count
        rng: random stream for the boundary keys
        key_size: gates per boundary key (defaults to ceil(n/4))
        budget: per-polynomial monomial cap (defaults to 4 n^2)
        jobs: joblib workers for the section bodies

    Returns:
        Sectioning with the e section circuits and the e-1 boundary keys
    """
    gates = len(u_cv)
    _check_section_count(e, gates)
    if e == 1:
        return Sectioning(sections=(u_cv,), boundary_keys=())
    n = u_cv.width
    size = boundary_key_size(n) if key_size is None else key_size
    budget = monomial_budget(n) if budget is None else budget

    points = _split_points(gates, e)
    bodies = [Circuit(n, u_cv.gates[points[q]:points[q + 1]]) for q in range(e)]
    body_polys = _bodies_polys(bodies, budget, jobs)

    keys = []
    rejections = 0
    head = list(body_polys[0])
    for q in range(e - 1):
        sampler = _KeySampler(width=n, budget=budget, rng=rng, head=head, tail=list(body_polys[q + 1]))
        keys.append(sampler.fill(size))
        rejections += sampler.rejections
        head = sampler.tail

    sections = []
    for q in range(e):
        parts = []
        if q > 0:
            parts.append(keys[q - 1].inverse())
        parts.append(bodies[q])
        if q < e - 1:
            parts.append(keys[q])
        sections.append(parts[0].concat(*parts[1:]))
    logger.debug(
        f"Sectionalized {gates} gates into {e} sections with {size}-gate boundary keys, "
        f"{rejections} key gates rejected"
    )
    return Sectioning(sections=tuple(sections), boundary_keys=tuple(keys))


def _section_polys(section: Circuit, index: int, budget: Optional[int], jobs: int) -> Tuple[PolySet, int]:
    return generate_polynomials_with_cost(section, budget=budget, jobs=jobs, where=f"section {index + 1}")


def generate_program(
    sections: Sequence[Circuit],
    output_map: Sequence[int],
    k: int,
    w: int,
    budget: Optional[int] = None,
    jobs: int = 1,
    blindness_class: str = "",
) -> EncryptedProgram:
    """
    Generate the encrypted polynomial set of every section

    Args:
        sections: section circuits, all of width n
        output_map: wires holding the decrypted result
        k: plaintext bits
        w: ciphertext bits
        budget: per-polynomial monomial cap (defaults to 4 n^2)
        jobs: joblib workers; output is identical for any value
        blindness_class: shell label stored with the program

    Returns:
        EncryptedProgram
    """
    if not sections:
        raise ParameterError("no sections to generate")
    n = sections[0].width
    for q, section in enumerate(sections):
        if section.width != n:
            raise DimensionError(f"section {q + 1} has width {section.width}, expected {n}")
    if budget is None:
        budget = monomial_budget(n)

    try:
        if jobs > 1 and len(sections) > 1:
            results = Parallel(n_jobs=jobs, backend=settings.JOBLIB_BACKEND)(
                delayed(_section_polys)(section, q, budget, 1) for q, section in enumerate(sections)
            )
        else:
            results = [_section_polys(section, q, budget, jobs) for q, section in enumerate(sections)]
    except Exception as e:
        logger.error(f"Program generation failed: {e}")
        raise

    program = EncryptedProgram(
        n=n, w=w, k=k,
        sections=tuple(polys for polys, _ in results),
        output_map=tuple(output_map),
        blindness_class=blindness_class,
        costs=tuple(cost for _, cost in results),
    )
    logger.info(
        f"Program generated: n={n}, e={program.e}, max monomials={program.max_monomials}, "
        f"work={sum(program.costs)}"
    )
    return program


# ============================================================================
# EVALUATION AND DECRYPTION
# ============================================================================

def evaluate_program(p: EncryptedProgram, c: Union[Ciphertext, BitsLike]) -> int:
    """
    Fold the sections over a ciphertext extended by zeros to n bits

    Returns:
        Final n-bit state as an int
    """
    if isinstance(c, Ciphertext):
        if c.length != p.w:
            raise DimensionError(f"ciphertext has {c.length} bits, program expects w={p.w}")
        state = c.bits
    else:
        state = as_int(c, p.w, "ciphertext")
    for section in p.sections:
        state = section.evaluate(state)
    return state


def _fold_sections(sections: Sequence[PolySet], states: np.ndarray) -> np.ndarray:
    for section in sections:
        states = section.evaluate_many(states)
    return states


def evaluate_many(p: EncryptedProgram, ciphertexts: np.ndarray, jobs: int = 1) -> np.ndarray:
    """Batch evaluation: (B, w) ciphertexts to (B, n) encrypted results, rows split over `jobs` workers"""
    ciphertexts = np.atleast_2d(np.asarray(ciphertexts, dtype=np.uint8))
    if ciphertexts.shape[1] != p.w:
        raise DimensionError(f"ciphertexts have {ciphertexts.shape[1]} bits, program expects w={p.w}")
    states = np.zeros((ciphertexts.shape[0], p.n), dtype=np.uint8)
    states[:, :p.w] = ciphertexts
    if jobs > 1 and len(states) > 1:
        chunks = np.array_split(states, min(jobs, len(states)))
        parts = Parallel(n_jobs=jobs, backend=settings.JOBLIB_BACKEND)(
            delayed(_fold_sections)(p.sections, chunk) for chunk in chunks
        )
        return np.vstack(parts)
    return _fold_sections(p.sections, states)


def project(state: int, output_map: Sequence[int]) -> int:
    value = 0
    for position, wire in enumerate(output_map):
        value |= (state >> wire & 1) << position
    return value


def decrypt_result(sk: CryptovalPrivateKey, v: BitsLike, output_map: Sequence[int]) -> int:
    """
    Undo r_cv on an encrypted result and read the output wires

    Returns:
        Result bits as an int, bit i taken from wire output_map[i]
    """
    state = run_state(sk.r_cv.inverse(), as_int(v, sk.n, "encrypted result"))
    return project(state, output_map)


def decrypt_many(sk: CryptovalPrivateKey, results: np.ndarray, output_map: Sequence[int]) -> List[int]:
    results = np.atleast_2d(np.asarray(results, dtype=np.uint8))
    if results.shape[1] != sk.n:
        raise DimensionError(f"results have {results.shape[1]} bits, key expects n={sk.n}")
    inverse = sk.r_cv.inverse()
    return [project(run_state(inverse, value), output_map) for value in bit_matrix_to_ints(results)]


# ============================================================================
# ONE-CALL SETUP
# ============================================================================

def shell_width(spec: FunctionSpec, w: int, variant: Variant = Variant.TWO_KEY) -> int:
    """Default n: the uniform function shell, and more than w for the two-key form"""
    base = uniform_width(spec.width, spec.exponent)
    if Variant(variant) is Variant.SAME_KEY:
        return base
    return max(base, w + 1)


def default_section_count(n: int, gates: int) -> int:
    """ceil(n/2) sections by default, never more than the action has gates"""
    return max(1, min(math.ceil(n * settings.SECTIONS_PER_WIRE), gates))


def _output_key_section(prefix_gates: int, size: int, e: int) -> Tuple[int, int]:
    """Index and first gate of the section in which an output key of `size` gates begins"""
    points = _split_points(prefix_gates + size, e)
    q = max(i for i in range(e) if points[i] <= prefix_gates)
    return q, points[q]


def keygen_for_function(
    spec: FunctionSpec,
    params: KeyParams,
    n: Optional[int] = None,
    sections: Optional[int] = None,
    variant: Variant = Variant.TWO_KEY,
    r_cv_size: Optional[int] = None,
    blind: bool = True,
    jobs: int = 1,
    keys: Optional[Tuple[ImePublicKey, ImePrivateKey]] = None,
    r_cv: Optional[Circuit] = None,
) -> CryptovalKeySet:
    """
    Message key, output key, sections and encrypted program for one function

    Args:
        spec: function to encrypt; its operands fill the k = 2L plaintext bits
        params: message key parameters (v = w); same-key needs w = n
        n: register width (defaults to shell_width)
        sections: section count e (defaults to default_section_count)
        variant: two-key or same-key
        r_cv_size: gates in r_cv for the two-key form (defaults to n)
        blind: pad the computation to the shell gate count
        jobs: joblib workers for generation
        keys: reuse an existing message key pair instead of generating one
        r_cv: reuse an existing two-key output key instead of sampling one

    Returns:
        CryptovalKeySet
    """
    variant = Variant(variant)
    if params.k != 2 * spec.width:
        raise ParameterError(f"plaintext k={params.k} must hold both operands (2L = {2 * spec.width})")
    if params.v != params.w:
        raise ParameterError("cryptovaluation needs a decryptable message key (v = w)")
    if n is None:
        n = shell_width(spec, params.w, variant)
    layout = spec.layout()
    if n < layout.width:
        raise ParameterError(f"n={n} is below the {spec.kind.value} layout width {layout.width}")
    if variant is Variant.SAME_KEY and n != params.w:
        raise ParameterError(f"same-key form needs n = w, got n={n}, w={params.w}")
    if variant is Variant.TWO_KEY and not params.w < n:
        raise DimensionError(f"two-key form needs n > w, got n={n}, w={params.w}")

    public, private = keys if keys is not None else generate_keypair(params, jobs=jobs)
    r_en = private.encryption_circuit()

    computation = build_function_circuit(spec, n)
    if blind:
        target = shell_gate_count(spec.width, n, spec.exponent)
        computation = pad_to_gate_count(computation, target, stream(params.seed, "cryptoval", "padding"))

    if variant is Variant.SAME_KEY:
        size = len(r_en)
    elif r_cv is not None:
        size = len(r_cv)
    else:
        size = n if r_cv_size is None else r_cv_size
    if sections is None:
        sections = default_section_count(n, len(r_en) + len(computation) + size)
    shell = f"L={spec.width};n={n};e={sections};gates={len(computation)}" if blind else ""

    if variant is Variant.SAME_KEY:
        r_cv = r_en
    elif r_cv is None:
        # r_cv is drawn against the part of the action that shares its first section
        prefix = r_en.inverse().widened(n).concat(computation)
        _check_section_count(sections, len(prefix) + size)
        index, start = _output_key_section(len(prefix), size, sections)
        r_cv = sample_key(
            Circuit(n, prefix.gates[start:]), size, stream(params.seed, "cryptoval", "r_cv"),
            where=f"section {index + 1}",
        )
    elif r_cv.width != n:
        raise DimensionError(f"r_cv has width {r_cv.width}, expected n={n}")

    action = build_encrypted_action(computation, r_en, r_cv, variant)
    split = sectionalize(action, sections, stream(params.seed, "cryptoval", "sections"), jobs=jobs)
    program = generate_program(
        split.sections, layout.output_map, params.k, params.w, jobs=jobs, blindness_class=shell
    )
    cv_key = CryptovalPrivateKey(n=n, w=params.w, k=params.k, r_cv=r_cv, r_en=r_en, variant=variant)
    logger.info(
        f"Cryptovaluation keys ready: {spec.kind.value} L={spec.width}, n={n}, e={sections}, "
        f"variant={variant.value}, action gates={len(action)}"
    )
    return CryptovalKeySet(
        spec=spec, public=public, private=private, cv_key=cv_key, program=program, action_gates=len(action),
    )


def operands_to_bits(spec: FunctionSpec, a: Sequence[int], b: Sequence[int]) -> np.ndarray:
    """(B, 2L) plaintext matrix holding a in the low L bits and b in the high L bits"""
    L = spec.width
    values = [int(x) | (int(y) << L) for x, y in zip(a, b)]
    return ints_to_bit_matrix(values, 2 * L)
