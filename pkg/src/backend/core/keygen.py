"""
Key Generation Module for the IME message encryption
Builds the initial polynomial set, samples the encryption mapping and emits the
public polynomial set together with the private circuit.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from pydantic import BaseModel, Field, model_validator

from config.settings import settings
from core.anf import Anf, PolySet
from core.errors import KeygenError, ParameterError, SamplingError
from core.gates import Circuit, Gate, apply_to_poly, commutes, sample_gate, toffoli, transform_polynomial
from core.randomness import stream

logger = logging.getLogger(__name__)

# Reference parameter pairs (k, w)
PRESETS: Dict[Tuple[int, int], str] = {
    (16, 20): "test",
    (32, 40): "test",
    (64, 72): "test",
    (128, 160): "secure",
    (256, 280): "secure",
    (512, 540): "secure",
    (1024, 1050): "secure",
}

BLOCK_TARGET_CANDIDATES = 8
BLOCK_MAX_POLARITY = 1


class KeyParams(BaseModel):
    """Key-generation parameters"""

    k: int = Field(..., ge=1, description="Plaintext bits")
    w: int = Field(..., ge=1, description="Ciphertext bits / number of public polynomials")
    nvars: Optional[int] = Field(None, description="Variable count, k or w (defaults to w)")
    d_lo: int = Field(2, ge=2, description="Lowest accepted public-key degree")
    d_hi: Optional[int] = Field(None, description="Highest accepted public-key degree")
    blocks: List[int] = Field(default_factory=lambda: [3, 3], description="Sizes h_1..h_l of noncommuting blocks")
    filler_gates: Optional[int] = Field(None, ge=0, description="Interleaved filler gates (defaults to v)")
    monomial_budget: Optional[int] = Field(None, ge=1, description="Max monomials per public polynomial")
    seed: int = Field(0, ge=0, description="64-bit root seed")
    insecure: bool = Field(False, description="Permit values below the security conditions")

    @model_validator(mode="after")
    def _check(self) -> "KeyParams":
        if self.w < self.k:
            raise ParameterError(f"w={self.w} must be at least k={self.k}")
        if self.nvars is None:
            self.nvars = self.w
        if self.nvars not in (self.k, self.w):
            raise ParameterError(f"nvars must be k={self.k} or w={self.w}, got {self.nvars}")
        if self.d_hi is None:
            self.d_hi = self.nvars
        if self.d_lo > self.d_hi:
            raise ParameterError(f"degree range [{self.d_lo}, {self.d_hi}] is empty")
        if any(h < 1 for h in self.blocks):
            raise ParameterError("block sizes must be positive")
        if not self.insecure:
            self._check_security_conditions()
        return self

    def _check_security_conditions(self) -> None:
        k = self.k
        problems = []
        if k < 128:
            problems.append("k >= 128")
        if not self.w < 2 * k:
            problems.append("w < 2k")
        if not (k / 10 <= self.d_lo and self.d_hi < k / 2):
            problems.append("k/10 <= d < k/2")
        if len(self.blocks) < 8:
            problems.append("l >= 8")
        if not all(k / 10 <= h < k / 2 for h in self.blocks):
            problems.append("k/10 <= h_i < k/2")
        if problems:
            raise ParameterError(
                "security conditions violated (" + ", ".join(problems) + "); use insecure mode for test values"
            )

    @property
    def v(self) -> int:
        return int(self.nvars)

    @property
    def budget(self) -> int:
        if self.monomial_budget is not None:
            return self.monomial_budget
        return settings.MONOMIAL_BUDGET_FACTOR * self.v * self.v

    @property
    def filler_count(self) -> int:
        return self.v if self.filler_gates is None else self.filler_gates


def preset_params(k: int, w: int, seed: int = 0, **overrides) -> KeyParams:
    """
    Parameters for one of the reference (k, w) pairs

    Pairs below k = 128 come out in insecure test mode with scaled block sizes.

    Args:
        k: plaintext bits
        w: ciphertext bits
        seed: root seed
        overrides: any KeyParams field

    Returns:
        KeyParams for the preset
    """
    if k >= 128:
        base = dict(
            k=k, w=w, d_lo=math.ceil(k / 10), d_hi=math.ceil(k / 2) - 1,
            blocks=[math.ceil(k / 10)] * 8, seed=seed,
        )
    else:
        base = dict(
            k=k, w=w, d_lo=2,
            blocks=[max(3, math.ceil(k / 10))] * 2, seed=seed, insecure=True,
        )
    base.update(overrides)
    return KeyParams(**base)


@dataclass(frozen=True)
class InitialSet:
    """
    Initial ordered polynomial set: k identity variables, then w - k entries
    x_c + x_a * x_b with a, b, c drawn from the linear block (c = j itself when v = w)
    """

    nvars: int
    k: int
    w: int
    terms: Tuple[Tuple[int, int, int], ...] = ()

    @property
    def polys(self) -> List[Anf]:
        polys = [Anf.variable(self.nvars, i) for i in range(self.k)]
        for c, a, b in self.terms:
            polys.append(Anf(self.nvars, [1 << c, (1 << a) | (1 << b)]))
        return polys

    def seed_circuit(self) -> Optional[Circuit]:
        """
        The initial set as a circuit of commuting Toffoli gates (v = w only)

        Entry j >= k is the wire polynomial of toffoli(a, b -> j), so the public key
        is the wire tuple of mapping ++ seed_circuit.
        """
        if self.nvars != self.w:
            return None
        gates = []
        for j, (c, a, b) in enumerate(self.terms, start=self.k):
            if c != j:
                raise ParameterError("initial entry does not sit on its own wire")
            gates.append(toffoli(a, b, j) if a != b else Gate(j, 1 << a))
        return Circuit(self.nvars, tuple(gates))


def gf2_rank(masks: Sequence[int]) -> int:
    """Rank of a list of GF(2) row vectors given as int masks"""
    pivots: Dict[int, int] = {}
    rank = 0
    for row in masks:
        while row:
            top = row.bit_length() - 1
            if top not in pivots:
                pivots[top] = row
                rank += 1
                break
            row ^= pivots[top]
    return rank


def build_initial_set(params: KeyParams) -> InitialSet:
    """
    Prepare the initial ordered set of w polynomials

    Args:
        params: key parameters

    Returns:
        InitialSet whose first k members are x_1..x_k
    """
    k, w, v = params.k, params.w, params.v
    if w < k:
        raise ParameterError(f"w={w} must be at least k={k}")
    rng = stream(params.seed, "keygen", "initial")
    terms = []
    for j in range(k, w):
        if v == w:
            c = j
            pool = np.arange(k)
        else:
            pool_all = rng.permutation(k)
            c = int(pool_all[0])
            pool = pool_all[1:] if k > 1 else pool_all
        if len(pool) >= 2:
            a, b = (int(x) for x in rng.choice(pool, size=2, replace=False))
        else:
            # a single linear variable leaves only the degenerate x_c + x_a term
            a = b = int(pool[0])
        terms.append((c, min(a, b), max(a, b)))

    initial = InitialSet(nvars=v, k=k, w=w, terms=tuple(terms))
    linear = [p for p in initial.polys[:k]]
    if gf2_rank([next(iter(p.monomials)) for p in linear]) != k:
        raise KeygenError("linear block of the initial set is not independent")
    logger.debug(f"Initial set built: {k} linear + {w - k} nonlinear entries over {v} variables")
    return initial


# ============================================================================
# ENCRYPTION MAPPING
# ============================================================================

@dataclass
class _MappingSampler:
    """Incremental sampler: each accepted gate is substituted into the current set"""

    params: KeyParams
    rng: np.random.Generator
    polys: List[Anf]
    order: List[Gate] = field(default_factory=list)
    block_spans: List[Tuple[int, int]] = field(default_factory=list)
    rejections: int = 0

    def try_gate(self, gate: Gate) -> bool:
        """Substitute a candidate; keep it only if every polynomial stays in budget"""
        budget = self.params.budget
        updated = []
        for p in self.polys:
            q = apply_to_poly(gate, p)
            if q is not p and (len(q) > budget or (q.degree or 0) > self.params.d_hi):
                self.rejections += 1
                return False
            updated.append(q)
        self.polys = updated
        self.order.append(gate)
        return True

    def add_random(self, constraint: str, draw) -> Gate:
        for _ in range(settings.SAMPLER_MAX_RETRIES):
            gate = draw()
            if gate is not None and self.try_gate(gate):
                return gate
        raise SamplingError(constraint, settings.SAMPLER_MAX_RETRIES)

    def filler(self) -> Gate:
        v = self.params.v
        return self.add_random(
            f"filler gate within monomial budget {self.params.budget}",
            lambda: sample_gate(v, self.rng),
        )

    def block_candidate(self, block: List[Gate]) -> Optional[Gate]:
        """Gate that fails to commute with every gate already in the open block"""
        v = self.params.v
        taken = {g.target for g in block}
        free = [wire for wire in range(v) if wire not in taken]
        if not free:
            return None
        picks = self.rng.choice(np.array(free), size=min(BLOCK_TARGET_CANDIDATES, len(free)), replace=False)
        best = None
        for target in (int(t) for t in picks):
            needed = 0
            for g in block:
                if not g.controls >> target & 1:
                    needed |= 1 << g.target
            if best is None or needed.bit_count() < best[1].bit_count():
                best = (target, needed)
        target, controls = best

        spare = [wire for wire in range(v) if wire != target and not controls >> wire & 1]
        extra = 2 - controls.bit_count()
        if extra > 0:
            if len(spare) < extra:
                return None
            for wire in self.rng.choice(np.array(spare), size=extra, replace=False):
                controls |= 1 << int(wire)
        elif spare and self.rng.random() < 0.5:
            controls |= 1 << int(self.rng.choice(np.array(spare)))

        polarity = 0
        ctrl_wires = [i for i in range(controls.bit_length()) if controls >> i & 1]
        for wire in self.rng.permutation(np.array(ctrl_wires))[:BLOCK_MAX_POLARITY]:
            if self.rng.random() < 0.5:
                polarity |= 1 << int(wire)
        return Gate(target, controls, polarity)

    def block(self, size: int, fillers: int = 0) -> None:
        """Sample one block of pairwise noncommuting rank >= 2 gates with fillers between them"""
        start = len(self.order)
        block: List[Gate] = []
        gaps = self._spread(fillers, size)
        for index in range(size):
            gate = self.add_random(
                f"block gate {index + 1}/{size} pairwise noncommuting within budget",
                lambda: self.block_candidate(block),
            )
            block.append(gate)
            for _ in range(gaps[index]):
                self.filler()
        for i, gi in enumerate(block):
            for gj in block[i + 1:]:
                if commutes(gi, gj):
                    raise SamplingError("pairwise noncommutativity inside block", 0)
        self.block_spans.append((start, len(self.order)))

    def _spread(self, total: int, slots: int) -> List[int]:
        slots = max(1, slots)
        base, rest = divmod(total, slots)
        return [base + (1 if i < rest else 0) for i in range(slots)]

    def lift_degree(self, target_degree: int) -> None:
        """Append gates that grow the top-degree monomial until the target degree is met"""
        v = self.params.v
        for _ in range(settings.SAMPLER_MAX_RETRIES):
            current = PolySet(self.polys, v).degree or 0
            if current >= target_degree:
                return
            index = max(range(len(self.polys)), key=lambda j: (self.polys[j].degree or 0, -j))
            tops = sorted(m for m in self.polys[index].monomials if m.bit_count() == current)
            mask = tops[int(self.rng.integers(len(tops)))]
            inside = [i for i in range(v) if mask >> i & 1]
            outside = [i for i in range(v) if not mask >> i & 1]
            if not inside or len(outside) < 2:
                return
            target = int(self.rng.choice(np.array(inside)))
            width = min(len(outside), 3)
            controls = 0
            for wire in self.rng.choice(np.array(outside), size=width, replace=False):
                controls |= 1 << int(wire)
            self.try_gate(Gate(target, controls, 0))

    def circuit(self) -> Circuit:
        return Circuit(self.params.v, tuple(reversed(self.order)))

    def execution_spans(self) -> Tuple[Tuple[int, int], ...]:
        total = len(self.order)
        return tuple(sorted((total - stop, total - start) for start, stop in self.block_spans))


def _sample_mapping(params: KeyParams, rng: np.random.Generator, initial: InitialSet) -> _MappingSampler:
    sampler = _MappingSampler(params=params, rng=rng, polys=initial.polys)
    # fillers before each block, inside each block, and after the last one
    chunks = sampler._spread(params.filler_count, 2 * len(params.blocks) + 1)
    for index, size in enumerate(params.blocks):
        for _ in range(chunks[2 * index]):
            sampler.filler()
        sampler.block(size, fillers=chunks[2 * index + 1])
    for _ in range(chunks[-1]):
        sampler.filler()
    sampler.lift_degree(params.d_lo)
    return sampler


def sample_encryption_mapping(params: KeyParams, rng: np.random.Generator) -> Circuit:
    """
    Sample the encryption mapping

    Args:
        params: key parameters
        rng: labelled random stream

    Returns:
        Mapping circuit in execution order
    """
    return _sample_mapping(params, rng, build_initial_set(params)).circuit()


# ============================================================================
# KEY PAIR
# ============================================================================

@dataclass(frozen=True)
class ImePublicKey:
    """Public key: w polynomials over nvars variables"""

    k: int
    w: int
    nvars: int
    degree: int
    polys: PolySet

    @property
    def max_monomials(self) -> int:
        return self.polys.max_monomials


@dataclass(frozen=True)
class ImePrivateKey:
    """Encryption mapping plus the initial-set descriptor needed to rebuild the public key"""

    k: int
    w: int
    nvars: int
    circuit: Circuit
    initial: InitialSet
    block_spans: Tuple[Tuple[int, int], ...] = ()
    seed: int = 0
    rng_version: str = settings.RNG_VERSION

    @property
    def decryptable(self) -> bool:
        return self.nvars == self.w

    def encryption_circuit(self) -> Circuit:
        """Mapping followed by the seed circuit: the full w-wire encryption operator"""
        seed = self.initial.seed_circuit()
        if seed is None:
            raise ParameterError("keys over k variables have no state-level encryption circuit")
        return self.circuit.concat(seed)

    def blocks(self) -> List[Circuit]:
        return [Circuit(self.nvars, self.circuit.gates[a:b]) for a, b in self.block_spans]


def public_polys_from(circuit: Circuit, initial: InitialSet, budget: Optional[int] = None) -> PolySet:
    """Push every initial polynomial through the mapping"""
    polys = [transform_polynomial(circuit, g, budget, f"public polynomial {j + 1}")[0]
             for j, g in enumerate(initial.polys)]
    return PolySet(polys, initial.nvars)


def keypair_from_mapping(
    params: KeyParams,
    mapping: Circuit,
    initial: Optional[InitialSet] = None,
    block_spans: Sequence[Tuple[int, int]] = (),
) -> Tuple[ImePublicKey, ImePrivateKey]:
    """Assemble a key pair from a given mapping without degree targeting"""
    initial = initial or build_initial_set(params)
    if mapping.width != params.v:
        raise ParameterError(f"mapping width {mapping.width} does not match v={params.v}")
    polys = public_polys_from(mapping, initial)
    public = ImePublicKey(k=params.k, w=params.w, nvars=params.v, degree=polys.degree or 0, polys=polys)
    private = ImePrivateKey(
        k=params.k, w=params.w, nvars=params.v, circuit=mapping, initial=initial,
        block_spans=tuple(block_spans), seed=params.seed,
    )
    return public, private


def _keygen_attempt(
    params: KeyParams, initial: InitialSet, attempt: int
) -> Tuple[Optional[_MappingSampler], Dict]:
    rng = stream(params.seed, "keygen", "mapping", attempt)
    try:
        sampler = _sample_mapping(params, rng, initial)
    except SamplingError as e:
        return None, {"attempt": attempt, "error": str(e)}
    measured = PolySet(sampler.polys, params.v).degree or 0
    if params.d_lo <= measured <= params.d_hi:
        return sampler, {}
    return None, {"attempt": attempt, "degree": measured, "rejections": sampler.rejections}


def generate_keypair(params: KeyParams, jobs: int = 1) -> Tuple[ImePublicKey, ImePrivateKey]:
    """
    Run the key-generation algorithm

    Attempts use their own random streams, so with jobs > 1 they run in batches
    and the lowest successful attempt wins; the key pair does not depend on jobs.

    Args:
        params: key parameters
        jobs: joblib workers for concurrent attempts

    Returns:
        Tuple of (public key, private key)
    """
    initial = build_initial_set(params)
    failures = []
    step = max(1, jobs)
    for first in range(0, settings.KEYGEN_MAX_ATTEMPTS, step):
        batch = list(range(first, min(first + step, settings.KEYGEN_MAX_ATTEMPTS)))
        if len(batch) > 1:
            results = Parallel(n_jobs=jobs, backend=settings.JOBLIB_BACKEND)(
                delayed(_keygen_attempt)(params, initial, attempt) for attempt in batch
            )
        else:
            results = [_keygen_attempt(params, initial, batch[0])]

        for attempt, (sampler, failure) in zip(batch, results):
            if sampler is None:
                if "error" in failure:
                    logger.warning(f"Keygen attempt {attempt + 1}: {failure['error']}")
                else:
                    logger.warning(
                        f"Keygen attempt {attempt + 1}: degree {failure['degree']} "
                        f"outside [{params.d_lo}, {params.d_hi}]"
                    )
                failures.append(failure)
                continue

            polys = PolySet(sampler.polys, params.v)
            mapping = sampler.circuit()
            public = ImePublicKey(k=params.k, w=params.w, nvars=params.v, degree=polys.degree or 0, polys=polys)
            private = ImePrivateKey(
                k=params.k, w=params.w, nvars=params.v, circuit=mapping, initial=initial,
                block_spans=sampler.execution_spans(), seed=params.seed,
            )
            logger.info(
                f"Key pair generated: k={params.k}, w={params.w}, v={params.v}, degree={public.degree}, "
                f"gates={len(mapping)}, max monomials={polys.max_monomials}, attempt={attempt + 1}"
            )
            return public, private

    logger.error(f"Key generation failed after {settings.KEYGEN_MAX_ATTEMPTS} attempts")
    raise KeygenError(
        f"no key within degree [{params.d_lo}, {params.d_hi}] and budget {params.budget}",
        diagnostics={"attempts": failures},
    )
