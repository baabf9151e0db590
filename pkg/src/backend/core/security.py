"""
Security Estimators
Attack-complexity estimates (XL, circuit reconstruction, noncommutativity count,
Grover) and the parameter criterion that orders them above 2^k.
All values are log2; big-integer sums and factorials are exact.
"""

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from config.settings import settings
from core.errors import ParameterError
from core.gates import Circuit, Gate, commutes
from core.keygen import ImePrivateKey, KeyParams

logger = logging.getLogger(__name__)

POST_QUANTUM_BITS = 128
HYPER_BITS = 1024


# ============================================================================
# ESTIMATORS
# ============================================================================

def xl_monomial_count(k: int, D: int) -> int:
    """Number of monomials of degree <= D in k variables"""
    return sum(math.comb(k, i) for i in range(D + 1))


def xl_report(k: int, d: int, D: Optional[int] = None, chi: Optional[float] = None) -> Tuple[int, float]:
    """
    XL linearisation cost

    Args:
        k: unknowns (plaintext bits)
        d: public-key degree
        D: linearisation degree, defaults to d; 0 is accepted as the trivial case
        chi: linear-algebra exponent in (2, 3]

    Returns:
        Tuple of (monomial count, chi * log2(count))
    """
    chi = settings.DEFAULT_CHI if chi is None else chi
    D = d if D is None else D
    if not 2 < chi <= 3:
        raise ParameterError(f"chi={chi} outside (2, 3]")
    if not 2 <= d <= k:
        raise ParameterError(f"degree d={d} outside [2, k={k}]")
    if D != 0 and not d <= D <= k:
        raise ParameterError(f"linearisation degree D={D} outside [d={d}, k={k}]")
    count = xl_monomial_count(k, D)
    return count, chi * math.log2(count)


def log2_factorial(h: int) -> float:
    return math.log2(math.factorial(h))


def stirling_log2_factorial(h: int) -> float:
    """log2 h! by Stirling's formula"""
    if h == 0:
        return 0.0
    return 0.5 * math.log2(2 * math.pi * h) + h * math.log2(h / math.e)


def xl_quadratic_subexp_log2(w: int, chi: float) -> float:
    """log2 of (w^sqrt(w) / floor(sqrt(w))!)^chi"""
    if w < 4:
        raise ParameterError(f"w={w} below 4")
    root = math.sqrt(w)
    return chi * (root * math.log2(w) - log2_factorial(math.isqrt(w)))


def icrp_log2(w: int) -> float:
    return float(w)


def denc_log2(blocks: Sequence[int]) -> float:
    """log2 of h_1! h_2! ... h_l!"""
    return sum(log2_factorial(h) for h in blocks)


def grover_log2(k: int, w: int) -> float:
    """log2 of w^3 2^(k/2 + 1)"""
    return 3 * math.log2(w) + k / 2 + 1


def band(log2_value: float) -> str:
    """Quantum-resilience classification band of a log2 complexity"""
    if log2_value >= HYPER_BITS:
        return "hyper"
    if log2_value >= POST_QUANTUM_BITS:
        return "post-quantum"
    return "below-128"


# ============================================================================
# NONCOMMUTING-SET SEARCH
# ============================================================================

def _conflict_masks(gates: Sequence[Gate]) -> List[int]:
    """Bit j of entry i is set when gates i and j do not commute"""
    masks = [0] * len(gates)
    for i in range(len(gates)):
        for j in range(i + 1, len(gates)):
            if not commutes(gates[i], gates[j]):
                masks[i] |= 1 << j
                masks[j] |= 1 << i
    return masks


def greedy_noncommuting_set(gates: Sequence[Gate], restarts: Optional[int] = None, seed: int = 0) -> int:
    """Largest pairwise-noncommuting subset found by randomised greedy passes (a lower bound)"""
    if not gates:
        return 0
    masks = _conflict_masks(gates)
    restarts = settings.GREEDY_RESTARTS if restarts is None else restarts
    rng = np.random.default_rng(seed)
    orders = [sorted(range(len(gates)), key=lambda i: -bin(masks[i]).count("1"))]
    orders += [rng.permutation(len(gates)).tolist() for _ in range(restarts)]
    best = 0
    for order in orders:
        chosen = 0
        size = 0
        for i in order:
            if chosen & ~masks[i] == 0:
                chosen |= 1 << i
                size += 1
        best = max(best, size)
    return best


def exact_noncommuting_set(gates: Sequence[Gate]) -> int:
    """Maximum pairwise-noncommuting subset by Bron-Kerbosch with pivoting"""
    if len(gates) > settings.EXACT_SEARCH_MAX_GATES:
        raise ParameterError(f"exact search is limited to {settings.EXACT_SEARCH_MAX_GATES} gates")
    masks = _conflict_masks(gates)
    best = 0

    def expand(size: int, candidates: int, excluded: int) -> None:
        nonlocal best
        if candidates == 0 and excluded == 0:
            best = max(best, size)
            return
        if size + bin(candidates).count("1") <= best:
            return
        union = candidates | excluded
        pivot = max(
            (i for i in range(union.bit_length()) if union >> i & 1),
            key=lambda i: bin(candidates & masks[i]).count("1"),
        )
        remaining = candidates & ~masks[pivot]
        while remaining:
            low = remaining & -remaining
            i = low.bit_length() - 1
            expand(size + 1, candidates & masks[i], excluded & masks[i])
            candidates &= ~low
            excluded |= low
            remaining &= ~low

    expand(0, (1 << len(gates)) - 1, 0)
    return best


def measure_blocks(key: ImePrivateKey, seed: int = 0) -> Tuple[List[int], List[Optional[int]]]:
    """Greedy and, for small blocks, exact noncommuting-set sizes of every key block"""
    greedy: List[int] = []
    exact: List[Optional[int]] = []
    for block in key.blocks():
        gates = list(block.gates)
        greedy.append(greedy_noncommuting_set(gates, seed=seed))
        exact.append(exact_noncommuting_set(gates) if len(gates) <= settings.EXACT_SEARCH_MAX_GATES else None)
    return greedy, exact


# ============================================================================
# REPORT AND CRITERION
# ============================================================================

class SecurityReport(BaseModel):
    k: int
    w: int
    d: int
    D: int
    chi: float
    l: int
    h: List[int]
    h_exact: List[Optional[int]] = Field(default_factory=list)
    xl_monomials: int
    log2_xl: float
    log2_xl_quadratic_subexp: float
    log2_icrp: float
    log2_denc: float
    log2_denc_stirling: float
    log2_grover: float
    criterion_ok: Dict[str, bool] = Field(default_factory=dict)
    bands: Dict[str, str] = Field(default_factory=dict)

    @property
    def criterion_passed(self) -> bool:
        return bool(self.criterion_ok) and all(self.criterion_ok.values())

    def as_pairs(self) -> List[Tuple[str, str]]:
        """Flat key=value view for text output"""
        pairs = []
        for name, value in self.model_dump().items():
            if isinstance(value, dict):
                pairs += [(f"{name}.{key}", str(item)) for key, item in value.items()]
            elif isinstance(value, list):
                pairs.append((name, ",".join("-" if item is None else str(item) for item in value)))
            elif isinstance(value, float):
                pairs.append((name, f"{value:.4f}"))
            else:
                pairs.append((name, str(value)))
        return pairs


def criterion_check(report: SecurityReport) -> Dict[str, bool]:
    """Each inequality of denc > icrp > xl > k, compared in log2"""
    return {
        "denc_gt_icrp": report.log2_denc > report.log2_icrp,
        "icrp_gt_xl": report.log2_icrp > report.log2_xl,
        "xl_gt_2k": report.log2_xl > report.k,
    }


def security_report(
    k: int,
    w: int,
    d: int,
    blocks: Sequence[int],
    D: Optional[int] = None,
    chi: Optional[float] = None,
    h_exact: Sequence[Optional[int]] = (),
) -> SecurityReport:
    """
    Every estimator for one parameter set

    Args:
        k: plaintext bits
        w: ciphertext bits
        d: public-key degree
        blocks: noncommuting block sizes h_1..h_l
        D: XL degree (defaults to d)
        chi: linear-algebra exponent (defaults to settings.DEFAULT_CHI)
        h_exact: exact block sizes when they were measured

    Returns:
        SecurityReport with criterion verdicts and bands filled in
    """
    if w < k:
        raise ParameterError(f"w={w} must be at least k={k}")
    chi = settings.DEFAULT_CHI if chi is None else chi
    D = d if D is None else D
    count, log2_xl = xl_report(k, d, D, chi)
    report = SecurityReport(
        k=k, w=w, d=d, D=D, chi=chi, l=len(blocks), h=list(blocks), h_exact=list(h_exact),
        xl_monomials=count,
        log2_xl=log2_xl,
        log2_xl_quadratic_subexp=xl_quadratic_subexp_log2(w, chi),
        log2_icrp=icrp_log2(w),
        log2_denc=denc_log2(blocks),
        log2_denc_stirling=sum(stirling_log2_factorial(h) for h in blocks),
        log2_grover=grover_log2(k, w),
    )
    report.criterion_ok = criterion_check(report)
    report.bands = {
        "xl": band(report.log2_xl),
        "icrp": band(report.log2_icrp),
        "denc": band(report.log2_denc),
        "grover": band(report.log2_grover),
    }
    return report


def structural_report(
    source: Union[KeyParams, ImePrivateKey],
    d: Optional[int] = None,
    chi: Optional[float] = None,
) -> SecurityReport:
    """
    Report for a parameter set or for an actual private key

    For a key the block sizes are measured with the greedy search (exact search
    as well for blocks of at most EXACT_SEARCH_MAX_GATES gates).
    """
    if isinstance(source, KeyParams):
        degree = d if d is not None else source.d_lo
        return security_report(source.k, source.w, degree, source.blocks, chi=chi)
    if d is None:
        raise ParameterError("measured reports need the public-key degree")
    greedy, exact = measure_blocks(source, seed=source.seed)
    logger.info(f"Measured noncommuting blocks: greedy={greedy}, exact={exact}")
    return security_report(source.k, source.w, d, greedy, chi=chi, h_exact=exact)
