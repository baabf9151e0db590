"""
Algebraic normal form over GF(2)
Multilinear polynomials stored as sets of variable bit masks (bit i = x_{i+1});
the empty mask is the constant monomial 1.
"""

import re
from typing import Iterable, List, Optional, Sequence

import numpy as np

from config.settings import settings
from core.bits import BitsLike, as_int, bit_matrix_to_words, mask_to_words, word_count
from core.errors import DimensionError

# Above this size single-point evaluation switches to the numpy word path
_VECTOR_EVAL_THRESHOLD = 256

_VARIABLE = re.compile(r"x(\d+)")


class Anf:
    """Immutable multilinear polynomial over GF(2)"""

    __slots__ = ("nvars", "_terms", "_support", "_words")

    def __init__(self, nvars: int, monomials: Iterable[int] = ()):
        """
        Build a polynomial; repeated monomials cancel in pairs

        Args:
            nvars: number of variables v
            monomials: variable masks, bit i set when x_{i+1} appears
        """
        if nvars < 0:
            raise DimensionError("number of variables must be non-negative")
        terms = set()
        for mask in monomials:
            mask = int(mask)
            if mask < 0 or mask >> nvars:
                raise DimensionError(f"monomial mask {mask:#x} uses variables beyond x{nvars}")
            if mask in terms:
                terms.remove(mask)
            else:
                terms.add(mask)
        self._init(nvars, frozenset(terms))

    def _init(self, nvars: int, terms: frozenset) -> None:
        self.nvars = nvars
        self._terms = terms
        support = 0
        for mask in terms:
            support |= mask
        self._support = support
        self._words = None

    @classmethod
    def from_terms(cls, nvars: int, terms: frozenset) -> "Anf":
        """Wrap an already canonical frozenset of masks without re-checking it"""
        obj = cls.__new__(cls)
        obj._init(nvars, terms)
        return obj

    @classmethod
    def zero(cls, nvars: int) -> "Anf":
        return cls.from_terms(nvars, frozenset())

    @classmethod
    def one(cls, nvars: int) -> "Anf":
        return cls.from_terms(nvars, frozenset((0,)))

    @classmethod
    def variable(cls, nvars: int, index: int) -> "Anf":
        """The polynomial x_{index+1}"""
        if not 0 <= index < nvars:
            raise DimensionError(f"variable index {index} out of range for {nvars} variables")
        return cls.from_terms(nvars, frozenset((1 << index,)))

    @classmethod
    def from_string(cls, text: str, nvars: int) -> "Anf":
        """
        Parse "x1*x2 + x3 + 1" notation (variables are 1-based)

        Args:
            text: sum of products; "0" is the zero polynomial
            nvars: number of variables

        Returns:
            Parsed polynomial
        """
        monomials = []
        for term in text.split("+"):
            term = term.strip()
            if not term or term == "0":
                continue
            if term == "1":
                monomials.append(0)
                continue
            mask = 0
            for index in _VARIABLE.findall(term):
                mask |= 1 << (int(index) - 1)
            if mask == 0:
                raise ValueError(f"cannot parse monomial {term!r}")
            monomials.append(mask)
        return cls(nvars, monomials)

    # ------------------------------------------------------------------
    # Structure
    # ------------------------------------------------------------------

    @property
    def monomials(self) -> frozenset:
        return self._terms

    @property
    def support(self) -> int:
        """Mask of every variable that occurs in some monomial"""
        return self._support

    @property
    def monomial_count(self) -> int:
        return len(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    @property
    def degree(self) -> Optional[int]:
        """Largest monomial degree; None flags the zero polynomial"""
        if not self._terms:
            return None
        return max(mask.bit_count() for mask in self._terms)

    def sorted_monomials(self) -> List[int]:
        """Monomials in serialization order (ascending mask value)"""
        return sorted(self._terms)

    def word_matrix(self) -> np.ndarray:
        """Monomials as a (count, words) uint64 matrix, cached"""
        if self._words is None:
            nwords = word_count(self.nvars)
            rows = [mask_to_words(mask, nwords) for mask in self.sorted_monomials()]
            self._words = np.array(rows, dtype=np.uint64).reshape(len(rows), nwords)
        return self._words

    # ------------------------------------------------------------------
    # Arithmetic
    # ------------------------------------------------------------------

    def _check_same_space(self, other: "Anf") -> None:
        if self.nvars != other.nvars:
            raise DimensionError(
                f"polynomials over {self.nvars} and {other.nvars} variables cannot be combined"
            )

    def __add__(self, other: "Anf") -> "Anf":
        self._check_same_space(other)
        return Anf.from_terms(self.nvars, self._terms ^ other._terms)

    def __mul__(self, other: "Anf") -> "Anf":
        self._check_same_space(other)
        terms = set()
        for left in self._terms:
            for right in other._terms:
                terms ^= {left | right}
        return Anf.from_terms(self.nvars, frozenset(terms))

    def substitute(self, index: int, replacement: "Anf") -> "Anf":
        """
        Replace x_{index+1} by a polynomial and reduce multilinearly

        Args:
            index: 0-based variable index
            replacement: polynomial over the same variables

        Returns:
            Substituted polynomial
        """
        self._check_same_space(replacement)
        bit = 1 << index
        result = Anf.from_terms(self.nvars, frozenset(m for m in self._terms if not m & bit))
        rest = [m & ~bit for m in self._terms if m & bit]
        if rest:
            result = result + Anf(self.nvars, rest) * replacement
        return result

    def evaluate(self, point: BitsLike) -> int:
        """
        Evaluate at a point

        Args:
            point: bit vector of length nvars

        Returns:
            0 or 1
        """
        value = as_int(point, self.nvars, "evaluation point")
        return self._evaluate_int(value)

    def _evaluate_int(self, value: int) -> int:
        if len(self._terms) > _VECTOR_EVAL_THRESHOLD:
            words = np.array(mask_to_words(value, word_count(self.nvars)), dtype=np.uint64)
            inside = np.all((self.word_matrix() & ~words) == 0, axis=1)
            return int(np.count_nonzero(inside) & 1)
        parity = 0
        for mask in self._terms:
            if mask & value == mask:
                parity ^= 1
        return parity

    # ------------------------------------------------------------------
    # Comparison and display
    # ------------------------------------------------------------------

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Anf):
            return NotImplemented
        return self.nvars == other.nvars and self._terms == other._terms

    def __hash__(self) -> int:
        return hash((self.nvars, self._terms))

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for mask in sorted(self._terms, key=lambda m: (-m.bit_count(), m)):
            if mask == 0:
                parts.append("1")
            else:
                parts.append("*".join(f"x{i + 1}" for i in range(mask.bit_length()) if mask >> i & 1))
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"Anf({self.nvars}, {str(self)!r})"

    def __getstate__(self):
        return (self.nvars, self._terms)

    def __setstate__(self, state):
        self._init(*state)


def evaluate(p: Anf, point: BitsLike) -> int:
    """XOR over monomials of the AND of their variables at the point"""
    return p.evaluate(point)


def add(p: Anf, q: Anf) -> Anf:
    """GF(2) sum: symmetric difference of the monomial sets"""
    return p + q


def degree(p: Anf) -> Optional[int]:
    """Maximum monomial degree, None for the zero polynomial"""
    return p.degree


class PolySet:
    """
    Ordered list of polynomials over a shared variable set

    Compiles all monomials into one uint64 word matrix so a batch of points can be
    evaluated against every polynomial in a few vectorised passes.
    """

    __slots__ = ("nvars", "polys", "_matrix", "_starts", "_ends")

    def __init__(self, polys: Sequence[Anf], nvars: Optional[int] = None):
        polys = tuple(polys)
        if nvars is None:
            if not polys:
                raise DimensionError("empty polynomial set needs an explicit variable count")
            nvars = polys[0].nvars
        for index, p in enumerate(polys):
            if p.nvars != nvars:
                raise DimensionError(f"polynomial {index} has {p.nvars} variables, expected {nvars}")
        self.nvars = nvars
        self.polys = polys
        self._matrix = None
        self._starts = None
        self._ends = None

    @classmethod
    def identity(cls, nvars: int) -> "PolySet":
        return cls([Anf.variable(nvars, i) for i in range(nvars)], nvars)

    def __len__(self) -> int:
        return len(self.polys)

    def __iter__(self):
        return iter(self.polys)

    def __getitem__(self, index: int) -> Anf:
        return self.polys[index]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PolySet):
            return NotImplemented
        return self.nvars == other.nvars and self.polys == other.polys

    def __hash__(self) -> int:
        return hash((self.nvars, self.polys))

    def __repr__(self) -> str:
        return f"PolySet(nvars={self.nvars}, polys={len(self.polys)}, monomials={self.total_monomials})"

    def __getstate__(self):
        return (self.nvars, self.polys)

    def __setstate__(self, state):
        self.nvars, self.polys = state
        self._matrix = None
        self._starts = None
        self._ends = None

    @property
    def max_monomials(self) -> int:
        return max((len(p) for p in self.polys), default=0)

    @property
    def total_monomials(self) -> int:
        return sum(len(p) for p in self.polys)

    @property
    def degree(self) -> Optional[int]:
        """Largest degree over the set; None when every member is zero"""
        degrees = [p.degree for p in self.polys if p.degree is not None]
        return max(degrees) if degrees else None

    def evaluate(self, point: BitsLike) -> int:
        """Evaluate every member at one point; bit j of the result is polynomial j"""
        value = as_int(point, self.nvars, "evaluation point")
        out = 0
        for j, p in enumerate(self.polys):
            out |= p._evaluate_int(value) << j
        return out

    def _compile(self) -> None:
        if self._matrix is not None:
            return
        nwords = word_count(self.nvars)
        blocks = [p.word_matrix() for p in self.polys]
        counts = np.array([len(b) for b in blocks], dtype=np.int64)
        self._ends = np.cumsum(counts)
        self._starts = self._ends - counts
        if blocks:
            self._matrix = np.concatenate(blocks, axis=0)
        else:
            self._matrix = np.zeros((0, nwords), dtype=np.uint64)

    def evaluate_many(self, states: np.ndarray) -> np.ndarray:
        """
        Evaluate the set on a batch of points

        Args:
            states: (B, nvars) 0/1 matrix, one point per row

        Returns:
            (B, len(self)) uint8 matrix of polynomial values
        """
        states = np.atleast_2d(np.asarray(states, dtype=np.uint8))
        if states.shape[1] != self.nvars:
            raise DimensionError(f"states have {states.shape[1]} bits, expected {self.nvars}")
        self._compile()
        matrix = self._matrix
        total, nwords = matrix.shape
        batch = states.shape[0]
        out = np.zeros((batch, len(self.polys)), dtype=np.uint8)
        if total == 0 or batch == 0:
            return out

        complement = ~bit_matrix_to_words(states)
        chunk = max(1, settings.EVAL_CHUNK_CELLS // max(1, total * nwords))
        for lo in range(0, batch, chunk):
            part = complement[lo:lo + chunk]
            hits = np.ones((part.shape[0], total), dtype=bool)
            for w in range(nwords):
                hits &= (matrix[None, :, w] & part[:, w, None]) == 0
            running = np.zeros((part.shape[0], total + 1), dtype=np.int64)
            running[:, 1:] = np.cumsum(hits, axis=1)
            out[lo:lo + part.shape[0]] = ((running[:, self._ends] - running[:, self._starts]) & 1).astype(np.uint8)
        return out
