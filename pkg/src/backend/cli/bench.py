"""
Benchmark harness
Times key generation, encryption, decryption and the cryptovaluation steps and
writes one CSV row per (operation, params, workers).
"""

import logging
import time
from pathlib import Path
from typing import Callable, List, Optional, Tuple, TypeVar, Union

import numpy as np
import pandas as pd
import psutil
from pydantic import BaseModel, Field

from core.bits import bit_matrix_to_ints
from core.circuits import FunctionSpec, function_oracle
from core.cryptoval import decrypt_many, evaluate_many, keygen_for_function, operands_to_bits, Variant
from core.ime import decrypt_many as ime_decrypt_many, encrypt_many
from core.keygen import KeyParams, generate_keypair
from core.randomness import stream

logger = logging.getLogger(__name__)

T = TypeVar("T")

BENCH_COLUMNS = [
    "operation", "k", "w", "n", "e", "fn", "workers", "count",
    "wall_s", "per_op_s", "max_monomials", "total_monomials", "work", "rss_mb",
]

TABLE_COLUMNS = {
    "keygen": "t_kg",
    "encrypt": "t_en",
    "decrypt": "t_de",
    "cv_keygen": "T_kg",
    "cv_eval": "T_evl",
    "cv_decrypt": "T_de",
}


class BenchRecord(BaseModel):
    """One timed operation"""

    operation: str = Field(..., description="keygen, encrypt, decrypt, cv_keygen, cv_eval or cv_decrypt")
    k: int
    w: int
    n: int = 0
    e: int = 0
    fn: str = ""
    workers: int = 1
    count: int = 1
    wall_s: float
    per_op_s: float
    max_monomials: int = 0
    total_monomials: int = 0
    work: int = 0
    rss_mb: float = Field(default_factory=lambda: _rss_mb())


def _rss_mb() -> float:
    return round(psutil.Process().memory_info().rss / (1024 ** 2), 2)


def _timed(fn: Callable[[], T]) -> Tuple[T, float]:
    start = time.perf_counter()
    result = fn()
    return result, time.perf_counter() - start


def bench_ime(params: KeyParams, count: int = 100, jobs: int = 1) -> List[BenchRecord]:
    """Keygen, then encrypt and decrypt `count` random messages"""
    (public, private), t_kg = _timed(lambda: generate_keypair(params, jobs=jobs))
    records = [BenchRecord(
        operation="keygen", k=params.k, w=params.w, workers=jobs, wall_s=t_kg, per_op_s=t_kg,
        max_monomials=public.polys.max_monomials, total_monomials=public.polys.total_monomials,
    )]

    messages = stream(params.seed, "bench", "messages").integers(0, 2, size=(count, params.k)).astype(np.uint8)
    ciphertexts, t_en = _timed(lambda: encrypt_many(public, messages))
    records.append(BenchRecord(
        operation="encrypt", k=params.k, w=params.w, workers=jobs, count=count,
        wall_s=t_en, per_op_s=t_en / count,
    ))

    if private.decryptable:
        plain, t_de = _timed(lambda: ime_decrypt_many(private, ciphertexts))
        if not np.array_equal(plain, messages):
            logger.error("Benchmark decryption did not reproduce the plaintexts")
            raise AssertionError("decryption mismatch during benchmark")
        records.append(BenchRecord(
            operation="decrypt", k=params.k, w=params.w, workers=jobs, count=count,
            wall_s=t_de, per_op_s=t_de / count,
        ))
    return records


def bench_cryptoval(
    spec: FunctionSpec,
    params: KeyParams,
    n: Optional[int] = None,
    sections: Optional[int] = None,
    count: int = 100,
    jobs: int = 1,
    variant: Variant = Variant.TWO_KEY,
) -> List[BenchRecord]:
    """Set up one encrypted function, then evaluate and decrypt `count` random operand pairs"""
    keys, t_kg = _timed(lambda: keygen_for_function(spec, params, n=n, sections=sections, variant=variant, jobs=jobs))
    program = keys.program
    common = dict(k=params.k, w=params.w, n=program.n, e=program.e, fn=spec.kind.value, workers=jobs)
    records = [BenchRecord(
        operation="cv_keygen", wall_s=t_kg, per_op_s=t_kg,
        max_monomials=program.max_monomials, total_monomials=program.total_monomials,
        work=sum(program.costs), **common,
    )]

    rng = stream(params.seed, "bench", "operands")
    a = bit_matrix_to_ints(rng.integers(0, 2, size=(count, spec.width)))
    b = bit_matrix_to_ints(rng.integers(0, 2, size=(count, spec.width)))
    ciphertexts = encrypt_many(keys.public, operands_to_bits(spec, a, b))
    results, t_evl = _timed(lambda: evaluate_many(program, ciphertexts, jobs=jobs))
    records.append(BenchRecord(operation="cv_eval", count=count, wall_s=t_evl, per_op_s=t_evl / count, **common))

    values, t_de = _timed(lambda: decrypt_many(keys.cv_key, results, program.output_map))
    layout = spec.layout()
    for x, y, got in zip(a, b, values):
        expected = function_oracle(spec, x, y)
        flat = 0
        shift = 0
        for name, wires in layout.outputs.items():
            flat |= expected[name] << shift
            shift += len(wires)
        if got != flat:
            logger.error(f"Benchmark result mismatch for {spec.kind.value}({x}, {y})")
            raise AssertionError("cryptovaluation mismatch during benchmark")
    records.append(BenchRecord(
        operation="cv_decrypt", count=count, wall_s=t_de, per_op_s=t_de / count,
        work=keys.cv_key.decryption_cost, **common,
    ))
    return records


def records_frame(records: List[BenchRecord]) -> pd.DataFrame:
    return pd.DataFrame([r.model_dump() for r in records], columns=BENCH_COLUMNS)


def table_frame(records: List[BenchRecord]) -> pd.DataFrame:
    """Wide view: one row per parameter set, per-operation seconds under t_kg/t_en/t_de or T_kg/T_evl/T_de"""
    frame = records_frame(records)
    frame["column"] = frame["operation"].map(TABLE_COLUMNS)
    wide = frame.pivot_table(
        index=["k", "w", "n", "e", "fn", "workers"], columns="column", values="per_op_s", aggfunc="mean"
    ).reset_index()
    wide.columns.name = None
    ordered = [c for c in TABLE_COLUMNS.values() if c in wide.columns]
    return wide[["k", "w", "n", "e", "fn", "workers"] + ordered]


def write_csv(records: List[BenchRecord], path: Union[str, Path], table: bool = False) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = table_frame(records) if table else records_frame(records)
    frame.to_csv(path, index=False)
    logger.info(f"Wrote {len(frame)} bench rows to {path}")
    return path
