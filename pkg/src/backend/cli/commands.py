"""
Command-line surface
keygen / encrypt / decrypt, circuit build, cv keygen / eval / decrypt, security,
bench, preset list and inspect. Output is plain key=value text.
"""

import argparse
import logging
import re
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from pydantic import ValidationError

from cli.bench import bench_cryptoval, bench_ime, write_csv
from config.settings import settings
from core.bits import as_int, bit_matrix_to_ints, ints_to_bit_matrix, to_string
from core.circuits import FunctionKind, FunctionSpec, build_function_circuit, uniform_width, verify_circuit
from core.cryptoval import Variant, decrypt_result, evaluate_many, keygen_for_function
from core.errors import (
    BudgetExceededError,
    DimensionError,
    FormatError,
    KeygenError,
    ParameterError,
    SamplingError,
    UnsupportedOperationError,
)
from core.ime import Ciphertext, PaddingMode, decrypt, decrypt_message, encrypt, encrypt_message
from core.keygen import PRESETS, KeyParams, generate_keypair, preset_params
from core.randomness import resolve_seed
from core.security import security_report, structural_report
from storage.serialization import ArtifactKind, load, read_header, save

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FORMAT = 3
EXIT_CONTRACT = 4
EXIT_BUDGET = 5

CV_PRESETS: Tuple[Tuple[int, int, int], ...] = ((128, 160, 240), (256, 280, 400))


class UsageError(Exception):
    """Command line is well formed but its arguments do not fit together"""


def parse_preset(text: str) -> Tuple[int, ...]:
    """Parse "(128,160)" or "128,160,240" into a tuple of ints"""
    numbers = re.findall(r"\d+", text)
    if len(numbers) not in (2, 3) or re.search(r"[^\d,()\s]", text):
        raise UsageError(f"preset must look like (k,w) or (k,w,n), got {text!r}")
    return tuple(int(x) for x in numbers)


def _emit(pairs: Sequence[Tuple[str, object]]) -> None:
    for key, value in pairs:
        print(f"{key}={value}")


# ============================================================================
# PARAMETERS
# ============================================================================

def _key_params(args: argparse.Namespace, k: Optional[int] = None, w: Optional[int] = None) -> KeyParams:
    seed = resolve_seed(args.seed)
    preset = parse_preset(args.preset) if getattr(args, "preset", None) else None
    if preset is not None:
        k, w = preset[0], preset[1]
    k = args.k if k is None else k
    w = args.w if w is None else w
    if k is None or w is None:
        raise UsageError("give --preset or both --k and --w")

    overrides = {}
    if getattr(args, "d_lo", None) is not None:
        overrides["d_lo"] = args.d_lo
    if getattr(args, "d_hi", None) is not None:
        overrides["d_hi"] = args.d_hi
    if getattr(args, "encrypt_only", False):
        overrides["nvars"] = k

    if k < 128 and not args.insecure_params:
        raise ParameterError(f"k={k} is below the security conditions; pass --insecure-params for test values")
    if preset is None and args.insecure_params:
        overrides["insecure"] = True
    return preset_params(k, w, seed=seed, **overrides)


# ============================================================================
# IME COMMANDS
# ============================================================================

def cmd_keygen(args: argparse.Namespace) -> int:
    params = _key_params(args)
    public, private = generate_keypair(params, jobs=args.jobs)
    out = Path(args.out_dir)
    pub_path = save(public, out / f"{args.name}.pub")
    priv_path = save(private, out / f"{args.name}.priv")
    _emit([
        ("k", public.k), ("w", public.w), ("v", public.nvars), ("degree", public.degree),
        ("gates", len(private.circuit)), ("max_monomials", public.max_monomials),
        ("seed", params.seed), ("pubkey", pub_path), ("privkey", priv_path),
    ])
    return EXIT_OK


def cmd_encrypt(args: argparse.Namespace) -> int:
    public = load(args.pub, ArtifactKind.PUBKEY)
    padding = PaddingMode(args.padding)
    seed = resolve_seed(args.seed)
    if args.input:
        blocks = encrypt_message(public, Path(args.input).read_bytes(), padding, seed)
    else:
        if args.operands:
            a, b = (int(x, 0) for x in args.operands.split(","))
            half = public.k // 2
            if a >> half or b >> half:
                raise DimensionError(f"operands must fit in {half} bits")
            message = a | (b << half)
        elif args.message is not None:
            message = as_int(args.message, public.k, "plaintext")
        else:
            raise UsageError("give --message, --operands or --in")
        blocks = [encrypt(public, message, padding, seed)]
    path = save(blocks, args.out)
    _emit([("blocks", len(blocks)), ("ciphertext", str(blocks[0]) if len(blocks) == 1 else "-"), ("out", path)])
    return EXIT_OK


def cmd_decrypt(args: argparse.Namespace) -> int:
    private = load(args.priv, ArtifactKind.PRIVKEY)
    blocks = load(args.input, ArtifactKind.CIPHERTEXT)
    if args.out:
        data = decrypt_message(private, blocks, jobs=args.jobs)
        Path(args.out).write_bytes(data)
        _emit([("blocks", len(blocks)), ("bytes", len(data)), ("out", args.out)])
        return EXIT_OK
    for index, block in enumerate(blocks):
        plain, padding = decrypt(private, block)
        _emit([(f"plaintext[{index}]", plain), (f"padding[{index}]", to_string(padding, private.w - private.k))])
    return EXIT_OK


# ============================================================================
# CIRCUIT AND CRYPTOVALUATION COMMANDS
# ============================================================================

def cmd_circuit_build(args: argparse.Namespace) -> int:
    spec = FunctionSpec(kind=FunctionKind(args.fn), width=args.width)
    total = uniform_width(args.width) if args.shell else None
    circuit = build_function_circuit(spec, total)
    path = save(circuit, args.out)
    pairs = [
        ("fn", spec.kind.value), ("width", spec.width), ("wires", circuit.width), ("gates", len(circuit)),
        ("ancillas", spec.layout().ancilla_count),
        ("outputs", ",".join(str(w) for w in spec.layout().output_map)), ("out", path),
    ]
    if args.verify:
        report = verify_circuit(circuit, spec)
        pairs += [("verify", "pass" if report.ok else "fail"), ("checked", report.checked)]
    _emit(pairs)
    return EXIT_OK


def cmd_cv_keygen(args: argparse.Namespace) -> int:
    n = args.n
    if args.preset:
        preset = parse_preset(args.preset)
        if len(preset) == 3:
            n = preset[2] if n is None else n
    params = _key_params(args)
    if params.k % 2:
        raise ParameterError(f"k={params.k} must be even to hold two operands")
    spec = FunctionSpec(kind=FunctionKind(args.fn), width=params.k // 2)
    keys = keygen_for_function(
        spec, params, n=n, sections=args.sections, variant=Variant(args.variant), jobs=args.jobs,
    )
    out = Path(args.out_dir)
    paths = [
        save(keys.public, out / f"{args.name}.pub"),
        save(keys.private, out / f"{args.name}.priv"),
        save(keys.cv_key, out / f"{args.name}.cvkey"),
        save(keys.program, out / f"{args.name}.prog"),
    ]
    _emit([
        ("fn", spec.kind.value), ("k", params.k), ("w", params.w), ("n", keys.program.n), ("e", keys.program.e),
        ("gates", keys.action_gates), ("max_monomials", keys.program.max_monomials),
        ("blindness", keys.program.blindness_class),
    ] + [(path.suffix.lstrip("."), path) for path in paths])
    return EXIT_OK


def cmd_cv_eval(args: argparse.Namespace) -> int:
    program = load(args.program, ArtifactKind.PROGRAM)
    blocks = load(args.input, ArtifactKind.CIPHERTEXT)
    for block in blocks:
        if block.length != program.w:
            raise DimensionError(f"ciphertext has {block.length} bits, program expects w={program.w}")
    states = evaluate_many(program, ints_to_bit_matrix([block.bits for block in blocks], program.w), jobs=args.jobs)
    results = [Ciphertext(value, program.n) for value in bit_matrix_to_ints(states)]
    path = save(results, args.out)
    _emit([("blocks", len(results)), ("n", program.n), ("e", program.e), ("out", path)])
    return EXIT_OK


def cmd_cv_decrypt(args: argparse.Namespace) -> int:
    key = load(args.key, ArtifactKind.CVKEY)
    program = load(args.program, ArtifactKind.PROGRAM)
    blocks = load(args.input, ArtifactKind.CIPHERTEXT)
    for index, block in enumerate(blocks):
        if block.length != key.n:
            raise DimensionError(f"encrypted result has {block.length} bits, key expects n={key.n}")
        value = decrypt_result(key, block.bits, program.output_map)
        _emit([(f"result[{index}]", value), (f"bits[{index}]", to_string(value, len(program.output_map)))])
    return EXIT_OK


# ============================================================================
# SECURITY, BENCH, PRESETS, INSPECT
# ============================================================================

def cmd_security(args: argparse.Namespace) -> int:
    values = [int(x) for x in args.params.split(",")]
    if len(values) not in (3, 4):
        raise UsageError("--params takes k,w,d or k,w,d,D")
    k, w, d = values[:3]
    D = values[3] if len(values) == 4 else None
    if args.key:
        private = load(args.key, ArtifactKind.PRIVKEY)
        report = structural_report(private, d=d, chi=args.chi)
    else:
        if args.blocks:
            blocks = [int(x) for x in args.blocks.split(",")]
        else:
            blocks = [args.h] * args.l
        report = security_report(k, w, d, blocks, D=D, chi=args.chi)
    _emit(report.as_pairs())
    _emit([("criterion", "pass" if report.criterion_passed else "fail")])
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    preset = parse_preset(args.preset) if args.preset else ()
    params = _key_params(args)
    if args.fn or len(preset) == 3:
        spec = FunctionSpec(kind=FunctionKind(args.fn or "add"), width=params.k // 2)
        n = preset[2] if len(preset) == 3 else None
        records = bench_cryptoval(spec, params, n=n, sections=args.sections, count=args.count, jobs=args.jobs)
    else:
        records = bench_ime(params, count=args.count, jobs=args.jobs)
    path = write_csv(records, args.out, table=args.table)
    _emit([("rows", len(records)), ("out", path)])
    return EXIT_OK


def cmd_preset_list(args: argparse.Namespace) -> int:
    for (k, w), label in PRESETS.items():
        print(f"({k},{w}) {label}")
    for k, w, n in CV_PRESETS:
        print(f"({k},{w},{n}) cryptovaluation")
    return EXIT_OK


def cmd_inspect(args: argparse.Namespace) -> int:
    with open(args.file, "rb") as handle:
        header = read_header(handle.read())
    _emit([
        ("kind", header.kind.name.lower()), ("version", header.version), ("k", header.k), ("w", header.w),
        ("n", header.n), ("v", header.v), ("e", header.e), ("payload_length", header.payload_length),
    ])
    return EXIT_OK


# ============================================================================
# PARSER
# ============================================================================

def _key_flags(parser: argparse.ArgumentParser, seed_required: bool = True) -> None:
    parser.add_argument("--preset", help='reference parameter set, e.g. "(128,160)" or "(128,160,240)"')
    parser.add_argument("--k", type=int, help="plaintext bits")
    parser.add_argument("--w", type=int, help="ciphertext bits")
    parser.add_argument("--d-lo", dest="d_lo", type=int, help="lowest accepted public-key degree")
    parser.add_argument("--d-hi", dest="d_hi", type=int, help="highest accepted public-key degree")
    parser.add_argument("--seed", required=seed_required, default="0", help='integer seed or "os"')
    parser.add_argument("--insecure-params", dest="insecure_params", action="store_true",
                        help="allow values below the security conditions")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ehe", description="Invertible multivariate encryption and cryptovaluation")
    parser.add_argument("--log-level", default=settings.LOG_LEVEL)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate an IME key pair")
    _key_flags(p)
    p.add_argument("--encrypt-only", dest="encrypt_only", action="store_true", help="polynomials over k variables")
    p.add_argument("--out-dir", dest="out_dir", default=".")
    p.add_argument("--name", default="key")
    p.add_argument("--jobs", type=int, default=settings.DEFAULT_JOBS, help="concurrent key attempts")
    p.set_defaults(handler=cmd_keygen)

    p = sub.add_parser("encrypt", help="encrypt a message")
    p.add_argument("--pub", required=True)
    p.add_argument("--message", help="k-bit string, x1 first")
    p.add_argument("--operands", help="A,B packed as a | b << k/2")
    p.add_argument("--in", dest="input", help="byte file for block mode")
    p.add_argument("--padding", choices=[m.value for m in PaddingMode], default=PaddingMode.ZEROS.value)
    p.add_argument("--seed", default="0", help="padding stream seed")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_encrypt)

    p = sub.add_parser("decrypt", help="decrypt ciphertext blocks")
    p.add_argument("--priv", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", help="write the block-mode message bytes here")
    p.add_argument("--jobs", type=int, default=settings.DEFAULT_JOBS)
    p.set_defaults(handler=cmd_decrypt)

    circuit = sub.add_parser("circuit", help="circuit library").add_subparsers(dest="circuit_command", required=True)
    p = circuit.add_parser("build", help="build an elementary-function circuit")
    p.add_argument("--fn", required=True, choices=[k.value for k in FunctionKind])
    p.add_argument("--width", type=int, required=True, help="operand width L")
    p.add_argument("--shell", action="store_true", help="place the circuit in the uniform shell width")
    p.add_argument("--verify", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_circuit_build)

    cv = sub.add_parser("cv", help="cryptovaluation").add_subparsers(dest="cv_command", required=True)
    p = cv.add_parser("keygen", help="keys and encrypted program for one function")
    _key_flags(p)
    p.add_argument("--fn", required=True, choices=[k.value for k in FunctionKind])
    p.add_argument("--n", type=int, help="register width")
    p.add_argument("--sections", type=int, help="section count (defaults to ceil(n/2))")
    p.add_argument("--variant", choices=[v.value for v in Variant], default=Variant.TWO_KEY.value)
    p.add_argument("--jobs", type=int, default=settings.DEFAULT_JOBS)
    p.add_argument("--out-dir", dest="out_dir", default=".")
    p.add_argument("--name", default="cv")
    p.set_defaults(handler=cmd_cv_keygen)

    p = cv.add_parser("eval", help="evaluate an encrypted program on ciphertexts")
    p.add_argument("--program", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=settings.DEFAULT_JOBS)
    p.set_defaults(handler=cmd_cv_eval)

    p = cv.add_parser("decrypt", help="decrypt encrypted results")
    p.add_argument("--key", required=True)
    p.add_argument("--program", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.set_defaults(handler=cmd_cv_decrypt)

    p = sub.add_parser("security", help="complexity estimates and criterion check")
    p.add_argument("--params", required=True, help="k,w,d[,D]")
    p.add_argument("--blocks", help="comma separated block sizes h_1..h_l")
    p.add_argument("--l", type=int, default=8)
    p.add_argument("--h", type=int, default=13)
    p.add_argument("--chi", type=float, default=settings.DEFAULT_CHI)
    p.add_argument("--key", help="private key file to measure")
    p.set_defaults(handler=cmd_security)

    p = sub.add_parser("bench", help="timing rows as CSV")
    _key_flags(p, seed_required=False)
    p.add_argument("--fn", choices=[k.value for k in FunctionKind])
    p.add_argument("--sections", type=int, help="section count (defaults to ceil(n/2))")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--jobs", type=int, default=settings.DEFAULT_JOBS)
    p.add_argument("--table", action="store_true", help="wide t_kg/t_en/t_de or T_kg/T_evl/T_de layout")
    p.add_argument("--out", default="bench.csv")
    p.set_defaults(handler=cmd_bench)

    preset = sub.add_parser("preset", help="parameter presets").add_subparsers(dest="preset_command", required=True)
    p = preset.add_parser("list")
    p.set_defaults(handler=cmd_preset_list)

    p = sub.add_parser("inspect", help="print an artefact header")
    p.add_argument("file")
    p.set_defaults(handler=cmd_inspect)
    return parser


def run_command(argv: Optional[List[str]] = None) -> int:
    """
    Parse and run one command

    Args:
        argv: arguments without the program name (defaults to sys.argv[1:])

    Returns:
        Exit status: 0 ok, 2 usage, 3 format, 4 contract/dimension, 5 budget/keygen
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    logging.getLogger().setLevel(args.log_level.upper())

    try:
        return args.handler(args)
    except (UsageError, FileNotFoundError) as e:
        logger.error(f"Usage error: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FormatError as e:
        logger.error(f"Format error: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FORMAT
    except (SamplingError, KeygenError, BudgetExceededError) as e:
        logger.error(f"Generation failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except (DimensionError, ParameterError, UnsupportedOperationError, ValidationError, ValueError) as e:
        logger.error(f"Contract violation: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONTRACT
