"""
Command-Line Tests
End-to-end runs of every command through run_command, including exit statuses
"""
import pandas as pd
import pytest
from pathlib import Path
import sys

# Add backend to path
sys.path.insert(0, str(Path(__file__).parent.parent / "backend"))

from cli.bench import BENCH_COLUMNS
from cli.commands import (
    EXIT_CONTRACT,
    EXIT_FORMAT,
    EXIT_OK,
    EXIT_USAGE,
    parse_preset,
    run_command,
)


def run(capsys, *argv):
    """Run one command and return (status, key=value pairs of its output)"""
    status = run_command([str(a) for a in argv])
    out = capsys.readouterr().out
    pairs = dict(line.split("=", 1) for line in out.splitlines() if "=" in line)
    return status, pairs


@pytest.fixture
def ime_keys(tmp_path, capsys):
    status, pairs = run(
        capsys, "keygen", "--k", 8, "--w", 10, "--seed", 1, "--insecure-params",
        "--out-dir", tmp_path, "--name", "alice",
    )
    assert status == EXIT_OK
    return tmp_path / "alice.pub", tmp_path / "alice.priv", pairs


@pytest.fixture
def cv_keys(tmp_path, capsys):
    status, pairs = run(
        capsys, "cv", "keygen", "--k", 4, "--w", 4, "--seed", 5, "--insecure-params",
        "--fn", "add", "--n", 6, "--sections", 3, "--out-dir", tmp_path, "--name", "adder",
    )
    assert status == EXIT_OK
    return pairs


# ============================================================================
# IME PIPELINE TESTS
# ============================================================================

def test_keygen_writes_key_pair(ime_keys):
    pub, priv, pairs = ime_keys
    assert pub.exists() and priv.exists()
    assert pairs["k"] == "8"
    assert pairs["w"] == "10"
    assert pairs["seed"] == "1"


def test_encrypt_decrypt_single_block(ime_keys, tmp_path, capsys):
    pub, priv, _ = ime_keys
    ct = tmp_path / "m.ct"
    status, pairs = run(capsys, "encrypt", "--pub", pub, "--message", "10110011", "--out", ct)
    assert status == EXIT_OK
    assert len(pairs["ciphertext"]) == 10

    status, pairs = run(capsys, "decrypt", "--priv", priv, "--in", ct)
    assert status == EXIT_OK
    assert pairs["plaintext[0]"] == "10110011"
    assert pairs["padding[0]"] == "00"


def test_block_mode_roundtrip(ime_keys, tmp_path, capsys):
    pub, priv, _ = ime_keys
    message = tmp_path / "message.bin"
    message.write_bytes(b"cryptovaluation over invertible circuits")
    status, pairs = run(
        capsys, "encrypt", "--pub", pub, "--in", message, "--padding", "random", "--seed", 9,
        "--out", tmp_path / "message.ct",
    )
    assert status == EXIT_OK
    assert int(pairs["blocks"]) > 1

    restored = tmp_path / "restored.bin"
    status, _ = run(
        capsys, "decrypt", "--priv", priv, "--in", tmp_path / "message.ct", "--out", restored, "--jobs", 2,
    )
    assert status == EXIT_OK
    assert restored.read_bytes() == message.read_bytes()


def test_inspect_reports_header(ime_keys, capsys):
    pub, _, _ = ime_keys
    status, pairs = run(capsys, "inspect", pub)
    assert status == EXIT_OK
    assert pairs["kind"] == "pubkey"
    assert (pairs["k"], pairs["w"], pairs["version"]) == ("8", "10", "1")


def test_encrypt_only_keygen(tmp_path, capsys):
    status, pairs = run(
        capsys, "keygen", "--k", 8, "--w", 12, "--seed", 2, "--insecure-params", "--encrypt-only",
        "--out-dir", tmp_path,
    )
    assert status == EXIT_OK
    assert pairs["v"] == "8"


def test_secure_preset_roundtrip(tmp_path, capsys):
    status, pairs = run(
        capsys, "keygen", "--preset", "(128,160)", "--seed", 7, "--jobs", 2,
        "--out-dir", tmp_path, "--name", "secure",
    )
    assert status == EXIT_OK
    assert (pairs["k"], pairs["w"], pairs["v"]) == ("128", "160", "160")

    message = "1101" * 32
    ct = tmp_path / "secure.ct"
    status, pairs = run(capsys, "encrypt", "--pub", tmp_path / "secure.pub", "--message", message, "--out", ct)
    assert status == EXIT_OK
    assert len(pairs["ciphertext"]) == 160

    status, pairs = run(capsys, "decrypt", "--priv", tmp_path / "secure.priv", "--in", ct)
    assert status == EXIT_OK
    assert pairs["plaintext[0]"] == message


# ============================================================================
# CIRCUIT AND CRYPTOVALUATION TESTS
# ============================================================================

def test_circuit_build_verifies(tmp_path, capsys):
    status, pairs = run(
        capsys, "circuit", "build", "--fn", "mul", "--width", 3, "--verify", "--out", tmp_path / "mul.circ",
    )
    assert status == EXIT_OK
    assert pairs["verify"] == "pass"
    assert pairs["checked"] == "64"
    assert pairs["wires"] == "13"
    assert pairs["ancillas"] == "7"


def test_circuit_build_in_shell(tmp_path, capsys):
    status, pairs = run(
        capsys, "circuit", "build", "--fn", "add", "--width", 2, "--shell", "--out", tmp_path / "add.circ",
    )
    assert status == EXIT_OK
    assert pairs["wires"] == "15"


def test_cryptovaluation_pipeline(cv_keys, tmp_path, capsys):
    assert cv_keys["n"] == "6"
    assert cv_keys["e"] == "3"
    assert (tmp_path / "adder.cvkey").exists()

    ct = tmp_path / "operands.ct"
    status, _ = run(capsys, "encrypt", "--pub", tmp_path / "adder.pub", "--operands", "3,2", "--out", ct)
    assert status == EXIT_OK

    result = tmp_path / "result.ct"
    status, pairs = run(
        capsys, "cv", "eval", "--program", tmp_path / "adder.prog", "--in", ct, "--out", result, "--jobs", 2,
    )
    assert status == EXIT_OK
    assert pairs["n"] == "6"

    status, pairs = run(
        capsys, "cv", "decrypt", "--key", tmp_path / "adder.cvkey", "--program", tmp_path / "adder.prog",
        "--in", result,
    )
    assert status == EXIT_OK
    # sum = 1 with the carry set
    assert pairs["result[0]"] == "5"
    assert pairs["bits[0]"] == "101"


def test_cv_eval_rejects_foreign_ciphertext(cv_keys, ime_keys, tmp_path, capsys):
    pub, _, _ = ime_keys
    ct = tmp_path / "wide.ct"
    run(capsys, "encrypt", "--pub", pub, "--message", "00000001", "--out", ct)
    status, _ = run(
        capsys, "cv", "eval", "--program", tmp_path / "adder.prog", "--in", ct, "--out", tmp_path / "x.ct",
    )
    assert status == EXIT_CONTRACT


def test_operands_must_fit(cv_keys, tmp_path, capsys):
    status, _ = run(
        capsys, "encrypt", "--pub", tmp_path / "adder.pub", "--operands", "4,1", "--out", tmp_path / "bad.ct",
    )
    assert status == EXIT_CONTRACT


def test_cv_keygen_default_sections(tmp_path, capsys):
    status, pairs = run(
        capsys, "cv", "keygen", "--k", 4, "--w", 4, "--seed", 5, "--insecure-params",
        "--fn", "add", "--n", 6, "--out-dir", tmp_path, "--name", "adder",
    )
    assert status == EXIT_OK
    assert pairs["e"] == "3"
    assert int(pairs["gates"]) >= 3


@pytest.mark.parametrize("k,w", [(16, 20), (32, 40), (64, 72)])
def test_reference_test_presets_pipeline(k, w, tmp_path, capsys):
    preset = f"({k},{w})"
    status, _ = run(
        capsys, "keygen", "--preset", preset, "--seed", 7, "--insecure-params",
        "--out-dir", tmp_path, "--name", "ime",
    )
    assert status == EXIT_OK
    message = "01" * (k // 2)
    run(capsys, "encrypt", "--pub", tmp_path / "ime.pub", "--message", message, "--out", tmp_path / "m.ct")
    status, pairs = run(capsys, "decrypt", "--priv", tmp_path / "ime.priv", "--in", tmp_path / "m.ct")
    assert status == EXIT_OK
    assert pairs["plaintext[0]"] == message

    n = w + 1
    status, pairs = run(
        capsys, "cv", "keygen", "--preset", preset, "--seed", 7, "--insecure-params", "--fn", "add",
        "--n", n, "--sections", n, "--out-dir", tmp_path, "--name", "cv",
    )
    assert status == EXIT_OK
    assert (pairs["n"], pairs["e"]) == (str(n), str(n))
    assert int(pairs["max_monomials"]) <= 4 * n * n

    ct = tmp_path / "operands.ct"
    status, _ = run(capsys, "encrypt", "--pub", tmp_path / "cv.pub", "--operands", "3,5", "--out", ct)
    assert status == EXIT_OK
    result = tmp_path / "result.ct"
    status, _ = run(capsys, "cv", "eval", "--program", tmp_path / "cv.prog", "--in", ct, "--out", result)
    assert status == EXIT_OK
    status, pairs = run(
        capsys, "cv", "decrypt", "--key", tmp_path / "cv.cvkey", "--program", tmp_path / "cv.prog", "--in", result,
    )
    assert status == EXIT_OK
    assert pairs["result[0]"] == "8"


# ============================================================================
# SECURITY, BENCH AND PRESET TESTS
# ============================================================================

def test_security_reference_parameters(capsys):
    status, pairs = run(capsys, "security", "--params", "128,160,13", "--l", 8, "--h", 13, "--chi", 2.5)
    assert status == EXIT_OK
    assert pairs["criterion"] == "pass"
    assert pairs["log2_icrp"] == "160.0000"
    assert pairs["bands.denc"] == "post-quantum"


def test_security_small_blocks_fail(capsys):
    status, pairs = run(capsys, "security", "--params", "128,160,13", "--blocks", "3,3")
    assert status == EXIT_OK
    assert pairs["criterion"] == "fail"
    assert pairs["criterion_ok.denc_gt_icrp"] == "False"


def test_security_measures_key_file(ime_keys, capsys):
    _, priv, _ = ime_keys
    status, pairs = run(capsys, "security", "--params", "8,10,2", "--key", priv)
    assert status == EXIT_OK
    assert pairs["l"] == "2"


def test_bench_ime_rows(tmp_path, capsys):
    out = tmp_path / "bench.csv"
    status, pairs = run(capsys, "bench", "--k", 8, "--w", 10, "--insecure-params", "--count", 20, "--out", out)
    assert status == EXIT_OK
    frame = pd.read_csv(out)
    assert list(frame.columns) == BENCH_COLUMNS
    assert frame["operation"].tolist() == ["keygen", "encrypt", "decrypt"]
    assert (frame["wall_s"] >= 0).all()


def test_bench_table_layout(tmp_path, capsys):
    out = tmp_path / "table.csv"
    status, _ = run(
        capsys, "bench", "--k", 8, "--w", 10, "--insecure-params", "--count", 10, "--table", "--out", out,
    )
    assert status == EXIT_OK
    frame = pd.read_csv(out)
    assert {"t_kg", "t_en", "t_de"} <= set(frame.columns)
    assert len(frame) == 1


def test_bench_cryptovaluation_rows(tmp_path, capsys):
    out = tmp_path / "cv.csv"
    status, _ = run(
        capsys, "bench", "--preset", "(4,4,6)", "--insecure-params", "--fn", "add", "--sections", 3,
        "--count", 10, "--out", out,
    )
    assert status == EXIT_OK
    frame = pd.read_csv(out)
    assert frame["operation"].tolist() == ["cv_keygen", "cv_eval", "cv_decrypt"]
    assert (frame["n"] == 6).all()


def test_bench_cryptovaluation_preset_table(tmp_path, capsys):
    out = tmp_path / "cv_table.csv"
    status, _ = run(
        capsys, "bench", "--preset", "(128,160,240)", "--fn", "add", "--seed", 7,
        "--count", 10, "--table", "--out", out,
    )
    assert status == EXIT_OK
    frame = pd.read_csv(out)
    assert {"T_kg", "T_evl", "T_de"} <= set(frame.columns)
    assert len(frame) == 1
    row = frame.iloc[0]
    assert (row["n"], row["e"]) == (240, 120)
    assert row["T_kg"] > 0 and row["T_evl"] > 0 and row["T_de"] > 0


def test_preset_list(capsys):
    assert run_command(["preset", "list"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "(16,20) test" in out
    assert "(128,160) secure" in out
    assert "(128,160,240) cryptovaluation" in out


def test_parse_preset():
    assert parse_preset("(128,160)") == (128, 160)
    assert parse_preset("128, 160, 240") == (128, 160, 240)


# ============================================================================
# EXIT STATUS TESTS
# ============================================================================

def test_small_k_needs_insecure_flag(tmp_path, capsys):
    status, _ = run(capsys, "keygen", "--k", 16, "--w", 20, "--seed", 1, "--out-dir", tmp_path)
    assert status == EXIT_CONTRACT


def test_missing_seed_is_usage_error(tmp_path, capsys):
    status, _ = run(capsys, "keygen", "--k", 8, "--w", 10, "--insecure-params", "--out-dir", tmp_path)
    assert status == EXIT_USAGE


def test_malformed_preset_is_usage_error(tmp_path, capsys):
    status, _ = run(capsys, "keygen", "--preset", "(16;20)", "--seed", 1, "--out-dir", tmp_path)
    assert status == EXIT_USAGE


def test_security_params_arity(capsys):
    status, _ = run(capsys, "security", "--params", "128,160")
    assert status == EXIT_USAGE


def test_encrypt_needs_a_message(ime_keys, tmp_path, capsys):
    pub, _, _ = ime_keys
    status, _ = run(capsys, "encrypt", "--pub", pub, "--out", tmp_path / "x.ct")
    assert status == EXIT_USAGE


def test_bad_magic_is_format_error(tmp_path, capsys):
    junk = tmp_path / "junk.bin"
    junk.write_bytes(b"PK\x03\x04" + bytes(40))
    status, _ = run(capsys, "inspect", junk)
    assert status == EXIT_FORMAT


def test_wrong_artefact_kind_is_format_error(ime_keys, tmp_path, capsys):
    pub, _, _ = ime_keys
    status, _ = run(capsys, "decrypt", "--priv", pub, "--in", pub)
    assert status == EXIT_FORMAT


def test_missing_file_is_usage_error(tmp_path, capsys):
    status, _ = run(capsys, "inspect", tmp_path / "absent.pub")
    assert status == EXIT_USAGE
