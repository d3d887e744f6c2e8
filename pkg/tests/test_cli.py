import subprocess
import sys

import pytest

from bip70dy.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def records(out: str) -> dict[str, str]:
    """Consumer for the key=value lines (first occurrence of each key wins)."""
    rec: dict[str, str] = {}
    for line in out.splitlines():
        if line.startswith("#") or "\t" in line or "=" not in line:
            continue
        for part in line.split(" "):
            k, sep, v = part.partition("=")
            if sep and k not in rec:
                rec[k] = v
    return rec


def traces(out: str) -> list[str]:
    """Split the trace blocks back out of ``check`` output."""
    blocks: list[list[str]] = []
    for line in out.splitlines():
        if line == "# bip70dy attack trace":
            blocks.append([line])
        elif blocks and (line.startswith("#") or "\t" in line):
            blocks[-1].append(line)
    return ["\n".join(b) + "\n" for b in blocks]


def test_check_baseline_reports_attack(capsys, tmp_path):
    out_file = tmp_path / "t.trace"
    code, out, _ = run(capsys, "check", "bip70_baseline", "--sessions", "1", "--trace-out", str(out_file))
    assert code == 2
    lines = [ln for ln in out.splitlines() if ln.startswith("goal=")]
    assert [ln.split()[1] for ln in lines] == ["verdict=Safe", "verdict=Attack", "verdict=Attack"]
    assert "text=M weakly authenticates C2 on (RC2, beta2)" in lines[1]
    assert records(out)["result"] == "Attack"
    blocks = traces(out)
    assert len(blocks) == 2 and out_file.read_text() == blocks[0]


def test_check_output_round_trips_through_replay(capsys, tmp_path):
    _, out, _ = run(capsys, "check", "bip70_baseline")
    for k, block in enumerate(traces(out)):
        f = tmp_path / f"{k}.trace"
        f.write_text(block)
        code, rout, _ = run(capsys, "replay", str(f), "bip70_baseline")
        assert code == 2
        goal_line = next(ln for ln in block.splitlines() if ln.startswith("# goal:"))
        n_steps = sum(1 for ln in block.splitlines() if "\t" in ln)
        assert rout.strip().endswith(f"steps={n_steps}")
        assert goal_line.split(":", 1)[1].strip() in rout


def test_replay_tampered_trace_fails(capsys, tmp_path):
    _, out, _ = run(capsys, "check", "bip70_baseline")
    block = traces(out)[0]
    lines = block.splitlines()
    k = next(i for i, ln in enumerate(lines) if "\tinject\t" in ln and "ni" in ln)
    parts = lines[k].split("\t")
    parts[6] = parts[6].replace("ni", "RC2#1")
    lines[k] = "\t".join(parts)
    f = tmp_path / "bad.trace"
    f.write_text("\n".join(lines) + "\n")
    code, _, err = run(capsys, "replay", str(f), "bip70_baseline")
    assert code == 1 and "replay failed" in err


def test_replay_empty_trace(capsys, tmp_path):
    f = tmp_path / "empty.trace"
    f.write_text("# bip70dy attack trace\n")
    code, _, err = run(capsys, "replay", str(f), "bip70_baseline")
    assert code == 1 and "no violation reached" in err


@pytest.mark.parametrize("name", ["bip70_endorsed", "bip70_merchant_bound"])
def test_check_fixes_safe(capsys, name):
    code, out, _ = run(capsys, "check", name)
    assert code == 0 and records(out)["result"] == "Safe"
    assert "verdict=Attack" not in out


def test_check_inconclusive(capsys):
    code, out, _ = run(capsys, "check", "bip70_endorsed", "--max-states", "10")
    assert code == 3 and records(out)["result"] == "Inconclusive"


def test_check_missing_file(capsys):
    code, _, err = run(capsys, "check", "/nonexistent/model.anbp")
    assert code == 1 and "no such file" in err


def test_check_parse_error_reports_span(capsys, tmp_path):
    f = tmp_path / "bad.anbp"
    f.write_text("Protocol: P\nTypes:\n  Agent A, B;\nActions:\n  A -> B: zz\n")
    code, _, err = run(capsys, "check", str(f))
    assert code == 1 and f"{f}:5:11:" in err


def test_check_unknown_corrupt_role(capsys):
    code, _, err = run(capsys, "check", "bip70_baseline", "--corrupt", "Z")
    assert code == 1 and "unknown role" in err


def test_usage_error(capsys):
    assert main(["check"]) == 1
    assert main(["frobnicate"]) == 1
    capsys.readouterr()


@pytest.mark.parametrize("protocol,wallet,code,outcome", [
    ("baseline", "malicious", 2, "attack_completed"),
    ("endorsed", "honest", 0, "attack_blocked"),
    ("endorsed", "malicious", 0, "attack_completed"),
    ("merchant-bound", "malicious", 0, "attack_completed"),
    ("endorsed", "omit", 0, "attack_rejected"),
])
def test_scenario(capsys, protocol, wallet, code, outcome):
    got, out, _ = run(capsys, "scenario", "--protocol", protocol, "--wallet", wallet, "--backend", "toy")
    rec = records(out)
    assert got == code
    assert rec["outcome"] == outcome and rec["protocol"] == protocol
    assert rec["deniability"] == ("true" if code == 2 else "false")
    assert rec["ledger_conserved"] == "true"


def test_bench_rows_and_warning(capsys):
    code, out, err = run(capsys, "bench", "--iterations", "1", "--backend", "toy")
    assert code == 0 and "warning" in err
    steps = [ln.split()[0] for ln in out.splitlines() if ln.startswith("step=")]
    assert len(steps) >= 6 and "step=6" in steps
    rec = records(out)
    assert float(rec["endorse_over_customer_total"]) > 0
    assert "comparable=false" in next(ln for ln in out.splitlines() if ln.startswith("step=5 "))


def test_bench_unknown_backend(capsys):
    code, _, err = run(capsys, "bench", "--backend", "rsa")
    assert code == 1 and "unknown backend" in err


def test_module_entry_point():
    p = subprocess.run([sys.executable, "-m", "bip70dy", "scenario", "--protocol", "baseline", "--backend", "toy"],
                       capture_output=True, text=True)
    assert p.returncode == 2 and "deniability=true" in p.stdout
