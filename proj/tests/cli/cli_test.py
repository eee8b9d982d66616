# SPDX-License-Identifier: Apache-2.0
"""End-to-end CLI checks: every subcommand on the mock backend plus exit codes."""

import csv
import json
import pathlib
import subprocess
import sys
import tempfile

QGEN = str(pathlib.Path(sys.argv[1]).resolve())
ROOT = pathlib.Path(sys.argv[2]).resolve()
DATA = ROOT / "data"
CONFIG = str(DATA / "config_sample.json")
LOS = str(DATA / "objectives_sample.tsv")

failures = []


def qgen(*args, cwd):
    return subprocess.run([QGEN, "-q", *args], cwd=cwd, capture_output=True, text=True)


def expect(name, proc, code):
    if proc.returncode != code:
        failures.append(f"{name}: exit {proc.returncode}, wanted {code}\n{proc.stderr}")


def check(name, cond):
    if not cond:
        failures.append(name)


with tempfile.TemporaryDirectory() as tmp:
    d = pathlib.Path(tmp)

    p = qgen("run", "--config", CONFIG, "--los", LOS, "--out", "bank.json",
             "--summary-json", "summary.json", cwd=d)
    expect("run", p, 0)
    summary = json.loads((d / "summary.json").read_text())
    counts = [s["count"] for s in summary["stages"]]
    check("run: four stages", len(counts) == 4)
    check("run: counts never grow", all(a >= b for a, b in zip(counts, counts[1:])))
    check("run: relevance matrix written", (d / "bank.json.relevance.csv").exists())

    # Staged commands reproduce the single run.
    expect("generate", qgen("generate", "--config", CONFIG, "--los", LOS, "--out", "g.json", cwd=d), 0)
    expect("filter", qgen("filter", "--config", CONFIG, "--bank", "g.json", "--out", "f.json", cwd=d), 0)
    expect("confide", qgen("confide", "--config", CONFIG, "--bank", "f.json", "--out", "c.json", cwd=d), 0)
    expect("align", qgen("align", "--config", CONFIG, "--bank", "c.json", "--out", "a.json",
                         "--matrix", "m.csv", cwd=d), 0)
    check("staged == run", (d / "a.json").read_bytes() == (d / "bank.json").read_bytes())

    expect("eval-set", qgen("eval-set", "--bank", "bank.json", "--out", "es.json",
                            "--n-los", "2", "--per-lo", "2", "--seed", "3", cwd=d), 0)
    expect("judge", qgen("judge", "--config", CONFIG, "--bank", "bank.json", "--eval-set", "es.json",
                         "--out", "model.jsonl", "--judge-id", "model", cwd=d), 0)
    expect("judge --pipeline", qgen("judge", "--config", CONFIG, "--bank", "bank.json",
                                    "--eval-set", "es.json", "--out", "pipe.jsonl",
                                    "--judge-id", "pipeline", "--pipeline", cwd=d), 0)
    lines = [l for l in (d / "model.jsonl").read_text().splitlines() if l and not l.startswith("#")]
    check("judge: one record per item", len(lines) == 4)

    p = qgen("metrics", "--records", str(DATA / "sample_human_judgments.jsonl"),
             "--csv", "report.csv", "--heatmap", "grid.csv", "--json", "report.json", cwd=d)
    expect("metrics", p, 0)
    rows = list(csv.DictReader((d / "report.csv").open()))
    kappa = {(r["judge_a"], r["judge_b"]): float(r["value"])
             for r in rows if r["section"] == "pairwise" and r["key"] == "kappa"}
    check("metrics: three pairs", len(kappa) == 3)
    json.loads((d / "report.json").read_text())

    expect("metrics machine", qgen("metrics", "--records", "model.jsonl", "pipe.jsonl",
                                   "--machine", "model", cwd=d), 0)

    expect("ablate", qgen("ablate", "--config", CONFIG, "--bank", "bank.json", "--out", "ab.csv",
                          "--means", "means.csv", "--repeats", "2", "--thresholds", "0.5", "0.9",
                          cwd=d), 0)
    ab = list(csv.DictReader((d / "ab.csv").open()))
    check("ablate: 2 runs x 2 thresholds x 3 versions", len(ab) == 12)

    # Exit codes.
    expect("missing option", qgen("run", "--config", CONFIG, cwd=d), 1)
    expect("unknown subcommand", qgen("frobnicate", cwd=d), 1)
    expect("bad threshold", qgen("confide", "--config", CONFIG, "--bank", "f.json", "--out", "x.json",
                                 "--threshold", "1.5", cwd=d), 1)
    expect("unreachable backend", qgen("generate", "--config", CONFIG, "--backend", "http",
                                       "--base-url", "http://127.0.0.1:1", "--los", LOS,
                                       "--out", "h.json", cwd=d), 2)
    (d / "bad.json").write_text("garbage")
    expect("corrupt bank", qgen("filter", "--bank", "bad.json", "--out", "x.json", cwd=d), 3)
    (d / "bad.jsonl").write_text('{"item_id": 1}\n')
    expect("corrupt records", qgen("metrics", "--records", "bad.jsonl", cwd=d), 3)
    expect("confide on generated bank", qgen("confide", "--config", CONFIG, "--bank", "g.json",
                                             "--out", "x.json", cwd=d), 1)
    expect("align before confide", qgen("align", "--config", CONFIG, "--bank", "f.json",
                                        "--out", "x.json", cwd=d), 1)

if failures:
    print("\n".join(failures))
    sys.exit(1)
print("cli ok")
