"""End-to-end acceptance runs over every shipped experiment config.

Each test executes one configs/criterion-*.json through the command line
entry point into a scratch directory, asserts a clean pass within the
stated wall-clock budget, and prints one summary line.  The final test
re-runs every config and compares artifact digests against the first
runs, so the whole suite executes each config exactly twice.
"""

import hashlib
import json
import time
from pathlib import Path

import pytest

from nilfix import cli

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

# wall-clock budget in seconds and a one-line description per criterion
CRITERIA = {
    1: (1.0, "class bound table exact"),
    2: (120.0, "sampled Lipschitz quotients stay within propagated bounds"),
    3: (60.0, "sampled displacement never drops under the certified floor"),
    4: (60.0, "displacement directions spread less than the angle bound"),
    5: (10.0, "recurrence time, loop winding, and located fixed point"),
    6: (10.0, "extracted sub-loop is simple and carries index one"),
    7: (5.0, "transport identities hold exactly for all parameter pairs"),
    8: (30.0, "invariant drifts at unit rate along the transversal flow"),
    9: (120.0, "staged search lands on the singular line, stages nested"),
    10: (120.0, "jet exp/log roundtrips and combination-series checks"),
    11: (300.0, "matrix and jet families reach their nilpotency classes"),
}

ARTIFACTS = ("certificate.json", "data.csv")

# criterion number -> {artifact name -> sha256} from the first run
_DIGESTS: dict = {}


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_criterion(n: int, scratch: Path) -> tuple[float, dict]:
    src = CONFIG_DIR / f"criterion-{n:02d}.json"
    config = json.loads(src.read_text(encoding="utf-8"))
    scratch.mkdir(parents=True, exist_ok=True)
    out_dir = scratch / f"out-{n:02d}"
    config["out"] = str(out_dir)
    cfg_path = scratch / src.name
    cfg_path.write_text(json.dumps(config), encoding="utf-8")

    start = time.perf_counter()
    rc = cli.run(str(cfg_path))
    elapsed = time.perf_counter() - start
    assert rc == 0, f"criterion {n}: exit code {rc}"
    digests = {name: _digest(out_dir / name) for name in ARTIFACTS}
    return elapsed, digests


@pytest.mark.parametrize("n", sorted(CRITERIA), ids=[f"{n:02d}" for n in sorted(CRITERIA)])
def test_criterion(n, tmp_path):
    budget, description = CRITERIA[n]
    try:
        elapsed, digests = run_criterion(n, tmp_path)
    except AssertionError:
        print(f"criterion {n}: FAIL - {description}")
        raise
    _DIGESTS[n] = digests
    print(f"criterion {n}: PASS - {description} ({elapsed:.1f}s)")
    assert elapsed < budget, f"criterion {n}: {elapsed:.1f}s over budget {budget}s"


def test_criterion_determinism(tmp_path):
    mismatches = []
    for n in sorted(CRITERIA):
        if n not in _DIGESTS:
            _DIGESTS[n] = run_criterion(n, tmp_path / "first")[1]
        rerun = run_criterion(n, tmp_path / "second")[1]
        if rerun != _DIGESTS[n]:
            mismatches.append(n)
    status = "FAIL" if mismatches else "PASS"
    print(f"criterion 12: {status} - artifacts byte-identical across reruns")
    assert not mismatches, f"artifact bytes changed on rerun: {mismatches}"
