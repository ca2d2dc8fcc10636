import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from lrquant import cli
from lrquant.config import parse_config
from lrquant.errors import ConfigError
from lrquant.runner import csv_text, format_value

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

MINIMAL = """\
manifold: {kind: Circle, L: 2*pi}
jobs:
  - kind: spectrum
    params: {rep: t}
reps:
  t: {angles: [pi/2]}
"""


def test_minimal_document():
    cfg = parse_config(MINIMAL)
    assert cfg.manifold.kind == "Circle"
    assert cfg.manifold.extent[0] == pytest.approx(2 * math.pi)
    assert cfg.grids == [64]
    (job,) = cfg.jobs
    assert job.kind == "spectrum" and job.params["k"] == 5 and job.name == "00-spectrum"
    assert len(cfg.source_hash) == 64


def test_misspelled_key_is_named_with_line():
    text = MINIMAL.replace("params: {rep: t}", "parms: {rep: t}")
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.path == "jobs[0].parms" and exc.value.line == 4
    assert "'parms'" in str(exc.value)
    with pytest.raises(ConfigError, match="'tolerence'"):
        parse_config(MINIMAL + "tolerence: {lr: 1e-3}\n")


def test_unknown_param_and_bad_reference():
    with pytest.raises(ConfigError, match="'kk'"):
        parse_config(MINIMAL.replace("{rep: t}", "{rep: t, kk: 3}"))
    with pytest.raises(ConfigError, match="unknown name 'u'"):
        parse_config(MINIMAL.replace("{rep: t}", "{rep: u}"))


def _klein_doc(a_entries):
    flat = ", ".join(f"[{float(z.real)!r}, {float(z.imag)!r}]" for z in a_entries)
    return f"""\
manifold: {{kind: KleinBottle, L1: 1, L2: 1}}
reps:
  r:
    fiber_dim: 2
    matrices:
      - [{flat}]
      - [[0, 0], [1, 0], [1, 0], [0, 0]]
"""


def test_perturbed_unitary_is_rejected_naming_generator():
    a = np.diag([np.exp(0.8j), np.exp(-0.8j)])
    parse_config(_klein_doc(a.ravel()))
    bad = a.copy()
    bad[0, 0] *= 1 + 1e-6
    with pytest.raises(ConfigError, match=r"R\(a\)") as exc:
        parse_config(_klein_doc(bad.ravel()))
    assert exc.value.path == "reps.r" and exc.value.line == 3


def test_bad_dsl_fails_before_any_job():
    with pytest.raises(ConfigError, match="functions.f"):
        parse_config(MINIMAL + "functions:\n  f: sin(x\n")
    with pytest.raises(ConfigError, match="malformed YAML"):
        parse_config("manifold: [unclosed\n")


def test_format_and_csv_layout():
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(None) == ""
    text = csv_text(["a", "b"], [{"a": 1.5, "b": "x"}], timestamp=False)
    assert text == "a,b\n1.5,x\n"
    assert csv_text(["a"], [], timestamp=True).startswith("# generated ")


def test_empty_job_list_exits_zero(tmp_path, capsys):
    cfg = tmp_path / "empty.yaml"
    cfg.write_text("manifold: {kind: Circle, L: 1}\njobs: []\n")
    assert cli.main(["report", str(cfg), "--out", str(tmp_path / "out")]) == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["jobs"] == [] and set(report) == {"version", "config-hash", "jobs"}


def test_config_error_exits_two(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("manifold: {kind: Circle, L: 1}\njobz: []\n")
    assert cli.main(["verify", str(cfg), "--out", str(tmp_path)]) == 2
    assert "jobz" in capsys.readouterr().err


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def test_verify_lr_example(tmp_path):
    assert cli.main(["verify", str(CONFIGS / "circle_lr.yaml"), "--out", str(tmp_path), "--no-timestamp"]) == 0
    rows = _rows(tmp_path / "lr-sin-cos.csv")
    assert [r["n"] for r in rows] == ["256", "512"]
    assert 3.5 <= float(rows[1]["ratio"]) <= 4.5


def test_sweep_example(tmp_path):
    assert cli.main(["spectrum", str(CONFIGS / "circle_sweep.yaml"), "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "circle-sweep.csv")
    assert len(rows) == 3
    for row, theta in zip(rows, (0, math.pi / 2, math.pi)):
        E = [float(row[f"E{i}"]) for i in range(3)]
        ref = [0.5 * (m + theta / (2 * math.pi)) ** 2 for m in (0, -1, 1, 2, -2)]
        np.testing.assert_allclose(E, sorted(ref)[:3], atol=1e-3)


def test_failing_tolerance_exits_one(tmp_path):
    text = (CONFIGS / "circle_lr.yaml").read_text() + "tolerances: {lr: 1e-9}\n"
    cfg = tmp_path / "tight.yaml"
    cfg.write_text(text)
    assert cli.main(["verify", str(cfg), "--out", str(tmp_path / "out")]) == 1
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["jobs"][0]["pass"] is False


def test_selection_filters_job_kinds(tmp_path):
    assert cli.main(["verify", str(CONFIGS / "circle_sweep.yaml"), "--out", str(tmp_path)]) == 0
    assert not (tmp_path / "circle-sweep.csv").exists()
