import csv
import json

import pytest

from hypalg.cli import fmt, main, parse_config, scan_points
from hypalg.errors import ConfigError


def write(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data) if not isinstance(data, str) else data)
    return str(path)


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run(tmp_path, command, cfg, *extra, out="out"):
    return main([command, "--config", write(tmp_path, cfg), "--out", str(tmp_path / out),
                 *extra])


def test_build_chebyshev(tmp_path):
    assert run(tmp_path, "build", {"family": "chebyshev-t", "max_level": 64}) == 0
    text = (tmp_path / "out" / "axioms.txt").read_text()
    assert "result: PASS" in text
    table = rows(tmp_path / "out" / "table.csv")
    assert {"j": "1", "k": "1", "n": "2", "g": "0.5"} in table


def test_build_negative_linearization(tmp_path, capsys):
    cfg = {"family": {"preset": "explicit",
                      "params": {"a": ["1", "1/2"], "b": ["0", "-1/4"], "c": ["3/4"],
                                 "tail": "constant"}},
           "max_level": 8, "arithmetic": "rational"}
    assert run(tmp_path, "build", cfg) == 2
    assert "witness: check=nonnegative j=1 k=1 n=1 value=-1/4" in capsys.readouterr().out


def test_missing_tail_is_config_error(tmp_path):
    cfg = {"family": {"preset": "explicit",
                      "params": {"a": ["1", "1/2"], "b": ["0", "0"], "c": ["1/2"]}}}
    assert run(tmp_path, "build", cfg) == 1


def test_bad_json_reports_line(tmp_path, capsys):
    path = write(tmp_path, '{\n  "family": "chebyshev-t",\n  "max_level": }\n')
    assert main(["build", "--config", path]) == 1
    assert ":3:" in capsys.readouterr().err


def test_unknown_key_and_preset(tmp_path):
    assert run(tmp_path, "build", {"family": "chebyshev-t", "colour": 1}) == 1
    assert run(tmp_path, "build", {"family": "legendre"}) == 1


def test_spectrum_outputs(tmp_path):
    assert run(tmp_path, "spectrum", {"family": "chebyshev-t", "truncations": [64, 128]}) == 0
    assert rows(tmp_path / "out" / "masspoints.csv") == []
    cfg = {"family": "perturbed-chebyshev", "truncations": [200, 400]}
    assert run(tmp_path, "spectrum", cfg, out="p") == 0
    mps = rows(tmp_path / "p" / "masspoints.csv")
    assert len(mps) == 2 and all(r["stable"] == "true" for r in mps)


def test_spectrum_needs_two_truncations(tmp_path):
    assert run(tmp_path, "spectrum", {"family": "chebyshev-t", "truncations": [1]}) == 1


def test_analyze_identity(tmp_path):
    cfg = {"family": "chebyshev-t", "truncations": [64, 128]}
    assert run(tmp_path, "analyze", cfg, "--x", "1") == 0
    (row,) = rows(tmp_path / "out" / "verdicts.csv")
    assert row["verdict"] == "IDENTITY_ALWAYS_AMENABLE"
    bundle = json.loads((tmp_path / "out" / "report.json").read_text())
    assert bundle["corollary_check"] is True and bundle["config"] == cfg


def test_scan_chebyshev_u(tmp_path):
    cfg = {"family": "chebyshev-u", "truncations": [128, 256],
           "scan": {"x_min": "-0.9", "x_max": "0.9", "step": "0.3"}}
    assert run(tmp_path, "scan", cfg) == 0
    got = rows(tmp_path / "out" / "verdicts.csv")
    assert len(got) == 7 and {r["verdict"] for r in got} == {"NOT_AMENABLE"}
    assert all(r["clause"] for r in got)


def test_mean_symmetric(tmp_path, capsys):
    cfg = {"family": {"preset": "symmetric", "params": {"b": ["1"], "tail": "constant"}},
           "truncations": [20, 40], "arithmetic": "rational"}
    assert run(tmp_path, "mean", cfg, "--x", "3/4") == 0
    mean = rows(tmp_path / "out" / "mean.csv")
    assert [r["m"] for r in mean] == ["1/4", "1/4", "-1/4"]
    res = (tmp_path / "out" / "residuals.txt").read_text()
    assert "idempotency: 0" in res and "verified: True" in res
    assert run(tmp_path, "mean", cfg, "--x", "1") == 4
    assert "compact" in capsys.readouterr().err
    assert run(tmp_path, "mean", cfg, "--x", "0.3") == 4
    assert "OUTSIDE_DUAL" in capsys.readouterr().err


def test_mean_needs_single_x(tmp_path):
    cfg = {"family": "chebyshev-t", "truncations": [64, 128]}
    assert run(tmp_path, "mean", cfg) == 1


def test_determinism(tmp_path):
    cfg = {"family": "perturbed-chebyshev", "truncations": [128, 256],
           "scan": {"x": ["-1.1547005383792515", "0.25", "3"]}}
    for out in ("a", "b"):
        assert run(tmp_path, "scan", cfg, out=out) == 0
        assert run(tmp_path, "spectrum", cfg, out=out) == 0
    for name in ("verdicts.csv", "spectrum.csv", "masspoints.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        assert b"\r" not in (tmp_path / "a" / name).read_bytes()


def test_fmt():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(float("inf")) == "inf"
    assert fmt(True) == "true"
    assert fmt(3) == "3"


def test_scan_grid_exact():
    cfg = parse_config({"family": "chebyshev-t",
                        "scan": {"x_min": "-0.9", "x_max": "0.9", "step": "0.3"}})
    assert scan_points(cfg) == [-0.9, -0.6, -0.3, 0.0, 0.3, 0.6, 0.9]


def test_parse_config_rejects_nonpositive_tolerance():
    with pytest.raises(ConfigError):
        parse_config({"family": "chebyshev-t", "tolerances": {"tol": 0}})
