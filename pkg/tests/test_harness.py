from __future__ import annotations

import csv
import io
import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from critperc.harness import cli
from critperc.harness import experiments as ex
from critperc.harness.config import (
    OUT_ENV, ConfigError, ExperimentConfig, ResultRecord, default_config, load_config, output_dir, thresholds,
)
from critperc.harness.engine import ExitSampler, QuadGrid, upper_arc
from critperc.harness.io import to_csv, write_results
from critperc.harness.render import render_svg, svg_loop_vertex_counts
from critperc.hexlattice import DomainSpec, delta_approximation
from critperc.loopbuilder import run
from critperc.percolation import BLUE, sample, trace_contours

# ---------------------------------------------------------------- config


def test_defaults_exist_for_every_kind():
    for kind in ("cardy", "exit-law", "loops", "conformal"):
        cfg = default_config(kind)
        assert cfg.kind == kind and cfg.n > 0
        assert ExperimentConfig.from_dict(json.loads(cfg.to_json())) == cfg


@pytest.mark.parametrize("bad", [
    {"kind": "nope", "domain": "disk"},
    {"kind": "cardy", "domain": "disk", "n": 0},
    {"kind": "cardy", "domain": "disk", "deltas": [1.5]},
    {"kind": "loops", "domain": "disk", "epsilons": [-0.1]},
    {"kind": "cardy", "domain": "disk", "colour": "blue"},
])
def test_invalid_configs_rejected(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(bad)


def test_load_config_merges_over_defaults(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"cardy": {"n": 123, "params": {"trend_n": 7}}, "loops": {"n": 5}}))
    cfg = load_config(p, "cardy")
    base = default_config("cardy")
    assert cfg.n == 123 and cfg.params["trend_n"] == 7
    assert cfg.params["perturbed_n"] == base.params["perturbed_n"]
    assert cfg.deltas == base.deltas
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json", "cardy")


def test_output_dir_precedence(monkeypatch, tmp_path):
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "env"))
    assert output_dir() == tmp_path / "env"
    assert output_dir(str(tmp_path / "flag")) == tmp_path / "flag"
    monkeypatch.delenv(OUT_ENV)
    assert output_dir().name == "critperc-out"


def test_thresholds_are_versioned():
    th = thresholds()
    assert th["version"] >= 1
    assert th["loop_census"]["k95_ratio"] == 1.5
    assert th["exit_law"]["ks_cardy"] == 0.02


# ---------------------------------------------------------------- io


def test_csv_is_rfc4180():
    rows = [{"a": 'x,"y"', "b": 1.5, "c": True}, {"a": "line\nbreak", "b": float("nan"), "c": None}]
    text = to_csv(rows)
    assert text.count("\r\n") == 3
    back = list(csv.reader(io.StringIO(text, newline="")))
    assert back[0] == ["a", "b", "c"]
    assert back[1] == ['x,"y"', "1.5", "true"]
    assert back[2] == ["line\nbreak", "nan", ""]


def test_results_json_schema(tmp_path):
    cfg = default_config("cardy")
    rec = [ResultRecord("x", {"delta": 0.1}, 0.5, 0.01, 0.5, 0.0, 1.0, True),
           ResultRecord("y", {}, float("nan"))]
    write_results(tmp_path, cfg, rec, {"t": [{"u": 1}]}, True)
    doc = json.loads((tmp_path / "results.json").read_text())
    assert doc["experiment"] == "cardy" and doc["passed"] is True
    assert doc["config"]["seed"] == cfg.seed
    assert set(doc["records"][0]) == {"experiment", "params", "estimate", "stderr", "oracle", "statistic",
                                      "wall_time", "passed"}
    assert doc["records"][1]["estimate"] is None
    assert (tmp_path / "t.csv").read_bytes() == b"u\r\n1\r\n"


def _tiny_cardy(seed=3):
    return ExperimentConfig("cardy", "rhombus", [1 / 16], [], 400, seed, None,
                            {"trend_deltas": [1 / 16, 1 / 32], "trend_n": 400, "perturbed_n": 200})


def test_replay_gives_identical_csv_bytes(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        res = ex.run_experiment(_tiny_cardy())
        write_results(out, _tiny_cardy(), res.records, res.tables, res.passed)
    for name in ("results.csv", "cardy_square.csv", "cardy_rectangle.csv", "cardy_perturbed.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_parallel_workers_do_not_change_output():
    g = QuadGrid.rhombus(10)
    one = ex.crossing_samples(g, 5000, 17, workers=1)
    two = ex.crossing_samples(g, 5000, 17, workers=2)
    assert np.array_equal(one, two)


def test_samples_are_order_independent():
    g = QuadGrid.rhombus(12)
    full = g.crossings(5, 0, 300)
    parts = np.concatenate([g.crossings(5, a, min(300, a + 70)) for a in range(0, 300, 70)])
    assert np.array_equal(full, parts)


def test_crossings_match_cell_by_cell_oracle():
    from critperc.percolation import crosses

    g = QuadGrid.rhombus(9)
    x = g.crossings(11, 0, 60)
    cells = set(int(c) for c in g.ids)
    for k in range(60):
        col = sample(cells, 11, k).as_dict()
        assert x[k] == crosses(col, cells, set(int(c) for c in g.ids[g.start]),
                               set(int(c) for c in g.ids[g.goal]), BLUE)


# ---------------------------------------------------------------- statistics


def test_standard_error_shrinks_as_inverse_root_n():
    g = QuadGrid.rhombus(6)
    ns = (1000, 10000, 100000)
    se = [ex._mean_se(ex.crossing_samples(g, n, 2024))[1] for n in ns]
    for k in range(2):
        assert se[k] / se[k + 1] == pytest.approx(math.sqrt(ns[k + 1] / ns[k]), rel=0.2)


def test_rhombus_crossing_is_one_half_exactly_by_symmetry():
    # swapping the two lattice axes exchanges crossings and their dual
    g = QuadGrid.rhombus(5)
    x = ex.crossing_samples(g, 20000, 8)
    se = x.std(ddof=1) / math.sqrt(len(x))
    assert abs(x.mean() - 0.5) <= 3 * se


def test_lattice_rectangle_has_requested_aspect():
    for d in (1 / 16, 1 / 32, 1 / 64):
        g, aspect = ex.lattice_rectangle(d)
        assert abs(aspect - 2) < 0.02
        assert len(g.start) == len(g.goal)


def test_rectangle_quadrature_oracle_limits():
    # crossing one way or its dual the other way: phi(a) + phi(1/a) = 1
    assert ex.rectangle_phi_quadrature(1.0) == pytest.approx(0.5, abs=1e-9)
    for a in (1.3, 2.0, 4.0):
        assert ex.rectangle_phi_quadrature(a) + ex.rectangle_phi_quadrature(1 / a) == pytest.approx(1, abs=1e-8)
    assert ex.rectangle_phi_quadrature(4.0) < ex.rectangle_phi_quadrature(2.0) < 0.5


def test_lattice_ks_on_exact_sample_is_small():
    sup = np.linspace(0, 1, 101)
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 1, 20000)
    snapped = sup[np.searchsorted((sup[:-1] + sup[1:]) / 2, x)]
    assert ex.lattice_ks(snapped, sup, lambda t: np.clip(t, 0, 1)) < 0.015
    assert ex.lattice_ks_2samp(snapped, snapped[::-1], sup) == 0.0


def test_exit_median_is_symmetric():
    smp = ExitSampler.build(DomainSpec.half_disk(), 1 / 16, 0j, 1j, upper_arc)
    # the lattice half-disk is mirror symmetric about the imaginary axis
    assert np.allclose(np.sort(math.pi - smp.support), smp.support, atol=1e-9)
    theta = smp.sample(4, 0, 600)
    lo, hi = np.mean(theta < math.pi / 2 - 1e-9), np.mean(theta > math.pi / 2 + 1e-9)
    assert abs(lo - hi) <= 3 * math.sqrt((lo + hi) / len(theta))


def test_conformal_identity_is_exact_and_independent_seeds_agree():
    cfg = ExperimentConfig("conformal", "disk-square", [1 / 16], [], 2000, 6, None, {"loop_n": 0})
    res = ex.run_conformal_invariance(cfg)
    ident = next(r for r in res.records if r.experiment == "conformal-identity")
    assert ident.statistic == 0.0 and ident.passed
    g = QuadGrid.from_domain(DomainSpec.disk(radius=1.0), 1 / 16, list(ex.DISK_MARKS))
    a, b = ex.crossing_samples(g, 4000, 1), ex.crossing_samples(g, 4000, 2)
    z = (a.mean() - b.mean()) / math.hypot(a.std(ddof=1) / 63.25, b.std(ddof=1) / 63.25)
    assert abs(z) <= 3


def test_nesting_depth_counts_surrounding_loops():
    ring = lambda r, n=60: (np.exp(2j * np.pi * np.arange(n) / n) * r, "ccw")
    loops = [ring(0.3), ring(0.05), ring(0.8), (0.2 + 0.05 * np.exp(2j * np.pi * np.arange(20) / 20), "ccw")]

    class L:
        def __init__(self, z):
            self.z = z

        def points(self):
            return self.z

    assert ex.nesting_depth([L(z) for z, _ in loops], 0.1, 0.5) == 1
    assert ex.nesting_depth([L(z) for z, _ in loops[:1] + loops[2:3]], 0.1, 0.9) == 2


def test_structure_census_is_clean():
    s = ex.structure_census(5, 3, radius=8.0)
    assert s.shape == (5, 3) and not s.any()


def test_triple_points_detects_shared_vertex():
    D = delta_approximation(DomainSpec.disk(radius=6.0), 1.0)
    col = sample(D.hexes, 1).as_dict()
    loops = trace_contours(col, D.hexes, BLUE).loops
    assert ex.triple_points(loops) == 0
    if loops:
        assert ex.triple_points(loops + loops[:1]) == len(set(loops[0].vertices))


# ---------------------------------------------------------------- render


def _loops(seed=0, radius=8.0):
    D = delta_approximation(DomainSpec.disk(radius=radius), 1.0)
    return D, run(D, sample(D.hexes, seed).as_dict())


def test_empty_loopset_gives_outline_only():
    text = render_svg([], domain=DomainSpec.disk(radius=1.0))
    root = ET.fromstring(text.split("\n", 1)[1])
    polys = root.findall("{http://www.w3.org/2000/svg}polygon")
    assert len(polys) == 1 and polys[0].get("class") == "domain"
    assert svg_loop_vertex_counts(text) == []


def test_svg_is_deterministic_and_valid(tmp_path):
    D, ls = _loops()
    a = render_svg(ls, domain=DomainSpec.disk(radius=8.0), path=tmp_path / "a.svg")
    b = render_svg(ls, domain=DomainSpec.disk(radius=8.0), path=tmp_path / "b.svg")
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes() and a == b
    ET.fromstring(a.split("\n", 1)[1])


def test_svg_vertex_counts_parse_back():
    _, ls = _loops(seed=4)
    text = render_svg(ls)
    assert svg_loop_vertex_counts(text) == [len(l.vertices) for l in ls]


def test_svg_colours_follow_orientation():
    _, ls = _loops(seed=5)
    text = render_svg(ls, style={"ccw": "#000001", "cw": "#000002"})
    root = ET.fromstring(text.split("\n", 1)[1])
    polys = [p for p in root.iter("{http://www.w3.org/2000/svg}polygon") if "loop" in p.get("class")]
    assert len(polys) == len(ls)
    for p, l in zip(polys, ls):
        assert p.get("stroke") == {"ccw": "#000001", "cw": "#000002"}[l.orientation]


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=3, max_size=30))
def test_svg_points_round_trip(pts):
    z = np.array([complex(a, b) for a, b in pts])
    text = render_svg([(z, "ccw")])
    got = text.split('points="')[1].split('"')[0].split()
    back = np.array([complex(float(p.split(",")[0]), -float(p.split(",")[1])) for p in got])
    assert np.allclose(back, z, atol=1e-6)


# ---------------------------------------------------------------- cli


def test_cli_selftest_passes(tmp_path, capsys):
    assert cli.main(["selftest", "--out", str(tmp_path)]) == 0
    assert "PASS selftest-contours" in capsys.readouterr().out


def test_cli_usage_and_config_errors_exit_one(tmp_path):
    assert cli.main(["cardy", "--bogus"]) == 1
    assert cli.main(["cardy", "--config", str(tmp_path / "missing.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n": -3}))
    assert cli.main(["cardy", "--config", str(bad), "--out", str(tmp_path)]) == 1


def test_cli_breach_exits_two_and_pass_exits_zero(tmp_path, monkeypatch):
    def fake(passed):
        def runner(cfg, workers):
            return ex.Outcome([ResultRecord("fake", {}, 1.0, passed=passed)], {})
        return runner

    monkeypatch.setitem(ex.RUNNERS, "cardy", fake(False))
    assert cli.main(["cardy", "--out", str(tmp_path), "--no-figures"]) == 2
    monkeypatch.setitem(ex.RUNNERS, "cardy", fake(True))
    assert cli.main(["cardy", "--out", str(tmp_path), "--no-figures"]) == 0
    assert (tmp_path / "cardy" / "results.json").exists()


def test_cli_env_var_sets_output(tmp_path, monkeypatch):
    monkeypatch.setenv(OUT_ENV, str(tmp_path))
    assert cli.main(["render", "--seed", "2", "--mesh", "0.125"]) == 0
    assert (tmp_path / "loops_seed2.svg").exists() and (tmp_path / "loops_seed2.csv").exists()


def test_cli_experiment_writes_csv_and_figures(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"deltas": [0.0625], "n": 300,
                               "params": {"trend_deltas": [0.0625, 0.03125], "trend_n": 300, "perturbed_n": 0}}))
    code = cli.main(["cardy", "--config", str(cfg), "--out", str(tmp_path), "--seed", "9"])
    assert code in (0, 2)
    out = tmp_path / "cardy"
    assert (out / "results.csv").exists() and (out / "cardy_trend.png").exists()
    assert (out / "cardy_trend.png").read_bytes()[:4] == b"\x89PNG"
