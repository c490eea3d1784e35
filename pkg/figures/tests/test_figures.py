import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from lppfigures import FigureJob, SchemaError, main, render


def _solve(out_dir, *args):
    cmd = [sys.executable, "-m", "lpplab.cli", "solve", "--out", str(out_dir)] + list(args)
    proc = subprocess.run(cmd, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return Path(out_dir)


@pytest.fixture(scope="session")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("small")
    return _solve(out, "--model", "iid-pareto2", "--n", "8", "--seed", "2",
                  "--geodesic", "--dump-weights")


@pytest.fixture(scope="session")
def big_run(tmp_path_factory):
    # the 2^12 run used by the figure round-trip acceptance check
    out = tmp_path_factory.mktemp("big")
    return _solve(out, "--model", "iid-pareto2", "--n", "4096", "--seed", "7",
                  "--geodesic")


@pytest.fixture(scope="session")
def experiment_summary(tmp_path_factory):
    out = tmp_path_factory.mktemp("exp")
    cfg = {"environment": {"kind": "brw", "n": 8, "seed": 0},
           "n_list": [8, 16, 32], "replicates": 100,
           "measure": ["value"], "seed": 3, "threads": 2}
    cfg_path = out / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    proc = subprocess.run([sys.executable, "-m", "lpplab.cli", "experiment",
                           str(cfg_path), "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return out / "summary.json"


class TestJobParsing:
    def test_valid(self, tmp_path):
        doc = {"kind": "histogram", "inputs": {"path_weights": "a.csv"},
               "out": str(tmp_path / "h.png")}
        job = FigureJob.from_json(doc)
        assert job.kind == "histogram" and job.options == {}

    def test_unknown_kind(self):
        with pytest.raises(SchemaError, match="kind"):
            FigureJob.from_json({"kind": "pie", "inputs": {}, "out": "x.png"})

    def test_unknown_keys(self):
        with pytest.raises(SchemaError, match="extra"):
            FigureJob.from_json({"kind": "histogram", "inputs": {},
                                 "out": "x.png", "extra": 1})

    def test_missing_keys(self):
        with pytest.raises(SchemaError, match="out"):
            FigureJob.from_json({"kind": "histogram", "inputs": {}})


class TestRenderers:
    def test_heatmap_geodesic(self, small_run, tmp_path):
        out = tmp_path / "heatmap.png"
        info = render({"kind": "heatmap_geodesic",
                       "inputs": {"weights": str(small_run / "weights_2.csv"),
                                  "geodesic": str(small_run / "geodesic_2.csv")},
                       "out": str(out)})
        assert out.exists()
        assert info["grid"] == [9, 9]
        assert info["geodesic_vertices"] == 17

    def test_skeleton_endpoints_only_above_max(self, small_run, tmp_path):
        out = tmp_path / "sk.png"
        info = render({"kind": "skeletons",
                       "inputs": {"path_weights": str(small_run / "path_weights_2.csv")},
                       "out": str(out), "options": {"thresholds": [10 ** 9]}})
        assert info["sizes"][10 ** 9] == 2  # a single corner-to-corner segment

    def test_skeleton_full_below_min(self, small_run, tmp_path):
        info = render({"kind": "skeletons",
                       "inputs": {"path_weights": str(small_run / "path_weights_2.csv")},
                       "out": str(tmp_path / "sk.png"),
                       "options": {"thresholds": [0.0]}})
        assert info["sizes"][0.0] == 17

    def test_histogram(self, small_run, tmp_path):
        out = tmp_path / "h.png"
        info = render({"kind": "histogram",
                       "inputs": {"path_weights": str(small_run / "path_weights_2.csv")},
                       "out": str(out), "options": {"bins": 8}})
        assert out.exists()
        assert sum(info["bin_counts"]) == 17

    def test_growth_curve(self, experiment_summary, tmp_path):
        out = tmp_path / "g.png"
        info = render({"kind": "growth_curve",
                       "inputs": {"summary": str(experiment_summary)},
                       "out": str(out)})
        assert out.exists()
        assert info["ns"] == [8, 16, 32]

    def test_variance_curve(self, experiment_summary, tmp_path):
        out = tmp_path / "v.png"
        info = render({"kind": "variance_curve",
                       "inputs": {"summary": str(experiment_summary)},
                       "out": str(out)})
        assert out.exists()
        assert len(info["ns"]) == 3


class TestDeterminismAndErrors:
    def test_byte_identical_rerenders(self, small_run, tmp_path):
        job = {"kind": "histogram",
               "inputs": {"path_weights": str(small_run / "path_weights_2.csv")},
               "out": str(tmp_path / "a.png")}
        render(job)
        first = (tmp_path / "a.png").read_bytes()
        job["out"] = str(tmp_path / "b.png")
        render(job)
        assert (tmp_path / "b.png").read_bytes() == first

    def test_schema_mismatch_names_column(self, tmp_path):
        bad = tmp_path / "bad.csv"
        with open(bad, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "value"])  # should be 'weight'
            w.writerow([0, 0, 1.0])
        with pytest.raises(SchemaError, match="weight"):
            render({"kind": "histogram", "inputs": {"path_weights": str(bad)},
                    "out": str(tmp_path / "h.png")})

    def test_cli_exit_codes(self, small_run, tmp_path):
        job_path = tmp_path / "job.json"
        job_path.write_text(json.dumps({
            "kind": "histogram",
            "inputs": {"path_weights": str(small_run / "path_weights_2.csv")},
            "out": str(tmp_path / "h.png")}))
        assert main([str(job_path)]) == 0
        job_path.write_text(json.dumps({"kind": "nope", "inputs": {}, "out": "x"}))
        assert main([str(job_path)]) == 1
        assert main([]) == 2


class TestAcceptanceRoundTrip:
    def test_nested_skeletons_at_2_12(self, big_run, tmp_path):
        n = 4096
        thresholds = [n / 2 ** (3 * k) for k in range(4)]
        info = render({"kind": "skeletons",
                       "inputs": {"path_weights": str(big_run / "path_weights_7.csv")},
                       "out": str(tmp_path / "skeletons.png"),
                       "options": {"thresholds": thresholds}})
        sets = [set(info["skeleton_indices"][t]) for t in sorted(thresholds, reverse=True)]
        nested = all(a <= b for a, b in zip(sets, sets[1:]))
        sizes = [len(s) for s in sets]
        print(f"\n[{'PASS' if nested else 'FAIL'}] nested skeletons at 2^12 -- "
              f"sizes {sizes} for thresholds {sorted(thresholds, reverse=True)}")
        assert nested and sizes[0] >= 2 and sizes[-1] > sizes[0]

    def test_histogram_monotone_at_2_12(self, big_run, tmp_path):
        info = render({"kind": "histogram",
                       "inputs": {"path_weights": str(big_run / "path_weights_7.csv")},
                       "out": str(tmp_path / "hist.png"),
                       "options": {"bins": 24, "log_log": True}})
        counts = info["bin_counts"]
        qualifying = [c for c in counts if c >= 10]
        monotone = all(b < a for a, b in zip(qualifying, qualifying[1:]))
        print(f"\n[{'PASS' if monotone else 'FAIL'}] log-log histogram monotone -- "
              f"qualifying bins {qualifying}")
        assert monotone
