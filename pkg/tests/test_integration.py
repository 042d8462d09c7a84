"""End-to-end runs over the less-traveled lanes: free groups, weighted
generators, and file-ingested models."""

import json
import math

import pytest

from soficmix.cli import main, run_experiment
from soficmix.sofic import sofic_to_json, build_cycle_sofic


MARKOV_PROC = {
    "type": "markov",
    "transition": [[0.75, 0.25], [0.25, 0.75]],
    "stationary": [0.5, 0.5],
    "alphabet": [0, 1],
}


class TestFreeGroupPipeline:
    def test_random_model_certifies(self, tmp_path):
        config = {
            "format_version": 1,
            "kind": "experiment-config",
            "group": {"kind": "free", "rank": 2, "weights": [1.0, 1.0]},
            "sofic": {"builder": "random", "n": 300, "seed": 17},
            "process": MARKOV_PROC,
            # h is the second generator ("b"), words are syllable lists
            "measure": {"kind": "path-construction", "h": [[0, 1]], "l": 8, "filler_symbol": 0},
            "certify": {
                "window": [[], [[0, 1]]],
                "epsilon": 0.05,
                "radius": "auto",
                "q_max": 4,
                "gap_cap": 32,
                "orders": 4,
                "seed": 2,
                "w_set": "good-vertices",
            },
            "diagnose": {"delta": 0.05},
            "figures": False,
        }
        manifest = run_experiment(config, tmp_path / "out")
        assert manifest["verdict"] == "PASS"
        coverage = manifest["construction"]["coverage"]
        assert 0.5 < coverage <= 1.0

        conv = json.loads((tmp_path / "out" / "convergence.json").read_text())
        # Interior vertices of covered paths pull back exactly; the covered
        # fraction times (l-1)/l is the deterministic floor.
        interior = coverage * (8 - 1) / 8
        assert conv["fraction_within_delta"] == pytest.approx(interior, abs=1e-9)


class TestWeightedGenerators:
    def test_weighted_cycle_inflation(self, tmp_path):
        config = {
            "format_version": 1,
            "kind": "experiment-config",
            "group": {"kind": "free-abelian", "rank": 1, "weights": [2.0]},
            "sofic": {"builder": "cycle", "n": 512},
            "process": MARKOV_PROC,
            "measure": {"kind": "path-construction", "h": [1], "l": 32, "filler_symbol": 0},
            "certify": {
                "window": [[0], [1]],
                "epsilon": 0.01,
                "radius": "auto",
                "orders": 3,
                "seed": 5,
                "w_set": "good-vertices",
            },
            "figures": False,
        }
        manifest = run_experiment(config, tmp_path / "out")
        assert manifest["verdict"] == "PASS"
        derived = manifest["derived_radius"]
        # gap search is weight-free; the vertex radius scales with rho(h)=2
        assert derived["r0"] == 3
        assert manifest["radius"] == pytest.approx(3 * 2.0 + 2 * 2.0)


class TestFileIngestion:
    def _write_sofic(self, tmp_path, budget):
        sigma = build_cycle_sofic(128, budget=budget)
        path = tmp_path / "model.json"
        path.write_text(json.dumps(sofic_to_json(sigma)))
        return str(path)

    def _config(self, sofic_file):
        return {
            "format_version": 1,
            "kind": "experiment-config",
            "group": {"kind": "free-abelian", "rank": 1, "weights": [1.0]},
            "sofic": {"file": sofic_file},
            "process": MARKOV_PROC,
            "measure": {"kind": "path-construction", "h": [1], "l": 16, "filler_symbol": 0},
            "certify": {
                "window": [[0], [1]],
                "epsilon": 0.01,
                "radius": "auto",
                "orders": 3,
                "seed": 1,
                "w_set": "good-vertices",
            },
            "figures": False,
        }

    def test_ingested_model_runs(self, tmp_path):
        sofic_file = self._write_sofic(tmp_path, budget=32)
        manifest = run_experiment(self._config(sofic_file), tmp_path / "out")
        assert manifest["verdict"] == "PASS"

    def test_insufficient_budget_rejected(self, tmp_path, capsys):
        sofic_file = self._write_sofic(tmp_path, budget=3)
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(self._config(sofic_file)))
        rc = main(["run", "--config", str(cfg), "--out", str(tmp_path / "out")])
        assert rc == 1
        assert "budget" in capsys.readouterr().err
