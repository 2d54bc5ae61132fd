import json
import math

import numpy as np
import pytest

from banditpref.errors import ConfigurationError
from banditpref.harness import (ExperimentConfig, MonteCarloReport, consistency_check, figure1_dataset,
                                figure1_demo, find_misleading_seed, montecarlo_theorem2, run_experiment,
                                sub_seed)
from banditpref import io as bio


def small_config(tmp_path, **kw):
    base = dict(K=5, n=40, epochs=40, out=str(tmp_path / "run"), lam_grid=(0.0, 0.1, 1.0, 10.0, 1000.0))
    base.update(kw)
    return ExperimentConfig(**base)


class TestExperimentConfig:
    def test_defaults(self):
        cfg = ExperimentConfig()
        assert (cfg.K, cfg.n, cfg.alpha, cfg.beta) == (10, 60, 0.01, 0.001)
        assert cfg.train_config("mle").beta == 0.0
        assert cfg.train_config("ids").beta == 0.001
        assert cfg.train_config("ids").batch_size == 1

    def test_overrides(self):
        cfg = ExperimentConfig(overrides={"ids": {"alpha": 0.5}})
        assert cfg.train_config("ids").alpha == 0.5 and cfg.train_config("mle").alpha == 0.01

    @pytest.mark.parametrize("kw", [dict(estimators=()), dict(estimators=("svm",)), dict(trials=0),
                                    dict(weighting="pairs"), dict(overrides={"x": {}}),
                                    dict(overrides={"ids": {"beta": 2.0}})])
    def test_invalid(self, kw):
        with pytest.raises(ConfigurationError):
            ExperimentConfig(**kw)


class TestRunExperiment:
    def test_outputs_and_determinism(self, tmp_path):
        cfg = small_config(tmp_path, estimators=("mle", "pessimistic", "ids", "ids_v2"))
        manifest = run_experiment(cfg)
        out = tmp_path / "run"
        first = {f: (out / f).read_bytes() for f in manifest["files"] + ["manifest.json"]}
        run_experiment(cfg)
        assert first == {f: (out / f).read_bytes() for f in first}
        meta = json.loads((out / "manifest.json").read_text())
        assert meta["seed"] == 0 and "PCG64" in meta["generator"] and meta["version"]
        for name in cfg.estimators:
            trace = bio.read_trace(out / f"{name}_trace.csv")
            assert len(trace.rewards[0]) == 5
            proxy = [p.proxy_reward for p in bio.read_curve(out / f"{name}_curve.csv")]
            assert np.all(np.diff(proxy) >= -1e-12)

    def test_trials_use_sub_seeds(self, tmp_path):
        manifest = run_experiment(small_config(tmp_path, trials=2, estimators=("ids",)))
        seeds = [run["seed"] for run in manifest["summary"]["ids"]]
        assert seeds == [sub_seed(0, 0), sub_seed(0, 1)]
        assert (tmp_path / "run" / "trial_1" / "ids_curve.csv").exists()

    def test_custom_dataset(self, tmp_path):
        cfg = small_config(tmp_path, estimators=("mle",))
        run_experiment(cfg)
        data = str(tmp_path / "run" / "dataset.txt")
        with pytest.raises(ConfigurationError):
            run_experiment(small_config(tmp_path, data_path=data))
        manifest = run_experiment(small_config(tmp_path, data_path=data, r_star=(1, 0, 0, 0, 0),
                                               out=str(tmp_path / "custom"), estimators=("mle",)))
        assert manifest["summary"]["mle"][0]["seed"] == 0

    def test_unwritable(self, tmp_path):
        (tmp_path / "file").write_text("x")
        with pytest.raises(OSError):
            run_experiment(small_config(tmp_path, out=str(tmp_path / "file" / "sub")))


class TestMonteCarlo:
    def test_report(self):
        rep = MonteCarloReport(100, {"a": 37})
        lo, hi = rep.interval("a")
        assert rep.frequency("a") == 0.37 and lo < 0.37 < hi
        assert next(rep.lines()).startswith("a: 37/100")

    def test_requires_large_n(self):
        with pytest.raises(ConfigurationError):
            montecarlo_theorem2(500, 10)

    def test_small_run(self):
        rep = montecarlo_theorem2(501, 300, 1)
        c = rep.counts
        assert c["joint"] <= c["single_tail"] <= 300
        assert c["argmax_wrong"] >= c["joint"] * 0.5
        for event in c:
            lo, hi = rep.interval(event)
            assert lo <= rep.frequency(event) <= hi

    def test_wilson_coverage(self):
        n = 501
        p_single = (1 - 1 / n) ** (n - 1)
        p_joint = p_single / (1 + math.e)
        covered = {"single_tail": 0, "joint": 0}
        for meta in range(100):
            rep = montecarlo_theorem2(n, 300, 1000 + meta, long_budget=False)
            for event, p in (("single_tail", p_single), ("joint", p_joint)):
                lo, hi = rep.interval(event)
                covered[event] += lo <= p <= hi
        assert covered["single_tail"] >= 93 and covered["joint"] >= 93


class TestConsistency:
    def test_error_shrinks_with_n(self):
        small = [consistency_check(3, 1_000, s) for s in range(5)]
        large = [consistency_check(3, 100_000, s) for s in range(5)]
        assert np.median(large) < np.median(small)
        assert max(large) <= 0.05

    def test_null_instance(self):
        assert consistency_check(3, 10_000, 0, r_star=np.zeros(3)) <= 0.05


class TestThreeArmDemo:
    def test_tail_win_probability(self):
        freq = np.mean([figure1_dataset(s).y[-1] == 0 for s in range(10_000)])
        assert abs(freq - 0.269) < 0.02

    def test_demo(self):
        seed = next(s for s in range(100) if figure1_dataset(s).y[-1] == 0)
        rep = figure1_demo(seed)
        assert rep.tail_won_by_arm2 and rep.mle_diverging
        assert rep.mle_reward[0] - rep.mle_reward[2] <= -5
        assert abs(rep.ids_reward[0] - rep.ids_reward[2]) < 1
        assert abs(rep.ids_p01 - 0.7311) <= 3 * math.sqrt(0.7311 * 0.2689 / 1000)


class TestMisleadingSeed:
    def test_detector(self):
        seed = find_misleading_seed(3, 60)
        assert seed == 5
        with pytest.raises(ConfigurationError):
            find_misleading_seed(3, 60, start=0, limit=3)
