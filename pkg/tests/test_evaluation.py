import json

import numpy as np
import pytest

from proxilearn import evaluation
from proxilearn.data import DoCurve


class TestCmae:
    def test_identical_curves(self):
        c = DoCurve(grid=[0.0, 1.0], estimate=[0.3, 0.7])
        assert evaluation.cmae(c, c) == 0.0

    def test_constant_offset(self):
        grid = [0.0, 1.0, 2.0]
        a = DoCurve(grid=grid, estimate=[1.0, 2.0, 3.0])
        b = DoCurve(grid=grid, estimate=[1.5, 2.5, 3.5])
        assert evaluation.cmae(a, b) == pytest.approx(0.5)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(0)
        grid = np.arange(5.0)
        est = rng.normal(size=5)
        tru = rng.normal(size=5)
        a = DoCurve(grid=grid, estimate=est)
        b = DoCurve(grid=grid, estimate=tru)
        acc = sum(abs(est[i] - tru[i]) for i in range(5)) / 5
        assert evaluation.cmae(a, b) == pytest.approx(acc, rel=1e-12)

    def test_grid_mismatch_rejected(self):
        a = DoCurve(grid=[0.0, 1.0], estimate=[0.0, 0.0])
        b = DoCurve(grid=[0.0, 2.0], estimate=[0.0, 0.0])
        with pytest.raises(ValueError, match="different grids"):
            evaluation.cmae(a, b)


class TestRunTable:
    def small_table(self, **kwargs):
        grid = np.linspace(-0.5, 1.5, 5)
        truth = DoCurve(grid=grid, estimate=np.zeros(5))
        defaults = dict(n=60, n_seeds=3, methods=("ridge", "linear2s"),
                        a_grid=grid, truth=truth)
        defaults.update(kwargs)
        return evaluation.run_table(**defaults)

    def test_deterministic(self):
        one = self.small_table()
        two = self.small_table()
        assert one.per_seed == two.per_seed
        assert one.summary() == two.summary()

    def test_deterministic_across_worker_counts(self):
        serial = self.small_table(workers=1)
        threaded = self.small_table(workers=3)
        assert serial.per_seed == threaded.per_seed

    def test_method_filter(self):
        result = self.small_table(methods=("ridge",))
        assert result.methods == ["ridge"]
        assert set(result.per_seed) == {"ridge"}

    def test_low_rank_method_runs(self):
        result = self.small_table(methods=("pmmr-nystrom",), n_seeds=2)
        assert np.isfinite(result.per_seed["pmmr-nystrom"]).all()

    def test_empty_methods_rejected(self):
        with pytest.raises(ValueError, match="nonempty"):
            self.small_table(methods=())

    def test_unknown_method_rejected(self):
        with pytest.raises(ValueError, match="unknown method"):
            self.small_table(methods=("nope",))

    def test_aggregates_recomputable(self):
        result = self.small_table()
        for m in result.methods:
            values = np.array(result.per_seed[m])
            assert result.mean(m) == pytest.approx(values.mean())
            assert result.std(m) == pytest.approx(values.std())

    def test_failure_fraction_aborts_with_diagnostics(self, monkeypatch):
        real = evaluation.fit_method

        def flaky(name, data, a_grid, seed=0):
            if name == "linear2s":
                raise RuntimeError("synthetic failure for test")
            return real(name, data, a_grid, seed)

        monkeypatch.setattr(evaluation, "fit_method", flaky)
        with pytest.raises(RuntimeError, match="linear2s.*failed"):
            self.small_table()

    def test_output_files(self, tmp_path):
        result = self.small_table()
        csv_path = tmp_path / "r.csv"
        json_path = tmp_path / "r.json"
        result.to_csv(csv_path)
        result.to_json(json_path)
        assert csv_path.read_text().startswith("method,n,seed,cmae")
        payload = json.loads(json_path.read_text())
        assert payload["config"]["methods"] == result.methods
        assert "ridge" in payload["cmae"]

    def test_workers_env_cap(self, monkeypatch):
        monkeypatch.setenv("PROXI_THREADS", "1")
        assert evaluation.max_workers() == 1
        monkeypatch.setenv("PROXI_THREADS", "junk")
        with pytest.raises(ValueError, match="PROXI_THREADS"):
            evaluation.max_workers()


class TestDefaultGrid:
    def test_grid_spans_central_ninety_percent(self):
        grid = evaluation.default_a_grid()
        assert grid.shape == (9,)
        assert np.all(np.diff(grid) > 0)
        spacing = np.diff(grid)
        np.testing.assert_allclose(spacing, spacing[0], rtol=1e-9)
        # treatment is U2 + small noise with U2 ~ U[-1, 2]
        assert grid[0] == pytest.approx(-0.85, abs=0.1)
        assert grid[-1] == pytest.approx(1.85, abs=0.1)


@pytest.mark.slow
class TestTwentySeedInvariants:
    def test_ordering_at_500(self, table500):
        assert table500.mean("kpv") < table500.mean("ridge")
        assert table500.mean("kpv") < table500.mean("ridge-w")
        assert table500.mean("pmmr") < table500.mean("ridge")
        assert table500.mean("pmmr") < table500.mean("ridge-w")

    def test_ordering_at_1000(self, table1000):
        assert table1000.mean("kpv") < table1000.mean("ridge")
        assert table1000.mean("kpv") < table1000.mean("ridge-w")
        assert table1000.mean("pmmr") < table1000.mean("ridge")
        assert table1000.mean("pmmr") < table1000.mean("ridge-w")

    def test_pmmr_sample_size_trend(self, table200, table1000):
        assert table1000.mean("pmmr") <= table200.mean("pmmr")
