import csv
import json
import math

import numpy as np
import pytest

from lmwave import ConfigError, SimulationConfig, calibrate_sigma_scale, generate_design, run_grid
from lmwave.simulate import (
    COMPONENTS,
    SIGMA_FIELDS,
    MiseReport,
    TestFunctionSuite,
    coefficient_sampling,
    export_surface,
    mise_on_grid,
    realized_snr,
    replicate_seeds,
    run_replicate,
    sigma_field,
    simulate_replicate,
    write_surface_csv,
)

# mean grid MISE of 20 noise-free replicates at N=2**12, J=6, default threshold
NOISE_FREE_FLOOR = 0.0156


def small_config(**kw):
    base = dict(n=2**10, alphas=(0.8, 0.2), snrs_db=(10.0,), sigma_fields=("sigma1", "sigma4"),
                reps=3, levels=5, grid=64)
    base.update(kw)
    return SimulationConfig(**base)


class TestFunctions:
    @pytest.mark.parametrize("name", sorted(COMPONENTS))
    def test_components_integrate_to_zero(self, name):
        t = (np.arange(2**16) + 0.5) / 2**16
        assert abs(COMPONENTS[name](t).mean()) < 1e-8

    def test_field_forms(self):
        t = np.array([0.0, 0.25, 0.5])
        np.testing.assert_allclose(COMPONENTS["quadratic"](t), 8 * (t - 0.5) ** 2 - 2 / 3)
        np.testing.assert_allclose(COMPONENTS["cosine"](t), -np.cos(4 * np.pi * t + 1))

    @pytest.mark.parametrize("sid", sorted(SIGMA_FIELDS))
    def test_sigma_positive(self, sid):
        g = np.linspace(0, 1, 41)
        T, X = np.meshgrid(g, g)
        assert sigma_field(sid)(T, X).min() > 0

    def test_sigma_values(self):
        assert sigma_field("sigma4")(0.6, 0.4) == pytest.approx(1.0 * math.sqrt(1.0))
        assert sigma_field("sigma3")(0.1, 0.4) == pytest.approx(0.5)
        assert sigma_field("sigma5")(0.6, 0.5) == pytest.approx(1.0)

    def test_unknown_sigma(self):
        with pytest.raises(ConfigError):
            sigma_field("sigma9")

    def test_beta0_rule(self):
        X = generate_design(101, 2, seed=1)
        suite = TestFunctionSuite()
        assert suite.beta0(X) == pytest.approx(0.25 * np.median(suite.additive(X)))


class TestDesign:
    def test_uniform_ks(self):
        from scipy.stats import kstest

        n = 2**12
        passes = 0
        for seed in range(100):
            X = generate_design(n, 2, seed)
            assert X.min() >= 0 and X.max() < 1
            passes += kstest(X[:, 0], "uniform").statistic < 1.63 / math.sqrt(n)
        assert passes >= 95

    def test_reproducible(self):
        assert np.array_equal(generate_design(100, 3, 7), generate_design(100, 3, 7))

    def test_columns_uncorrelated(self):
        n = 2**12
        X = generate_design(n, 2, 3)
        assert abs(np.corrcoef(X.T)[0, 1]) < 4 / math.sqrt(n)


class TestCalibration:
    def setup_method(self):
        rng = np.random.default_rng(0)
        self.U = rng.standard_normal(500)
        self.eps = rng.standard_normal(500)
        self.sig = 0.5 + rng.random(500)

    def test_zero_db(self):
        c = calibrate_sigma_scale(self.U, self.eps, self.sig, 0.0)
        e = c * self.sig * self.eps
        assert np.dot(e, e) == pytest.approx(np.dot(self.U, self.U), rel=1e-12)

    @pytest.mark.parametrize("target", [-5.0, 10.0, 15.0, 40.0])
    @pytest.mark.parametrize("convention", ["literal", "power"])
    def test_inversion(self, target, convention):
        for scale in (1.0, 2.0):
            U = scale * self.U
            c = calibrate_sigma_scale(U, self.eps, self.sig, target, convention)
            assert realized_snr(U, c * self.sig * self.eps, convention) == pytest.approx(target, abs=1e-10)

    def test_doubling_signal_doubles_scale(self):
        a = calibrate_sigma_scale(self.U, self.eps, self.sig, 10.0)
        b = calibrate_sigma_scale(2 * self.U, self.eps, self.sig, 10.0)
        assert b == pytest.approx(2 * a, rel=1e-12)

    def test_infinite_snr(self):
        assert calibrate_sigma_scale(self.U, self.eps, self.sig, math.inf) == 0.0

    def test_zero_noise(self):
        with pytest.raises(ValueError):
            calibrate_sigma_scale(self.U, np.zeros(500), self.sig, 10.0)

    def test_realized_snr_in_replicate(self):
        cfg = SimulationConfig(reps=1)
        rep = simulate_replicate(cfg, ("sigma1", 10.0, 0.8), 0)
        noise = rep.responses - rep.truth
        assert realized_snr(rep.truth, noise) == pytest.approx(10.0, abs=1e-9)


class TestSeeds:
    def test_common_random_numbers(self):
        cfg = small_config()
        a = replicate_seeds(cfg, ("sigma1", 10.0, 0.8), 4)
        b = replicate_seeds(cfg, ("sigma4", 15.0, 0.2), 4)
        assert [s.generate_state(2).tolist() for s in a] == [s.generate_state(2).tolist() for s in b]

    def test_independent_cells(self):
        cfg = small_config(common_random_numbers=False)
        a = replicate_seeds(cfg, ("sigma1", 10.0, 0.8), 4)
        b = replicate_seeds(cfg, ("sigma4", 10.0, 0.8), 4)
        assert a[0].generate_state(2).tolist() != b[0].generate_state(2).tolist()

    def test_streams_differ(self):
        d, n = replicate_seeds(small_config(), ("sigma1", 10.0, 0.8), 0)
        assert d.generate_state(2).tolist() != n.generate_state(2).tolist()


class TestReplicate:
    def test_zero_function_exact(self):
        cfg = SimulationConfig(components=("zero", "zero"), snrs_db=(math.inf,), reps=1)
        assert run_replicate(cfg, ("sigma1", math.inf, 0.8), 0) <= 1e-20

    def test_infinite_snr_floor(self):
        cfg = SimulationConfig(reps=1)
        for rep in range(3):
            assert run_replicate(cfg, ("sigma1", math.inf, 0.8), rep) < 10 * NOISE_FREE_FLOOR

    def test_reference_cell_order_of_magnitude(self):
        cfg = SimulationConfig(reps=10)
        vals = [run_replicate(cfg, ("sigma1", 10.0, 0.8), i) for i in range(10)]
        assert 0.0247 / 3 < np.median(vals) < 0.0247 * 3

    def test_detail_fields(self):
        d = run_replicate(small_config(), ("sigma4", 10.0, 0.2), 1, detail=True)
        assert set(d) == {"mise", "mise_obs", "beta0", "noise_scale"}
        assert d["mise_obs"] > d["mise"]

    def test_grid_formula_matches_brute_force(self):
        cfg = small_config()
        rep = simulate_replicate(cfg, ("sigma1", 10.0, 0.8), 2)
        suite = cfg.suite()
        g = np.arange(32) / 32
        T, X = np.meshgrid(g, g, indexing="ij")
        P = np.column_stack([T.ravel(), X.ravel()])
        brute = np.mean((rep.fit.predict(P) - suite.truth(P, rep.beta0)) ** 2)
        assert mise_on_grid(rep.fit, suite, rep.beta0, 32) == pytest.approx(brute, rel=1e-12)


class TestGrid:
    def test_report_shape_and_determinism(self):
        cfg = small_config()
        a = run_grid(cfg)
        b = run_grid(cfg)
        assert len(a.cells) == 4
        assert all(c.n_reps == 3 for c in a.cells)
        assert a.to_csv() == b.to_csv()

    def test_workers_do_not_change_results(self):
        cfg = small_config(sigma_fields=("sigma2",))
        assert run_grid(cfg, workers=1).to_csv() == run_grid(cfg, workers=2).to_csv()

    def test_single_rep_flags_se(self, tmp_path):
        report = run_grid(small_config(reps=1, sigma_fields=("sigma1",), alphas=(0.8,)))
        cell = report.cells[0]
        assert not cell.se_defined and math.isnan(cell.se)
        csv_path, json_path = report.write(tmp_path)
        doc = json.loads(json_path.read_text())
        assert doc["cells"][0]["se"] is None
        assert doc["cells"][0]["se_defined"] is False
        header = csv_path.read_text().splitlines()[0].split(",")
        assert header[:6] == ["sigma_id", "snr_db", "alpha", "mean_mise", "se", "n_reps"]

    def test_on_cell_callback(self):
        seen = []
        run_grid(small_config(), on_cell=lambda r: seen.append(len(r.cells)))
        assert seen == [1, 2, 3, 4]

    def test_lookup(self):
        report = run_grid(small_config(reps=2))
        assert report.lookup("sigma4", 10.0, 0.2).alpha == 0.2
        with pytest.raises(KeyError):
            report.lookup("sigma3", 10.0, 0.2)


class TestSurface:
    def test_zero_surface(self):
        cfg = SimulationConfig(components=("zero", "zero"), snrs_db=(math.inf,), reps=1, n=256)
        rep = simulate_replicate(cfg, ("sigma1", math.inf, 0.8), 0)
        rows = export_surface(rep.fit, cfg.suite(), rep.beta0, grid=8)
        assert np.all(rows[:, 2:] == 0.0)

    def test_rows_and_header(self, tmp_path):
        cfg = small_config()
        rep = simulate_replicate(cfg, ("sigma1", 10.0, 0.8), 0)
        path = write_surface_csv(tmp_path / "s.csv", export_surface(rep.fit, cfg.suite(), rep.beta0, grid=16))
        with path.open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["t", "x", "U", "U_hat"]
        assert len(rows) == 257

    def test_surface_mise_matches_replicate(self):
        cfg = SimulationConfig(reps=1)
        cell = ("sigma5", 15.0, 0.8)
        rep = simulate_replicate(cfg, cell, 0)
        rows = export_surface(rep.fit, cfg.suite(), rep.beta0, grid=cfg.grid)
        surface_mise = np.mean((rows[:, 3] - rows[:, 2]) ** 2)
        assert surface_mise == pytest.approx(run_replicate(cfg, cell, 0), abs=1e-12)


class TestConfig:
    def test_defaults_match_study(self):
        cfg = SimulationConfig()
        assert cfg.n == 4096 and cfg.reps == 1000 and cfg.levels == 6
        assert cfg.alphas == (0.8, 0.6, 0.4, 0.2) and cfg.snrs_db == (10.0, 15.0)
        assert len(cfg.cells()) == 40

    @pytest.mark.parametrize(
        "kw",
        [dict(n=1000), dict(alphas=()), dict(alphas=(1.5,)), dict(sigma_fields=("s",)), dict(reps=0),
         dict(snr_convention="db"), dict(regime="soft"), dict(components=("quadratic",)), dict(alphas="0.2")],
    )
    def test_validation(self, kw):
        with pytest.raises(ConfigError):
            SimulationConfig(**kw)

    def test_toml_and_json(self, tmp_path):
        toml = tmp_path / "c.toml"
        toml.write_text('[simulation]\nn = 1024\nalphas = [0.4]\nreps = 7\n')
        js = tmp_path / "c.json"
        js.write_text(json.dumps({"n": 1024, "alphas": [0.4], "reps": 7}))
        a, b = SimulationConfig.from_file(toml), SimulationConfig.from_file(js)
        assert a == b and a.reps == 7 and a.alphas == (0.4,)
        assert a.config_hash() == b.config_hash()

    def test_unknown_key(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text('{"nn": 3}')
        with pytest.raises(ConfigError):
            SimulationConfig.from_file(p)

    def test_missing_and_malformed(self, tmp_path):
        with pytest.raises(ConfigError):
            SimulationConfig.from_file(tmp_path / "absent.toml")
        bad = tmp_path / "bad.toml"
        bad.write_text("n = = 3")
        with pytest.raises(ConfigError):
            SimulationConfig.from_file(bad)


class TestCoefficientSampling:
    def test_shapes_and_truth(self):
        out = coefficient_sampling(512, 5, 0.8, seed=1)
        assert out["beta"].shape == (5,) and out["intercept"].shape == (5,)
        assert out["beta_true"] != 0.0

    def test_deterministic(self):
        a = coefficient_sampling(256, 4, 0.4, "sigma4", seed=3)
        b = coefficient_sampling(256, 4, 0.4, "sigma4", seed=3)
        assert np.array_equal(a["beta"], b["beta"])
