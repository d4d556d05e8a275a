import json
import math

import numpy as np
import pytest

from flockns.cli import main
from flockns.config import ConfigError, canonical_hash, default_config, load_config
from flockns.sinks import make_record, read_ndjson, write_ndjson


class TestConfig:
    def test_defaults_load(self):
        cfg = load_config()
        assert cfg.scheme.d == 1 and cfg.scheme.n == 64
        assert cfg.noise_model is not None
        rho0, u0 = cfg.initial_data()
        assert rho0.data.min() > 0
        assert u0.shape == (cfg.scheme.m, 1)

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown configuration key"):
            load_config({"scheme": {"bogus": 1}})

    def test_violated_constraint_named(self):
        with pytest.raises(ConfigError, match="gamma"):
            load_config({"scheme": {"gamma": 1.0}})
        with pytest.raises(ConfigError, match="strictly positive"):
            load_config({"initial_data": {"rho_base": 0.1, "rho_amp": 0.5}})
        with pytest.raises(ConfigError, match="axis"):
            load_config({"sweep": {"axis": "bogus"}})

    def test_override_parsing(self):
        cfg = load_config(None, overrides=["scheme.h=0.005", "noise.enabled=false"])
        assert cfg.scheme.h == 0.005
        assert cfg.noise_model is None
        with pytest.raises(ConfigError):
            load_config(None, overrides=["nonsense"])
        with pytest.raises(ConfigError):
            load_config(None, overrides=["scheme.bogus=1"])

    def test_hash_canonicalization(self):
        base = canonical_hash(default_config())
        explicit = default_config()
        explicit["scheme"]["h"] = 0.01  # same value restated
        assert canonical_hash(explicit) == base
        moved = default_config()
        moved["outputs"]["dir"] = "elsewhere"
        assert canonical_hash(moved) == base
        changed = default_config()
        changed["scheme"]["h"] = 0.005
        assert canonical_hash(changed) != base

    def test_traveling_wave_constant_mode(self):
        cfg = load_config({"initial_data": {"preset": "traveling_wave", "u_speed": 0.4},
                           "scheme": {"m": 7}})
        _, u0 = cfg.initial_data()
        from flockns.torus import coeffs_to_field

        u = coeffs_to_field(cfg.grid, u0)
        assert np.abs(u.data - 0.4).max() < 1e-14

    def test_file_initial_data(self, tmp_path):
        cfg0 = load_config()
        grid = cfg0.grid
        x = grid.coords()[0]
        rho = 1.0 + 0.1 * np.cos(math.pi * x)
        u = (0.05 * np.sin(math.pi * x))[np.newaxis]
        path = tmp_path / "init.npz"
        np.savez(path, rho=rho, u=u)
        cfg = load_config({"initial_data": {"file": str(path)}})
        rho0, u0 = cfg.initial_data()
        assert np.allclose(rho0.data, rho)

    def test_tabulated_kernels(self, tmp_path):
        cfg0 = load_config()
        grid = cfg0.grid
        x = grid.coords()[0]
        np.save(tmp_path / "K.npy", np.cos(math.pi * x))
        np.save(tmp_path / "psi.npy", (1 + np.cos(math.pi * x)) / 2)
        cfg = load_config({"kernels": {"K_file": str(tmp_path / "K.npy"),
                                       "psi_file": str(tmp_path / "psi.npy")}})
        assert np.allclose(cfg.kernels.K.data, np.cos(math.pi * x))
        with pytest.raises(ConfigError, match="both"):
            load_config({"kernels": {"K_file": str(tmp_path / "K.npy")}})

    def test_asymmetric_kernel_file_rejected(self, tmp_path):
        cfg0 = load_config()
        x = cfg0.grid.coords()[0]
        np.save(tmp_path / "K.npy", np.sin(math.pi * x))  # odd: not symmetric
        np.save(tmp_path / "psi.npy", (1 + np.cos(math.pi * x)) / 2)
        with pytest.raises(ConfigError, match="assumptions"):
            load_config({"kernels": {"K_file": str(tmp_path / "K.npy"),
                                     "psi_file": str(tmp_path / "psi.npy")}})


def _fast_overrides(T="0.03"):
    return ["--set", f"scheme.T={T}", "--set", "outputs.snapshot_times=[]"]


class TestCliRun:
    def test_run_byte_identical_repeat(self, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            code = main(["run", "--out", str(out), "--seed", "7", *_fast_overrides()])
            assert code == 0
            outs.append(out)
        for fname in ("trajectory.ndjson", "reports.ndjson", "summary.csv"):
            b1 = (outs[0] / fname).read_bytes()
            b2 = (outs[1] / fname).read_bytes()
            assert b1 == b2, fname

    def test_metadata_reports_noise_tail(self, tmp_path):
        out = tmp_path / "meta"
        assert main(["run", "--out", str(out), *_fast_overrides()]) == 0
        meta = read_ndjson(out / "metadata.json")[0]
        assert meta["kind"] == "metadata"
        assert meta["noise_tail_mass"] > 0
        assert meta["schema"] == "flockns.v1"
        assert "config_hash" in meta and "build" in meta

    def test_invalid_config_exit_2(self, tmp_path, capsys):
        code = main(["run", "--out", str(tmp_path / "x"), "--set", "scheme.gamma=1.2"])
        assert code == 2
        assert "gamma" in capsys.readouterr().err

    @pytest.mark.filterwarnings("ignore:inner advective CFL")
    def test_runtime_breach_exit_3(self, tmp_path):
        out = tmp_path / "breach"
        code = main([
            "run", "--out", str(out),
            "--set", "scheme.h=0.5", "--set", "scheme.T=0.5",
            "--set", "scheme.sub_steps=1", "--set", "initial_data.u_amp=3.0",
            "--set", "noise.enabled=false",
        ])
        assert code == 3
        breach = json.loads((out / "breach.json").read_text())
        assert breach["error"] == "PositivityError"
        assert "index" in breach

    def test_renormalized_report_emitted(self, tmp_path):
        out = tmp_path / "renorm"
        code = main(["run", "--out", str(out), *_fast_overrides(),
                     "--set", "outputs.reports=[mass, energy, renormalized]"])
        assert code == 0
        kinds = {r["kind"] for r in read_ndjson(out / "reports.ndjson")}
        assert "renormalized_defect" in kinds


class TestCliEnsembleSweep:
    def test_thread_count_invariance(self, tmp_path):
        payloads = []
        for threads, name in ((1, "t1"), (4, "t4")):
            out = tmp_path / name
            code = main(["ensemble", "--out", str(out), "--threads", str(threads),
                         "--set", "ensemble.paths=4", *_fast_overrides()])
            assert code == 0
            payloads.append((out / "ensemble.ndjson").read_bytes())
        assert payloads[0] == payloads[1]

    def test_sweep_emits_gaps(self, tmp_path):
        out = tmp_path / "sweep"
        code = main(["sweep", "--out", str(out), "--set", "scheme.T=0.05",
                     "--set", "sweep.values=[0.04, 0.02]"])
        assert code == 0
        recs = read_ndjson(out / "sweep.ndjson")
        gaps = next(r for r in recs if r["kind"] == "sweep_gaps")
        assert gaps["axis"] == "eps"
        assert len(gaps["rho_gaps"]) == 1
        members = [r for r in recs if r["kind"] == "sweep_member"]
        assert len(members) == 2

    def test_sweep_axis_values_flags(self, tmp_path):
        out = tmp_path / "sweep_flags"
        code = main(["sweep", "--out", str(out), "--axis", "h",
                     "--values", "0.02,0.01", "--set", "scheme.T=0.04",
                     "--set", "noise.enabled=false"])
        assert code == 0
        gaps = next(r for r in read_ndjson(out / "sweep.ndjson")
                    if r["kind"] == "sweep_gaps")
        assert gaps["axis"] == "h"
        assert gaps["values"] == [0.02, 0.01]


class TestCliReport:
    def test_rerender_byte_stable(self, tmp_path):
        out = tmp_path / "run"
        assert main(["run", "--out", str(out), *_fast_overrides()]) == 0
        fig = out / "figures" / "energy_terms.png"
        first = fig.read_bytes()
        assert main(["report", "--out", str(out)]) == 0
        assert fig.read_bytes() == first

    def test_missing_records_exit_2(self, tmp_path):
        assert main(["report", "--out", str(tmp_path / "empty")]) == 2


class TestCliParticles:
    def test_particles_comparison_records(self, tmp_path):
        out = tmp_path / "part"
        code = main(["particles", "--out", str(out),
                     "--set", "particles.T=0.1", "--set", "particles.count=32",
                     "--set", "scheme.T=0.05", "--set", "noise.enabled=false"])
        assert code == 0
        recs = read_ndjson(out / "particles.ndjson")
        kinds = [r["kind"] for r in recs]
        assert "particle_step" in kinds and "particle_comparison" in kinds
        comp = [r for r in recs if r["kind"] == "particle_comparison"]
        assert all(np.isfinite(r["rho_rel_l2"]) for r in comp)


class TestOutRoot:
    def test_env_var_roots_relative_out(self, tmp_path, monkeypatch):
        monkeypatch.setenv("FLOCKNS_OUT_ROOT", str(tmp_path))
        code = main(["run", "--out", "rooted", *_fast_overrides()])
        assert code == 0
        assert (tmp_path / "rooted" / "trajectory.ndjson").exists()

    def test_absolute_out_wins(self, tmp_path, monkeypatch):
        monkeypatch.setenv("FLOCKNS_OUT_ROOT", str(tmp_path / "ignored"))
        out = tmp_path / "abs"
        code = main(["run", "--out", str(out), *_fast_overrides()])
        assert code == 0
        assert (out / "trajectory.ndjson").exists()
        assert not (tmp_path / "ignored").exists()


class TestSinks:
    def test_round_trip_precision(self, tmp_path):
        value = 0.1 + 0.2  # not representable prettily
        rec = make_record("demo", {"x": value}, "hash", 0)
        path = tmp_path / "r.ndjson"
        write_ndjson(path, [rec])
        back = read_ndjson(path)[0]
        assert back["x"] == value

    def test_nan_rejected(self, tmp_path):
        rec = make_record("demo", {"x": float("nan")}, "hash", 0)
        with pytest.raises(ValueError):
            write_ndjson(tmp_path / "r.ndjson", [rec])
