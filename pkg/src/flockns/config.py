"""Run configuration: YAML schema, validation, canonical hashing, presets.

One structured document drives every command. Defaults are filled, every
constructor invariant is checked up front (rejected configs name the
violated constraint), and the resolved document is hashed canonically so
records can certify which semantics produced them; the output directory is
excluded from the hash.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np
import yaml

from .constitutive import KernelPair, kernel_preset, pressure_delta, validate_kernels
from .noise import NoiseModel
from .stepper import SchemeParams
from .torus import Field, TorusGrid, field_to_coeffs, gradient

__all__ = ["ConfigError", "RunConfig", "load_config", "default_config", "canonical_hash"]


class ConfigError(ValueError):
    """A configuration violated a constructor invariant."""


DEFAULTS = {
    "scheme": {
        "d": 1,
        "n": 64,
        "m": 9,
        "h": 0.01,
        "T": 0.1,
        "eps": 0.01,
        "delta": 0.01,
        "R": 1.0e6,
        "a": 1.0,
        "gamma": 2.0,
        "mu": 0.05,
        "lam": 0.05,
        "rho_floor": 1.0e-8,
        "sub_steps": None,
        "mass_weight_time": "end",
        "drift_off": False,
        "use_dealias": True,
    },
    "noise": {
        "enabled": True,
        "k_max": 8,
        "g0": 0.2,
        "alpha": 1.0,
        "beta": 1.0,
    },
    "kernels": {
        "preset": "cosine",
        "K_scale": 1.0,
        "psi_scale": 1.0,
        "K_file": None,
        "psi_file": None,
    },
    "initial_data": {
        "preset": "cosine_bump",
        "rho_base": 1.0,
        "rho_amp": 0.2,
        "u_amp": 0.1,
        "u_speed": 0.3,
        "seed": 0,
        "file": None,
        "mms_source": False,
    },
    "outputs": {
        "dir": "out",
        "snapshot_times": [],
        "reports": ["mass", "energy"],
        "store_density_series": False,
        "track_identity": False,
    },
    "ensemble": {
        "paths": 8,
        "root_seed": 12345,
        "r_moments": [2],
    },
    "sweep": {
        "axis": "eps",
        "values": [0.04, 0.02, 0.01],
    },
    "particles": {
        "count": 64,
        "h": 0.01,
        "T": 0.5,
        "bandwidth_cells": 4,
        "v_scale": 0.2,
        "seed": 0,
    },
}


def _deep_update(base: dict, other: dict, path="") -> dict:
    for key, val in other.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown configuration key {here!r}")
        if isinstance(base[key], dict) and isinstance(val, dict):
            _deep_update(base[key], val, here)
        else:
            base[key] = val
    return base


def _apply_override(cfg: dict, spec: str) -> None:
    if "=" not in spec:
        raise ConfigError(f"override {spec!r} must look like section.key=value")
    path, raw = spec.split("=", 1)
    value = yaml.safe_load(raw)
    keys = path.strip().split(".")
    node = cfg
    for key in keys[:-1]:
        if key not in node or not isinstance(node[key], dict):
            raise ConfigError(f"unknown configuration section {path!r}")
        node = node[key]
    if keys[-1] not in node:
        raise ConfigError(f"unknown configuration key {path!r}")
    node[keys[-1]] = value


def canonical_hash(resolved: dict) -> str:
    """Hash of the semantically meaningful fields (output dir excluded)."""
    doc = copy.deepcopy(resolved)
    doc.get("outputs", {}).pop("dir", None)
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def default_config() -> dict:
    return copy.deepcopy(DEFAULTS)


@dataclass
class RunConfig:
    """Resolved configuration plus the constructed model objects."""

    doc: dict
    scheme: SchemeParams
    kernels: KernelPair
    noise_model: NoiseModel | None
    config_hash: str

    @property
    def grid(self) -> TorusGrid:
        return self.scheme.grid

    @property
    def outputs(self) -> dict:
        return self.doc["outputs"]

    @property
    def ensemble(self) -> dict:
        return self.doc["ensemble"]

    @property
    def sweep(self) -> dict:
        return self.doc["sweep"]

    @property
    def particles(self) -> dict:
        return self.doc["particles"]

    def initial_data(self):
        """(rho0 Field, u0 X_m coefficients) for the configured preset."""
        return _build_initial_data(self.doc["initial_data"], self.scheme)

    def source(self):
        """Momentum source callable for manufactured runs, or None."""
        ini = self.doc["initial_data"]
        if not ini.get("mms_source"):
            return None
        return _mms_source(ini, self.scheme)


def _load_kernel_field(grid: TorusGrid, path: str) -> Field:
    if path.endswith(".npy"):
        data = np.load(path)
    else:
        data = np.loadtxt(path, delimiter=",")
    data = np.asarray(data, dtype=float).reshape(grid.shape)
    return Field(grid, data)


def _build_kernels(cfg: dict, grid: TorusGrid) -> KernelPair:
    if cfg.get("K_file") or cfg.get("psi_file"):
        if not (cfg.get("K_file") and cfg.get("psi_file")):
            raise ConfigError("tabulated kernels need both K_file and psi_file")
        kp = KernelPair(
            K=_load_kernel_field(grid, cfg["K_file"]),
            psi=_load_kernel_field(grid, cfg["psi_file"]),
        )
    else:
        try:
            kp = kernel_preset(grid, cfg["preset"], cfg["K_scale"], cfg["psi_scale"])
        except ValueError as err:
            raise ConfigError(str(err)) from None
    report = validate_kernels(kp)
    if not (report.psi_nonnegative and report.K_symmetric and report.psi_symmetric):
        raise ConfigError(
            "kernels violate the standing assumptions "
            f"(psi_min={report.psi_min:.3e}, K_sym={report.K_symmetry_error:.1e}, "
            f"psi_sym={report.psi_symmetry_error:.1e})"
        )
    return kp


def _build_initial_data(cfg: dict, scheme: SchemeParams):
    grid = scheme.grid
    preset = cfg["preset"]
    xs = grid.coords()
    if cfg.get("file"):
        with np.load(cfg["file"]) as data:
            rho = np.asarray(data["rho"], dtype=float).reshape(grid.shape)
            u = np.asarray(data["u"], dtype=float).reshape((grid.d,) + grid.shape)
        rho0 = Field(grid, rho)
        u0 = field_to_coeffs(Field(grid, u), scheme.m)
    elif preset == "uniform":
        rho0 = Field(grid, np.full(grid.shape, float(cfg["rho_base"])))
        u0 = np.zeros((scheme.m, grid.d))
    elif preset == "cosine_bump":
        bump = np.ones(grid.shape)
        for x in xs:
            bump = bump * np.cos(math.pi * x)
        rho0 = Field(grid, cfg["rho_base"] + cfg["rho_amp"] * bump)
        u_data = np.stack([cfg["u_amp"] * np.sin(math.pi * xs[a]) for a in range(grid.d)])
        u0 = field_to_coeffs(Field(grid, u_data), scheme.m)
    elif preset == "traveling_wave":
        if grid.d != 1:
            raise ConfigError("traveling_wave initial data is one-dimensional")
        rho0 = Field(grid, cfg["rho_base"] + cfg["rho_amp"] * np.cos(math.pi * xs[0]))
        # constant field c has coefficient c * sqrt(measure) on the constant mode
        u0 = np.zeros((scheme.m, 1))
        u0[0, 0] = cfg["u_speed"] * math.sqrt(grid.measure)
    elif preset == "random_smooth":
        rng = np.random.default_rng(int(cfg["seed"]))
        rho = np.full(grid.shape, float(cfg["rho_base"]))
        u_data = np.zeros((grid.d,) + grid.shape)
        for k in (1, 2):
            for x in xs:
                rho += cfg["rho_amp"] / (2 * k * grid.d) * np.cos(
                    k * math.pi * x + rng.uniform(0, 2 * math.pi)
                )
                for a in range(grid.d):
                    u_data[a] += cfg["u_amp"] / (2 * k * grid.d) * np.sin(
                        k * math.pi * x + rng.uniform(0, 2 * math.pi)
                    )
        rho0 = Field(grid, rho)
        u0 = field_to_coeffs(Field(grid, u_data), scheme.m)
    else:
        raise ConfigError(f"unknown initial-data preset {preset!r}")
    low = float(rho0.data.min())
    if low <= 0.0:
        raise ConfigError(f"initial density must be strictly positive (min {low:.3e})")
    return rho0, u0


def _mms_source(cfg: dict, scheme: SchemeParams):
    """Momentum source making (rho0 translated at u_speed, u = u_speed) exact."""
    grid = scheme.grid
    if grid.d != 1:
        raise ConfigError("the manufactured source is one-dimensional")
    c = float(cfg["u_speed"])
    base, amp = float(cfg["rho_base"]), float(cfg["rho_amp"])
    law = scheme.law
    x = grid.coords()[0]

    def source(t: float) -> np.ndarray:
        rho_star = Field(grid, base + amp * np.cos(math.pi * (x - c * t)))
        grad_p = gradient(pressure_delta(rho_star, law))
        return field_to_coeffs(grad_p, scheme.m)

    return source


def load_config(path_or_doc=None, overrides=()) -> RunConfig:
    """Resolve defaults + document + dotted-path overrides into a RunConfig."""
    cfg = default_config()
    if path_or_doc is not None:
        if isinstance(path_or_doc, dict):
            doc = copy.deepcopy(path_or_doc)
        else:
            with open(path_or_doc) as fh:
                doc = yaml.safe_load(fh) or {}
        if not isinstance(doc, dict):
            raise ConfigError("configuration document must be a mapping")
        _deep_update(cfg, doc)
    for spec in overrides:
        _apply_override(cfg, spec)

    try:
        scheme = SchemeParams(**cfg["scheme"])
    except (TypeError, ValueError) as err:
        raise ConfigError(f"scheme: {err}") from None

    kernels = _build_kernels(cfg["kernels"], scheme.grid)

    noise_model = None
    ncfg = cfg["noise"]
    if ncfg["enabled"]:
        try:
            noise_model = NoiseModel.default(
                scheme.grid, k_max=int(ncfg["k_max"]), g0=float(ncfg["g0"]),
                alpha=float(ncfg["alpha"]), beta=float(ncfg["beta"]),
            )
        except ValueError as err:
            raise ConfigError(f"noise: {err}") from None

    # fail fast on bad initial data and sweep axes
    _build_initial_data(cfg["initial_data"], scheme)
    if cfg["sweep"]["axis"] not in ("h", "m", "eps", "delta"):
        raise ConfigError(f"sweep axis {cfg['sweep']['axis']!r} not in h/m/eps/delta")
    if not cfg["outputs"]["reports"] or not set(cfg["outputs"]["reports"]) <= {
        "mass", "energy", "pressure_identity", "renormalized", "evf"
    }:
        raise ConfigError("outputs.reports must be a nonempty subset of the known reports")

    return RunConfig(
        doc=cfg,
        scheme=scheme,
        kernels=kernels,
        noise_model=noise_model,
        config_hash=canonical_hash(cfg),
    )
