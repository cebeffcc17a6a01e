"""Scenario files: schema validation, catalog wiring, bundled fixtures.

A scenario (JSON) declares the game datum (dynamics family + constants),
the payoff (cylindrical over a trigonometric basis), the initial cloud
and the solver knobs.  Validation reports violations with JSON-pointer
paths.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import StructuralError
from .game import (DynamicsSpec, Modulus, bilinear, custom_polynomial,
                   mean_field_attraction, separable_affine)
from .measures import DiscreteMeasure, measure_space
from .stability import CylindricalFunctional

DYNAMICS_FAMILIES = ("separable_affine", "bilinear", "mean_field_attraction",
                     "custom_polynomial")
MODULUS_FAMILIES = {"linear": 1.0, "sqrt": 0.5, "power": None}

_SOLVER_DEFAULTS = {
    "dt": 1e-3,
    "picard_tol": 1e-8,
    "exact_threshold": 64,
    "tau0": 0.1,
    "ladder": 12,
    "tail": 4,
    "n": 64,
    "c": None,
    "oracle": {"cells": 8, "steps": 16, "particles": 2},
}

_SOLVER_RANGES = {
    "dt": (1e-6, 0.5),
    "picard_tol": (1e-14, 1e-2),
    "exact_threshold": (1, 4096),
    "tau0": (1e-6, 1.0),
    "ladder": (2, 24),
    "tail": (1, 12),
    "n": (2, 4096),
}


class SchemaError(StructuralError):
    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer}: {message}", pointer=pointer)
        self.pointer = pointer


def _need(obj, key, typ, pointer):
    if key not in obj:
        raise SchemaError(f"{pointer}/{key}", "missing required field")
    val = obj[key]
    if typ is float:
        if not isinstance(val, (int, float)) or isinstance(val, bool):
            raise SchemaError(f"{pointer}/{key}", "expected a number")
        return float(val)
    if typ is int:
        if not isinstance(val, int) or isinstance(val, bool):
            raise SchemaError(f"{pointer}/{key}", "expected an integer")
        return val
    if not isinstance(val, typ):
        raise SchemaError(f"{pointer}/{key}", f"expected {typ.__name__}")
    return val


@dataclass
class Scenario:
    name: str
    seed: int
    horizon: float
    spec: DynamicsSpec
    payoff: CylindricalFunctional
    initial: DiscreteMeasure
    solver: dict
    raw: dict = field(repr=False, default_factory=dict)

    @property
    def radius_c(self) -> float:
        c = self.solver.get("c")
        return float(self.spec.speed_bound if c is None else c)

    def hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.raw, sort_keys=True, separators=(",", ":")).encode()
        ).hexdigest()[:16]

    def provenance(self, seed=None) -> dict:
        return {
            "scenario": self.name,
            "scenario_hash": self.hash(),
            "seed": int(self.seed if seed is None else seed),
            "knobs": {k: v for k, v in self.solver.items()},
        }


def _build_dynamics(block, d, pointer):
    family = _need(block, "family", str, pointer)
    if family not in DYNAMICS_FAMILIES:
        raise SchemaError(f"{pointer}/family",
                          f"unknown family (catalog: {', '.join(DYNAMICS_FAMILIES)})")
    params = block.get("params", {})
    if not isinstance(params, dict):
        raise SchemaError(f"{pointer}/params", "expected an object")
    try:
        if family == "separable_affine":
            return separable_affine(
                d, c0=params.get("c0"), drift_amp=params.get("drift_amp", 0.0),
                drift_phase=params.get("drift_phase", 0.0), bu=params.get("bu"),
                bv=params.get("bv"), du=params.get("du", 1), dv=params.get("dv", 1))
        if family == "bilinear":
            return bilinear(d, gain=params.get("gain"), c0=params.get("c0"))
        if family == "mean_field_attraction":
            return mean_field_attraction(d, gain=params.get("gain", 1.0),
                                         bu=params.get("bu"), bv=params.get("bv"))
        return custom_polynomial(d, params.get("terms", []))
    except (StructuralError, ValueError) as exc:
        raise SchemaError(f"{pointer}/params", str(exc)) from exc


def _build_modulus(block, pointer) -> Modulus:
    family = _need(block, "family", str, pointer)
    if family not in MODULUS_FAMILIES:
        raise SchemaError(f"{pointer}/family",
                          f"unknown modulus family ({', '.join(MODULUS_FAMILIES)})")
    params = block.get("params", {})
    scale = params.get("scale", 1.0)
    if family == "power":
        exponent = params.get("exponent")
        if exponent is None:
            raise SchemaError(f"{pointer}/params/exponent",
                              "power modulus needs an exponent")
    else:
        exponent = MODULUS_FAMILIES[family]
    try:
        return Modulus(float(scale), float(exponent))
    except StructuralError as exc:
        raise SchemaError(f"{pointer}/params", str(exc)) from exc


def _trig(basis, wave, phase, scale, coord):
    fn = np.cos if basis == "cos" else np.sin
    dfn = (lambda z: -np.sin(z)) if basis == "cos" else np.cos

    def phi(x):
        return scale * fn(2 * np.pi * (wave * x[:, coord] + phase))

    def grad(x):
        out = np.zeros_like(x)
        out[:, coord] = scale * 2 * np.pi * wave * dfn(
            2 * np.pi * (wave * x[:, coord] + phase))
        return out

    return phi, grad


def _build_payoff(block, d, pointer) -> CylindricalFunctional:
    kind = block.get("kind", "cylindrical")
    if kind != "cylindrical":
        raise SchemaError(f"{pointer}/kind", "only cylindrical payoffs are cataloged")
    integrands = _need(block, "integrands", list, pointer)
    if not integrands:
        raise SchemaError(f"{pointer}/integrands", "needs at least one integrand")
    phis, grads = [], []
    for i, spec_i in enumerate(integrands):
        ptr = f"{pointer}/integrands/{i}"
        basis = _need(spec_i, "basis", str, ptr)
        if basis not in ("cos", "sin"):
            raise SchemaError(f"{ptr}/basis", "basis must be cos or sin")
        wave = _need(spec_i, "wavenumber", int, ptr)
        coord = spec_i.get("coordinate", 0)
        if not (0 <= coord < d):
            raise SchemaError(f"{ptr}/coordinate", f"coordinate outside 0..{d - 1}")
        scale = float(spec_i.get("scale", 1.0))
        phase = float(spec_i.get("phase", 0.0))
        phi, grad = _trig(basis, wave, phase, scale, coord)
        phis.append(phi)
        grads.append(grad)
    slope = float(block.get("time_slope", 0.0))
    outer = block.get("outer", "identity")
    if outer == "identity":
        return CylindricalFunctional(phis, grads, time_slope=slope)
    if outer == "square":
        return CylindricalFunctional(
            phis, grads,
            outer=lambda v: float(np.sum(v) ** 2),
            outer_grad=lambda v: np.full(len(phis), 2 * np.sum(v)),
            time_slope=slope)
    raise SchemaError(f"{pointer}/outer", "outer must be identity or square")


def _build_initial(block, d, pointer) -> DiscreteMeasure:
    atoms = _need(block, "atoms", list, pointer)
    if not atoms:
        raise SchemaError(f"{pointer}/atoms", "needs at least one atom")
    pts, w = [], []
    for i, atom in enumerate(atoms):
        ptr = f"{pointer}/atoms/{i}"
        point = _need(atom, "point", list, ptr)
        if len(point) != d:
            raise SchemaError(f"{ptr}/point", f"expected {d} coordinates")
        pts.append(point)
        w.append(_need(atom, "weight", float, ptr))
    try:
        return DiscreteMeasure(measure_space(d), (np.asarray(pts),), np.asarray(w))
    except StructuralError as exc:
        raise SchemaError(f"{pointer}/atoms", str(exc)) from exc


def _grid(block, pointer) -> np.ndarray:
    if not isinstance(block, list) or not block:
        raise SchemaError(pointer, "expected a nonempty list of atoms")
    try:
        arr = np.asarray(block, dtype=float)
    except (TypeError, ValueError):
        raise SchemaError(pointer, "grid atoms must be numeric vectors") from None
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr


def parse_scenario(data: dict) -> Scenario:
    if not isinstance(data, dict):
        raise SchemaError("", "scenario must be a JSON object")
    name = _need(data, "name", str, "")
    seed = _need(data, "seed", int, "")
    d = _need(data, "dimension", int, "")
    if not (1 <= d <= 3):
        raise SchemaError("/dimension", "dimension must be 1..3")
    horizon = _need(data, "horizon", float, "")
    if horizon <= 0:
        raise SchemaError("/horizon", "horizon must be positive")
    u_grid = _grid(_need(data, "u_grid", list, ""), "/u_grid")
    v_grid = _grid(_need(data, "v_grid", list, ""), "/v_grid")
    dynamics = _build_dynamics(_need(data, "dynamics", dict, ""), d, "/dynamics")
    lipschitz = _need(data, "lipschitz", float, "")
    modulus = _build_modulus(_need(data, "modulus", dict, ""), "/modulus")
    speed = _need(data, "speed_bound", float, "")
    try:
        spec = DynamicsSpec(d, u_grid, v_grid, dynamics, lipschitz=lipschitz,
                            modulus=modulus, speed_bound=speed)
    except StructuralError as exc:
        raise SchemaError("/lipschitz", str(exc)) from exc
    payoff = _build_payoff(_need(data, "payoff", dict, ""), d, "/payoff")
    initial = _build_initial(_need(data, "initial_measure", dict, ""),
                             d, "/initial_measure")
    solver = dict(_SOLVER_DEFAULTS)
    solver["oracle"] = dict(_SOLVER_DEFAULTS["oracle"])
    user_solver = data.get("solver", {})
    if not isinstance(user_solver, dict):
        raise SchemaError("/solver", "expected an object")
    for key, val in user_solver.items():
        if key == "oracle":
            if not isinstance(val, dict):
                raise SchemaError("/solver/oracle", "expected an object")
            solver["oracle"].update(val)
            continue
        if key not in _SOLVER_DEFAULTS:
            raise SchemaError(f"/solver/{key}", "unknown solver knob")
        solver[key] = val
    for key, (lo, hi) in _SOLVER_RANGES.items():
        val = solver[key]
        if not isinstance(val, (int, float)) or isinstance(val, bool) or not (
                lo <= val <= hi):
            raise SchemaError(f"/solver/{key}", f"must lie in [{lo}, {hi}]")
    if solver["c"] is not None and solver["c"] < speed:
        raise SchemaError("/solver/c", "direction radius c must be >= speed_bound")
    return Scenario(name, seed, float(horizon), spec, payoff, initial, solver,
                    raw=data)


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError("", f"invalid JSON: {exc}") from exc
    return parse_scenario(data)


def bundled_scenario(name: str) -> Scenario:
    text = resources.files("torusmfg.scenarios").joinpath(f"{name}.json").read_text()
    return parse_scenario(json.loads(text))


__all__ = ["Scenario", "SchemaError", "parse_scenario", "load_scenario",
           "bundled_scenario", "DYNAMICS_FAMILIES"]
