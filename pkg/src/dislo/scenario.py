"""Scenario files: strict JSON schema, validation, model construction.

Unknown keys are rejected by name.  Exponent ordering r > p > 3 < q, a
positive core strength, a slice-mass cap at least the initial dislocation
mass, and loops strictly inside the open unit cube are enforced at load time.
"""

import copy
import json
from dataclasses import dataclass

import numpy as np

from .currents import DislocationSystem, Loop, system_mass
from .dissipation import DissipationParams
from .energy import (ElasticDensityParams, HexMesh, Loading, Ramp,
                     constant_profile, shear_profile)
from .evolve import Model
from .grid import Grid
from .slipfield import BurgersTable, Mollifier


class ScenarioError(ValueError):
    pass


_DEFAULTS = {
    "schema_version": 1,
    "grid_cells": 8,
    "mesh_cells": 8,
    "exponents": {"p": 4.0, "q": 4.0, "r": 6.0},
    "zeta": 0.1,
    "rho_cells": 3.0,
    "gamma_cap": None,          # default: twice the initial mass
    "T": 1.0,
    "N": 10,
    "burgers": None,            # required
    "loops": None,              # required
    "loading": None,
    "boundary": {"A": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
                 "c": [0.0, 0.0, 0.0]},
    "dissipation_weights": None,
    "solver": {
        "gtol": 1e-6,
        "max_iter": 5000,
        "det_floor": 1e-6,
        "substeps": 8,
        "delta_cells": 1.0,
        "n_random": 16,
        "edge_gauss": 2,
        "stability_probe_moves": 6,
        "refine": True,
        "seed": 0,
        "snapshot_every": 1,
    },
    "output_dir": None,
}

_LOOP_KEYS = {"burgers_index", "multiplicity", "nodes"}
_LOADING_KEYS = {"profile", "ramp"}
_PROFILE_KEYS = {"type", "vector", "amplitude", "force_axis", "gradient_axis"}
_RAMP_KEYS = {"rate", "power"}


def _check_keys(obj, allowed, where):
    for key in obj:
        if key not in allowed:
            raise ScenarioError(f"unknown key '{key}' in {where}")


def _merge(defaults, data, where):
    _check_keys(data, set(defaults), where)
    out = copy.deepcopy(defaults)
    for key, val in data.items():
        if isinstance(val, dict) and isinstance(defaults.get(key), dict):
            out[key] = _merge(defaults[key], val, f"{where}.{key}")
        else:
            out[key] = copy.deepcopy(val)
    return out


@dataclass
class Scenario:
    raw: dict                   # resolved configuration, defaults filled

    @property
    def seed(self) -> int:
        return int(self.raw["solver"]["seed"])

    @property
    def T(self) -> float:
        return float(self.raw["T"])

    @property
    def N(self) -> int:
        return int(self.raw["N"])

    @property
    def snapshot_every(self) -> int:
        return int(self.raw["solver"]["snapshot_every"])

    @property
    def output_dir(self):
        return self.raw["output_dir"]

    def system(self) -> DislocationSystem:
        loops = []
        for entry in self.raw["loops"]:
            loops.append(Loop(np.asarray(entry["nodes"], dtype=float),
                              int(entry.get("multiplicity", 1)),
                              int(entry.get("burgers_index", 0))))
        return DislocationSystem(loops)

    def loading(self):
        cfg = self.raw["loading"]
        if cfg is None:
            return None
        prof = cfg["profile"]
        kind = prof.get("type", "constant")
        if kind == "constant":
            f1 = constant_profile(prof["vector"])
        elif kind == "shear":
            f1 = shear_profile(float(prof.get("amplitude", 1.0)),
                               int(prof.get("force_axis", 0)),
                               int(prof.get("gradient_axis", 2)))
        else:
            raise ScenarioError(f"unknown loading profile type '{kind}'")
        ramp = cfg.get("ramp") or {}
        return Loading(profile=f1, ramp=Ramp(rate=float(ramp.get("rate", 1.0)),
                                             power=int(ramp.get("power", 1))))

    def model(self) -> Model:
        raw = self.raw
        grid = Grid(int(raw["grid_cells"]))
        mesh = HexMesh(int(raw["mesh_cells"]))
        table = BurgersTable(np.asarray(raw["burgers"], dtype=float))
        eta = Mollifier.for_grid(grid, float(raw["rho_cells"]))
        solver = raw["solver"]
        weights = raw["dissipation_weights"]
        dparams = DissipationParams(
            weights=np.asarray(weights, dtype=float) if weights is not None else None
        ).validate()
        return Model(
            grid=grid, mesh=mesh, table=table, eta=eta,
            elastic=ElasticDensityParams(r=float(raw["exponents"]["r"])),
            dparams=dparams,
            zeta=float(raw["zeta"]),
            loading=self.loading(),
            gamma_cap=float(raw["gamma_cap"]),
            p=float(raw["exponents"]["p"]),
            q=float(raw["exponents"]["q"]),
            boundary_A=np.asarray(raw["boundary"]["A"], dtype=float),
            boundary_c=np.asarray(raw["boundary"]["c"], dtype=float),
            substeps=int(solver["substeps"]),
            edge_gauss=int(solver["edge_gauss"]),
            delta=float(solver["delta_cells"]) * grid.h,
            n_random=int(solver["n_random"]),
            refine=bool(solver["refine"]),
            gtol=float(solver["gtol"]),
            max_iter=int(solver["max_iter"]),
            det_floor=float(solver["det_floor"]),
            stability_probe_moves=int(solver["stability_probe_moves"]),
        )


def validate_scenario(data: dict) -> Scenario:
    raw = _merge(_DEFAULTS, data, "scenario")
    if raw["burgers"] is None:
        raise ScenarioError("missing required key 'burgers'")
    if raw["loops"] is None:
        raise ScenarioError("missing required key 'loops'")
    exps = raw["exponents"]
    p, q, r = float(exps["p"]), float(exps["q"]), float(exps["r"])
    if not r > p:
        raise ScenarioError(f"exponents require r > p, got r={r}, p={p}")
    if not p > 3:
        raise ScenarioError(f"exponents require p > 3, got p={p}")
    if not q > 3:
        raise ScenarioError(f"exponents require q > 3, got q={q}")
    if float(raw["zeta"]) <= 0:
        raise ScenarioError("core energy strength zeta must be positive")
    if float(raw["T"]) <= 0 or int(raw["N"]) < 1:
        raise ScenarioError("need T > 0 and N >= 1")
    if float(raw["rho_cells"]) <= 0:
        raise ScenarioError("mollifier radius must be positive")
    for i, entry in enumerate(raw["loops"]):
        _check_keys(entry, _LOOP_KEYS, f"loops[{i}]")
        nodes = np.asarray(entry["nodes"], dtype=float)
        if np.any(nodes <= 0.0) or np.any(nodes >= 1.0):
            raise ScenarioError(f"loops[{i}] must lie strictly inside the unit cube")
    if raw["loading"] is not None:
        _check_keys(raw["loading"], _LOADING_KEYS, "loading")
        _check_keys(raw["loading"].get("profile", {}), _PROFILE_KEYS, "loading.profile")
        _check_keys(raw["loading"].get("ramp", {}) or {}, _RAMP_KEYS, "loading.ramp")
    scn = Scenario(raw=raw)
    mass0 = system_mass(scn.system())
    if raw["gamma_cap"] is None:
        raw["gamma_cap"] = 2.0 * mass0
    elif float(raw["gamma_cap"]) < mass0:
        raise ScenarioError(
            f"slice-mass cap {raw['gamma_cap']} is below the initial dislocation "
            f"mass {mass0}; the static candidate must stay admissible")
    # trigger table/weight validation early
    scn.model()
    return scn


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"invalid JSON in {path}: {exc}") from exc
    return validate_scenario(data)
