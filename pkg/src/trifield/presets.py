"""Benchmark problem definitions.

A preset supplies the default configuration values of a benchmark and builds
its meshes and boundary conditions. Run configurations start from a preset and
override individual values.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Tuple

import numpy as np

from . import meshgen
from .mesh import Mesh

# default values per preset, keyed like the configuration sections
DEFAULTS: Dict[str, Dict[str, Dict[str, object]]] = {
    "cook": {
        "problem": {"kind": "solid"},
        "mesh": {"n": 16, "element": "tri3"},
        "time": {"t_end": 1.0, "dt": 0.25},
        "solid": {"rho": 7850.0, "mu": 80e9, "inv_lambda": 0.0, "mode": "static",
                  "subscales": "quasi-static", "load": 30e9},
        "probes": {"A": ("solid", (48.0, 60.0))},
    },
    "cantilever": {
        "problem": {"kind": "solid"},
        "mesh": {"nx": 30, "ny": 3, "element": "quad4"},
        "time": {"t_end": 1.0, "dt": 1e-3},
        "solid": {"rho": 100.0, "mu": 2.135e7, "inv_lambda": 0.0, "gravity": (0.0, -2.0),
                  "mode": "dynamic", "subscales": "dynamic"},
        "probes": {"tip": ("solid", (10.0, 0.5))},
    },
    "fsi_beam2d": {
        "problem": {"kind": "fsi"},
        "mesh": {},
        "time": {"t_end": 40.0, "dt": 0.02},
        "solid": {"rho": 10.0, "young": 55428.0, "poisson": 0.142857, "mode": "dynamic",
                  "subscales": "dynamic"},
        "fluid": {"rho": 2.0, "nu": 0.2, "inlet_velocity": 1.0, "ramp_time": 10.0},
        "probes": {"tip": ("solid", (20.0, 10.0))},
    },
    "beam_channel2d": {
        "problem": {"kind": "fluid"},
        "mesh": {},
        "time": {"t_end": 20.0, "dt": 0.05},
        "fluid": {"rho": 2.0, "nu": 0.2, "inlet_velocity": 1.0, "ramp_time": 10.0},
        "probes": {"wake": ("fluid", (25.0, 5.0))},
    },
    "plate3d": {
        "problem": {"kind": "fsi"},
        "mesh": {"nx": 30, "ny": 10, "nz": 10},
        "time": {"t_end": 0.5, "dt": 0.01},
        "solid": {"rho": 1000.0, "young": 300e3, "poisson": 0.48, "mode": "dynamic",
                  "subscales": "dynamic"},
        "fluid": {"rho": 100.0, "nu": 1.0, "inlet_velocity": 1.0, "ramp_time": 0.5},
        "probes": {"tip": ("solid", (0.5, 0.3, 0.5))},
    },
}

# geometry of the generated meshes; not configurable
COOK_LOAD_EDGE = 16.0
BEAM = dict(H=20.0, L=80.0, h=1.0, l=10.0, x_beam=20.0)
PLATE = dict(H=0.5, W=1.0, L=3.0, x_plate=0.5, t=0.05, h_plate=0.3)


def smooth_ramp(t_ramp: float) -> Callable[[float], float]:
    """``(1 - cos(pi t / t_ramp)) / 2`` up to ``t_ramp``, then 1; a
    non-positive ``t_ramp`` gives a step."""
    if t_ramp <= 0:
        return lambda t: 1.0
    return lambda t: 0.5 * (1.0 - np.cos(np.pi * min(t, t_ramp) / t_ramp))


def linear_ramp(t_end: float) -> Callable[[float], float]:
    return lambda t: min(t / t_end, 1.0)


@dataclass
class PresetMeshes:
    solid: Mesh = None
    fluid: Mesh = None


def required_tags(preset: str) -> Dict[str, Tuple[str, ...]]:
    """Boundary tags the preset's boundary conditions refer to."""
    return {
        "cook": {"solid": ("clamp", "load")},
        "cantilever": {"solid": ("clamp",)},
        "beam_channel2d": {"fluid": ("inlet", "outlet", "bottom", "top", "interface")},
        "fsi_beam2d": {"solid": ("base", "interface"),
                       "fluid": ("inlet", "outlet", "bottom", "top", "interface")},
        "plate3d": {"solid": ("base", "sides", "interface"),
                    "fluid": ("inlet", "outlet", "walls", "interface")},
    }[preset]


def build_meshes(preset: str, mesh_opts: Dict[str, object]) -> PresetMeshes:
    """Generated meshes of ``preset`` with resolution options from the
    ``[mesh]`` section."""
    o = mesh_opts
    if preset == "cook":
        return PresetMeshes(solid=meshgen.cook_membrane(int(o["n"]), str(o["element"])))
    if preset == "cantilever":
        return PresetMeshes(solid=meshgen.cantilever(int(o["nx"]), int(o["ny"]), str(o["element"])))
    if preset in ("fsi_beam2d", "beam_channel2d"):
        fluid, solid = meshgen.fsi_beam_meshes(**BEAM)
        return PresetMeshes(solid=solid if preset == "fsi_beam2d" else None, fluid=fluid)
    if preset == "plate3d":
        fluid, solid = meshgen.plate3d_meshes(nx=int(o["nx"]), ny=int(o["ny"]), nz=int(o["nz"]), **PLATE)
        return PresetMeshes(solid=solid, fluid=fluid)
    raise KeyError(preset)


def plate_inlet_profile(u_mean: float, H: float = PLATE["H"]):
    """Inlet velocity ``1.5 U y (H - y) z (1 - z) / (H/2)^2`` along x."""
    def profile(x):
        y, z = x[:, 1], x[:, 2]
        return 1.5 * u_mean * y * (H - y) * z * (1.0 - z) / (H / 2.0) ** 2
    return profile


__all__ = ["DEFAULTS", "smooth_ramp", "linear_ramp", "build_meshes", "required_tags", "plate_inlet_profile",
           "PresetMeshes", "COOK_LOAD_EDGE", "BEAM", "PLATE"]
