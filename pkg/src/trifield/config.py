"""Run configuration files.

Grammar (INI style, read with :mod:`configparser`)::

    file     := { comment | section }
    section  := "[" name "]" NEWLINE { entry }
    entry    := key ( "=" | ":" ) value NEWLINE
    comment  := ( "#" | ";" ) text NEWLINE

Section and key names are case-sensitive. Values are numbers, words, or
comma-separated number lists (vectors). Probe entries read
``name = [solid: | fluid:] x, y[, z]``. Every value not given is taken from
the preset; see ``SCHEMA`` for the accepted keys.
"""
from __future__ import annotations

import configparser
import copy
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import presets
from .errors import ConfigError, DomainError, MeshError
from .mesh import Mesh, locate, read_mesh

KINDS = ("solid", "fluid", "fsi")


def _float(v):
    return float(v)


def _int(v):
    f = float(v)
    if f != int(f):
        raise ValueError(f"{v!r} is not an integer")
    return int(f)


def _vec(v):
    if isinstance(v, (tuple, list)):
        return tuple(float(x) for x in v)
    parts = [p for p in str(v).replace(",", " ").split()]
    if not parts:
        raise ValueError("empty vector")
    return tuple(float(p) for p in parts)


def _bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"{v!r} is not a boolean")


def _choice(*opts):
    def conv(v):
        s = str(v).strip()
        if s not in opts:
            raise ValueError(f"{s!r} not one of {', '.join(opts)}")
        return s
    return conv


def _str(v):
    return str(v).strip()


SCHEMA = {
    "problem": {"kind": _choice(*KINDS), "preset": _choice(*presets.DEFAULTS)},
    "mesh": {"file": _str, "solid_file": _str, "fluid_file": _str, "n": _int, "nx": _int, "ny": _int,
             "nz": _int, "element": _choice("tri3", "tri6", "quad4")},
    "time": {"t_end": _float, "dt": _float},
    "solid": {"rho": _float, "mu": _float, "inv_lambda": _float, "young": _float, "poisson": _float,
              "gravity": _vec, "mode": _choice("dynamic", "static"),
              "subscales": _choice("dynamic", "quasi-static"), "load": _float},
    "fluid": {"rho": _float, "mu": _float, "nu": _float, "inlet_velocity": _float, "ramp_time": _float},
    "solver": {"newton_tol": _float, "newton_max_iters": _int, "picard_tol": _float, "picard_max_iters": _int,
               "linear_tol": _float, "coupling_tol": _float, "coupling_max_iters": _int,
               "coupling_floor": _float, "relaxation": _choice("aitken", "fixed"), "omega_init": _float,
               "omega_min": _float, "omega_max": _float},
    "output": {"dir": _str, "vtk_every": _int, "deterministic": _bool},
    "probes": None,
}

_ALTERNATIVES = {
    "solid": ((("mu", "inv_lambda"), ("young", "poisson")), (("young", "poisson"), ("mu", "inv_lambda"))),
    "fluid": ((("mu",), ("nu",)), (("nu",), ("mu",))),
}

SOLVER_DEFAULTS = {"newton_tol": 1e-8, "newton_max_iters": 25, "picard_tol": 1e-7, "picard_max_iters": 30,
                   "linear_tol": 1e-10, "coupling_tol": 1e-6, "coupling_max_iters": 50, "coupling_floor": 1e-6,
                   "relaxation": "aitken", "omega_init": 0.5, "omega_min": 0.05, "omega_max": 1.0}
OUTPUT_DEFAULTS = {"dir": "output", "vtk_every": 0, "deterministic": False}


@dataclass
class Probe:
    name: str
    domain: str
    point: Tuple[float, ...]


@dataclass
class RunConfig:
    kind: str
    preset: str
    mesh: Dict[str, object]
    t_end: float
    dt: float
    solid: Dict[str, object]
    fluid: Dict[str, object]
    solver: Dict[str, object]
    output: Dict[str, object]
    probes: List[Probe] = field(default_factory=list)
    source: Optional[str] = None
    _meshes: Optional[presets.PresetMeshes] = field(default=None, repr=False)

    def meshes(self) -> presets.PresetMeshes:
        """Meshes at t=0 (fresh copies on every call)."""
        if self._meshes is None:
            self._meshes = _load_meshes(self)
        m = self._meshes
        return presets.PresetMeshes(solid=None if m.solid is None else m.solid.copy(),
                                    fluid=None if m.fluid is None else m.fluid.copy())

    @property
    def n_steps(self) -> int:
        return int(np.ceil(self.t_end / self.dt - 1e-9))


def _parse_probe(name, text, problems):
    s = str(text).strip()
    domain = None
    if ":" in s:
        domain, s = (p.strip() for p in s.split(":", 1))
        if domain not in ("solid", "fluid"):
            problems.append(f"[probes] {name}: unknown domain {domain!r}")
            return None
    try:
        pt = _vec(s)
    except ValueError as exc:
        problems.append(f"[probes] {name}: {exc}")
        return None
    return Probe(name, domain, pt)


def _load_meshes(cfg: RunConfig) -> presets.PresetMeshes:
    m = cfg.mesh
    base = os.path.dirname(cfg.source) if cfg.source else "."

    def rd(p):
        return read_mesh(p if os.path.isabs(p) else os.path.join(base, p))

    if cfg.kind == "fsi":
        if "solid_file" in m or "fluid_file" in m:
            gen = presets.build_meshes(cfg.preset, m) if not ("solid_file" in m and "fluid_file" in m) else None
            return presets.PresetMeshes(solid=rd(m["solid_file"]) if "solid_file" in m else gen.solid,
                                        fluid=rd(m["fluid_file"]) if "fluid_file" in m else gen.fluid)
        return presets.build_meshes(cfg.preset, m)
    if "file" in m:
        mesh = rd(m["file"])
        return presets.PresetMeshes(**{cfg.kind: mesh})
    return presets.build_meshes(cfg.preset, m)


def parse_config(text: str, source: Optional[str] = None) -> RunConfig:
    """Validated configuration from the text of a configuration file; raises
    :class:`ConfigError` listing every problem found."""
    problems: List[str] = []
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#", ";"), strict=True)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source or "<config>")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse configuration: {exc}", [str(exc)]) from None
    raw: Dict[str, Dict[str, str]] = {}
    for sec in cp.sections():
        if sec not in SCHEMA:
            problems.append(f"unknown section [{sec}]")
            continue
        raw[sec] = dict(cp.items(sec))

    preset = raw.get("problem", {}).get("preset")
    if preset is None:
        problems.append("[problem] preset is required")
    elif preset not in presets.DEFAULTS:
        problems.append(f"[problem] preset: {preset!r} not one of {', '.join(presets.DEFAULTS)}")
        preset = None
    defaults = copy.deepcopy(presets.DEFAULTS[preset]) if preset else {}

    vals: Dict[str, Dict[str, object]] = {}
    for sec, schema in SCHEMA.items():
        if schema is None:
            continue
        out = dict(defaults.get(sec, {}))
        given = raw.get(sec, {})
        # a material given one way replaces the preset's other parametrization
        for mine, other in _ALTERNATIVES.get(sec, ()):
            if any(k in given for k in mine) and not any(k in given for k in other):
                for k in other:
                    out.pop(k, None)
        if sec == "solver":
            out = {**SOLVER_DEFAULTS, **out}
        elif sec == "output":
            out = {**OUTPUT_DEFAULTS, **out}
        for key, text_v in raw.get(sec, {}).items():
            if key not in schema:
                problems.append(f"[{sec}] unknown key {key!r}")
                continue
            try:
                out[key] = schema[key](text_v)
            except (TypeError, ValueError) as exc:
                problems.append(f"[{sec}] {key}: {exc}")
        vals[sec] = out

    kind = vals["problem"].get("kind")
    if preset and kind is not None and kind != presets.DEFAULTS[preset]["problem"]["kind"]:
        problems.append(f"[problem] kind {kind!r} does not match preset {preset!r} "
                        f"({presets.DEFAULTS[preset]['problem']['kind']})")
    if kind is None and preset is None:
        problems.append("[problem] kind is required")

    probes: List[Probe] = []
    if "probes" in raw:
        for name, text_v in raw["probes"].items():
            p = _parse_probe(name, text_v, problems)
            if p is not None:
                probes.append(p)
    else:
        probes = [Probe(n, d, tuple(pt)) for n, (d, pt) in defaults.get("probes", {}).items()]

    _check_values(vals, kind, problems)
    if problems:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(problems), problems)

    t = vals["time"]
    cfg = RunConfig(kind=kind, preset=preset, mesh=vals["mesh"], t_end=t["t_end"], dt=t["dt"],
                    solid=vals["solid"], fluid=vals["fluid"], solver=vals["solver"], output=vals["output"],
                    probes=probes, source=source)
    _check_meshes_and_probes(cfg, problems)
    if problems:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(problems), problems)
    return cfg


def _check_values(v, kind, problems):
    t = v["time"]
    for k in ("t_end", "dt"):
        if k not in t:
            problems.append(f"[time] {k} is required")
    if "dt" in t and not t["dt"] > 0:
        problems.append(f"[time] dt must be positive, got {t['dt']}")
    if "dt" in t and "t_end" in t and not t["t_end"] >= t["dt"]:
        problems.append(f"[time] t_end ({t['t_end']}) must be at least dt ({t['dt']})")

    s = v["solid"]
    if kind in ("solid", "fsi"):
        if not s.get("rho", 0) > 0:
            problems.append(f"[solid] rho must be positive, got {s.get('rho')}")
        has_mu = "mu" in s
        has_young = "young" in s or "poisson" in s
        if has_mu and has_young:
            problems.append("[solid] give either mu (with inv_lambda) or young and poisson, not both")
        elif has_mu:
            if not s["mu"] > 0:
                problems.append(f"[solid] mu must be positive, got {s['mu']}")
            if s.get("inv_lambda", 0.0) < 0:
                problems.append(f"[solid] inv_lambda must be non-negative, got {s['inv_lambda']}")
        elif has_young:
            if not s.get("young", 0) > 0:
                problems.append(f"[solid] young must be positive, got {s.get('young')}")
            # the mixed form stores 1/lambda, so lambda must be positive
            if not 0.0 < s.get("poisson", -2.0) <= 0.5:
                problems.append(f"[solid] poisson must lie in (0, 0.5], got {s.get('poisson')}")
        else:
            problems.append("[solid] material needs mu or young and poisson")
        if "gravity" in s and len(s["gravity"]) not in (2, 3):
            problems.append(f"[solid] gravity needs 2 or 3 components, got {len(s['gravity'])}")
    f = v["fluid"]
    if kind in ("fluid", "fsi"):
        if not f.get("rho", 0) > 0:
            problems.append(f"[fluid] rho must be positive, got {f.get('rho')}")
        if "mu" in f and "nu" in f:
            problems.append("[fluid] give either mu (dynamic) or nu (kinematic), not both")
        elif not f.get("mu", f.get("nu", 0)) > 0:
            problems.append("[fluid] viscosity (mu or nu) must be positive")
        if f.get("ramp_time", 0.0) < 0:
            problems.append(f"[fluid] ramp_time must be non-negative, got {f['ramp_time']}")

    sv = v["solver"]
    for k in ("newton_tol", "picard_tol", "linear_tol", "coupling_tol", "coupling_floor"):
        if not sv[k] > 0:
            problems.append(f"[solver] {k} must be positive, got {sv[k]}")
    for k in ("newton_max_iters", "picard_max_iters", "coupling_max_iters"):
        if sv[k] < 1:
            problems.append(f"[solver] {k} must be at least 1, got {sv[k]}")
    if not 0 < sv["omega_min"] <= sv["omega_init"] <= sv["omega_max"]:
        problems.append("[solver] need 0 < omega_min <= omega_init <= omega_max, got "
                        f"{sv['omega_min']}, {sv['omega_init']}, {sv['omega_max']}")
    if v["output"]["vtk_every"] < 0:
        problems.append(f"[output] vtk_every must be non-negative, got {v['output']['vtk_every']}")


def _check_meshes_and_probes(cfg: RunConfig, problems):
    try:
        meshes = cfg.meshes()
    except (OSError, MeshError, ValueError, KeyError) as exc:
        problems.append(f"[mesh] cannot build or read the mesh: {exc}")
        return
    need = presets.required_tags(cfg.preset)
    for dom, tags in need.items():
        m: Mesh = getattr(meshes, dom)
        if m is None:
            continue
        missing = [t for t in tags if t not in m.boundary]
        if missing:
            problems.append(f"[mesh] {dom} mesh lacks boundary tags {', '.join(missing)}")
    if cfg.kind in ("solid", "fsi") and "gravity" in cfg.solid and meshes.solid is not None \
            and len(cfg.solid["gravity"]) != meshes.solid.dim:
        problems.append(f"[solid] gravity has {len(cfg.solid['gravity'])} components, mesh is "
                        f"{meshes.solid.dim}D")
    for p in cfg.probes:
        doms = [p.domain] if p.domain else (["solid", "fluid"] if cfg.kind == "fsi" else [cfg.kind])
        found = None
        for d in doms:
            m = getattr(meshes, d)
            if m is None:
                continue
            if len(p.point) != m.dim:
                problems.append(f"[probes] {p.name}: point has {len(p.point)} coordinates, mesh is {m.dim}D")
                found = "bad"
                break
            try:
                locate(m, np.asarray(p.point, float))
            except DomainError:
                continue
            found = d
            break
        if found is None:
            problems.append(f"[probes] {p.name}: point {p.point} lies outside the domain at t=0")
        elif found != "bad":
            p.domain = found


def load_config(path: str) -> RunConfig:
    """Read and validate a configuration file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path!r}: {exc.strerror}", [str(exc)]) from None
    return parse_config(text, source=path)


__all__ = ["RunConfig", "Probe", "load_config", "parse_config", "SCHEMA", "SOLVER_DEFAULTS", "OUTPUT_DEFAULTS"]
