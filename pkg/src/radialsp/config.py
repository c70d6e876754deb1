"""Run configuration: flat key=value files plus command-line overrides.

Every numeric parameter is validated against the module preconditions
before any compute starts, and the full configuration is serialized
verbatim into each run manifest.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from .errors import ConfigurationError

_POTENTIALS = ("smoothed-exponential", "point-coulomb", "zero")


@dataclass
class RunConfig:
    # potential selection
    potential: str = "smoothed-exponential"
    potential_Z: float = 1.0

    # bound-state mesh (continuation, sweeps)
    mesh_n: int = 4000
    mesh_rmax: float = 100.0
    # stability mesh (L+-/JL spectra, transition scans)
    stability_n: int = 2000
    stability_rmax: float = 100.0
    # compact mesh used to prepare far-field-matched evolution data
    state_n: int = 2000
    state_rmax: float = 30.0
    # evolution mesh and integrator
    evolution_n: int = 8000
    evolution_rmax: float = 400.0
    dt: float = 0.005
    t_final: float = 50.0
    eps: float = 1e-4
    snapshot_stride: int = 100
    paper_scale: bool = False       # r_max=4000, n=64000, dt=0.00125, t=250

    # branch work
    branches: tuple = (0, 1, 2, 3)
    dgamma: float = 0.05
    target_mass: float = 1.0
    E_per_decade: int = 25
    E_sweep_factor: float = 2.0     # up-sweep endpoint: factor * mass-one E
    E_down_gap: float = 1e-3        # down-sweep floor: gap fraction of E*-E_lin
    E_values: tuple = ()            # explicit overrides for sweeps/scans

    # tolerances
    bvp_tol: float = 1e-10
    sigma_threshold_scale: float = 1e-5

    # execution
    out_dir: str = "runs"
    workers: int = 2
    stepper_backend: str = "auto"

    def validate(self) -> "RunConfig":
        errs = []
        if self.potential not in _POTENTIALS:
            errs.append(f"potential: unknown kind {self.potential!r}; "
                        f"choose from {_POTENTIALS}")
        if self.potential != "zero" and self.potential_Z <= 0:
            errs.append("potential_Z: must be > 0")
        for name in ("mesh_n", "stability_n", "state_n", "evolution_n"):
            if getattr(self, name) < 2:
                errs.append(f"{name}: sinh mesh needs at least 2 elements")
        for name in ("mesh_rmax", "stability_rmax", "state_rmax",
                     "evolution_rmax", "dt", "t_final", "target_mass",
                     "bvp_tol"):
            if getattr(self, name) <= 0:
                errs.append(f"{name}: must be positive")
        if not (0.0 < self.dgamma <= 0.2):
            errs.append("dgamma: must lie in (0, 0.2]")
        if self.eps < 0:
            errs.append("eps: must be >= 0")
        if any(b < 0 for b in self.branches):
            errs.append("branches: indices must be >= 0")
        if self.E_per_decade < 2:
            errs.append("E_per_decade: needs at least 2 points per decade")
        if self.workers < 1:
            errs.append("workers: needs at least 1")
        if errs:
            raise ConfigurationError("; ".join(errs))
        return self

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    def evolution_profile(self) -> dict:
        if self.paper_scale:
            return dict(n=64000, r_max=4000.0, dt=0.00125, t_final=250.0)
        return dict(n=self.evolution_n, r_max=self.evolution_rmax,
                    dt=self.dt, t_final=self.t_final)


_BOOL = {"true": True, "1": True, "yes": True,
         "false": False, "0": False, "no": False}


def _coerce(name: str, raw: str, kind):
    raw = raw.strip()
    try:
        if kind is bool:
            return _BOOL[raw.lower()]
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is tuple:
            return tuple(int(x) if x.strip().lstrip("-").isdigit()
                         else float(x) for x in raw.split(",") if x.strip())
        return raw
    except (ValueError, KeyError):
        raise ConfigurationError(f"{name}: cannot parse {raw!r}")


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> RunConfig:
    """Config file (key = value lines, # comments) with overrides winning."""
    values = {}
    if path:
        p = Path(path)
        if not p.exists():
            raise ConfigurationError(f"config file {path} does not exist")
        for ln, line in enumerate(p.read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(
                    f"{path}:{ln}: expected key = value, got {line!r}")
            k, v = (s.strip() for s in line.split("=", 1))
            values[k] = v
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})

    kinds = {f.name: type(getattr(RunConfig(), f.name))
             for f in fields(RunConfig)}
    kwargs = {}
    for k, v in values.items():
        if k not in kinds:
            raise ConfigurationError(f"unknown configuration key {k!r}")
        kwargs[k] = v if not isinstance(v, str) else _coerce(k, v, kinds[k])
    return RunConfig(**kwargs).validate()
