"""Plain key = value configuration files.

Unknown keys are rejected and every problem is reported with its line number
in a single error, so a bad file surfaces all mistakes at once.  Viscosity
values are only checked for finiteness here; admissibility is enforced by the
coefficient validator when a run starts, which reports signed margins.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .fields import INITIAL_KINDS

_FLOAT_KEYS = {
    "mu1", "mu2", "mu3", "mu4", "mu5", "mu6",
    "dt_max", "cfl", "t_end", "eps0", "r0", "blowup_delta", "conv_tol",
    "initial.amplitude", "initial.flow_amplitude",
}
_INT_KEYS = {"Lmax", "out_every", "seed", "initial.l", "initial.m",
             "initial.flow_l", "initial.flow_m"}
_STR_KEYS = {"output_dir", "initial.kind", "initial.path"}
_VEC_KEYS = {"initial.direction"}

REQUIRED_KEYS = ("Lmax", "mu1", "mu2", "mu3", "mu4", "mu5", "mu6",
                 "t_end", "initial.kind")
MU_KEYS = ("mu1", "mu2", "mu3", "mu4", "mu5", "mu6")

DEFAULTS: dict[str, object] = {
    "dt_max": 1e-2,
    "cfl": 0.5,
    "out_every": 10,
    "eps0": 0.3,
    "r0": 0.5,
    "blowup_delta": 0.05,
    "output_dir": ".",
    "seed": 0,
    "conv_tol": 1e-6,
    "initial.amplitude": 0.1,
    "initial.l": 2,
    "initial.m": 1,
    "initial.direction": (0.0, 0.0, 1.0),
    "initial.flow_amplitude": 0.0,
    "initial.flow_l": 2,
    "initial.flow_m": 1,
    "initial.path": "",
}


@dataclass
class InitialSpec:
    kind: str
    amplitude: float = 0.1
    l: int = 2
    m: int = 1
    direction: tuple[float, float, float] = (0.0, 0.0, 1.0)
    flow_amplitude: float = 0.0
    flow_l: int = 2
    flow_m: int = 1
    path: str = ""

    def params(self) -> dict:
        return {
            "amplitude": self.amplitude,
            "l": self.l,
            "m": self.m,
            "direction": self.direction,
            "flow_amplitude": self.flow_amplitude,
            "flow_l": self.flow_l,
            "flow_m": self.flow_m,
            "path": self.path,
        }


@dataclass
class Config:
    lmax: int
    mu1: float
    mu2: float
    mu3: float
    mu4: float
    mu5: float
    mu6: float
    t_end: float
    initial: InitialSpec
    dt_max: float = 1e-2
    cfl: float = 0.5
    out_every: int = 10
    eps0: float = 0.3
    cap_radius: float = 0.5
    blowup_delta: float = 0.05
    output_dir: str = "."
    seed: int = 0
    conv_tol: float = 1e-6

    @property
    def mus(self) -> tuple[float, ...]:
        return (self.mu1, self.mu2, self.mu3, self.mu4, self.mu5, self.mu6)


def _parse_value(key: str, text: str):
    if key in _FLOAT_KEYS:
        value = float(text)
        if not np.isfinite(value):
            raise ValueError("not finite")
        return value
    if key in _INT_KEYS:
        return int(text)
    if key in _VEC_KEYS:
        parts = text.split()
        if len(parts) != 3:
            raise ValueError("expected three numbers")
        vec = tuple(float(p) for p in parts)
        if not all(np.isfinite(v) for v in vec):
            raise ValueError("not finite")
        return vec
    return text


def parse_config(text: str, require: tuple[str, ...] = REQUIRED_KEYS) -> Config:
    """Parse and validate a configuration; raises ConfigError listing all problems."""
    known = _FLOAT_KEYS | _INT_KEYS | _STR_KEYS | _VEC_KEYS
    values: dict[str, object] = {}
    problems: list[str] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, _, rhs = line.partition("=")
        key = key.strip()
        rhs = rhs.strip()
        if key not in known:
            problems.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in values:
            problems.append(f"line {lineno}: duplicate key {key!r}")
            continue
        try:
            values[key] = _parse_value(key, rhs)
        except ValueError as err:
            problems.append(f"line {lineno}: bad value for {key!r}: {err}")

    for key in require:
        if key not in values:
            problems.append(f"missing required key {key!r}")

    merged = dict(DEFAULTS)
    merged.update(values)
    if problems:
        raise ConfigError("; ".join(problems))

    problems.extend(_validate(merged, require))
    if problems:
        raise ConfigError("; ".join(problems))

    initial = InitialSpec(
        kind=str(merged.get("initial.kind") or "constant-director"),
        amplitude=float(merged["initial.amplitude"]),
        l=int(merged["initial.l"]),
        m=int(merged["initial.m"]),
        direction=tuple(merged["initial.direction"]),
        flow_amplitude=float(merged["initial.flow_amplitude"]),
        flow_l=int(merged["initial.flow_l"]),
        flow_m=int(merged["initial.flow_m"]),
        path=str(merged["initial.path"]),
    )
    return Config(
        lmax=int(merged.get("Lmax", 15)),
        mu1=float(merged["mu1"]), mu2=float(merged["mu2"]), mu3=float(merged["mu3"]),
        mu4=float(merged["mu4"]), mu5=float(merged["mu5"]), mu6=float(merged["mu6"]),
        t_end=float(merged.get("t_end", 0.0)),
        initial=initial,
        dt_max=float(merged["dt_max"]),
        cfl=float(merged["cfl"]),
        out_every=int(merged["out_every"]),
        eps0=float(merged["eps0"]),
        cap_radius=float(merged["r0"]),
        blowup_delta=float(merged["blowup_delta"]),
        output_dir=str(merged["output_dir"]),
        seed=int(merged["seed"]),
        conv_tol=float(merged["conv_tol"]),
    )


def parse_mu_config(text: str) -> tuple[float, ...]:
    """Parse a file that needs to supply only the six viscosities."""
    return parse_config(text, require=MU_KEYS).mus


def _validate(merged: dict[str, object], require: tuple[str, ...]) -> list[str]:
    problems = []
    lmax = merged.get("Lmax")
    if lmax is not None and int(lmax) < 4:
        problems.append(f"'Lmax' must be at least 4, got {lmax}")
    if "t_end" in merged and float(merged.get("t_end", 0.0)) < 0:
        problems.append("'t_end' must be nonnegative")
    if float(merged["dt_max"]) <= 0:
        problems.append("'dt_max' must be positive")
    if float(merged["cfl"]) <= 0:
        problems.append("'cfl' must be positive")
    if int(merged["out_every"]) < 1:
        problems.append("'out_every' must be at least 1")
    if float(merged["eps0"]) <= 0:
        problems.append("'eps0' must be positive")
    if not (0.0 < float(merged["r0"]) <= np.pi):
        problems.append("'r0' must lie in (0, pi]")
    if not (0.0 <= float(merged["blowup_delta"]) < 1.0):
        problems.append("'blowup_delta' must lie in [0, 1)")
    if float(merged["conv_tol"]) <= 0:
        problems.append("'conv_tol' must be positive")

    kind = merged.get("initial.kind")
    if kind is not None and kind not in INITIAL_KINDS:
        problems.append(
            f"unknown initial.kind {kind!r}; expected one of {', '.join(INITIAL_KINDS)}"
        )
    if lmax is not None and int(lmax) >= 4:
        # nonlinear terms need 3/2 headroom above the dynamically resolved band
        band = (2 * int(lmax)) // 3
        for lk, mk, active in (
            ("initial.l", "initial.m", kind == "rossby-flow"),
            ("initial.flow_l", "initial.flow_m",
             kind == "perturbed-constant" and float(merged["initial.flow_amplitude"]) != 0.0),
        ):
            if not active:
                continue
            l = int(merged[lk])
            m = int(merged[mk])
            if l < 1 or l > band:
                problems.append(
                    f"'{lk}' must lie in [1, {band}] (dealiased band of Lmax={lmax})"
                )
            elif abs(m) > l:
                problems.append(f"'{mk}' must satisfy |m| <= l = {l}")
    if kind == "checkpoint" and not merged.get("initial.path"):
        problems.append("initial.kind 'checkpoint' requires initial.path")
    return problems
