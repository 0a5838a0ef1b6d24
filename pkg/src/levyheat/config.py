"""Scenario files: flat TOML with dotted section keys, one scenario per file.

Example::

    profile.family = "fractional"
    profile.alpha = 1.0
    potential.form = "indicator_well"
    potential.value = 2.0
    potential.radius = 1.0
    time.t = 0.5
    suites = ["perturbation", "oracle"]
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import tomli

from .errors import ConfigurationError
from .kato import FORMS, Potential
from .profiles import FAMILIES, LevyProfile

SUITES = ("conditions", "symbol", "kernel", "kato", "perturbation", "regularity", "oracle", "weak_solution")

DEPENDENCIES = {
    "regularity": ("perturbation",),
    "oracle": ("perturbation",),
    "weak_solution": ("perturbation",),
}

DEFAULTS: dict[str, Any] = {
    "profile.family": "fractional",
    "profile.alpha": 1.0,
    "profile.m": None,
    "profile.beta": 1.0,
    "profile.eta": None,
    "profile.dim": 1,
    "profile.alpha1": None,
    "profile.alpha2": None,
    "potential.form": "constant",
    "potential.value": 1.0,
    "potential.radius": None,
    "potential.gamma": 0.0,
    "grid.n": None,
    "grid.x_max": None,
    "grid.refined_n": None,
    "grid.oracle_n": 256,
    "time.t0": 1.0,
    "time.t": 0.5,
    "time.t_min": 1e-4,
    "time.horizons": None,
    "time.fractions": [0.05, 0.2, 1.0],
    "kato.a": 2.0,
    "regularity.a": 2.0,
    "tolerances.series": 1e-6,
    "tolerances.stability": 0.1,
    "tolerances.slack": 0.05,
    "tolerances.ck": 1e-4,
    "tolerances.weak": 1e-3,
    "tolerances.oracle_median": 0.01,
    "tolerances.oracle_max": 0.05,
    "tolerances.symbol": 1e-6,
    "suites": [],
    "output.dir": "levyheat-out",
    "seed": 42,
}

_POSITIVE = (
    "profile.alpha",
    "grid.x_max",
    "time.t0",
    "time.t",
    "time.t_min",
    "kato.a",
    "regularity.a",
    "tolerances.series",
    "tolerances.stability",
    "tolerances.slack",
    "tolerances.ck",
    "tolerances.weak",
    "tolerances.oracle_median",
    "tolerances.oracle_max",
    "tolerances.symbol",
)


def _flatten(tree: dict[str, Any], prefix: str = "") -> dict[str, Any]:
    out: dict[str, Any] = {}
    for key, val in tree.items():
        name = f"{prefix}{key}"
        if isinstance(val, dict):
            out.update(_flatten(val, name + "."))
        else:
            out[name] = val
    return out


@dataclass
class Scenario:
    """Validated scenario: every key of :data:`DEFAULTS` with its resolved value."""

    values: dict[str, Any]
    source: str = "<memory>"
    suites: tuple[str, ...] = field(default=())

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def get(self, key: str, default: Any = None) -> Any:
        v = self.values.get(key)
        return default if v is None else v

    def profile(self) -> LevyProfile:
        v = self.values
        family = v["profile.family"]
        m = v["profile.m"]
        if m is None:
            m = 1.0 if family == "tempered" else 0.0
        eta = v["profile.eta"]
        if eta is None and family == "tempered":
            eta = (v["profile.alpha"] + 1 - v["profile.dim"]) / 2 if v["profile.beta"] == 1.0 else 0.0
        prof = LevyProfile(
            family,
            alpha=float(v["profile.alpha"]),
            m=float(m),
            beta=float(v["profile.beta"]),
            eta=None if eta is None else float(eta),
            dim=int(v["profile.dim"]),
            alpha1=v["profile.alpha1"],
            alpha2=v["profile.alpha2"],
        )
        name = f"{family}-{prof.alpha:g}" if family == "fractional" else f"tempered-a{prof.alpha:g}-b{prof.beta:g}"
        return replace(prof, name=name)

    def potential(self) -> Potential:
        v = self.values
        form = v["potential.form"]
        radius = v["potential.radius"]
        kw: dict[str, Any] = {"dim": int(v["profile.dim"]), "value": float(v["potential.value"]), "gamma": float(v["potential.gamma"])}
        if form != "constant":
            kw["radius"] = float(1.0 if radius is None else radius)
        return Potential(form, name=f"{form}-{kw['value']:g}", **kw)

    def to_dict(self) -> dict[str, Any]:
        return dict(sorted(self.values.items()))


def validate(raw: dict[str, Any], source: str = "<memory>") -> Scenario:
    """Merge ``raw`` (flat dotted keys) with the defaults and check every key.

    Raises
    ------
    ConfigurationError
        Listing every violated key in one message.
    """
    problems: list[str] = []
    unknown = sorted(set(raw) - set(DEFAULTS))
    problems += [f"{k}: unknown key" for k in unknown]
    v = {**DEFAULTS, **{k: val for k, val in raw.items() if k in DEFAULTS}}

    def number(key: str) -> None:
        val = v[key]
        if val is not None and (isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val)):
            problems.append(f"{key}: expected a finite number, got {val!r}")

    for key, default in DEFAULTS.items():
        if isinstance(default, float) or key in ("profile.m", "profile.eta", "profile.alpha1", "profile.alpha2", "potential.radius", "grid.x_max"):
            number(key)
    for key in _POSITIVE:
        val = v[key]
        if isinstance(val, (int, float)) and not isinstance(val, bool) and val <= 0:
            problems.append(f"{key}: must be positive, got {val!r}")
    for key in ("profile.dim", "grid.n", "grid.refined_n", "grid.oracle_n", "seed"):
        val = v[key]
        if val is not None and (isinstance(val, bool) or not isinstance(val, int)):
            problems.append(f"{key}: expected an integer, got {val!r}")
        elif key != "seed" and val is not None and val <= 0:
            problems.append(f"{key}: must be positive, got {val!r}")
    if v["profile.family"] not in FAMILIES[:2]:
        problems.append(f"profile.family: expected one of {FAMILIES[:2]}, got {v['profile.family']!r}")
    if v["profile.dim"] not in (1, 2, 3):
        problems.append(f"profile.dim: expected 1, 2 or 3, got {v['profile.dim']!r}")
    if v["potential.form"] not in FORMS[:3]:
        problems.append(f"potential.form: expected one of {FORMS[:3]}, got {v['potential.form']!r}")
    if not isinstance(v["output.dir"], str):
        problems.append(f"output.dir: expected a string, got {v['output.dir']!r}")

    suites = v["suites"]
    if not isinstance(suites, list) or not all(isinstance(s, str) for s in suites):
        problems.append(f"suites: expected a list of names, got {suites!r}")
        suites = []
    for s in suites:
        if s not in SUITES:
            problems.append(f"suites: unknown suite {s!r}")
        for dep in DEPENDENCIES.get(s, ()):
            if dep not in suites:
                problems.append(f"suites: {s!r} requires {dep!r}")

    t0 = v["time.t0"]
    hz = v["time.horizons"]
    if hz is not None:
        if not isinstance(hz, list) or not all(isinstance(h, (int, float)) and not isinstance(h, bool) for h in hz):
            problems.append(f"time.horizons: expected a list of numbers, got {hz!r}")
        elif isinstance(t0, (int, float)) and any(not 0 < h <= t0 for h in hz):
            problems.append(f"time.horizons: every horizon must lie in (0, time.t0={t0}]")
    t = v["time.t"]
    if isinstance(t, (int, float)) and isinstance(t0, (int, float)) and t > t0:
        problems.append(f"time.t: must not exceed time.t0={t0}, got {t}")
    fr = v["time.fractions"]
    if not isinstance(fr, list) or not fr or not all(isinstance(x, (int, float)) and 0 < x <= 1 for x in fr):
        problems.append(f"time.fractions: expected a nonempty list in (0, 1], got {fr!r}")

    if not problems:
        # constructor checks (parameter ranges of the families and forms)
        sc = Scenario(v, source, tuple(s for s in SUITES if s in suites))
        for key, build in (("profile", sc.profile), ("potential", sc.potential)):
            try:
                build()
            except ConfigurationError as exc:
                problems.append(f"{key}: {exc}")
        if not problems and sc.potential().dim != sc.profile().dim:
            problems.append("potential: dimension differs from profile.dim")
    if problems:
        raise ConfigurationError(f"invalid scenario {source}:\n  " + "\n  ".join(problems))
    return sc


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        raw = tomli.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigurationError(f"scenario file {path} not found") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from exc
    return validate(_flatten(raw), str(path))


def parse_scenario(text: str) -> Scenario:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigurationError(f"cannot parse scenario: {exc}") from exc
    return validate(_flatten(raw))
