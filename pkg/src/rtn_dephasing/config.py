"""Run configuration: TOML text <-> validated :class:`RunConfig`.

Grammar (order-insensitive, ``#`` comments)::

    backends = ["closed", "rational"]   # any of closed rational contour volterra mc

    [system]              # optional for a single pair
    omegas = [0.0, 1.5]   # intrinsic level frequencies
    rho0_re = [[0.5, 0.5], [0.5, 0.5]]
    rho0_im = [[0.0, 0.0], [0.0, 0.0]]   # optional

    [pair]                # single-pair shorthand, or one [pair.<n>.<m>] per pair
    nu = 1.0
    lambda = 1.0
    a = 0.0
    kernel = "memoryless"  # | "exponential" kappa | "composite" w kappa
                           # | "modulated" kappa omega

    [grid]
    t_max = 10.0
    n_points = 101

    [volterra]  step = 1e-3
    [mc]        n_traj = 100000, seed = 0
    [output]    directory = ".", prefix = "run"
    [compare]   tolerance = 1e-6, volterra_tolerance = 1e-3
"""

from __future__ import annotations

import math
import re
import sys
from dataclasses import dataclass, field

import numpy as np

from .backends import check_backend
from .closed_form import RtnPairParams
from .errors import ConfigError, DephasingError
from .laplace_engine import BACKENDS
from .molecule_model import MoleculeSpec
from .noise_kernels import Composite, Exponential, Memoryless, ModulatedCosine

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import tomli_w

KERNEL_KEYS = {
    "memoryless": (),
    "exponential": ("kappa",),
    "composite": ("w", "kappa"),
    "modulated": ("kappa", "omega"),
}
PAIR_KEYS = {"nu", "lambda", "a", "kernel", "kappa", "w", "omega"}
SECTIONS = {
    "system": {"omegas", "rho0_re", "rho0_im"},
    "grid": {"t_max", "n_points"},
    "volterra": {"step"},
    "mc": {"n_traj", "seed"},
    "output": {"directory", "prefix"},
    "compare": {"tolerance", "volterra_tolerance"},
}
ROOT_KEYS = {"backends"}


@dataclass(frozen=True)
class GridConfig:
    t_max: float
    n_points: int

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.n_points)


@dataclass
class RunConfig:
    molecule: MoleculeSpec
    grid: GridConfig
    backends: tuple
    shorthand: bool = False
    volterra_step: float = 1e-3
    mc_n_traj: int = 100_000
    mc_seed: int = 0
    output_dir: str = "."
    prefix: str = "run"
    tolerance: float = 1e-6
    volterra_tolerance: float = 1e-3
    source: str = field(default="", compare=False, repr=False)

    def to_dict(self) -> dict:
        """Plain TOML-ready representation (inverse of :func:`parse_config`)."""
        out: dict = {"backends": list(self.backends)}
        mol = self.molecule
        if not self.shorthand or np.any(mol.omegas != 0) or not np.allclose(mol.rho0, _PLUS_STATE):
            out["system"] = {
                "omegas": [float(x) for x in mol.omegas],
                "rho0_re": mol.rho0.real.tolist(),
                "rho0_im": mol.rho0.imag.tolist(),
            }
        pairs = {f"{i}.{j}": _pair_dict(p) for (i, j), p in sorted(mol.pair_params.items())}
        if self.shorthand:
            out["pair"] = pairs["0.1"]
        else:
            out["pair"] = {}
            for (i, j), p in sorted(mol.pair_params.items()):
                out["pair"].setdefault(str(i), {})[str(j)] = _pair_dict(p)
        out["grid"] = {"t_max": self.grid.t_max, "n_points": self.grid.n_points}
        out["volterra"] = {"step": self.volterra_step}
        out["mc"] = {"n_traj": self.mc_n_traj, "seed": self.mc_seed}
        out["output"] = {"directory": self.output_dir, "prefix": self.prefix}
        out["compare"] = {"tolerance": self.tolerance, "volterra_tolerance": self.volterra_tolerance}
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, RunConfig):
            return NotImplemented
        return self.to_dict() == other.to_dict()


_PLUS_STATE = 0.5 * np.ones((2, 2))


def _pair_dict(p: RtnPairParams) -> dict:
    d = {"nu": p.nu, "lambda": p.lam, "a": p.a}
    k = p.kernel
    if isinstance(k, Memoryless):
        d["kernel"] = "memoryless"
    elif isinstance(k, Exponential):
        d.update(kernel="exponential", kappa=k.kappa)
    elif isinstance(k, Composite):
        d.update(kernel="composite", w=k.w, kappa=k.kappa)
    else:
        d.update(kernel="modulated", kappa=k.kappa, omega=k.Omega)
    return d


def dump_config(cfg: RunConfig) -> str:
    return tomli_w.dumps(cfg.to_dict())


class _Locator:
    """Finds the line on which a ``section.key`` was written."""

    header = re.compile(r"^\s*\[([^\]]+)\]\s*(#.*)?$")

    def __init__(self, text: str):
        self.lines = text.splitlines()

    def line(self, section: str | None, key: str | None = None) -> int | None:
        current = ""
        for no, raw in enumerate(self.lines, 1):
            m = self.header.match(raw)
            if m:
                current = re.sub(r"[\s\"']", "", m.group(1))
                if key is None and current == section:
                    return no
                continue
            if key is not None and current == (section or ""):
                if re.match(rf"^\s*[\"']?{re.escape(key)}[\"']?\s*=", raw):
                    return no
        return None


class _Reader:
    def __init__(self, text: str):
        self.loc = _Locator(text)

    def fail(self, section, key, message):
        name = f"{section}.{key}" if section and key else (key or section)
        raise ConfigError(message, key=name, line=self.loc.line(section, key))

    def number(self, table, section, key, default=None, *, integer=False, check=None, rule=""):
        if key not in table:
            if default is None:
                self.fail(section, key, "required key is missing")
            return default
        value = table[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(section, key, f"expected a number, got {value!r}")
        if integer and not isinstance(value, int):
            self.fail(section, key, f"expected an integer, got {value!r}")
        if not integer and not math.isfinite(value):
            self.fail(section, key, f"expected a finite number, got {value!r}")
        if check is not None and not check(value):
            self.fail(section, key, f"value {value!r} outside {rule}")
        return int(value) if integer else float(value)

    def unknown(self, table, allowed, section):
        for key in table:
            if key not in allowed:
                self.fail(section, key, f"unknown key (allowed: {', '.join(sorted(allowed))})")

    def pair(self, table, section) -> RtnPairParams:
        self.unknown(table, PAIR_KEYS, section)
        nu = self.number(table, section, "nu", check=lambda v: v >= 0, rule="[0, inf)")
        lam = self.number(table, section, "lambda", check=lambda v: v > 0, rule="(0, inf)")
        a = self.number(table, section, "a", 0.0, check=lambda v: -1 <= v <= 1, rule="[-1, 1]")
        kind = table.get("kernel", "memoryless")
        if kind not in KERNEL_KEYS:
            self.fail(section, "kernel", f"unknown kernel {kind!r} (choose {', '.join(KERNEL_KEYS)})")
        for key in ("kappa", "w", "omega"):
            if key in table and key not in KERNEL_KEYS[kind]:
                self.fail(section, key, f"not a parameter of kernel {kind!r}")
        positive = dict(check=lambda v: v > 0, rule="(0, inf)")
        if kind == "memoryless":
            kernel = Memoryless()
        elif kind == "exponential":
            kernel = Exponential(self.number(table, section, "kappa", **positive))
        elif kind == "composite":
            w = self.number(table, section, "w", check=lambda v: 0 <= v <= 1, rule="[0, 1]")
            kernel = Composite(w, self.number(table, section, "kappa", **positive))
        else:
            kappa = self.number(table, section, "kappa", **positive)
            om = self.number(table, section, "omega", check=lambda v: v >= 0, rule="[0, inf)")
            kernel = ModulatedCosine(kappa, om)
        return RtnPairParams(nu, lam, a, kernel)


def _matrix(reader, table, key, n):
    value = table.get(key)
    try:
        m = np.array(value, dtype=float)
    except (TypeError, ValueError):
        reader.fail("system", key, "expected a square array of numbers")
    if m.shape != (n, n):
        reader.fail("system", key, f"expected a {n}x{n} array to match omegas")
    return m


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration; errors name key and line."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"syntax error: {exc}") from None
    r = _Reader(text)

    for key, value in doc.items():
        if key not in ROOT_KEYS and key not in SECTIONS and key != "pair":
            r.fail(None, key, "unknown key or section")
        if key in SECTIONS:
            if not isinstance(value, dict):
                r.fail(None, key, "expected a section")
            r.unknown(value, SECTIONS[key], key)

    backends = doc.get("backends")
    if backends is None:
        r.fail(None, "backends", "required key is missing")
    if isinstance(backends, str):
        backends = [backends]
    if not isinstance(backends, list) or not backends:
        r.fail(None, "backends", "expected a non-empty list of backend names")
    for b in backends:
        if b not in BACKENDS:
            r.fail(None, "backends", f"unknown backend {b!r} (choose {', '.join(BACKENDS)})")
    if len(set(backends)) != len(backends):
        r.fail(None, "backends", "duplicate backend names")

    pair_doc = doc.get("pair")
    if not isinstance(pair_doc, dict) or not pair_doc:
        r.fail("pair", None, "missing required section [pair] or [pair.<n>.<m>]")
    shorthand = "nu" in pair_doc
    pairs: dict[tuple[int, int], RtnPairParams] = {}
    try:
        if shorthand:
            pairs[(0, 1)] = r.pair(pair_doc, "pair")
        else:
            for n_key, inner in pair_doc.items():
                if not (n_key.isdigit() and isinstance(inner, dict)):
                    r.fail("pair", n_key, "expected [pair] keys or [pair.<n>.<m>] sections")
                for m_key, table in inner.items():
                    section = f"pair.{n_key}.{m_key}"
                    if not (m_key.isdigit() and isinstance(table, dict)):
                        r.fail(section, None, "expected a [pair.<n>.<m>] section with integer levels")
                    n, m = int(n_key), int(m_key)
                    if n >= m:
                        r.fail(section, None, "pair sections need n < m")
                    pairs[(n, m)] = r.pair(table, section)
    except ConfigError:
        raise
    except DephasingError as exc:
        raise ConfigError(str(exc), key="pair") from None

    system = doc.get("system", {})
    if "omegas" in system:
        omegas = system["omegas"]
        if not isinstance(omegas, list) or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in omegas
        ):
            r.fail("system", "omegas", "expected a list of numbers")
        omegas = np.array(omegas, dtype=float)
    elif shorthand:
        omegas = np.zeros(2)
    else:
        r.fail("system", "omegas", "required for multi-pair molecules")
    n_levels = omegas.size
    if shorthand and n_levels != 2:
        r.fail("system", "omegas", "single-pair shorthand needs exactly two levels")
    if "rho0_re" in system:
        rho0 = _matrix(r, system, "rho0_re", n_levels).astype(complex)
        if "rho0_im" in system:
            rho0 = rho0 + 1j * _matrix(r, system, "rho0_im", n_levels)
    elif shorthand:
        rho0 = _PLUS_STATE.astype(complex)
    else:
        r.fail("system", "rho0_re", "required for multi-pair molecules")
    try:
        molecule = MoleculeSpec(omegas, rho0, pairs)
    except DephasingError as exc:
        key = "pair" if isinstance(exc, ConfigError) else "system"
        raise ConfigError(str(exc), key=key, line=r.loc.line(key if key == "system" else None, None)) from None

    grid_doc = doc.get("grid")
    if grid_doc is None:
        r.fail("grid", None, "missing required section [grid]")
    grid = GridConfig(
        r.number(grid_doc, "grid", "t_max", check=lambda v: v > 0, rule="(0, inf)"),
        r.number(grid_doc, "grid", "n_points", integer=True, check=lambda v: v >= 2, rule="[2, inf)"),
    )

    vol = doc.get("volterra", {})
    step = r.number(vol, "volterra", "step", 1e-3, check=lambda v: v > 0, rule="(0, inf)")
    mc = doc.get("mc", {})
    n_traj = r.number(mc, "mc", "n_traj", 100_000, integer=True, check=lambda v: v >= 1, rule="[1, inf)")
    seed = r.number(mc, "mc", "seed", 0, integer=True, check=lambda v: 0 <= v < 2**64, rule="[0, 2^64)")
    out = doc.get("output", {})
    for key in ("directory", "prefix"):
        if key in out and not isinstance(out[key], str):
            r.fail("output", key, "expected a string")
    cmp_doc = doc.get("compare", {})
    tol = r.number(cmp_doc, "compare", "tolerance", 1e-6, check=lambda v: v > 0, rule="(0, inf)")
    vtol = r.number(cmp_doc, "compare", "volterra_tolerance", 1e-3, check=lambda v: v > 0, rule="(0, inf)")

    for b in backends:
        for pair, params in pairs.items():
            try:
                check_backend(b, params)
            except DephasingError as exc:
                section = "pair" if shorthand else f"pair.{pair[0]}.{pair[1]}"
                r.fail(section, "kernel", f"backend {b!r}: {exc}")
    if "volterra" in backends:
        if step > grid.t_max:
            r.fail("volterra", "step", "step must not exceed grid.t_max")
        spacing = grid.t_max / (grid.n_points - 1)
        ratio = spacing / step
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio) or round(ratio) < 1:
            r.fail("volterra", "step", f"grid spacing {spacing:g} must be a multiple of the step")

    return RunConfig(
        molecule=molecule,
        grid=grid,
        backends=tuple(backends),
        shorthand=shorthand,
        volterra_step=step,
        mc_n_traj=n_traj,
        mc_seed=seed,
        output_dir=out.get("directory", "."),
        prefix=out.get("prefix", "run"),
        tolerance=tol,
        volterra_tolerance=vtol,
        source=text,
    )
