"""Command-line front end: ``run``, ``compare`` and ``validate``."""

from __future__ import annotations

import argparse
import io
import itertools
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .backends import PATH_CONVENTION, decoherence, to_analytic
from .config import RunConfig, parse_config
from .errors import ConfigError, DephasingError
from .laplace_engine import DecoherenceSeries
from .molecule_model import l1_coherence, reduced_density_matrix

log = logging.getLogger("rtn_dephasing")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _fmt(x: float) -> str:
    return format(float(x) + 0.0, ".17g")


def decoherence_csv(series: DecoherenceSeries) -> str:
    buf = io.StringIO()
    header = ["t", "re_F", "im_F", "abs_F"]
    if series.stderr is not None:
        header += ["stderr_re", "stderr_im"]
    buf.write(",".join(header) + "\n")
    for k, (t, f) in enumerate(zip(series.times, series.values)):
        row = [t, f.real, f.imag, abs(f)]
        if series.stderr is not None:
            row += list(series.stderr[k])
        buf.write(",".join(_fmt(x) for x in row) + "\n")
    return buf.getvalue()


def coherence_csv(times, values) -> str:
    lines = ["t,C_l1"] + [f"{_fmt(t)},{_fmt(c)}" for t, c in zip(times, values)]
    return "\n".join(lines) + "\n"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def compute(cfg: RunConfig) -> dict:
    """``{backend: {pair: DecoherenceSeries}}`` on the configured grid."""
    times = cfg.grid.times
    options = dict(volterra_step=cfg.volterra_step, mc_n_traj=cfg.mc_n_traj, mc_seed=cfg.mc_seed)
    results: dict = {}
    for backend in cfg.backends:
        results[backend] = {}
        for pair in sorted(cfg.molecule.pair_params):
            params = cfg.molecule.pair_params[pair]
            try:
                results[backend][pair] = decoherence(backend, params, times, **options)
            except DephasingError as exc:
                raise DephasingError(f"backend {backend!r}, pair {pair}: {exc}") from exc
    return results


def coherence_values(cfg: RunConfig, per_pair: dict) -> np.ndarray:
    values = {p: to_analytic(s) for p, s in per_pair.items()}
    return np.array(
        [
            l1_coherence(reduced_density_matrix(cfg.molecule, t, {p: v[k] for p, v in values.items()}))
            for k, t in enumerate(cfg.grid.times)
        ]
    )


def run(cfg: RunConfig, output_dir: str | None = None) -> list[Path]:
    """Write one decoherence CSV per backend and pair (plus coherence files)."""
    out = Path(output_dir if output_dir is not None else cfg.output_dir)
    written = []
    for backend, per_pair in compute(cfg).items():
        for (n, m), series in per_pair.items():
            name = f"{cfg.prefix}_{backend}.csv" if cfg.shorthand else f"{cfg.prefix}_pair{n}-{m}_{backend}.csv"
            _write(out / name, decoherence_csv(series))
            written.append(out / name)
        if not cfg.shorthand:
            path = out / f"{cfg.prefix}_coherence_{backend}.csv"
            _write(path, coherence_csv(cfg.grid.times, coherence_values(cfg, per_pair)))
            written.append(path)
    return written


@dataclass
class Deviation:
    pair: tuple
    first: str
    second: str
    max_abs: float
    mean_abs: float
    max_sigma: float | None
    tolerance: float | None

    @property
    def ok(self) -> bool:
        if self.tolerance is None:
            return self.max_sigma is None or self.max_sigma <= 4.0
        return self.max_abs <= self.tolerance


def _sigma_units(a: DecoherenceSeries, b: DecoherenceSeries) -> float:
    err = np.zeros((a.times.size, 2))
    for s in (a, b):
        if s.stderr is not None:
            err = np.sqrt(err**2 + s.stderr**2)
    diff = to_analytic(a) - to_analytic(b)
    parts = np.stack([np.abs(diff.real), np.abs(diff.imag)], axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(err > 0, parts / np.where(err > 0, err, 1.0), np.where(parts > 0, np.inf, 0.0))
    return float(z.max())


def deviations(cfg: RunConfig, results: dict, tolerance: float | None = None) -> list[Deviation]:
    tol = cfg.tolerance if tolerance is None else tolerance
    rows = []
    for first, second in itertools.combinations(cfg.backends, 2):
        for pair in results[first]:
            a, b = results[first][pair], results[second][pair]
            diff = np.abs(to_analytic(a) - to_analytic(b))
            if "mc" in (first, second):
                limit, sigma = None, _sigma_units(a, b)
            else:
                limit = cfg.volterra_tolerance if "volterra" in (first, second) else tol
                sigma = None
            rows.append(Deviation(pair, first, second, float(diff.max()), float(diff.mean()), sigma, limit))
    return rows


def compare_report(rows: list[Deviation]) -> str:
    header = "pair,backend_a,backend_b,max_abs_dev,mean_abs_dev,max_dev_over_stderr,tolerance,status"
    lines = [header]
    for d in rows:
        lines.append(
            ",".join(
                [
                    f"{d.pair[0]}-{d.pair[1]}",
                    d.first,
                    d.second,
                    _fmt(d.max_abs),
                    _fmt(d.mean_abs),
                    "" if d.max_sigma is None else _fmt(d.max_sigma),
                    "" if d.tolerance is None else _fmt(d.tolerance),
                    ("ok" if d.ok else "EXCEEDED") + (" (diagnostic)" if d.tolerance is None else ""),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def compare(cfg: RunConfig, tolerance: float | None = None, output_dir: str | None = None) -> tuple[int, str]:
    """Cross-backend deviation report; status 1 if a non-MC pair exceeds its tolerance."""
    if len(cfg.backends) < 2:
        raise ConfigError("compare needs at least two backends", key="backends")
    rows = deviations(cfg, compute(cfg), tolerance)
    report = compare_report(rows)
    out = Path(output_dir if output_dir is not None else cfg.output_dir)
    _write(out / f"{cfg.prefix}_compare.csv", report)
    failed = any(not d.ok for d in rows if d.tolerance is not None)
    return (EXIT_FAIL if failed else EXIT_OK), report


def _load(path: str) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rtn-dephasing",
        description="Pure-dephasing dynamics under nonstationary, non-Markovian telegraph noise.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="evaluate the configured backends and write CSV files")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--output-dir")
    p_cmp = sub.add_parser("compare", help="pointwise deviations between every pair of backends")
    p_cmp.add_argument("--config", required=True)
    p_cmp.add_argument("--tolerance", type=float, help="limit for closed/rational/contour pairs")
    p_cmp.add_argument("--output-dir")
    p_val = sub.add_parser("validate", help="check a configuration without running it")
    p_val.add_argument("--config", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = _load(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "validate":
            kind = "single pair" if cfg.shorthand else f"{cfg.molecule.n_levels}-level molecule"
            print(f"ok: {kind}, {len(cfg.molecule.pair_params)} pair(s), backends {', '.join(cfg.backends)}")
            return EXIT_OK
        if args.command == "run":
            for path in run(cfg, args.output_dir):
                print(path)
            return EXIT_OK
        status, report = compare(cfg, args.tolerance, args.output_dir)
        sys.stdout.write(report)
        if status:
            print("tolerance exceeded", file=sys.stderr)
        return status
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DephasingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
