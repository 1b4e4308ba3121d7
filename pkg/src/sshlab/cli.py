"""Command-line front end: experiment orchestration and CSV/JSON output.

Each experiment writes a data file whose `#` header embeds the resolved
scientific configuration as JSON, plus a `.meta.json` sidecar with run
provenance (wall time, thread count, version).  Scheduling knobs (threads,
output path) live only in the sidecar so reruns with a different thread
count stay byte-identical in the data section.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__, analytic, born, ensemble, invariant, model, spectrum

__all__ = ["RunConfig", "load_config_file", "main"]

EXPERIMENTS = (
    "invariant",
    "mean-nu",
    "phase-diagram",
    "edge-modes",
    "gap-scan",
    "born",
    "selftest",
)


@dataclass(frozen=True)
class RunConfig:
    """Resolved configuration of one experiment run."""

    experiment: str
    n: int = 100
    u: float = 1.0
    w: float = 0.95
    bc: str = "open"
    gamma_grid: tuple[float, ...] = ()
    w_grid: tuple[float, ...] = ()
    realizations: int = 100
    master_seed: int = 1
    m_phi: int = 64
    alpha: float = 1e-6
    out: str = ""
    format: str = "csv"
    threads: int = 0

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.bc not in ("open", "periodic"):
            raise ValueError("bc must be 'open' or 'periodic'")
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")
        if self.format not in ("csv", "json"):
            raise ValueError("format must be 'csv' or 'json'")
        if self.threads < 0:
            raise ValueError("threads must be >= 0")
        for name, grid in (("gamma_grid", self.gamma_grid), ("w_grid", self.w_grid)):
            if grid and any(b <= a for a, b in zip(grid, grid[1:])):
                raise ValueError(f"{name} must be strictly increasing")
        needs_gamma = self.experiment in (
            "invariant",
            "mean-nu",
            "phase-diagram",
            "edge-modes",
            "gap-scan",
            "born",
        )
        if needs_gamma and not self.gamma_grid:
            raise ValueError("gamma_grid must be non-empty")
        if self.experiment in ("phase-diagram", "born") and not self.w_grid:
            raise ValueError(f"{self.experiment} needs a w_grid")

    def chain_params(self) -> model.ChainParams:
        bc = (
            model.BoundaryCondition.OPEN
            if self.bc == "open"
            else model.BoundaryCondition.PERIODIC
        )
        return model.ChainParams(n=self.n, u=self.u, w=self.w, bc=bc)

    def data_dict(self) -> dict:
        """Scientific config embedded in the data section (no scheduling knobs)."""
        d = asdict(self)
        d.pop("out")
        d.pop("threads")
        d["gamma_grid"] = list(self.gamma_grid)
        d["w_grid"] = list(self.w_grid)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        for key in ("gamma_grid", "w_grid"):
            if key in d:
                d[key] = tuple(float(x) for x in d[key])
        return cls(**d)


_DEFAULT_GRIDS = {
    # figure-style defaults per experiment
    "invariant": dict(gamma_grid=tuple(np.linspace(0.0, 1.5, 16))),
    "mean-nu": dict(
        n=100, w=0.95, realizations=15000, gamma_grid=tuple(np.linspace(0.0, 1.5, 30))
    ),
    "phase-diagram": dict(
        n=300,
        bc="periodic",
        gamma_grid=tuple(np.linspace(0.0, 1.5, 16)),
        w_grid=tuple(np.linspace(0.5, 1.1, 13)),
    ),
    "edge-modes": dict(
        n=100, w=0.95, realizations=100, gamma_grid=tuple(np.linspace(0.0, 1.8, 10))
    ),
    "gap-scan": dict(
        n=300,
        w=0.8,
        bc="periodic",
        realizations=100,
        gamma_grid=tuple(np.linspace(0.0, 0.8, 17)),
    ),
    "born": dict(
        gamma_grid=tuple(np.linspace(0.05, 1.0, 20)),
        w_grid=(0.8, 0.9, 0.95, 0.99),
        alpha=1e-6,
    ),
    "selftest": dict(gamma_grid=(0.0,)),
}


def default_config(experiment: str) -> RunConfig:
    if experiment not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {experiment!r}")
    return RunConfig(experiment=experiment, **_DEFAULT_GRIDS[experiment])


# ----------------------------------------------------------------------
# config file parsing: flat key = value lines


_GRID_KEYS = ("gamma_grid", "w_grid")
_INT_KEYS = ("n", "realizations", "master_seed", "m_phi", "threads")
_FLOAT_KEYS = ("u", "w", "alpha")
_STR_KEYS = ("experiment", "bc", "out", "format")


def _parse_grid(text: str) -> tuple[float, ...]:
    """Comma list '0.1,0.2' or linspace shorthand 'start:stop:count'."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid shorthand must be start:stop:count, got {text!r}")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            raise ValueError("grid count must be >= 1")
        return tuple(np.linspace(start, stop, count))
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def parse_config_entries(entries: dict[str, str]) -> dict:
    out: dict = {}
    for key, raw in entries.items():
        if key in _GRID_KEYS:
            out[key] = _parse_grid(raw)
        elif key in _INT_KEYS:
            out[key] = int(raw)
        elif key in _FLOAT_KEYS:
            out[key] = float(raw)
        elif key in _STR_KEYS:
            out[key] = raw.strip()
        else:
            raise ValueError(f"unknown config key {key!r}")
    return out


def load_config_file(path: str | Path) -> dict:
    """Read flat `key = value` lines; '#' starts a comment."""
    entries: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        entries[key.strip()] = value.strip()
    return parse_config_entries(entries)


# ----------------------------------------------------------------------
# output writers


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return "%.17g" % x


def _data_bytes(cfg: RunConfig, columns: list[str], rows: list[list]) -> bytes:
    header = json.dumps(cfg.data_dict(), sort_keys=True)
    if cfg.format == "csv":
        lines = [
            f"# config: {header}",
            f"# version: sshlab {__version__}",
            "# columns: " + ",".join(columns),
        ]
        lines += [",".join(_fmt(x) for x in row) for row in rows]
        return ("\n".join(lines) + "\n").encode()
    doc = {
        "config": json.loads(header),
        "version": f"sshlab {__version__}",
        "columns": columns,
        "data": [[_fmt(x) for x in row] for row in rows],
    }
    return (json.dumps(doc, sort_keys=True, indent=1) + "\n").encode()


def _write_outputs(cfg: RunConfig, columns, rows, wall_time: float) -> Path:
    out = Path(cfg.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(_data_bytes(cfg, columns, rows))
    sidecar = {
        "config": cfg.data_dict(),
        "out": str(out),
        "threads": cfg.threads,
        "version": f"sshlab {__version__}",
        "wall_time_s": wall_time,
    }
    out.with_suffix(out.suffix + ".meta.json").write_text(
        json.dumps(sidecar, sort_keys=True, indent=1) + "\n"
    )
    return out


def read_embedded_config(path: str | Path) -> RunConfig:
    """Recover the RunConfig embedded in a data file header."""
    text = Path(path).read_text()
    if text.startswith("# config: "):
        payload = text.splitlines()[0][len("# config: ") :]
        return RunConfig.from_dict(json.loads(payload))
    return RunConfig.from_dict(json.loads(text)["config"])


# ----------------------------------------------------------------------
# experiments


def run_invariant(cfg: RunConfig) -> tuple[list[str], list[list]]:
    """Both index routes for one sampled realization per gamma point."""
    params = cfg.chain_params()
    rows = []
    for gi, gamma in enumerate(cfg.gamma_grid):
        dist = ensemble.FlatDistribution(gamma=gamma, u=cfg.u)
        real = ensemble.sample_realization(dist, cfg.n, cfg.master_seed, gi)
        wind = invariant.winding_integral(real, cfg.w, m_phi=cfg.m_phi)
        nu_cf = invariant.winding_closed_form(real, params)
        log_xi = invariant.xi_value(real, params).log_xi
        rows.append(
            [gamma, wind.nu, nu_cf, log_xi, wind.phase_samples, wind.total_phase]
        )
    columns = ["gamma", "nu_winding", "nu_closed_form", "log_xi", "phase_samples", "total_phase"]
    return columns, rows


def run_mean_nu_curve(cfg: RunConfig) -> tuple[list[str], list[list]]:
    """Monte Carlo <nu>(gamma) next to the analytic curve."""
    params = cfg.chain_params()
    rows = []
    for gi, gamma in enumerate(cfg.gamma_grid):
        dist = ensemble.FlatDistribution(gamma=gamma, u=cfg.u)
        est = ensemble.estimate_mean_nu(
            params,
            dist,
            cfg.realizations,
            _derived_seed(cfg.master_seed, gi),
            threads=cfg.threads,
        )
        an = analytic.mean_nu_analytic(cfg.n, cfg.u, cfg.w, gamma)
        rows.append([gamma, est.value, est.stderr, an, est.n_excluded])
    return ["gamma", "mc_mean_nu", "mc_stderr", "analytic_mean_nu", "n_excluded"], rows


def run_phase_diagram(cfg: RunConfig) -> tuple[list[str], list[list]]:
    """Gap and index of one fixed-seed realization per (gamma, w) grid point."""
    rows = []
    for gi, gamma in enumerate(cfg.gamma_grid):
        dist = ensemble.FlatDistribution(gamma=gamma, u=cfg.u)
        w0 = analytic.critical_w(cfg.u, gamma)
        arg = 1.0 - gamma**2 / (2.0 * cfg.u**2)
        w0_weak = cfg.u * math.sqrt(arg) if arg >= 0.0 else math.nan
        for wi, w in enumerate(cfg.w_grid):
            index = gi * len(cfg.w_grid) + wi
            real = ensemble.sample_realization(dist, cfg.n, cfg.master_seed, index)
            params = model.ChainParams(
                n=cfg.n,
                u=cfg.u,
                w=w,
                bc=model.BoundaryCondition.PERIODIC
                if cfg.bc == "periodic"
                else model.BoundaryCondition.OPEN,
            )
            m = model.build_chain(params, real)
            spectral = (
                spectrum.eigenvalues_tridiagonal(m)
                if m.is_tridiagonal
                else spectrum.eigenvalues_dense(m)
            )
            try:
                nu = invariant.winding_closed_form(real, params)
            except invariant.CriticalRealizationError:
                nu = math.nan  # grid point sits exactly on the boundary
            log_gap = (
                math.log(spectral.gap / (2.0 * abs(cfg.u)))
                if spectral.gap > 0.0
                else -math.inf
            )
            rows.append([gamma, w, log_gap, nu, w0, w0_weak])
    return ["gamma", "w", "log_gap_ratio", "nu", "w0_analytic", "w0_weak"], rows


def run_edge_modes(cfg: RunConfig) -> tuple[list[str], list[list]]:
    """Averaged midgap weight per dimer along a disorder sweep."""
    if cfg.bc != "open":
        raise ValueError("edge-modes experiment requires open boundaries")
    params = cfg.chain_params()
    rows = []
    for gi, gamma in enumerate(cfg.gamma_grid):
        dist = ensemble.FlatDistribution(gamma=gamma, u=cfg.u)
        seed = _derived_seed(cfg.master_seed, gi)
        prof = ensemble.estimate_wavefunction_profile(
            params, dist, cfg.realizations, seed, threads=cfg.threads
        )
        nu = ensemble.estimate_mean_nu(
            params, dist, max(cfg.realizations, 2), seed, threads=cfg.threads
        )
        rows.append([gamma, nu.value, nu.stderr, *np.asarray(prof.value)])
    columns = ["gamma", "mean_nu", "nu_stderr"] + [
        f"psi2_{i + 1:03d}" for i in range(cfg.n)
    ]
    return columns, rows


def run_gap_scan(cfg: RunConfig) -> tuple[list[str], list[list]]:
    """Averaged gap and index along a disorder sweep."""
    params = cfg.chain_params()
    rows = []
    for gi, gamma in enumerate(cfg.gamma_grid):
        dist = ensemble.FlatDistribution(gamma=gamma, u=cfg.u)
        seed = _derived_seed(cfg.master_seed, gi)
        gap = ensemble.estimate_mean_gap(
            params, dist, cfg.realizations, seed, threads=cfg.threads
        )
        nu = ensemble.estimate_mean_nu(
            params, dist, max(cfg.realizations, 2), seed, threads=cfg.threads
        )
        rows.append([gamma, gap.value, gap.stderr, nu.value])
    return ["gamma", "mean_gap", "gap_stderr", "mc_mean_nu"], rows


def run_born(cfg: RunConfig) -> tuple[list[str], list[list]]:
    """Self-energy scalars and midgap DOS on a (delta, gamma) grid."""
    rows = []
    alpha = cfg.alpha * abs(cfg.u)
    for w in cfg.w_grid:
        delta = cfg.u - w
        for gamma in cfg.gamma_grid:
            p = born.BornParams(u=cfg.u, w=w, gamma=gamma, alpha=alpha, omega=0.0)
            fq = born.f_quadrature(p)
            gq = born.g_quadrature(p)
            if delta >= 0.0:
                fnp = born.f_narrow_peak(delta, cfg.u, alpha)
                gnp = born.g_narrow_peak(delta, cfg.u, alpha)
            else:
                fnp = gnp = complex(math.nan, math.nan)
            rho0 = (
                born.midgap_dos(delta, cfg.u, gamma, alpha)
                if delta > 0.0
                else math.nan
            )
            rows.append(
                [
                    delta,
                    gamma,
                    alpha,
                    fq.real,
                    fq.imag,
                    gq.real,
                    gq.imag,
                    fnp.real,
                    fnp.imag,
                    gnp.real,
                    gnp.imag,
                    rho0,
                ]
            )
    columns = [
        "delta",
        "gamma",
        "alpha",
        "f_quad_re",
        "f_quad_im",
        "g_quad_re",
        "g_quad_im",
        "f_np_re",
        "f_np_im",
        "g_np_re",
        "g_np_im",
        "rho0",
    ]
    return columns, rows


def _derived_seed(master_seed: int, stage: int) -> int:
    # keep per-gamma realization streams disjoint without overlapping indices
    return (master_seed * 1_000_003 + stage) & ((1 << 64) - 1)


def run_selftest() -> int:
    """Fast internal consistency checks; returns a process exit code."""
    checks: list[tuple[str, bool]] = []

    clean = model.Realization(couplings=np.full(10, 1.0))
    params_top = model.ChainParams(n=10, u=1.0, w=2.0)
    params_triv = model.ChainParams(n=10, u=2.0, w=1.0)
    clean2 = model.Realization(couplings=np.full(10, 2.0))
    checks.append(
        (
            "clean winding",
            invariant.winding_integral(clean, 2.0).nu == 1
            and invariant.winding_integral(clean2, 1.0).nu == 0,
        )
    )
    checks.append(
        (
            "clean closed form",
            invariant.winding_closed_form(clean, params_top) == 1
            and invariant.winding_closed_form(clean2, params_triv) == 0,
        )
    )
    checks.append(
        (
            "clean zak",
            invariant.zak_phase_clean(1.0, 2.0) == 1
            and invariant.zak_phase_clean(2.0, 1.0) == 0,
        )
    )
    h = model.build_flux_matrix(clean, 0.7, 0.3)
    checks.append(
        (
            "determinant routes",
            abs(h.determinant("closed_form") - h.determinant("lu")) < 1e-12,
        )
    )
    rng = np.random.default_rng(5)
    real = model.Realization(couplings=rng.uniform(0.5, 1.5, 8))
    m = model.build_chain(model.ChainParams(n=8, u=1.0, w=0.8), real)
    res = spectrum.eigenvalues_tridiagonal(m)
    ev = res.eigenvalues
    checks.append(
        (
            "chiral pairing",
            float(np.max(np.abs(ev + ev[::-1]))) < 1e-10 * float(np.max(np.abs(ev))),
        )
    )
    checks.append(
        (
            "trace identity",
            abs(float(np.sum(ev**2)) - m.trace_h2()) < 1e-10 * m.trace_h2(),
        )
    )
    checks.append(("erf", abs(analytic.erf(1.0) - 0.8427007929497149) < 1e-12))
    checks.append(
        (
            "critical gamma routes",
            born.band_touch_gamma(1.0, 0.8) == analytic.critical_gamma_weak(1.0, 0.8),
        )
    )

    ok = True
    for name, passed in checks:
        print(f"{'ok' if passed else 'FAIL'}  {name}")
        ok = ok and passed
    return 0 if ok else 1


_RUNNERS = {
    "invariant": run_invariant,
    "mean-nu": run_mean_nu_curve,
    "phase-diagram": run_phase_diagram,
    "edge-modes": run_edge_modes,
    "gap-scan": run_gap_scan,
    "born": run_born,
}


def run_experiment(cfg: RunConfig) -> Path:
    """Validate, run and persist one experiment; returns the data path."""
    cfg.validate()
    if not cfg.out:
        cfg = replace(cfg, out=f"{cfg.experiment}.{'csv' if cfg.format == 'csv' else 'json'}")
    start = time.perf_counter()
    columns, rows = _RUNNERS[cfg.experiment](cfg)
    return _write_outputs(cfg, columns, rows, wall_time=time.perf_counter() - start)


# ----------------------------------------------------------------------
# argument parsing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sshlab",
        description="Disordered dimerized-chain experiments (index statistics, "
        "gap scans, edge modes, Born self-energies).",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        if name == "selftest":
            continue
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--seed", type=int, dest="master_seed", help="master RNG seed")
        p.add_argument("--realizations", type=int, help="ensemble size")
        p.add_argument("--out", help="output data path")
        p.add_argument("--format", choices=("csv", "json"), help="data format")
        p.add_argument(
            "--threads",
            type=int,
            help="worker threads (0 = auto); never affects numerical output",
        )
        p.add_argument("--n", type=int, help="dimer count")
        p.add_argument("--u", type=float, help="mean intra-dimer coupling")
        p.add_argument("--w", type=float, help="inter-dimer coupling")
        p.add_argument("--bc", choices=("open", "periodic"), help="boundary condition")
        p.add_argument("--gamma-grid", dest="gamma_grid", help="comma list or start:stop:count")
        p.add_argument("--w-grid", dest="w_grid", help="comma list or start:stop:count")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.experiment == "selftest":
        return run_selftest()
    try:
        overrides: dict = {}
        if args.config:
            overrides.update(load_config_file(args.config))
        for key in (
            "master_seed",
            "realizations",
            "out",
            "format",
            "threads",
            "n",
            "u",
            "w",
            "bc",
        ):
            val = getattr(args, key)
            if val is not None:
                overrides[key] = val
        for key in ("gamma_grid", "w_grid"):
            val = getattr(args, key)
            if val is not None:
                overrides[key] = _parse_grid(val)
        overrides.pop("experiment", None)
        cfg = replace(default_config(args.experiment), **overrides)
        path = run_experiment(cfg)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
