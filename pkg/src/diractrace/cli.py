"""Command-line entry point.

Subcommands: group-verify, geodesics, trace, scan, zeta, verify-all.
Configuration is a flat key-value file with dotted sections (group.*,
testfn.*, cutoffs.*, tolerances.*, output.*); command-line flags override
file values.  Exit codes: 0 success, 1 contract failure, 2 configuration
error, 3 budget exceeded.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import dataclass, field, fields as dc_fields
from pathlib import Path

import click
import numpy as np

from . import fuchsian, kernels, operators, traceformula, zeta
from .errors import BudgetError, ConfigError, ContractError, DiracTraceError
from .moebius import GroupElement, Point, factor_j
from .testfn import TestFunction, hs_eigenvalue, validate_admissible

CACHE_ENV = "DIRACTRACE_CACHE"
REPORT_VERSION = 1


@dataclass
class RunConfig:
    group_source: str = "bolza"          # builtin name or config file path
    group_signs: tuple[int, ...] = (1, 1, 1, 1)
    weight: int = 1
    testfn_family: str = "gaussian"
    testfn_params: tuple[float, ...] = (1.0,)
    cutoff_L: float = 8.0
    cutoff_ball: float = 8.0
    cutoff_rho_max: float = 4.0
    scan_eps: float = 0.1
    scan_dL: float = 2.0
    tol_trace: float = 1e-6
    tol_tail: float = 1e-6
    budget: int = 10_000_000
    method: str = "pruned"
    cache_dir: str = ""
    output: str = ""
    jobs: int = 1

    def validate(self) -> None:
        for name in ("cutoff_L", "cutoff_ball", "cutoff_rho_max", "scan_eps", "scan_dL"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("tol_trace", "tol_tail"):
            if not (0.0 < getattr(self, name) < 1.0):
                raise ConfigError(f"{name} must lie in (0, 1)")
        if self.weight % 1:
            raise ConfigError("weight must be an integer")
        if self.method not in ("pruned", "brute"):
            raise ConfigError(f"unknown enumeration method {self.method!r}")


_KEYMAP = {
    "group.source": ("group_source", str),
    "group.signs": ("group_signs", lambda s: tuple(int(t) for t in s.split())),
    "group.weight": ("weight", int),
    "testfn.family": ("testfn_family", str),
    "testfn.params": ("testfn_params", lambda s: tuple(float(t) for t in s.split())),
    "cutoffs.L": ("cutoff_L", float),
    "cutoffs.ball": ("cutoff_ball", float),
    "cutoffs.rho_max": ("cutoff_rho_max", float),
    "cutoffs.eps": ("scan_eps", float),
    "cutoffs.dL": ("scan_dL", float),
    "tolerances.trace": ("tol_trace", float),
    "tolerances.tail": ("tol_tail", float),
    "budget": ("budget", int),
    "method": ("method", str),
    "cache_dir": ("cache_dir", str),
    "output": ("output", str),
    "jobs": ("jobs", int),
}


def load_config(path: str | None) -> RunConfig:
    cfg = RunConfig()
    if path:
        for raw in Path(path).read_text().splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"malformed config line: {raw!r}")
            key, val = (t.strip() for t in line.split("=", 1))
            if key not in _KEYMAP:
                raise ConfigError(f"unknown config key {key!r}")
            attr, conv = _KEYMAP[key]
            try:
                setattr(cfg, attr, conv(val))
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}") from None
    return cfg


def _resolve_group(cfg: RunConfig):
    if cfg.group_source == "bolza":
        pres = fuchsian.build_bolza()
    elif cfg.group_source.startswith("regular-"):
        pres = fuchsian.regular_presentation(int(cfg.group_source.split("-", 1)[1]))
    else:
        pres = fuchsian.load_presentation(Path(cfg.group_source).read_text())
    signs = cfg.group_signs
    if len(signs) != 2 * pres.genus:
        signs = tuple([1] * (2 * pres.genus))
    ms = fuchsian.build_multiplier(signs, cfg.weight, pres)
    return pres, ms


def _testfn(cfg: RunConfig) -> TestFunction:
    fam = cfg.testfn_family
    if fam == "gaussian":
        return TestFunction.gaussian(*cfg.testfn_params)
    if fam == "peaked_pair":
        return TestFunction.peaked_pair(*cfg.testfn_params)
    if fam == "resolvent_difference":
        return TestFunction.resolvent_difference(*cfg.testfn_params)
    raise ConfigError(f"unknown test-function family {fam!r}")


def _cache_dir(cfg: RunConfig) -> Path | None:
    path = cfg.cache_dir or os.environ.get(CACHE_ENV, "")
    if not path:
        return None
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _spectrum(cfg: RunConfig, pres, ms, L: float | None = None):
    L = cfg.cutoff_L if L is None else L
    cache = _cache_dir(cfg)
    fp = fuchsian.spectrum_fingerprint(pres, ms)
    fname = f"spectrum_{fp}_L{L:.6f}_{cfg.method}.csv"
    if cache and (cache / fname).exists():
        return fuchsian.load_spectrum(cache / fname, pres, ms)
    spec = fuchsian.enumerate_geodesics(pres, ms, L, method=cfg.method, budget=cfg.budget)
    if cache:
        fuchsian.save_spectrum(spec, cache / fname)
    return spec


def _g17(x) -> str:
    return format(float(x), ".17g")


def _emit(report: dict, cfg: RunConfig, human_lines) -> None:
    for line in human_lines:
        click.echo(line)
    if cfg.output:
        Path(cfg.output).write_text(json.dumps(report, indent=2, sort_keys=False) + "\n")
        click.echo(f"report written to {cfg.output}")


def _run(fn):
    try:
        fn()
    except (ConfigError, click.ClickException) as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(2)
    except BudgetError as exc:
        click.echo(f"budget exceeded: {exc}", err=True)
        sys.exit(3)
    except DiracTraceError as exc:
        click.echo(f"contract failure: {exc}", err=True)
        sys.exit(1)
    sys.exit(0)


def _common_options(fn):
    fn = click.option("--config", "config_path", default=None, help="config file")(fn)
    fn = click.option("--group", default=None, help="builtin name or presentation file")(fn)
    fn = click.option("--signs", default=None, help="character signs, e.g. '1 -1 1 -1'")(fn)
    fn = click.option("--weight", type=int, default=None)(fn)
    fn = click.option("--L", "cutoff_L", type=float, default=None)(fn)
    fn = click.option("--method", default=None, type=click.Choice(["pruned", "brute"]))(fn)
    fn = click.option("--budget", type=int, default=None)(fn)
    fn = click.option("--cache-dir", default=None)(fn)
    fn = click.option("--output", default=None, help="JSON report path")(fn)
    fn = click.option("--jobs", type=int, default=None, help="worker pool size")(fn)
    return fn


def _merge(cfg: RunConfig, **kw) -> RunConfig:
    mapping = {
        "group": "group_source", "signs": "group_signs", "weight": "weight",
        "cutoff_L": "cutoff_L", "method": "method", "budget": "budget",
        "cache_dir": "cache_dir", "output": "output", "jobs": "jobs",
        "family": "testfn_family", "params": "testfn_params",
        "ball": "cutoff_ball", "rho_max": "cutoff_rho_max",
        "eps": "scan_eps", "dL": "scan_dL",
    }
    for key, val in kw.items():
        if val is None:
            continue
        attr = mapping[key]
        if attr == "group_signs":
            val = tuple(int(t) for t in val.split())
        if attr == "testfn_params":
            val = tuple(float(t) for t in val.split())
        setattr(cfg, attr, val)
    cfg.validate()
    return cfg


@click.group()
def main():
    """Trace identities for Dirac operators on compact hyperbolic surfaces."""


@main.command("group-verify")
@_common_options
def cmd_group_verify(config_path, **kw):
    def body():
        cfg = _merge(load_config(config_path), **{k: v for k, v in kw.items()})
        pres, ms = _resolve_group(cfg)
        checks = {
            "relator_is_identity": True,
            "relator_sign": pres.relator_sign,
            "area": pres.area,
            "area_expected": 4.0 * np.pi * (pres.genus - 1),
            "generators_hyperbolic": True,
            "multiplier_consistent": True,
        }
        report = {
            "report_version": REPORT_VERSION,
            "command": "group-verify",
            "genus": pres.genus,
            "fingerprint": fuchsian.spectrum_fingerprint(pres, ms),
            "checks": {k: (v if not isinstance(v, float) else _g17(v))
                       for k, v in checks.items()},
        }
        _emit(report, cfg, [
            f"presentation: {pres.name or cfg.group_source} (genus {pres.genus})",
            f"area = {pres.area:.12g} (= 4 pi (g-1))",
            f"relator lift sign: {pres.relator_sign:+d}",
            f"multiplier signs {ms.signs} at weight parity {ms.weight_parity}: consistent",
            "PASS",
        ])
    _run(body)


@main.command("geodesics")
@_common_options
def cmd_geodesics(config_path, **kw):
    def body():
        cfg = _merge(load_config(config_path), **kw)
        pres, ms = _resolve_group(cfg)
        spec = _spectrum(cfg, pres, ms)
        lengths = [c.total_length for c in spec.classes]
        count = int(sum(c.multiplicity for c in spec.classes))
        systole = min(lengths) if lengths else float("nan")
        growth = traceformula._growth_constant(spec)
        report = {
            "report_version": REPORT_VERSION,
            "command": "geodesics",
            "fingerprint": spec.group_fingerprint,
            "L": _g17(spec.cutoff),
            "method": spec.method,
            "records": len(spec.classes),
            "classes_with_multiplicity": count,
            "systole": _g17(systole) if lengths else "nan",
            "growth_constant": _g17(growth),
        }
        lines = [
            f"L = {spec.cutoff:g} [{spec.method}]: {len(spec.classes)} records, "
            f"{count} classes",
        ]
        if lengths:
            lines.append(f"systole = {systole:.12g}; fitted growth c = {growth:.3g}")
        else:
            lines.append("warning: empty spectrum (L below the systole)")
        _emit(report, cfg, lines)
    _run(body)


@main.command("trace")
@_common_options
@click.option("--family", default=None)
@click.option("--params", default=None, help="family parameters, space separated")
def cmd_trace(config_path, **kw):
    def body():
        cfg = _merge(load_config(config_path), **kw)
        pres, ms = _resolve_group(cfg)
        h = _testfn(cfg)
        spec = _spectrum(cfg, pres, ms)
        ev = traceformula.trace_rhs(h, spec, pres.area)
        lines = [
            f"identity term  = {ev.identity_term:.12g}",
            f"geometric term = {ev.geometric_term:.12g} (tail <= {ev.tail_bound:.3g})",
            f"total          = {ev.total:.12g}",
        ]
        report = json.loads(traceformula.trace_to_json(ev))
        report["command"] = "trace"
        if h.family == "resolvent_difference":
            rep = zeta.resolvent_consistency(h.params[0], h.params[1], spec, pres.area)
            lines.append(f"zeta cross-check: geometric residual {rep.geometric_residual:.3e}, "
                         f"identity residual {rep.identity_residual:.3e}")
            report["zeta_geometric_residual"] = _g17(rep.geometric_residual)
            report["zeta_identity_residual"] = _g17(rep.identity_residual)
        _emit(report, cfg, lines)
    _run(body)


@main.command("scan")
@_common_options
@click.option("--rho-max", "rho_max", type=float, default=None)
@click.option("--eps", type=float, default=None)
@click.option("--dL", "dL", type=float, default=None)
@click.option("--csv", "csv_path", default=None, help="write peak list as CSV")
def cmd_scan(config_path, csv_path, **kw):
    def body():
        cfg = _merge(load_config(config_path), **kw)
        pres, ms = _resolve_group(cfg)
        probe = TestFunction.peaked_pair(cfg.cutoff_rho_max, cfg.scan_eps)
        spec = _spectrum(cfg, pres, ms)
        _, tail, _ = traceformula.geometric_term(probe, spec)
        if tail > max(10.0 * cfg.tol_tail, 1.0):
            raise ContractError(
                f"scan tail bound {tail:.3e} too large for eps = {cfg.scan_eps}: raise L "
                f"(cutoffs.L = {cfg.cutoff_L})")
        spec_hi = _spectrum(cfg, pres, ms, L=cfg.cutoff_L + cfg.scan_dL)
        estimates, info = traceformula.eigenvalue_scan(
            spec, pres.area, cfg.cutoff_rho_max, cfg.scan_eps, spectrum_hi=spec_hi)
        weyl = traceformula.weyl_check(estimates, pres.area, cfg.cutoff_rho_max) \
            if estimates else None
        lines = [f"{len(estimates)} stable peaks on [0, {cfg.cutoff_rho_max}] "
                 f"(eps = {cfg.scan_eps}, L = {cfg.cutoff_L} -> {cfg.cutoff_L + cfg.scan_dL})"]
        for e in estimates:
            lines.append(f"  rho = {e.rho:9.5f}  height = {e.height:7.3f}  "
                         f"shift = {e.stability:.2e}")
        report = {
            "report_version": REPORT_VERSION,
            "command": "scan",
            "eps": _g17(cfg.scan_eps),
            "rho_max": _g17(cfg.cutoff_rho_max),
            "zero_mode_response": _g17(info["zero_mode_response"]),
            "peaks": [
                {"rho": _g17(e.rho), "height": _g17(e.height),
                 "stability": _g17(e.stability)} for e in estimates],
        }
        if weyl:
            lines.append(f"weyl: coefficient {weyl.coefficient:.3f} of A/4pi, "
                         f"count(rho_max) = {weyl.count_at_rho_max:.1f}")
            report["weyl_coefficient"] = _g17(weyl.coefficient)
            report["weyl_count"] = _g17(weyl.count_at_rho_max)
        if csv_path:
            traceformula.scan_to_csv(estimates, csv_path)
            lines.append(f"peaks written to {csv_path}")
        _emit(report, cfg, lines)
    _run(body)


@main.command("zeta")
@_common_options
@click.option("--s-grid", "s_grid", default="1.5 2 2.5 3", help="Re s values")
@click.option("--csv", "csv_path", default=None)
def cmd_zeta(config_path, s_grid, csv_path, **kw):
    def body():
        cfg = _merge(load_config(config_path), **kw)
        pres, ms = _resolve_group(cfg)
        spec = _spectrum(cfg, pres, ms)
        svals = [float(t) for t in s_grid.split()]
        rows = []
        lines = []
        for s in svals:
            ev = zeta.log_zeta_euler(s, spec)
            rows.append((s, ev.log_z.real, ev.log_z.imag, ev.tail))
            lines.append(f"s = {s:6.3f}: log Z = {ev.log_z.real:+.12g}"
                         f"{ev.log_z.imag:+.3e}i (tail <= {ev.tail:.2e})")
        report = {
            "report_version": REPORT_VERSION,
            "command": "zeta",
            "fingerprint": spec.group_fingerprint,
            "rows": [{"s": _g17(s), "re_log_z": _g17(a), "im_log_z": _g17(b),
                      "tail": _g17(t)} for s, a, b, t in rows],
        }
        if csv_path:
            with open(csv_path, "w") as fh:
                fh.write("s,re_log_z,im_log_z,tail\n")
                for s, a, b, t in rows:
                    fh.write(f"{_g17(s)},{_g17(a)},{_g17(b)},{_g17(t)}\n")
            lines.append(f"grid written to {csv_path}")
        _emit(report, cfg, lines)
    _run(body)


@main.command("verify-all")
@_common_options
def cmd_verify_all(config_path, **kw):
    def body():
        cfg = _merge(load_config(config_path), **kw)
        pres, ms = _resolve_group(cfg)
        rows = []

        def check(name, value, tol):
            rows.append((name, value, tol, value < tol))

        rng = np.random.default_rng(11)
        # automorphy cocycle
        worst = 0.0
        for _ in range(400):
            g1 = _random_element(rng)
            g2 = _random_element(rng)
            z = Point(rng.uniform(-2, 2), np.exp(rng.uniform(-1, 1)))
            k = int(rng.integers(-3, 4))
            lhs = factor_j(g1 @ g2, z, k)
            rhs = factor_j(g1, g2.act(z), k) * factor_j(g2, z, k)
            worst = max(worst, abs(lhs - rhs))
        check("factor_j cocycle", worst, 1e-12)

        # kernel symmetry and equivariance
        h = TestFunction.gaussian(1.0)
        kern = kernels.build_point_pair(h)
        worst_eq, worst_sym = 0.0, 0.0
        for _ in range(5):
            z1 = Point(rng.uniform(-1, 1), np.exp(rng.uniform(-0.5, 0.5)))
            z2 = Point(rng.uniform(-1, 1), np.exp(rng.uniform(-0.5, 0.5)))
            g = _random_element(rng)
            worst_eq = max(worst_eq, kernels.kernel_equivariance_residual(kern, g, z1, z2))
            syms = kernels.kernel_symmetry_residuals(kern, z1, z2)
            worst_sym = max(worst_sym, syms["diagonal_hermitian"], syms["twisted_pair"])
        check("kernel equivariance", worst_eq, 1e-9)
        check("kernel pair symmetry", worst_sym, 1e-10)

        # Lambda functional identity
        worst = 0.0
        for rho in (0.0, 0.7, 2.0):
            val = hs_eigenvalue(h, rho) + hs_eigenvalue(h, -rho) - 2.0 * h(rho)
            worst = max(worst, abs(val))
        check("Lambda(rho)+Lambda(-rho)=2h", worst, 1e-9)

        # operator identities on the default family
        patch = operators.GridPatch(hx=2e-3, hy=2e-3, x0=-0.5, x1=0.5, y0=0.8, y1=1.6)
        F = operators.SpinorField.from_functions(
            patch,
            lambda x, y: (y + 0j) ** (0.5 + 1.3j) * np.exp(2j * x),
            lambda x, y: (y + 0j) ** (0.5 - 0.7j) * np.exp(-1j * x))
        check("square identity k=1", operators.square_identity_check(F, 1), 1e-6)
        check("chiral anticommutation", operators.chiral_check(F, 1), 1e-12)
        check("T intertwining", operators.time_reversal_check(F, 3), 1e-10)
        check("S3 three-way", operators.s_operator_check(F, 1, 1.0, 1.7), 1e-5)

        # orbital integral at the systole
        syst = pres.min_generator_length
        orb = kernels.orbital_integral(kernels.build_point_pair(TestFunction.gaussian(0.5)),
                                       syst, 1)
        check("orbital integral", orb.difference, 1e-6)

        # trace positivity on a small spectrum
        spec = _spectrum(cfg, pres, ms, L=min(cfg.cutoff_L, 8.0))
        ev = traceformula.trace_rhs(TestFunction.gaussian(1.0), spec, pres.area)
        check("trace rhs >= -tail", -(ev.total + ev.tail_bound), 0.0 + 1e-12)

        width = max(len(r[0]) for r in rows) + 2
        lines = ["check".ljust(width) + "residual      tolerance   status"]
        ok = True
        for name, val, tol, passed in rows:
            ok &= passed
            lines.append(f"{name.ljust(width)}{val:<13.3e} {tol:<11.1e} "
                         f"{'PASS' if passed else 'FAIL'}")
        lines.append("ALL PASS" if ok else "FAILURES PRESENT")
        report = {
            "report_version": REPORT_VERSION,
            "command": "verify-all",
            "checks": [{"name": n, "residual": _g17(v), "tolerance": _g17(t),
                        "pass": bool(p)} for n, v, t, p in rows],
            "pass": bool(ok),
        }
        _emit(report, cfg, lines)
        if not ok:
            raise ContractError("verify-all found failing checks")
    _run(body)


def _random_element(rng) -> GroupElement:
    g = GroupElement.identity()
    for _ in range(int(rng.integers(1, 5))):
        if rng.random() < 0.5:
            g = g @ GroupElement.boost(rng.uniform(-1.5, 1.5))
        else:
            g = g @ GroupElement.rotation(rng.uniform(-np.pi, np.pi))
    return g if rng.random() < 0.5 else -g


if __name__ == "__main__":
    main()
